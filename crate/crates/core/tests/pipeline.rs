use dpscale::fpbits::{Polarity, PrecisionFormat};
use dpscale::kernels::{SyntheticAdditive, Workload, WorkloadInput};
use dpscale::policy::{plan_dps, plan_dps_plus, OmissionSchedule};
use dpscale::profiler::{profile, AccLossMatrices, ProfileOptions};
use dpscale::report::{golden_run, replay, RunSettings, WorkloadId};

fn id(name: &str) -> WorkloadId {
    WorkloadId {
        name: name.into(),
        input: "default".into(),
        seed: 7,
        format: PrecisionFormat::Single,
    }
}

fn only(s: &OmissionSchedule, call: usize) -> OmissionSchedule {
    let mut out = s.clone();
    out.omitted = (0..s.len()).map(|j| if j == call { s.omitted[j] } else { 0 }).collect();
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn synthetic_loss_is_additive_across_calls_and_bits() {
    let k = SyntheticAdditive::generate(6, 5, 7);
    let settings = RunSettings::default();
    let golden = golden_run(&k, PrecisionFormat::Single, &settings).unwrap();
    let m = profile(&k, PrecisionFormat::Single, ProfileOptions::default()).unwrap().matrices;
    let id = id("synthetic_additive");

    for target in [0.01, 0.05, 0.1] {
        let s = plan_dps(&m, target).unwrap();
        let total = replay(&k, &id, &golden, &s, &settings).unwrap().accuracy.mre;
        let mut sum = 0.0;
        for i in 0..s.len() {
            let alone = replay(&k, &id, &golden, &only(&s, i), &settings).unwrap().accuracy.mre;
            // clearing low bits removes exactly the set bits, each of which
            // was measured on its own by the stuck-at-0 campaign
            let predicted: f64 = (0..s.omitted[i])
                .map(|b| m.get(Polarity::StuckAt0, i, b).loss().unwrap())
                .sum();
            assert!(close(alone, predicted), "call {i}: {alone} vs {predicted}");
            assert!(alone < target);
            sum += alone;
        }
        assert!(close(total, sum), "{total} vs {sum}");
    }
}

#[test]
fn single_call_additive_workload_meets_target() {
    let k = SyntheticAdditive::generate(1, 16, 3);
    let settings = RunSettings::default();
    let golden = golden_run(&k, PrecisionFormat::Single, &settings).unwrap();
    let m = profile(&k, PrecisionFormat::Single, ProfileOptions::default()).unwrap().matrices;
    for target in [0.001, 0.01, 0.05, 0.1, 0.2] {
        let s = plan_dps(&m, target).unwrap();
        let r = replay(&k, &id("synthetic_additive"), &golden, &s, &settings).unwrap();
        assert!(r.accuracy.mre < target, "{target}: {}", r.accuracy.mre);
    }
}

#[test]
fn matrices_survive_the_file_round_trip() {
    let w = Workload::build("hotspot", &WorkloadInput::Generated, 2).unwrap();
    let opts = ProfileOptions { num_bits: Some(6), parallel: true };
    let m = profile(&w, PrecisionFormat::Single, opts).unwrap().matrices;
    assert_eq!(m.num_bits(), 6);
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("hs.v1");
    let (p0, p1) = m.write_files(&prefix).unwrap();
    assert!(p0.ends_with("hs.v1.s0.csv") && p1.ends_with("hs.v1.s1.csv"));
    let back = AccLossMatrices::read_files(&prefix).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.fingerprint(), m.fingerprint());
    assert_eq!(plan_dps_plus(&back, 0.1).unwrap(), plan_dps_plus(&m, 0.1).unwrap());
}

#[test]
fn end_to_end_is_reproducible() {
    let run = || {
        let w = Workload::build("particlefilter_lite", &WorkloadInput::Generated, 5).unwrap();
        let settings = RunSettings::default();
        let m = profile(&w, PrecisionFormat::Single, ProfileOptions { num_bits: Some(8), parallel: true })
            .unwrap()
            .matrices;
        let golden = golden_run(&w, PrecisionFormat::Single, &settings).unwrap();
        let s = plan_dps_plus(&m, 0.1).unwrap();
        replay(&w, &id("particlefilter_lite"), &golden, &s, &settings).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
