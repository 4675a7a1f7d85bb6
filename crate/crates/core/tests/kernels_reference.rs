//! Untraced implementations of the bundled kernels. A run under the identity
//! transformer must match them bit for bit, and instruction counts must not
//! depend on the transformer.

use dpscale::cachesim::CacheConfig;
use dpscale::fpbits::{MantissaFault, Polarity, PrecisionFormat};
use dpscale::kernels::{
    self, list_workloads, BlackScholes, Graph, OptionKind, PageRank, SyntheticAdditive, Workload, WorkloadInput,
};
use dpscale::trace::Transformer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn identity_f32<K: kernels::Kernel>(k: &K) -> Vec<f64> {
    kernels::execute(k, PrecisionFormat::Single, Transformer::Identity, CacheConfig::default())
        .unwrap()
        .output
        .values
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn cndf(x: f32) -> f32 {
    let ax = x.abs();
    let n_prime = (ax * ax * -0.5).exp() * (0.398_942_280_401_432_7_f64 as f32);
    let k = 1.0 / (1.0 + (0.231_641_9_f64 as f32) * ax);
    let (k2, k3) = (k * k, k * k * k);
    let (k4, k5) = (k3 * k, k3 * k * k);
    let mut l2 = k2 * (-0.356_563_782_f64 as f32) + k3 * (1.781_477_937_f64 as f32);
    l2 += k4 * (-1.821_255_978_f64 as f32);
    l2 += k5 * (1.330_274_429_f64 as f32);
    let l = 1.0 - (l2 + k * (0.319_381_530_f64 as f32)) * n_prime;
    if x < 0.0 {
        1.0 - l
    } else {
        l
    }
}

fn black_scholes(s: f32, k: f32, r: f32, v: f32, t: f32, kind: OptionKind) -> f32 {
    let sqrt_t = t.sqrt();
    let log_term = (s / k).ln();
    let den = v * sqrt_t;
    let d1 = ((r + v * v * 0.5) * t + log_term) / den;
    let d2 = d1 - den;
    let (n1, n2) = (cndf(d1), cndf(d2));
    let fk = k * (-(r * t)).exp();
    match kind {
        OptionKind::Call => s * n1 - fk * n2,
        OptionKind::Put => fk * (1.0 - n2) - s * (1.0 - n1),
    }
}

#[test]
fn blackscholes_matches_reference() {
    let bs = BlackScholes::generate(64, 3);
    let expected: Vec<f64> = bs
        .options()
        .iter()
        .map(|o| {
            let p = black_scholes(
                o.spot as f32,
                o.strike as f32,
                o.rate as f32,
                o.volatility as f32,
                o.time as f32,
                o.kind,
            );
            f64::from(p)
        })
        .collect();
    assert_eq!(bits(&identity_f32(&bs)), bits(&expected));
}

fn pagerank(n: usize, edges: &[(u32, u32)], iterations: usize) -> Vec<f32> {
    let d = 0.85f32;
    let base = ((1.0 - 0.85) / n as f64) as f32;
    let mut out_deg = vec![0u32; n];
    let mut incoming = vec![Vec::new(); n];
    for &(s, t) in edges {
        out_deg[s as usize] += 1;
        incoming[t as usize].push(s as usize);
    }
    let dangling: Vec<usize> = (0..n).filter(|&v| out_deg[v] == 0).collect();
    let mut score = vec![(1.0 / n as f64) as f32; n];
    let mut contrib = vec![0.0f32; n];
    for _ in 0..iterations {
        for v in 0..n {
            if out_deg[v] > 0 {
                contrib[v] = score[v] / out_deg[v] as f32;
            }
        }
        let mass: f32 = dangling.iter().fold(0.0, |m, &v| m + score[v]);
        let spread = mass * d / n as f32;
        for u in 0..n {
            let pulled = incoming[u].iter().fold(0.0f32, |a, &v| a + contrib[v]);
            let mut next = base + d * pulled;
            if !dangling.is_empty() {
                next += spread;
            }
            score[u] = next;
        }
    }
    score
}

#[test]
fn pagerank_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 40;
    // vertices 0..4 have no out-edges
    let edges: Vec<(u32, u32)> = (0..160)
        .map(|_| (rng.random_range(5..n as u32), rng.random_range(0..n as u32)))
        .collect();
    let pr = PageRank::new(Graph::from_edges(n, &edges).unwrap(), 10);
    let expected: Vec<f64> = pagerank(n, &edges, 10).into_iter().map(f64::from).collect();
    assert_eq!(bits(&identity_f32(&pr)), bits(&expected));
}

#[test]
fn synthetic_matches_reference() {
    let values: Vec<f64> = (1..=12).map(|i| 1.0 + f64::from(i) / 16.0).collect();
    let k = SyntheticAdditive::from_values(values.clone(), 3).unwrap();
    let expected: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(p, &v)| f64::from(v as f32 * 2f32.powi((p / 3 % 4) as i32 - 1)))
        .collect();
    assert_eq!(bits(&identity_f32(&k)), bits(&expected));
}

#[test]
fn counts_do_not_depend_on_transformer() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for spec in list_workloads() {
        let w = Workload::build(spec.name, &WorkloadInput::Generated, 5).unwrap();
        let cache = CacheConfig::default();
        let golden = kernels::execute(&w, spec.format, Transformer::Identity, cache).unwrap();
        let calls = golden.trace.num_calls();
        let schedule: Vec<u32> = (0..calls).map(|_| rng.random_range(0..=23)).collect();
        let truncated = kernels::execute(&w, spec.format, Transformer::Truncate(schedule), cache).unwrap();
        let fault = Transformer::Fault {
            fault: MantissaFault::new(22, Polarity::StuckAt1),
            call: calls / 2,
        };
        let faulty = kernels::execute(&w, spec.format, fault, cache).unwrap();
        assert_eq!(golden.trace, truncated.trace, "{}", spec.name);
        assert_eq!(golden.trace, faulty.trace, "{}", spec.name);
    }
}

#[test]
fn runs_are_deterministic() {
    for spec in list_workloads() {
        let run = || {
            let w = Workload::build(spec.name, &WorkloadInput::Generated, 17).unwrap();
            kernels::execute(&w, spec.format, Transformer::Truncate(vec![7; spec.dynamic_calls]), CacheConfig::default())
                .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(bits(&a.output.values), bits(&b.output.values), "{}", spec.name);
        assert_eq!(a.trace, b.trace);
        assert!(a.output.values.len() == spec.output_len);
    }
}
