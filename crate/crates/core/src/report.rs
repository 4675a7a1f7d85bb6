//! Replay of omission schedules and the reports built from them.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cachesim::CacheConfig;
use crate::energy::{self, EnergyError, EnergyReport, EpiTable, ScalingModel};
use crate::fpbits::PrecisionFormat;
use crate::kernels::{self, Execution, Kernel, KernelError};
use crate::metrics::{self, AccuracySummary, MetricsError};
use crate::policy::{self, OmissionSchedule, PolicyError, PolicyKind, Provenance};
use crate::profiler::{AccLossMatrices, ProfileError};
use crate::trace::{TraceError, Transformer};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("schedule covers {schedule} dynamic calls but the workload makes {calls}")]
    ScheduleLength { schedule: usize, calls: usize },
}

/// Identifies a workload instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadId {
    pub name: String,
    pub input: String,
    pub seed: u64,
    pub format: PrecisionFormat,
}

/// Everything besides the workload and schedule that a run depends on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub cache: CacheConfig,
    pub epi: EpiTable,
    pub scaling: ScalingModel,
}

/// Hash of the workload identity and its full-precision output.
pub fn workload_fingerprint(id: &WorkloadId, golden: &Execution) -> String {
    let mut h = Sha256::new();
    h.update(id.name.as_bytes());
    h.update([0]);
    h.update(id.input.as_bytes());
    h.update([0]);
    h.update(id.seed.to_le_bytes());
    h.update(id.format.to_string().as_bytes());
    h.update((golden.trace.num_calls() as u64).to_le_bytes());
    for v in &golden.output.values {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub workload: WorkloadId,
    pub fingerprint: String,
    pub settings: RunSettings,
    pub schedule: Provenance,
    /// Omitted bits per dynamic call.
    pub omitted: Vec<u32>,
    pub static_fns: Vec<String>,
    /// False when the approximate output contains NaN or infinity.
    pub valid: bool,
    pub accuracy: AccuracySummary,
    pub energy: EnergyReport,
}

/// Full-precision run of a workload, the reference for every replay.
pub fn golden_run<K: Kernel>(
    kernel: &K,
    format: PrecisionFormat,
    settings: &RunSettings,
) -> Result<Execution, PipelineError> {
    Ok(kernels::execute(kernel, format, Transformer::Identity, settings.cache)?)
}

/// Runs `kernel` under `schedule` and scores it against `golden`.
pub fn replay<K: Kernel>(
    kernel: &K,
    id: &WorkloadId,
    golden: &Execution,
    schedule: &OmissionSchedule,
    settings: &RunSettings,
) -> Result<RunReport, PipelineError> {
    let calls = golden.trace.num_calls();
    if schedule.len() != calls {
        return Err(PipelineError::ScheduleLength {
            schedule: schedule.len(),
            calls,
        });
    }
    let run = kernels::execute(
        kernel,
        id.format,
        Transformer::Truncate(schedule.omitted.clone()),
        settings.cache,
    )?;
    let accuracy = metrics::mean_relative_error(&run.output.values, &golden.output.values)?;
    let energy = energy::energy_of_trace_with(&run.trace, &schedule.omitted, &settings.epi, settings.scaling)?;
    Ok(RunReport {
        workload: id.clone(),
        fingerprint: workload_fingerprint(id, golden),
        settings: *settings,
        schedule: schedule.provenance.clone(),
        omitted: schedule.omitted.clone(),
        static_fns: run.trace.static_fns(),
        valid: run.output.is_valid(),
        accuracy,
        energy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub policy: PolicyKind,
    pub parameter: f64,
    pub mre: f64,
    pub savings: f64,
    pub mean_omitted: f64,
    pub valid: bool,
}

/// Plans and replays every (policy, parameter) pair, policy-major.
pub fn sweep<K: Kernel>(
    kernel: &K,
    id: &WorkloadId,
    golden: &Execution,
    matrices: &AccLossMatrices,
    policies: &[PolicyKind],
    parameters: &[f64],
    settings: &RunSettings,
) -> Result<Vec<SweepRow>, PipelineError> {
    let mut rows = Vec::with_capacity(policies.len() * parameters.len());
    for &kind in policies {
        for &p in parameters {
            let schedule = policy::plan(matrices, kind, p)?;
            let report = replay(kernel, id, golden, &schedule, settings)?;
            rows.push(SweepRow {
                policy: kind,
                parameter: p,
                mre: report.accuracy.mre,
                savings: report.energy.savings,
                mean_omitted: schedule.mean_omitted(),
                valid: report.valid,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::SyntheticAdditive;
    use crate::policy::plan_sps;

    fn setup() -> (SyntheticAdditive, WorkloadId, Execution, RunSettings) {
        let k = SyntheticAdditive::generate(4, 3, 11);
        let id = WorkloadId {
            name: "synthetic_additive".into(),
            input: "default".into(),
            seed: 11,
            format: PrecisionFormat::Single,
        };
        let settings = RunSettings::default();
        let golden = golden_run(&k, id.format, &settings).unwrap();
        (k, id, golden, settings)
    }

    #[test]
    fn zero_schedule_is_free_and_exact() {
        let (k, id, golden, settings) = setup();
        let s = plan_sps(0.0, 23, 4).unwrap();
        let r = replay(&k, &id, &golden, &s, &settings).unwrap();
        assert_eq!(r.accuracy.mre, 0.0);
        assert_eq!(r.energy.savings, 0.0);
        assert!(r.valid);
        assert_eq!(r, replay(&k, &id, &golden, &s, &settings).unwrap());
    }

    #[test]
    fn schedule_length_is_checked() {
        let (k, id, golden, settings) = setup();
        let s = plan_sps(0.5, 23, 5).unwrap();
        assert!(matches!(
            replay(&k, &id, &golden, &s, &settings),
            Err(PipelineError::ScheduleLength { schedule: 5, calls: 4 })
        ));
    }

    #[test]
    fn report_json_round_trip() {
        let (k, id, golden, settings) = setup();
        let s = plan_sps(0.25, 23, 4).unwrap();
        let r = replay(&k, &id, &golden, &s, &settings).unwrap();
        assert!(r.accuracy.mre > 0.0 && r.energy.savings > 0.0);
        let back: RunReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
