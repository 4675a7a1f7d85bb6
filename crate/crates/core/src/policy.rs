//! Omission-schedule planners.
//!
//! * DPS walks each dynamic call's profile from the least-significant bit,
//!   accumulating the worse of the two stuck-at losses, and omits the
//!   longest prefix whose running sum stays strictly below the target.
//! * DPS+ additionally requires the same prefix to be safe for the next
//!   dynamic call, since an error injected now is observed by what follows.
//!   The last call has no successor and falls back to the DPS rule.
//! * SPS omits a fixed fraction of the mantissa everywhere.
//! * SPS+ runs DPS, then gives every call of a static function the minimum
//!   that function got anywhere.
//!
//! Bits are indexed from 0 at the least-significant mantissa bit. A prefix of
//! length `n` covers bits `0..n`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiler::AccLossMatrices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "dps")]
    Dps,
    #[serde(rename = "dps+")]
    DpsPlus,
    #[serde(rename = "sps")]
    Sps,
    #[serde(rename = "sps+")]
    SpsPlus,
}

impl PolicyKind {
    pub const fn name(self) -> &'static str {
        match self {
            PolicyKind::Dps => "dps",
            PolicyKind::DpsPlus => "dps+",
            PolicyKind::Sps => "sps",
            PolicyKind::SpsPlus => "sps+",
        }
    }

    /// SPS is parameterized by a fraction; the others by an accuracy target.
    pub const fn uses_target(self) -> bool {
        !matches!(self, PolicyKind::Sps)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dps" => Ok(PolicyKind::Dps),
            "dps+" | "dps_plus" | "dpsplus" => Ok(PolicyKind::DpsPlus),
            "sps" => Ok(PolicyKind::Sps),
            "sps+" | "sps_plus" | "spsplus" => Ok(PolicyKind::SpsPlus),
            _ => Err(PolicyError::UnknownPolicy(s.to_owned())),
        }
    }
}

/// A policy together with its parameter: the accuracy target, or the omitted
/// fraction for SPS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub policy: PolicyKind,
    pub parameter: f64,
}

impl PolicyConfig {
    pub fn plan(&self, m: &AccLossMatrices) -> Result<OmissionSchedule, PolicyError> {
        plan(m, self.policy, self.parameter)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("unknown policy `{0}` (expected dps, dps+, sps or sps+)")]
    UnknownPolicy(String),
    #[error("accuracy target must be a non-negative number, got {0}")]
    BadTarget(f64),
    #[error("omission fraction must lie in [0, 1], got {0}")]
    BadFraction(f64),
    #[error("DPS+ needs at least one dynamic call")]
    NoCalls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub policy: PolicyKind,
    /// Accuracy target (DPS, DPS+, SPS+) or omitted fraction (SPS).
    pub parameter: f64,
    /// Matrix fingerprint the schedule was planned from; `None` for SPS.
    pub matrices: Option<String>,
    pub num_bits: u32,
}

/// Omitted low mantissa bits per dynamic call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmissionSchedule {
    pub provenance: Provenance,
    pub omitted: Vec<u32>,
    /// Static function of each call; empty when planned without matrices.
    #[serde(default)]
    pub static_fns: Vec<String>,
}

impl OmissionSchedule {
    pub fn len(&self) -> usize {
        self.omitted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omitted.is_empty()
    }

    pub fn mean_omitted(&self) -> f64 {
        if self.omitted.is_empty() {
            0.0
        } else {
            self.omitted.iter().map(|&k| f64::from(k)).sum::<f64>() / self.omitted.len() as f64
        }
    }
}

fn check_target(target: f64) -> Result<(), PolicyError> {
    if target.is_nan() || target < 0.0 {
        return Err(PolicyError::BadTarget(target));
    }
    Ok(())
}

/// Longest prefix over which every listed call has valid entries and a
/// running max-loss sum strictly below `target`.
fn safe_prefix(m: &AccLossMatrices, calls: &[usize], target: f64) -> u32 {
    let mut sums = [0.0f64; 2];
    debug_assert!(calls.len() <= sums.len());
    let mut n = 0;
    while n < m.num_bits() {
        for (k, &call) in calls.iter().enumerate() {
            match m.max_loss(call, n) {
                Some(loss) => sums[k] += loss,
                None => return n,
            }
        }
        if sums[..calls.len()].iter().any(|&s| s >= target) {
            return n;
        }
        n += 1;
    }
    n
}

fn schedule(m: &AccLossMatrices, policy: PolicyKind, parameter: f64, omitted: Vec<u32>) -> OmissionSchedule {
    OmissionSchedule {
        provenance: Provenance {
            policy,
            parameter,
            matrices: Some(m.fingerprint()),
            num_bits: m.num_bits(),
        },
        omitted,
        static_fns: m.static_fns().to_vec(),
    }
}

fn dps_counts(m: &AccLossMatrices, target: f64) -> Vec<u32> {
    (0..m.num_calls()).map(|i| safe_prefix(m, &[i], target)).collect()
}

pub fn plan_dps(m: &AccLossMatrices, target: f64) -> Result<OmissionSchedule, PolicyError> {
    check_target(target)?;
    Ok(schedule(m, PolicyKind::Dps, target, dps_counts(m, target)))
}

pub fn plan_dps_plus(m: &AccLossMatrices, target: f64) -> Result<OmissionSchedule, PolicyError> {
    check_target(target)?;
    let calls = m.num_calls();
    if calls == 0 {
        return Err(PolicyError::NoCalls);
    }
    let omitted = (0..calls)
        .map(|i| {
            if i + 1 < calls {
                safe_prefix(m, &[i, i + 1], target)
            } else {
                safe_prefix(m, &[i], target)
            }
        })
        .collect();
    Ok(schedule(m, PolicyKind::DpsPlus, target, omitted))
}

/// `ceil(fraction * num_bits)` for every call.
pub fn plan_sps(fraction: f64, num_bits: u32, num_calls: usize) -> Result<OmissionSchedule, PolicyError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(PolicyError::BadFraction(fraction));
    }
    // Products like 0.05 * 20 land a hair above the integer in binary; do not
    // let that round up to an extra bit.
    let exact = fraction * f64::from(num_bits);
    let k = ((exact - 1e-9).ceil().max(0.0) as u32).min(num_bits);
    Ok(OmissionSchedule {
        provenance: Provenance {
            policy: PolicyKind::Sps,
            parameter: fraction,
            matrices: None,
            num_bits,
        },
        omitted: vec![k; num_calls],
        static_fns: Vec::new(),
    })
}

/// SPS at the shape of a profiled matrix set, keeping its call map.
pub fn plan_sps_for(m: &AccLossMatrices, fraction: f64) -> Result<OmissionSchedule, PolicyError> {
    let mut s = plan_sps(fraction, m.num_bits(), m.num_calls())?;
    s.static_fns = m.static_fns().to_vec();
    Ok(s)
}

pub fn plan_sps_plus(m: &AccLossMatrices, target: f64) -> Result<OmissionSchedule, PolicyError> {
    check_target(target)?;
    let per_call = dps_counts(m, target);
    let mut minimum: HashMap<&str, u32> = HashMap::new();
    for (f, &k) in m.static_fns().iter().zip(&per_call) {
        minimum
            .entry(f.as_str())
            .and_modify(|v| *v = (*v).min(k))
            .or_insert(k);
    }
    let omitted = m.static_fns().iter().map(|f| minimum[f.as_str()]).collect();
    Ok(schedule(m, PolicyKind::SpsPlus, target, omitted))
}

/// Dispatches on `policy`; `parameter` is the target, or the fraction for SPS.
pub fn plan(m: &AccLossMatrices, policy: PolicyKind, parameter: f64) -> Result<OmissionSchedule, PolicyError> {
    match policy {
        PolicyKind::Dps => plan_dps(m, parameter),
        PolicyKind::DpsPlus => plan_dps_plus(m, parameter),
        PolicyKind::Sps => plan_sps_for(m, parameter),
        PolicyKind::SpsPlus => plan_sps_plus(m, parameter),
    }
}
