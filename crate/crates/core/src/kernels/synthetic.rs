//! Validation workload with exactly additive per-call error.
//!
//! Call `i` owns output points `i*m .. (i+1)*m`: it loads each input value,
//! scales it by a power of two and stores it. Power-of-two scaling is exact,
//! so a point's final value is the transformed input and nothing else. Each
//! call's effect on the mean relative error is therefore independent of what
//! happens in any other call.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Kernel, KernelError};
use crate::trace::{Real, TraceError, Tracer};

pub(super) const STATIC_FNS: &[&str] = &["additive_term"];
pub(super) const DEFAULT_CALLS: usize = 8;
pub(super) const DEFAULT_POINTS_PER_CALL: usize = 4;

#[derive(Debug, Clone)]
pub struct SyntheticAdditive {
    values: Vec<f64>,
    points_per_call: usize,
}

impl SyntheticAdditive {
    pub fn generate(calls: usize, points_per_call: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..calls * points_per_call)
            .map(|_| {
                let sign = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
                let exp = rng.random_range(-4..=4);
                sign * rng.random_range(1.0..2.0) * 2f64.powi(exp)
            })
            .collect();
        Self {
            values,
            points_per_call,
        }
    }

    /// Uses caller-chosen inputs, which controls the mantissa bit occupancy.
    /// Values must be normal and non-zero.
    pub fn from_values(values: Vec<f64>, points_per_call: usize) -> Result<Self, KernelError> {
        if points_per_call == 0 || values.is_empty() || !values.len().is_multiple_of(points_per_call) {
            return Err(KernelError::Invalid(format!(
                "{} values cannot be split into calls of {points_per_call}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_normal()) {
            return Err(KernelError::Invalid(format!("value {v} is not a normal number")));
        }
        Ok(Self {
            values,
            points_per_call,
        })
    }

    pub fn calls(&self) -> usize {
        self.values.len() / self.points_per_call
    }

    pub fn points_per_call(&self) -> usize {
        self.points_per_call
    }

    fn scale(call: usize) -> f64 {
        2f64.powi((call % 4) as i32 - 1)
    }
}

impl Kernel for SyntheticAdditive {
    fn name(&self) -> &str {
        "synthetic_additive"
    }

    fn execute<F: Real>(&self, t: &mut Tracer<F>) -> Result<Vec<F>, TraceError> {
        let m = self.points_per_call;
        let input = t.alloc(self.values.iter().map(|&v| F::lit(v)).collect());
        let mut out = t.alloc_zeroed(self.values.len());
        for call in 0..self.calls() {
            t.begin_call(STATIC_FNS[0])?;
            let scale = F::lit(Self::scale(call));
            for p in call * m..(call + 1) * m {
                t.track_overhead(1);
                let x = t.load(&input, p);
                let y = t.op(x * scale);
                t.store(&mut out, p, y);
            }
            t.end_call()?;
        }
        Ok(out.into_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(SyntheticAdditive::from_values(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(SyntheticAdditive::from_values(vec![1.0, 0.0], 1).is_err());
        assert!(SyntheticAdditive::from_values(vec![], 1).is_err());
        assert_eq!(SyntheticAdditive::from_values(vec![1.0; 6], 2).unwrap().calls(), 3);
    }
}
