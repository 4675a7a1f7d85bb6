//! Transient thermal simulation on a 2-D grid.
//!
//! Each outer iteration makes one approximable `find_delta` call that
//! evaluates the 5-point stencil for every cell and stores the temperature
//! change; the update `temp += delta` runs outside the call at full
//! precision. Missing neighbours on the boundary are replaced by the cell
//! itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Kernel;
use crate::trace::{Real, TraceError, Tracer};

pub(super) const STATIC_FNS: &[&str] = &["find_delta"];
pub(super) const DEFAULT_ROWS: usize = 16;
pub(super) const DEFAULT_COLS: usize = 16;
pub(super) const DEFAULT_ITERATIONS: usize = 8;

// Scaled conductances and time step. Cell self-weight stays >= 0.55 and the
// leakage to ambient makes the update a strict contraction on the deltas.
const RX: f64 = 0.1;
const RY: f64 = 0.1;
const RZ: f64 = 0.05;
const STEP_DIV_CAP: f64 = 1.0;
const AMBIENT: f64 = 80.0;

#[derive(Debug, Clone)]
pub struct Hotspot {
    rows: usize,
    cols: usize,
    iterations: usize,
    temp: Vec<f64>,
    power: Vec<f64>,
}

impl Hotspot {
    pub fn generate(rows: usize, cols: usize, iterations: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rows * cols;
        let temp = (0..n).map(|_| AMBIENT + rng.random_range(0.0..20.0)).collect();
        let power = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
        Self {
            rows,
            cols,
            iterations,
            temp,
            power,
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Largest |delta| of each iteration of an untransformed run.
    pub fn max_delta_history<F: Real>(&self) -> Result<Vec<f64>, TraceError> {
        let mut t = Tracer::<F>::new(
            crate::trace::Transformer::Identity,
            crate::cachesim::CacheConfig::default(),
        )?;
        let mut history = Vec::with_capacity(self.iterations);
        self.run(&mut t, Some(&mut history))?;
        Ok(history)
    }

    fn run<F: Real>(
        &self,
        t: &mut Tracer<F>,
        mut history: Option<&mut Vec<f64>>,
    ) -> Result<Vec<F>, TraceError> {
        let (rows, cols) = (self.rows, self.cols);
        let mut temp = t.alloc(self.temp.iter().map(|&x| F::lit(x)).collect());
        let power = t.alloc(self.power.iter().map(|&x| F::lit(x)).collect());
        let mut delta = t.alloc_zeroed(rows * cols);

        for _ in 0..self.iterations {
            t.track_overhead(4);
            t.begin_call(STATIC_FNS[0])?;
            for r in 0..rows {
                for c in 0..cols {
                    t.track_overhead(8);
                    let idx = r * cols + c;
                    let north = if r > 0 { idx - cols } else { idx };
                    let south = if r + 1 < rows { idx + cols } else { idx };
                    let west = if c > 0 { idx - 1 } else { idx };
                    let east = if c + 1 < cols { idx + 1 } else { idx };

                    let tc = t.load(&temp, idx);
                    let tn = t.load(&temp, north);
                    let ts = t.load(&temp, south);
                    let te = t.load(&temp, east);
                    let tw = t.load(&temp, west);
                    let p = t.load(&power, idx);

                    let two_t = t.op(tc + tc);
                    let ns = t.op(tn + ts);
                    let ns = t.op(ns - two_t);
                    let ew = t.op(te + tw);
                    let ew = t.op(ew - two_t);
                    let amb = t.op(F::lit(AMBIENT) - tc);

                    let a = t.op(ns * F::lit(RY));
                    let sum = t.op(p + a);
                    let b = t.op(ew * F::lit(RX));
                    let sum = t.op(sum + b);
                    let z = t.op(amb * F::lit(RZ));
                    let sum = t.op(sum + z);
                    let d = t.op(sum * F::lit(STEP_DIV_CAP));
                    t.store(&mut delta, idx, d);
                }
            }
            t.end_call()?;

            let mut max_delta = 0.0f64;
            for idx in 0..rows * cols {
                t.track_overhead(2);
                let tc = t.load(&temp, idx);
                let d = t.load(&delta, idx);
                max_delta = max_delta.max(d.to_f64().abs());
                let next = t.op(tc + d);
                t.store(&mut temp, idx, next);
            }
            if let Some(h) = history.as_deref_mut() {
                h.push(max_delta);
            }
        }
        Ok(temp.into_vec())
    }
}

impl Kernel for Hotspot {
    fn name(&self) -> &str {
        "hotspot"
    }

    fn execute<F: Real>(&self, t: &mut Tracer<F>) -> Result<Vec<F>, TraceError> {
        self.run(t, None)
    }
}
