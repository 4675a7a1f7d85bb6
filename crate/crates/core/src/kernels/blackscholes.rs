//! European option pricing with the closed-form Black-Scholes equation.
//!
//! Mirrors the PARSEC kernel structure: a single approximable function,
//! `BlkSchlsEqEuroNoDiv`, is called once per option and uses the polynomial
//! approximation of the cumulative normal distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Kernel;
use crate::trace::{Real, TraceError, Tracer};

pub(super) const STATIC_FNS: &[&str] = &["BlkSchlsEqEuroNoDiv"];
pub(super) const DEFAULT_OPTIONS: usize = 64;

/// Integer work per priced option (argument marshalling, loop control).
const CALL_OVERHEAD: u64 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub volatility: f64,
    pub time: f64,
    pub kind: OptionKind,
}

#[derive(Debug, Clone)]
pub struct BlackScholes {
    options: Vec<OptionSpec>,
}

impl BlackScholes {
    pub fn new(options: Vec<OptionSpec>) -> Self {
        Self { options }
    }

    pub fn generate(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let options = (0..n)
            .map(|_| {
                let spot = rng.random_range(40.0..120.0);
                OptionSpec {
                    spot,
                    strike: spot * rng.random_range(0.8..1.2),
                    rate: rng.random_range(0.02..0.1),
                    volatility: rng.random_range(0.1..0.6),
                    time: rng.random_range(0.25..2.0),
                    kind: if rng.random_bool(0.5) {
                        OptionKind::Call
                    } else {
                        OptionKind::Put
                    },
                }
            })
            .collect();
        Self { options }
    }

    pub fn options(&self) -> &[OptionSpec] {
        &self.options
    }
}

/// Polynomial approximation of the standard normal CDF. Both sides of the
/// sign fold are always computed so the instruction count does not depend on
/// the operand.
fn cndf<F: Real>(t: &mut Tracer<F>, x: F) -> F {
    let one = F::one();
    let negative = x < F::zero();
    let ax = t.op(x.abs());

    let sq = t.op(ax * ax);
    let e = t.op(sq * F::lit(-0.5));
    let e = t.op(e.exp());
    let n_prime = t.op(e * F::lit(0.398_942_280_401_432_7));

    let k = t.op(F::lit(0.231_641_9) * ax);
    let k = t.op(one + k);
    let k = t.op(one / k);
    let k2 = t.op(k * k);
    let k3 = t.op(k2 * k);
    let k4 = t.op(k3 * k);
    let k5 = t.op(k4 * k);

    let l1 = t.op(k * F::lit(0.319_381_530));
    let l2 = t.op(k2 * F::lit(-0.356_563_782));
    let l3 = t.op(k3 * F::lit(1.781_477_937));
    let l2 = t.op(l2 + l3);
    let l3 = t.op(k4 * F::lit(-1.821_255_978));
    let l2 = t.op(l2 + l3);
    let l3 = t.op(k5 * F::lit(1.330_274_429));
    let l2 = t.op(l2 + l3);

    let l = t.op(l2 + l1);
    let l = t.op(l * n_prime);
    let l = t.op(one - l);
    let flipped = t.op(one - l);
    if negative {
        flipped
    } else {
        l
    }
}

fn price<F: Real>(t: &mut Tracer<F>, s: F, k: F, r: F, v: F, time: F, kind: OptionKind) -> F {
    let sqrt_time = t.op(time.sqrt());
    let ratio = t.op(s / k);
    let log_term = t.op(ratio.ln());
    let vv = t.op(v * v);
    let power_term = t.op(vv * F::lit(0.5));

    let d1 = t.op(r + power_term);
    let d1 = t.op(d1 * time);
    let d1 = t.op(d1 + log_term);
    let den = t.op(v * sqrt_time);
    let d1 = t.op(d1 / den);
    let d2 = t.op(d1 - den);

    let n_d1 = cndf(t, d1);
    let n_d2 = cndf(t, d2);

    let rt = t.op(r * time);
    let disc = t.op((-rt).exp());
    let future_strike = t.op(k * disc);

    match kind {
        OptionKind::Call => {
            let a = t.op(s * n_d1);
            let b = t.op(future_strike * n_d2);
            t.op(a - b)
        }
        OptionKind::Put => {
            let nn_d1 = t.op(F::one() - n_d1);
            let nn_d2 = t.op(F::one() - n_d2);
            let a = t.op(future_strike * nn_d2);
            let b = t.op(s * nn_d1);
            t.op(a - b)
        }
    }
}

impl Kernel for BlackScholes {
    fn name(&self) -> &str {
        "blackscholes"
    }

    fn execute<F: Real>(&self, t: &mut Tracer<F>) -> Result<Vec<F>, TraceError> {
        let col = |f: fn(&OptionSpec) -> f64| self.options.iter().map(|o| F::lit(f(o))).collect::<Vec<F>>();
        let spot = t.alloc(col(|o| o.spot));
        let strike = t.alloc(col(|o| o.strike));
        let rate = t.alloc(col(|o| o.rate));
        let vol = t.alloc(col(|o| o.volatility));
        let time = t.alloc(col(|o| o.time));
        let mut prices = t.alloc_zeroed(self.options.len());

        for (i, opt) in self.options.iter().enumerate() {
            t.track_overhead(2);
            t.begin_call(STATIC_FNS[0])?;
            t.track_overhead(CALL_OVERHEAD);
            let s = t.load(&spot, i);
            let k = t.load(&strike, i);
            let r = t.load(&rate, i);
            let v = t.load(&vol, i);
            let tm = t.load(&time, i);
            let p = price(t, s, k, r, v, tm, opt.kind);
            t.store(&mut prices, i, p);
            t.end_call()?;
        }
        Ok(prices.into_vec())
    }
}
