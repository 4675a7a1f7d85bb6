//! Reduced particle filter tracking a point moving at constant velocity.
//!
//! Every frame makes five approximable calls, in order: motion model,
//! likelihood, weight update, weight normalization (which also produces the
//! position estimate) and the CDF/U computation used for systematic
//! resampling. The resampling search itself runs outside any call and scans
//! every particle, so its memory traffic is value independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::Kernel;
use crate::trace::{Real, TraceError, Tracer};

pub(super) const STATIC_FNS: &[&str] = &[
    "apply_motion_model",
    "particle_filter_likelihood",
    "update_weights",
    "normalize_weights",
    "calc_U",
];
pub(super) const DEFAULT_PARTICLES: usize = 32;
pub(super) const DEFAULT_FRAMES: usize = 8;

const START: (f64, f64) = (30.0, 40.0);
const VELOCITY: (f64, f64) = (1.5, -0.75);
const MOTION_SIGMA: f64 = 1.0;
const OBSERVATION_SIGMA: f64 = 0.5;
const LIKELIHOOD_SIGMA: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct ParticleFilterLite {
    particles: usize,
    frames: usize,
    /// frame-major, one entry per particle
    noise_x: Vec<f64>,
    noise_y: Vec<f64>,
    /// (x, y) per frame
    observations: Vec<f64>,
    /// systematic resampling offsets in [0, 1/particles)
    offsets: Vec<f64>,
}

impl ParticleFilterLite {
    pub fn generate(particles: usize, frames: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let motion = Normal::new(0.0, MOTION_SIGMA).expect("valid sigma");
        let observe = Normal::new(0.0, OBSERVATION_SIGMA).expect("valid sigma");
        let offset = Uniform::new(0.0, 1.0 / particles as f64).expect("valid range");

        let mut noise_x = Vec::with_capacity(particles * frames);
        let mut noise_y = Vec::with_capacity(particles * frames);
        let mut observations = Vec::with_capacity(2 * frames);
        let mut offsets = Vec::with_capacity(frames);
        for f in 0..frames {
            for _ in 0..particles {
                noise_x.push(motion.sample(&mut rng));
                noise_y.push(motion.sample(&mut rng));
            }
            let step = (f + 1) as f64;
            observations.push(START.0 + VELOCITY.0 * step + observe.sample(&mut rng));
            observations.push(START.1 + VELOCITY.1 * step + observe.sample(&mut rng));
            offsets.push(offset.sample(&mut rng));
        }
        Self {
            particles,
            frames,
            noise_x,
            noise_y,
            observations,
            offsets,
        }
    }
}

impl Kernel for ParticleFilterLite {
    fn name(&self) -> &str {
        "particlefilter_lite"
    }

    fn execute<F: Real>(&self, t: &mut Tracer<F>) -> Result<Vec<F>, TraceError> {
        let n = self.particles;
        let lit = |v: &[f64]| v.iter().map(|&x| F::lit(x)).collect::<Vec<F>>();
        let uniform = F::lit(1.0 / n as f64);

        let mut px = t.alloc(vec![F::lit(START.0); n]);
        let mut py = t.alloc(vec![F::lit(START.1); n]);
        let mut weights = t.alloc(vec![uniform; n]);
        let mut lik = t.alloc_zeroed(n);
        let mut cdf = t.alloc_zeroed(n);
        let mut u = t.alloc_zeroed(n);
        let mut next_x = t.alloc_zeroed(n);
        let mut next_y = t.alloc_zeroed(n);
        let mut estimate = t.alloc_zeroed(2);
        let noise_x = t.alloc(lit(&self.noise_x));
        let noise_y = t.alloc(lit(&self.noise_y));
        let obs = t.alloc(lit(&self.observations));
        let offsets = t.alloc(lit(&self.offsets));

        let (vx, vy) = (F::lit(VELOCITY.0), F::lit(VELOCITY.1));
        let neg_inv_two_var = F::lit(-1.0 / (2.0 * LIKELIHOOD_SIGMA * LIKELIHOOD_SIGMA));

        for f in 0..self.frames {
            t.begin_call(STATIC_FNS[0])?;
            for j in 0..n {
                t.track_overhead(3);
                let x = t.load(&px, j);
                let dx = t.load(&noise_x, f * n + j);
                let x = t.op(x + vx);
                let x = t.op(x + dx);
                t.store(&mut px, j, x);
                let y = t.load(&py, j);
                let dy = t.load(&noise_y, f * n + j);
                let y = t.op(y + vy);
                let y = t.op(y + dy);
                t.store(&mut py, j, y);
            }
            t.end_call()?;

            t.begin_call(STATIC_FNS[1])?;
            let ox = t.load(&obs, 2 * f);
            let oy = t.load(&obs, 2 * f + 1);
            for j in 0..n {
                t.track_overhead(2);
                let x = t.load(&px, j);
                let y = t.load(&py, j);
                let dx = t.op(x - ox);
                let dy = t.op(y - oy);
                let dx2 = t.op(dx * dx);
                let dy2 = t.op(dy * dy);
                let d2 = t.op(dx2 + dy2);
                let l = t.op(d2 * neg_inv_two_var);
                t.store(&mut lik, j, l);
            }
            t.end_call()?;

            t.begin_call(STATIC_FNS[2])?;
            for j in 0..n {
                t.track_overhead(2);
                let w = t.load(&weights, j);
                let l = t.load(&lik, j);
                let e = t.op(l.exp());
                let w = t.op(w * e);
                t.store(&mut weights, j, w);
            }
            t.end_call()?;

            t.begin_call(STATIC_FNS[3])?;
            let mut sum = F::zero();
            for j in 0..n {
                t.track_overhead(1);
                let w = t.load(&weights, j);
                sum = t.op(sum + w);
            }
            let (mut ex, mut ey) = (F::zero(), F::zero());
            for j in 0..n {
                t.track_overhead(2);
                let w = t.load(&weights, j);
                let w = t.op(w / sum);
                t.store(&mut weights, j, w);
                let x = t.load(&px, j);
                let y = t.load(&py, j);
                let wx = t.op(x * w);
                ex = t.op(ex + wx);
                let wy = t.op(y * w);
                ey = t.op(ey + wy);
            }
            t.store(&mut estimate, 0, ex);
            t.store(&mut estimate, 1, ey);
            t.end_call()?;

            t.begin_call(STATIC_FNS[4])?;
            let mut running = F::zero();
            for j in 0..n {
                t.track_overhead(1);
                let w = t.load(&weights, j);
                running = t.op(running + w);
                t.store(&mut cdf, j, running);
            }
            let u1 = t.load(&offsets, f);
            for j in 0..n {
                t.track_overhead(1);
                let uj = t.op(u1 + F::lit(j as f64 / n as f64));
                t.store(&mut u, j, uj);
            }
            t.end_call()?;

            // systematic resampling: first particle whose CDF reaches u[j]
            for j in 0..n {
                let uj = t.load(&u, j);
                let mut pick = None;
                for i in 0..n {
                    t.track_overhead(2);
                    let c = t.load(&cdf, i);
                    let x = t.load(&px, i);
                    let y = t.load(&py, i);
                    if pick.is_none() && c >= uj {
                        pick = Some((x, y));
                    }
                }
                let (x, y) = pick.unwrap_or((px.as_slice()[n - 1], py.as_slice()[n - 1]));
                t.store(&mut next_x, j, x);
                t.store(&mut next_y, j, y);
            }
            for j in 0..n {
                t.track_overhead(1);
                let x = t.load(&next_x, j);
                t.store(&mut px, j, x);
                let y = t.load(&next_y, j);
                t.store(&mut py, j, y);
                t.store(&mut weights, j, uniform);
            }
        }
        Ok(estimate.into_vec())
    }
}
