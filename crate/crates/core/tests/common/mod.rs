//! Independent reference planners and generators shared by integration tests.
#![allow(dead_code)]

use dpscale::{AccLossMatrices, Entry, Polarity};
use rand::Rng;

fn loss(m: &AccLossMatrices, call: usize, bit: u32) -> Option<f64> {
    match (m.get(Polarity::StuckAt0, call, bit), m.get(Polarity::StuckAt1, call, bit)) {
        (Entry::Valid(a), Entry::Valid(b)) => Some(if a >= b { a } else { b }),
        _ => None,
    }
}

/// Sum of the first `n` max losses of `call`, or `None` if any is invalid.
fn prefix_sum(m: &AccLossMatrices, call: usize, n: u32) -> Option<f64> {
    let mut s = 0.0;
    for b in 0..n {
        s += loss(m, call, b)?;
    }
    Some(s)
}

/// Tries every prefix length from the longest down.
pub fn brute_dps(m: &AccLossMatrices, target: f64) -> Vec<u32> {
    (0..m.num_calls())
        .map(|i| {
            (0..=m.num_bits())
                .rev()
                .find(|&n| (1..=n).all(|j| prefix_sum(m, i, j).is_some_and(|s| s < target)))
                .unwrap()
        })
        .collect()
}

pub fn brute_dps_plus(m: &AccLossMatrices, target: f64) -> Vec<u32> {
    let calls = m.num_calls();
    (0..calls)
        .map(|i| {
            let rows: Vec<usize> = if i + 1 < calls { vec![i, i + 1] } else { vec![i] };
            (0..=m.num_bits())
                .rev()
                .find(|&n| {
                    (1..=n).all(|j| rows.iter().all(|&r| prefix_sum(m, r, j).is_some_and(|s| s < target)))
                })
                .unwrap()
        })
        .collect()
}

pub fn brute_sps_plus(m: &AccLossMatrices, target: f64) -> Vec<u32> {
    let dps = brute_dps(m, target);
    let fns = m.static_fns();
    (0..fns.len())
        .map(|i| {
            (0..fns.len())
                .filter(|&j| fns[j] == fns[i])
                .map(|j| dps[j])
                .min()
                .unwrap()
        })
        .collect()
}

/// Random matrix of up to `max_calls` x `max_bits` with about 10% invalid
/// entries. Losses are drawn from a coarse grid so sums hit the targets
/// exactly now and then.
pub fn random_matrices<R: Rng>(rng: &mut R, max_calls: usize, max_bits: u32) -> AccLossMatrices {
    let calls = rng.random_range(1..=max_calls);
    let bits = rng.random_range(1..=max_bits);
    let fns: Vec<String> = (0..calls).map(|_| format!("f{}", rng.random_range(0..3))).collect();
    let draw = |rng: &mut R| -> Vec<Vec<Option<f64>>> {
        (0..calls)
            .map(|_| {
                (0..bits)
                    .map(|_| {
                        if rng.random_bool(0.1) {
                            None
                        } else if rng.random_bool(0.5) {
                            Some(f64::from(rng.random_range(0..=8)) * 0.0125)
                        } else {
                            Some(rng.random_range(0.0..0.08))
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let s0 = draw(rng);
    let s1 = draw(rng);
    AccLossMatrices::from_losses(fns, &s0, &s1).unwrap()
}
