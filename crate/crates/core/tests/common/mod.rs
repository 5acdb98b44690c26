//! Independent oracles and fixtures shared by the integration targets.
#![allow(dead_code)]

use impute_core::seed;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_rows(n: usize, d: usize, s: u64) -> Array2<f64> {
    let mut rng = seed::rng(s);
    Array2::from_shape_simple_fn((n, d), || rng.sample(StandardNormal))
}

/// `u v^T` with standard normal factors.
pub fn rank_one(n: usize, d: usize, s: u64) -> Array2<f64> {
    let mut rng = seed::rng(s);
    let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    Array2::from_shape_fn((n, d), |(i, j)| u[i] * v[j])
}

/// A noiseless linear target: only the linear classes can fit it exactly.
pub fn planted_linear(n: usize, s: u64) -> (Vec<f64>, Array2<f64>) {
    let x = gaussian_rows(n, 3, s);
    let y = x.rows().into_iter().map(|r| 1.5 * r[0] - 2.0 * r[1] + 0.7 * r[2] + 3.0).collect();
    (y, x)
}

/// Evaluation count of a Hyperband run by direct arithmetic:
/// s_max = floor(log_eta R), n = ceil((s_max+1) eta^s / (s+1)),
/// then floor(n/eta) survivors per rung.
pub fn hyperband_evaluations(eta: u32, r_max: u32) -> usize {
    hyperband_starts(eta, r_max)
        .into_iter()
        .map(|(n, s)| {
            let mut n = n;
            let mut total = 0;
            for _ in 0..=s {
                total += n;
                n /= eta as usize;
            }
            total
        })
        .sum()
}

/// (initial configurations, rungs - 1) per bracket, most aggressive first.
pub fn hyperband_starts(eta: u32, r_max: u32) -> Vec<(usize, u32)> {
    let mut s_max = 0;
    while eta.pow(s_max + 1) <= r_max {
        s_max += 1;
    }
    (0..=s_max)
        .rev()
        .map(|s| (((s_max + 1) * eta.pow(s)).div_ceil(s + 1) as usize, s))
        .collect()
}

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, p, out);
            if k % 2 == 0 { p.swap(i, k - 1) } else { p.swap(0, k - 1) }
        }
    }
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut p, &mut out);
    out
}

/// Minimum mean |a_i - b_pi(i)| over all pairings of two equal-size samples.
pub fn min_cost_pairing(a: &[f64], b: &[f64], perms: &[Vec<usize>]) -> f64 {
    assert_eq!(a.len(), b.len());
    perms
        .iter()
        .map(|p| a.iter().zip(p).map(|(x, &j)| (x - b[j]).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / a.len() as f64
}

/// All multisets of the given size over `values`, as sorted vectors.
pub fn multisets(values: &[f64], size: usize) -> Vec<Vec<f64>> {
    if size == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        for mut rest in multisets(&values[i..], size - 1) {
            rest.insert(0, v);
            out.push(rest);
        }
    }
    out
}

/// AUROC by enumerating every positive-negative pair, ties counting one half.
pub fn auroc_by_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}
