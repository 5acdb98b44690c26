//! Synthetic complete datasets for tests and benchmarks.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Schema};
use crate::linalg::Cholesky;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthKind {
    /// Zero-mean Gaussian with correlation `rho^|i-j|`.
    Gaussian { rho: f64 },
    /// Three correlated Gaussian factors observed through four linear
    /// and four nonlinear maps with small noise (D = 8).
    Benchmark,
    /// `x` standard normal and `y = 2x + 0.01 e`.
    Linear,
    /// `x` uniform on [-2, 2] and `y = sign(x)`.
    Nonlinear,
    /// Two drivers, a linear column, a piecewise-constant column and an
    /// independent noise column.
    MixedSignal,
}

impl SynthKind {
    pub fn name(&self) -> &'static str {
        match self {
            SynthKind::Gaussian { .. } => "gaussian",
            SynthKind::Benchmark => "benchmark",
            SynthKind::Linear => "linear",
            SynthKind::Nonlinear => "nonlinear",
            SynthKind::MixedSignal => "mixed_signal",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Some(match text.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" => SynthKind::Gaussian { rho: 0.5 },
            "benchmark" => SynthKind::Benchmark,
            "linear" => SynthKind::Linear,
            "nonlinear" => SynthKind::Nonlinear,
            "mixed_signal" | "mixed" => SynthKind::MixedSignal,
            _ => return None,
        })
    }

    /// Column count; `d` is honoured only by the Gaussian generator.
    pub fn width(&self, d: usize) -> usize {
        match self {
            SynthKind::Gaussian { .. } => d,
            SynthKind::Benchmark => 8,
            SynthKind::Linear | SynthKind::Nonlinear => 2,
            SynthKind::MixedSignal => 5,
        }
    }
}

pub fn make_synth(kind: SynthKind, n: usize, d: usize, seed: u64) -> (Array2<f64>, Schema) {
    let values = match kind {
        SynthKind::Gaussian { rho } => gaussian(n, d, rho, seed),
        SynthKind::Benchmark => benchmark(n, seed),
        SynthKind::Linear => {
            let z = normals(n, 2, seed);
            Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { z[[i, 0]] } else { 2.0 * z[[i, 0]] + 0.01 * z[[i, 1]] })
        }
        SynthKind::Nonlinear => {
            let mut rng = seed::rng(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { x[i] } else if x[i] > 0.0 { 1.0 } else { -1.0 })
        }
        SynthKind::MixedSignal => mixed_signal(n, seed),
    };
    let names = match kind {
        SynthKind::Benchmark => vec!["a", "b", "sum", "contrast", "wave", "product", "fold", "step"],
        SynthKind::Linear | SynthKind::Nonlinear => vec!["x", "y"],
        SynthKind::MixedSignal => vec!["u", "v", "linear", "tree", "noise"],
        SynthKind::Gaussian { .. } => Vec::new(),
    };
    let width = values.ncols();
    let mut schema = Schema::with_kinds(vec![ColumnKind::Continuous; width]);
    if !names.is_empty() {
        schema.names = names.into_iter().map(String::from).collect();
    }
    (values, schema)
}

fn normals(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed);
    Array2::from_shape_simple_fn((n, d), || rng.sample(StandardNormal))
}

pub fn gaussian(n: usize, d: usize, rho: f64, seed: u64) -> Array2<f64> {
    let cov = Array2::from_shape_fn((d, d), |(i, j)| rho.powi(i.abs_diff(j) as i32));
    let l = Cholesky::factor(&cov).expect("|rho| < 1 gives a positive definite correlation");
    normals(n, d, seed).dot(&l.lower().t())
}

fn benchmark(n: usize, seed: u64) -> Array2<f64> {
    let f = gaussian(n, 3, 0.5, seed::derive(seed, &[seed::label("latent")]));
    let e = normals(n, 8, seed::derive(seed, &[seed::label("noise")]));
    let mut out = Array2::zeros((n, 8));
    for (i, r) in f.axis_iter(Axis(0)).enumerate() {
        let (a, b, c) = (r[0], r[1], r[2]);
        out[[i, 0]] = a + 0.1 * e[[i, 0]];
        out[[i, 1]] = b + 0.1 * e[[i, 1]];
        out[[i, 2]] = a + b + 0.1 * e[[i, 2]];
        out[[i, 3]] = a - b + c + 0.1 * e[[i, 3]];
        out[[i, 4]] = (2.0 * a).sin() + 0.1 * e[[i, 4]];
        out[[i, 5]] = b * c + 0.1 * e[[i, 5]];
        out[[i, 6]] = c.abs() + 0.1 * e[[i, 6]];
        out[[i, 7]] = if a + c > 0.0 { 1.0 } else { -1.0 } + 0.1 * e[[i, 7]];
    }
    out
}

fn mixed_signal(n: usize, seed: u64) -> Array2<f64> {
    let z = normals(n, 5, seed);
    Array2::from_shape_fn((n, 5), |(i, j)| {
        let (u, v) = (z[[i, 0]], z[[i, 1]]);
        match j {
            0 => u,
            1 => v,
            2 => 1.5 * u - v + 0.1 * z[[i, 2]],
            3 => 2.0 * f64::from(u8::from(u > 0.0)) - f64::from(u8::from(v > 0.5)) + 0.1 * z[[i, 3]],
            _ => z[[i, 4]],
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_correlation_matches() {
        let x = gaussian(20000, 3, 0.6, 1);
        let c = |a: usize, b: usize| {
            let (ca, cb) = (x.column(a), x.column(b));
            ca.iter().zip(cb.iter()).map(|(p, q)| p * q).sum::<f64>() / 20000.0
        };
        assert!((c(0, 0) - 1.0).abs() < 0.05);
        assert!((c(0, 1) - 0.6).abs() < 0.03);
        assert!((c(0, 2) - 0.36).abs() < 0.03);
    }

    #[test]
    fn shapes_and_determinism() {
        for kind in [SynthKind::Benchmark, SynthKind::Linear, SynthKind::Nonlinear, SynthKind::MixedSignal] {
            let (a, s) = make_synth(kind, 50, 0, 3);
            assert_eq!(a.ncols(), kind.width(0));
            assert_eq!(s.names.len(), a.ncols());
            assert_eq!(a, make_synth(kind, 50, 0, 3).0);
            assert!(a.iter().all(|v| v.is_finite()));
        }
    }
}
