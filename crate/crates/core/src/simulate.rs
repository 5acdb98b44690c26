//! Missingness simulators: MCAR, logistic MAR, and two MNAR variants.
//!
//! All simulators are pure functions of `(X, spec, seed)`.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Mask;
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum SimulateError {
    #[error("missingness rate must lie in (0, 1), got {0}")]
    Rate(f64),
    #[error("observed-column fraction must lie in (0, 1), got {0}")]
    ObservedFraction(f64),
    #[error("MAR-type mechanisms need at least 2 columns, got {0}")]
    TooFewColumns(usize),
    #[error("non-finite logistic inputs")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, SimulateError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Mcar,
    Mar,
    MnarInputMasked,
    MnarSelfCensor,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::MnarInputMasked => "mnar_input_masked",
            Mechanism::MnarSelfCensor => "mnar_self_censor",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mcar" => Some(Mechanism::Mcar),
            "mar" => Some(Mechanism::Mar),
            "mnar_input_masked" | "mnar_input" | "mnar" => Some(Mechanism::MnarInputMasked),
            "mnar_self_censor" | "mnar_censor" => Some(Mechanism::MnarSelfCensor),
            _ => None,
        }
    }
}

/// Which tail of each column self-censoring removes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorTail {
    #[default]
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    pub rate: f64,
    #[serde(default = "default_observed_fraction")]
    pub mar_observed_fraction: f64,
    #[serde(default)]
    pub censor_tail: CensorTail,
    pub seed: u64,
}

pub fn default_observed_fraction() -> f64 {
    0.3
}

impl MissingnessSpec {
    pub fn new(mechanism: Mechanism, rate: f64, seed: u64) -> Self {
        MissingnessSpec {
            mechanism,
            rate,
            mar_observed_fraction: default_observed_fraction(),
            censor_tail: CensorTail::Upper,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_rate(self.rate)?;
        if !(self.mar_observed_fraction > 0.0 && self.mar_observed_fraction < 1.0) {
            return Err(SimulateError::ObservedFraction(self.mar_observed_fraction));
        }
        Ok(())
    }
}

/// Parameters of the logistic MAR masking model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarModel {
    /// Columns kept fully observed, ascending.
    pub observed_cols: Vec<usize>,
    /// Columns subject to masking, ascending.
    pub maskable_cols: Vec<usize>,
    /// `weights[k]` are the coefficients of maskable column `k` over the
    /// standardized observed columns.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate < 1.0 {
        Ok(())
    } else {
        Err(SimulateError::Rate(rate))
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

// Independent random streams per simulator stage.
const STREAM_MCAR: u64 = 1;
const STREAM_COLUMNS: u64 = 2;
const STREAM_WEIGHTS: u64 = 3;
const STREAM_MAR_DRAWS: u64 = 4;
const STREAM_INPUT_DRAWS: u64 = 5;

/// Masks each cell independently with probability `rate`. The mask depends
/// only on the shape of `x` and the seed.
pub fn simulate_mcar(x: ArrayView2<'_, f64>, rate: f64, seed: u64) -> Result<Mask> {
    check_rate(rate)?;
    let mut rng = seed::rng(seed::derive(seed, &[STREAM_MCAR]));
    let (n, d) = x.dim();
    let bits = Array2::from_shape_simple_fn((n, d), || rng.random::<f64>() >= rate);
    Ok(Mask::new(bits))
}

/// Finds `b` so that the mean of `sigmoid(w . x_n + b)` over the rows of
/// `inputs` equals `target_rate`, by bisection on `[-50, 50]`.
pub fn calibrate_bias(weights: &[f64], inputs: ArrayView2<'_, f64>, target_rate: f64) -> Result<f64> {
    check_rate(target_rate)?;
    let logits: Vec<f64> = inputs
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(weights).map(|(x, w)| x * w).sum())
        .collect();
    if logits.iter().any(|v: &f64| !v.is_finite()) || weights.iter().any(|w| !w.is_finite()) {
        return Err(SimulateError::NonFinite);
    }
    let mean_rate = |b: f64| -> f64 {
        if logits.is_empty() {
            sigmoid(b)
        } else {
            logits.iter().map(|l| sigmoid(l + b)).sum::<f64>() / logits.len() as f64
        }
    };
    let (mut lo, mut hi) = (-50.0f64, 50.0f64);
    let mut mid = 0.0;
    // Bisect to machine precision; the mean-rate tolerance of 1e-4 is then
    // met whenever the target is attainable inside the bracket.
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        if hi - lo < 1e-13 {
            break;
        }
        if mean_rate(mid) < target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

fn standardized(x: ArrayView2<'_, f64>, cols: &[usize]) -> Result<Array2<f64>> {
    let mut sub = x.select(Axis(1), cols);
    if sub.iter().any(|v| !v.is_finite()) {
        return Err(SimulateError::NonFinite);
    }
    let n = sub.nrows().max(1) as f64;
    for mut col in sub.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        col.mapv_inplace(|v| (v - mean) / sd);
    }
    Ok(sub)
}

/// Logistic MAR: a random subset of columns stays fully observed and drives
/// the missingness of the remaining columns.
pub fn simulate_mar(
    x: ArrayView2<'_, f64>,
    rate: f64,
    mar_observed_fraction: f64,
    seed: u64,
) -> Result<(Mask, MarModel)> {
    check_rate(rate)?;
    if !(mar_observed_fraction > 0.0 && mar_observed_fraction < 1.0) {
        return Err(SimulateError::ObservedFraction(mar_observed_fraction));
    }
    let (n, d) = x.dim();
    if d < 2 {
        return Err(SimulateError::TooFewColumns(d));
    }
    let n_observed = ((mar_observed_fraction * d as f64).ceil() as usize).clamp(1, d - 1);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, &[STREAM_COLUMNS])));
    let mut observed_cols = order[..n_observed].to_vec();
    let mut maskable_cols = order[n_observed..].to_vec();
    observed_cols.sort_unstable();
    maskable_cols.sort_unstable();

    let inputs = standardized(x, &observed_cols)?;
    let mut weight_rng = seed::rng(seed::derive(seed, &[STREAM_WEIGHTS]));
    let weights: Vec<Vec<f64>> = maskable_cols
        .iter()
        .map(|_| {
            (0..n_observed)
                .map(|_| weight_rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let bias = weights
        .iter()
        .map(|w| calibrate_bias(w, inputs.view(), rate))
        .collect::<Result<Vec<f64>>>()?;

    let mut bits = Array2::from_elem((n, d), true);
    let mut draw_rng = seed::rng(seed::derive(seed, &[STREAM_MAR_DRAWS]));
    for i in 0..n {
        let row = inputs.row(i);
        for (k, &col) in maskable_cols.iter().enumerate() {
            let logit: f64 = row.iter().zip(&weights[k]).map(|(a, w)| a * w).sum::<f64>() + bias[k];
            if draw_rng.random::<f64>() < sigmoid(logit) {
                bits[[i, col]] = false;
            }
        }
    }
    Ok((
        Mask::new(bits),
        MarModel {
            observed_cols,
            maskable_cols,
            weights,
            bias,
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MnarVariant {
    /// MAR, then the MAR input columns are masked by independent Bernoulli
    /// draws at the same rate.
    InputMasked,
    /// Each column loses the values beyond its empirical quantile.
    SelfCensor(CensorTail),
}

pub fn simulate_mnar(
    x: ArrayView2<'_, f64>,
    rate: f64,
    variant: MnarVariant,
    mar_observed_fraction: f64,
    seed: u64,
) -> Result<Mask> {
    check_rate(rate)?;
    let (n, d) = x.dim();
    if d < 2 {
        return Err(SimulateError::TooFewColumns(d));
    }
    match variant {
        MnarVariant::InputMasked => {
            let (mask, model) = simulate_mar(x, rate, mar_observed_fraction, seed)?;
            let mut bits = mask.bits().clone();
            let mut rng = seed::rng(seed::derive(seed, &[STREAM_INPUT_DRAWS]));
            for i in 0..n {
                for &col in &model.observed_cols {
                    if rng.random::<f64>() < rate {
                        bits[[i, col]] = false;
                    }
                }
            }
            Ok(Mask::new(bits))
        }
        MnarVariant::SelfCensor(tail) => {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimulateError::NonFinite);
            }
            let mut bits = Array2::from_elem((n, d), true);
            // keep at least one observed value per column
            let n_censor = ((rate * n as f64).round() as usize).min(n.saturating_sub(1));
            if n_censor == 0 {
                return Ok(Mask::new(bits));
            }
            for (j, col) in x.columns().into_iter().enumerate() {
                let mut sorted = col.to_vec();
                sorted.sort_by(f64::total_cmp);
                match tail {
                    CensorTail::Upper => {
                        let threshold = sorted[n - n_censor - 1];
                        for (i, &v) in col.iter().enumerate() {
                            if v > threshold {
                                bits[[i, j]] = false;
                            }
                        }
                    }
                    CensorTail::Lower => {
                        let threshold = sorted[n_censor];
                        for (i, &v) in col.iter().enumerate() {
                            if v < threshold {
                                bits[[i, j]] = false;
                            }
                        }
                    }
                }
            }
            Ok(Mask::new(bits))
        }
    }
}

/// Dispatches on the mechanism of `spec`.
pub fn simulate(x: ArrayView2<'_, f64>, spec: &MissingnessSpec) -> Result<Mask> {
    spec.validate()?;
    match spec.mechanism {
        Mechanism::Mcar => simulate_mcar(x, spec.rate, spec.seed),
        Mechanism::Mar => simulate_mar(x, spec.rate, spec.mar_observed_fraction, spec.seed).map(|(m, _)| m),
        Mechanism::MnarInputMasked => simulate_mnar(
            x,
            spec.rate,
            MnarVariant::InputMasked,
            spec.mar_observed_fraction,
            spec.seed,
        ),
        Mechanism::MnarSelfCensor => simulate_mnar(
            x,
            spec.rate,
            MnarVariant::SelfCensor(spec.censor_tail),
            spec.mar_observed_fraction,
            spec.seed,
        ),
    }
}
