//! Benchmark imputers: mean/mode, chained equations with linear or forest
//! learners, k-nearest neighbours and SoftImpute.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ColumnKind, ImputedDataset, IncompleteDataset};
use crate::engine::{self, AblationSetting, EngineConfig, EngineError, RunOptions};
use crate::learners::LearnerClass;
use crate::linalg::svd;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid baseline parameter: {0}")]
    InvalidParameter(String),
    #[error("SVD failed to converge")]
    NonConvergentSvd,
}

pub type Result<T> = std::result::Result<T, BaselineError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineKind {
    Mean,
    IceLinear,
    IterativeForest,
    Knn { k: usize },
    SoftImpute { lambda: f64, max_iters: usize, tol: f64 },
}

impl BaselineKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BaselineKind::Knn { k } if k < 1 => Err(BaselineError::InvalidParameter("k must be >= 1".into())),
            BaselineKind::SoftImpute { lambda, tol, .. } if !(lambda >= 0.0) || !(tol > 0.0) => Err(
                BaselineError::InvalidParameter("softimpute needs lambda >= 0 and tol > 0".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            BaselineKind::Mean => "mean".into(),
            BaselineKind::IceLinear => "ice_linear".into(),
            BaselineKind::IterativeForest => "iterative_forest".into(),
            BaselineKind::Knn { k } => format!("knn(k={k})"),
            BaselineKind::SoftImpute { lambda, max_iters, tol } => {
                format!("softimpute(lambda={lambda},max_iters={max_iters},tol={tol})")
            }
        }
    }
}

/// Runs a baseline; chained-equation baselines take their iteration budget
/// and tolerance from `engine`.
pub fn run_baseline(dataset: &IncompleteDataset, kind: BaselineKind, engine: &EngineConfig, seed: u64) -> Result<ImputedDataset> {
    kind.validate()?;
    match kind {
        BaselineKind::Mean => impute_mean(dataset),
        BaselineKind::IceLinear => impute_ice_linear(dataset, engine.max_outer_iters, engine.tol_imp, seed),
        BaselineKind::IterativeForest => impute_iterative_forest(dataset, engine.max_outer_iters, engine.tol_imp, seed),
        BaselineKind::Knn { k } => impute_knn(dataset, k),
        BaselineKind::SoftImpute { lambda, max_iters, tol } => {
            impute_softimpute(dataset, lambda, max_iters, tol).map(|r| r.imputed)
        }
    }
}

pub fn impute_mean(dataset: &IncompleteDataset) -> Result<ImputedDataset> {
    Ok(engine::baseline_impute(dataset)?)
}

fn ice_config(class: LearnerClass, categorical: Option<LearnerClass>, k: usize, tol: f64) -> EngineConfig {
    let base = EngineConfig {
        max_outer_iters: k,
        tol_imp: tol,
        ..EngineConfig::default()
    };
    let mut config = AblationSetting::IceFixed(class).apply(&base);
    config.ablation.categorical_class = categorical;
    config
}

/// Chained equations with ridge for continuous and logistic regression for
/// categorical columns, default parameters.
pub fn impute_ice_linear(dataset: &IncompleteDataset, k: usize, tol: f64, seed: u64) -> Result<ImputedDataset> {
    let config = ice_config(LearnerClass::LinearRidge, Some(LearnerClass::Logistic), k, tol);
    Ok(engine::run_hyperimpute_with(dataset, &config, seed, RunOptions::default())?.imputed)
}

/// Chained equations with a random forest per column.
pub fn impute_iterative_forest(dataset: &IncompleteDataset, k: usize, tol: f64, seed: u64) -> Result<ImputedDataset> {
    let config = ice_config(LearnerClass::RandomForest, None, k, tol);
    Ok(engine::run_hyperimpute_with(dataset, &config, seed, RunOptions::default())?.imputed)
}

/// Per-column (mean, std) of observed values, std 1 when constant.
fn observed_moments(dataset: &IncompleteDataset) -> Vec<(f64, f64)> {
    (0..dataset.n_cols())
        .map(|d| {
            let obs = dataset.observed_column(d);
            let n = obs.len().max(1) as f64;
            let mean = obs.iter().sum::<f64>() / n;
            let sd = (obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
        })
        .collect()
}

/// Fills each missing cell with the mean (continuous) or mode (categorical)
/// of its `k` nearest rows among those observing the column.
///
/// Distances use standardized continuous coordinates and 0/1 mismatch for
/// categorical ones, over coordinates observed in both rows, scaled up by
/// `D / shared`. Rows sharing no coordinate are never neighbours; a cell
/// with no eligible neighbour falls back to the column mean or mode.
pub fn impute_knn(dataset: &IncompleteDataset, k: usize) -> Result<ImputedDataset> {
    if k < 1 {
        return Err(BaselineError::InvalidParameter("k must be >= 1".into()));
    }
    let baseline = engine::baseline_impute(dataset)?;
    let (n, dim) = (dataset.n_rows(), dataset.n_cols());
    let mask = dataset.mask();
    let kinds = dataset.kinds();
    let moments = observed_moments(dataset);
    let x = dataset.values();
    let z = Array2::from_shape_fn((n, dim), |(i, j)| match kinds[j] {
        ColumnKind::Continuous => (x[[i, j]] - moments[j].0) / moments[j].1,
        ColumnKind::Categorical { .. } => x[[i, j]],
    });
    let mut values = baseline.values().to_owned();
    for i in 0..n {
        let missing: Vec<usize> = (0..dim).filter(|&j| !mask.is_observed(i, j)).collect();
        if missing.is_empty() {
            continue;
        }
        let dist: Vec<f64> = (0..n)
            .map(|r| {
                if r == i {
                    return f64::INFINITY;
                }
                let mut sum = 0.0;
                let mut shared = 0usize;
                for j in 0..dim {
                    if mask.is_observed(i, j) && mask.is_observed(r, j) {
                        shared += 1;
                        sum += match kinds[j] {
                            ColumnKind::Continuous => (z[[i, j]] - z[[r, j]]).powi(2),
                            ColumnKind::Categorical { .. } => f64::from(u8::from(z[[i, j]] != z[[r, j]])),
                        };
                    }
                }
                if shared == 0 {
                    f64::INFINITY
                } else {
                    (sum * dim as f64 / shared as f64).sqrt()
                }
            })
            .collect();
        for &d in &missing {
            let mut donors: Vec<usize> = (0..n).filter(|&r| mask.is_observed(r, d) && dist[r].is_finite()).collect();
            if donors.is_empty() {
                continue;
            }
            donors.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
            donors.truncate(k);
            values[[i, d]] = match kinds[d] {
                ColumnKind::Continuous => donors.iter().map(|&r| x[[r, d]]).sum::<f64>() / donors.len() as f64,
                ColumnKind::Categorical { cardinality } => {
                    let mut counts = vec![0usize; cardinality + 1];
                    for &r in &donors {
                        counts[x[[r, d]] as usize] += 1;
                    }
                    (1..=cardinality).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap_or(1) as f64
                }
            };
        }
    }
    Ok(ImputedDataset::from_parts(dataset, values).map_err(EngineError::from)?)
}

#[derive(Clone, Debug)]
pub struct SoftImputeResult {
    pub imputed: ImputedDataset,
    /// `0.5 ||P_obs(X - 1 mu^T - Z)||^2 + lambda ||Z||_*` after each
    /// iteration at the requested lambda, on the standardized scale.
    pub objective: Vec<f64>,
    /// Over the whole lambda path.
    pub iterations: usize,
    pub converged: bool,
}

/// Column layout of the standardized, one-hot expanded working matrix.
enum Block {
    Continuous { at: usize, mean: f64, sd: f64 },
    Categorical { at: usize, cardinality: usize },
}

/// Iterated SVD soft-thresholding of `X = 1 mu^T + Z` with an unpenalized
/// column offset `mu`. Continuous columns are standardized by their
/// observed moments; categorical columns are one-hot expanded and decoded
/// by argmax. Stops when the relative Frobenius change of the
/// estimate is at most `tol`, or after `max_iters` iterations.
pub fn impute_softimpute(dataset: &IncompleteDataset, lambda: f64, max_iters: usize, tol: f64) -> Result<SoftImputeResult> {
    if !(lambda >= 0.0) || !(tol > 0.0) || max_iters < 1 {
        return Err(BaselineError::InvalidParameter(
            "softimpute needs lambda >= 0, tol > 0 and max_iters >= 1".into(),
        ));
    }
    if let Some(name) = dataset.fully_missing_columns().first() {
        return Err(EngineError::from(crate::data::DataError::FullyMissingColumn(name.to_string())).into());
    }
    let (n, dim) = (dataset.n_rows(), dataset.n_cols());
    let mask = dataset.mask();
    let x = dataset.values();
    let moments = observed_moments(dataset);
    let mut blocks = Vec::with_capacity(dim);
    let mut width = 0;
    for (j, kind) in dataset.kinds().iter().enumerate() {
        match kind {
            ColumnKind::Continuous => {
                blocks.push(Block::Continuous {
                    at: width,
                    mean: moments[j].0,
                    sd: moments[j].1,
                });
                width += 1;
            }
            ColumnKind::Categorical { cardinality } => {
                blocks.push(Block::Categorical {
                    at: width,
                    cardinality: *cardinality,
                });
                width += cardinality;
            }
        }
    }
    let mut target = Array2::<f64>::zeros((n, width));
    let mut observed = Array2::from_elem((n, width), false);
    for i in 0..n {
        for (j, block) in blocks.iter().enumerate() {
            if !mask.is_observed(i, j) {
                continue;
            }
            match *block {
                Block::Continuous { at, mean, sd } => {
                    target[[i, at]] = (x[[i, j]] - mean) / sd;
                    observed[[i, at]] = true;
                }
                Block::Categorical { at, cardinality } => {
                    for c in 0..cardinality {
                        target[[i, at + c]] = f64::from(u8::from(x[[i, j]] as usize == c + 1));
                        observed[[i, at + c]] = true;
                    }
                }
            }
        }
    }
    // Missing cells start at the standardized mean (0) and at the observed
    // level frequencies for one-hot blocks.
    let mut z = target.clone();
    for (j, block) in blocks.iter().enumerate() {
        if let Block::Categorical { at, cardinality } = *block {
            let obs = dataset.observed_column(j);
            for c in 0..cardinality {
                let freq = obs.iter().filter(|&&v| v as usize == c + 1).count() as f64 / obs.len() as f64;
                for i in 0..n {
                    if !mask.is_observed(i, j) {
                        z[[i, at + c]] = freq;
                    }
                }
            }
        }
    }
    // Warm-started path over decreasing lambda: a single small-lambda solve
    // moves missing cells by about lambda per sweep.
    let fill = |z: &Array2<f64>| Array2::from_shape_fn((n, width), |(i, j)| if observed[[i, j]] { target[[i, j]] } else { z[[i, j]] });
    let top = svd(centered(fill(&z)).view()).ok_or(BaselineError::NonConvergentSvd)?.s.first().copied().unwrap_or(0.0);
    let mut iterations = 0;
    if lambda > 0.0 && top > lambda {
        for k in 1..PATH_STEPS {
            let step = top * (lambda / top).powf(k as f64 / PATH_STEPS as f64);
            iterations += soft_threshold(&mut z, &fill, step, max_iters, tol, None)?.0;
        }
    }
    let mut history = Vec::new();
    let (n_final, converged) = soft_threshold(&mut z, &fill, lambda, max_iters, tol, Some((target.view(), &observed, &mut history)))?;
    iterations += n_final;
    let mut values = x.to_owned();
    for i in 0..n {
        for (j, block) in blocks.iter().enumerate() {
            if mask.is_observed(i, j) {
                continue;
            }
            values[[i, j]] = match *block {
                Block::Continuous { at, mean, sd } => z[[i, at]] * sd + mean,
                Block::Categorical { at, cardinality } => {
                    let mut best = 0;
                    for c in 1..cardinality {
                        if z[[i, at + c]] > z[[i, at + best]] {
                            best = c;
                        }
                    }
                    (best + 1) as f64
                }
            };
        }
    }
    Ok(SoftImputeResult {
        imputed: ImputedDataset::from_parts(dataset, values).map_err(EngineError::from)?,
        objective: history,
        iterations,
        converged,
    })
}

const PATH_STEPS: usize = 20;

type Recorder<'a, 'b> = Option<(ArrayView2<'a, f64>, &'b Array2<bool>, &'b mut Vec<f64>)>;

fn centered(mut m: Array2<f64>) -> Array2<f64> {
    if let Some(mean) = m.mean_axis(Axis(0)) {
        m -= &mean;
    }
    m
}

/// Iterates `z <- mu + S_lambda(fill(z) - mu)`, with `mu` the column means
/// of `fill(z)`, until the relative change is below `tol`.
fn soft_threshold(
    z: &mut Array2<f64>,
    fill: &impl Fn(&Array2<f64>) -> Array2<f64>,
    lambda: f64,
    max_iters: usize,
    tol: f64,
    mut record: Recorder<'_, '_>,
) -> Result<(usize, bool)> {
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let filled = fill(z);
        let offset = filled.mean_axis(Axis(0)).expect("non-empty");
        let s = svd(centered(filled).view()).ok_or(BaselineError::NonConvergentSvd)?;
        let next = s.reconstruct_with(|v| (v - lambda).max(0.0)) + &offset;
        if let Some((target, observed, history)) = record.as_mut() {
            let nuclear: f64 = s.s.iter().map(|v| (v - lambda).max(0.0)).sum();
            history.push(objective(*target, next.view(), observed, lambda, nuclear));
        }
        let diff: f64 = (&next - &*z).iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        *z = next;
        if diff <= tol * norm.max(1e-12) {
            return Ok((iterations, true));
        }
    }
    Ok((iterations, false))
}

fn objective(target: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>, observed: &Array2<bool>, lambda: f64, nuclear: f64) -> f64 {
    let fit: f64 = target
        .iter()
        .zip(z.iter())
        .zip(observed.iter())
        .filter(|(_, &o)| o)
        .map(|((a, b), _)| (a - b).powi(2))
        .sum();
    0.5 * fit + lambda * nuclear
}
