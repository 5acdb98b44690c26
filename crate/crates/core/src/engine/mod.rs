//! The iterative imputation loop: baseline fill, then per-column model
//! search, refit and overwrite until a stopping rule fires.

mod trace;

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{design_matrix, split_column, ColumnKind, DataError, ImputedDataset, IncompleteDataset};
use crate::learners::{default_config, fit_keyed, LearnerClass, LearnerConfig, Task, CATALOGUE};
use crate::metrics;
use crate::search::{
    calibrate_resource_scaling, model_search, ColumnEvaluator, Objective, Problem, ResourceScaling, SearchResult,
    SearchStrategy, SummedEvaluator,
};
use crate::seed;

pub use trace::{
    gamma_should_stop, sigma_should_skip, stale_rounds, stop_reason, ConvergenceTrace, IterationRecord, Selection,
    SelectionLog, StopReason,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
    #[error("iterative imputation needs at least 2 columns, got {0}")]
    TooFewColumns(usize),
    #[error("initial imputation does not match the dataset")]
    InitialMismatch,
}

pub type Result<T> = std::result::Result<T, EngineError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visitation {
    #[default]
    AscendingIndex,
    AscendingMissingness,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    Mean,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SkipPolicy {
    #[default]
    Never,
    ReuseAfterStable { m: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    Uniform,
    /// Probe fits on the first visited column at the start of the run.
    #[default]
    Calibrated,
}

/// The column-wise (A), automatic (B), adaptive (C) and flexible (D)
/// properties of the loop; switching one off yields an ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Per-column configs; otherwise one config chosen for all columns.
    pub column_wise: bool,
    /// Search for configs; otherwise class defaults.
    pub auto_select: bool,
    /// Search again every iteration; otherwise keep the first choice.
    pub adaptive: bool,
    /// Search the whole catalogue; otherwise only `restricted_class`.
    pub flexible: bool,
    pub restricted_class: Option<LearnerClass>,
    /// Replaces `restricted_class` on categorical columns.
    #[serde(default)]
    pub categorical_class: Option<LearnerClass>,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation {
            column_wise: true,
            auto_select: true,
            adaptive: true,
            flexible: true,
            restricted_class: None,
            categorical_class: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub max_outer_iters: usize,
    pub tol_imp: f64,
    pub objective_patience: usize,
    pub visitation: Visitation,
    pub strategy: SearchStrategy,
    pub baseline: Baseline,
    pub skip: SkipPolicy,
    pub ablation: Ablation,
    pub catalogue: Vec<LearnerClass>,
    pub folds: usize,
    pub scaling: ScalingMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_outer_iters: 10,
            tol_imp: 1e-3,
            objective_patience: 3,
            visitation: Visitation::default(),
            strategy: SearchStrategy::default(),
            baseline: Baseline::default(),
            skip: SkipPolicy::default(),
            ablation: Ablation::default(),
            catalogue: CATALOGUE.to_vec(),
            folds: 3,
            scaling: ScalingMode::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EngineError::InvalidConfig(m.to_string()));
        if self.max_outer_iters < 1 {
            return bad("max_outer_iters must be >= 1");
        }
        if !(self.tol_imp > 0.0) {
            return bad("tol_imp must be > 0");
        }
        if self.folds < 2 {
            return bad("folds must be >= 2");
        }
        if self.ablation.flexible == self.ablation.restricted_class.is_some() {
            return bad("restricted_class is required exactly when flexible is false");
        }
        if self.ablation.flexible && self.catalogue.is_empty() {
            return bad("catalogue is empty");
        }
        self.strategy
            .validate()
            .map_err(|e| EngineError::InvalidConfig(e.to_string()))
    }

    fn classes_for(&self, kind: ColumnKind) -> Vec<LearnerClass> {
        match (self.ablation.restricted_class, self.ablation.categorical_class) {
            (_, Some(c)) if kind.is_categorical() && !self.ablation.flexible => vec![c],
            (Some(c), _) if !self.ablation.flexible => vec![c],
            _ => self.catalogue.clone(),
        }
    }
}

/// The named settings of the source-of-gains study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "setting", content = "class", rename_all = "snake_case")]
pub enum AblationSetting {
    /// Classic chained equations: one class with default parameters.
    IceFixed(LearnerClass),
    /// One config searched over all columns jointly, then fixed.
    GlobalSearch,
    /// Per-column class from a naive search at the first iteration, then fixed.
    ColumnNaive,
    /// The full loop restricted to one class.
    WoFlexibility(LearnerClass),
    /// Per-column search at the first iteration only.
    WoAdaptivity,
    Full,
}

impl AblationSetting {
    pub fn apply(&self, base: &EngineConfig) -> EngineConfig {
        let mut config = base.clone();
        let full = Ablation::default();
        config.ablation = match *self {
            AblationSetting::IceFixed(c) => Ablation {
                auto_select: false,
                adaptive: false,
                flexible: false,
                restricted_class: Some(c),
                ..full
            },
            AblationSetting::GlobalSearch => Ablation {
                column_wise: false,
                adaptive: false,
                ..full
            },
            AblationSetting::ColumnNaive => {
                config.strategy = SearchStrategy::Naive;
                Ablation { adaptive: false, ..full }
            }
            AblationSetting::WoFlexibility(c) => Ablation {
                flexible: false,
                restricted_class: Some(c),
                ..full
            },
            AblationSetting::WoAdaptivity => Ablation { adaptive: false, ..full },
            AblationSetting::Full => full,
        };
        config
    }

    pub fn name(&self) -> String {
        match self {
            AblationSetting::IceFixed(c) => format!("ice_fixed({c})"),
            AblationSetting::GlobalSearch => "global_search".into(),
            AblationSetting::ColumnNaive => "column_naive".into(),
            AblationSetting::WoFlexibility(c) => format!("wo_flexibility({c})"),
            AblationSetting::WoAdaptivity => "wo_adaptivity".into(),
            AblationSetting::Full => "full".into(),
        }
    }
}

/// Fit counters for complexity accounting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub searches: usize,
    /// Candidate configs scored by cross-validation (cache hits excluded).
    pub evaluations: usize,
    pub cached_evaluations: usize,
    /// Final fits on a column's observed rows.
    pub refits: usize,
}

impl RunStats {
    pub fn fits(&self) -> usize {
        self.evaluations + self.refits
    }

    fn absorb(&mut self, result: &SearchResult) {
        self.searches += 1;
        let fitted = result.fitted();
        self.evaluations += fitted;
        self.cached_evaluations += result.evaluations.len() - fitted;
    }
}

#[derive(Clone, Debug)]
pub struct EngineOutput {
    pub imputed: ImputedDataset,
    pub log: SelectionLog,
    pub trace: ConvergenceTrace,
    pub stats: RunStats,
    pub scaling: Option<ResourceScaling>,
}

#[derive(Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Complete data for per-iteration RMSE and WD in the trace.
    pub truth: Option<ArrayView2<'a, f64>>,
    /// Starting imputation in place of the baseline fill.
    pub initial: Option<&'a ImputedDataset>,
}

/// Column mean for continuous columns, mode (smallest label on ties) for
/// categorical ones.
pub fn baseline_impute(dataset: &IncompleteDataset) -> Result<ImputedDataset> {
    if let Some(name) = dataset.fully_missing_columns().first() {
        return Err(DataError::FullyMissingColumn(name.to_string()).into());
    }
    let mut values = dataset.values().to_owned();
    for d in 0..dataset.n_cols() {
        if dataset.mask().column_missing(d) == 0 {
            continue;
        }
        let obs = dataset.observed_column(d);
        let fill = match dataset.kinds()[d] {
            ColumnKind::Continuous => obs.iter().sum::<f64>() / obs.len() as f64,
            ColumnKind::Categorical { cardinality } => {
                let mut counts = vec![0usize; cardinality + 1];
                for &v in &obs {
                    counts[v as usize] += 1;
                }
                let best = (1..=cardinality).max_by_key(|&k| (counts[k], std::cmp::Reverse(k))).unwrap_or(1);
                best as f64
            }
        };
        for i in 0..dataset.n_rows() {
            if !dataset.mask().is_observed(i, d) {
                values[[i, d]] = fill;
            }
        }
    }
    Ok(ImputedDataset::from_parts(dataset, values)?)
}

pub fn run_hyperimpute(dataset: &IncompleteDataset, config: &EngineConfig, seed: u64) -> Result<EngineOutput> {
    run_hyperimpute_with(dataset, config, seed, RunOptions::default())
}

/// Warm start from a previous imputation of the same dataset.
pub fn run_hyperimpute_from(
    dataset: &IncompleteDataset,
    initial: &ImputedDataset,
    config: &EngineConfig,
    seed: u64,
) -> Result<EngineOutput> {
    let options = RunOptions {
        initial: Some(initial),
        ..RunOptions::default()
    };
    run_hyperimpute_with(dataset, config, seed, options)
}

pub fn run_ablation(
    dataset: &IncompleteDataset,
    setting: AblationSetting,
    base: &EngineConfig,
    seed: u64,
    options: RunOptions<'_>,
) -> Result<EngineOutput> {
    run_hyperimpute_with(dataset, &setting.apply(base), seed, options)
}

/// Training data of one column under the current imputation.
struct ColumnData {
    task: Task,
    targets: Vec<f64>,
    x_obs: Array2<f64>,
    x_mis: Array2<f64>,
    obs_keys: Vec<u64>,
    mis_rows: Vec<usize>,
    degenerate: bool,
}

impl ColumnData {
    fn build(current: &ImputedDataset, d: usize, folds: usize) -> Result<Self> {
        let split = split_column(current, current.source_mask(), d)?;
        let kind = current.kinds()[d];
        let task = Task::for_kind(kind);
        let targets = split.target_obs;
        let degenerate = targets.len() < folds
            || match task {
                Task::Regression => targets.iter().all(|&v| v == targets[0]),
                Task::Classification { .. } => {
                    let first = targets[0];
                    targets.iter().all(|&v| v == first)
                }
            };
        Ok(ColumnData {
            task,
            x_obs: design_matrix(split.regressors_obs.view(), &split.regressor_kinds),
            x_mis: design_matrix(split.regressors_mis.view(), &split.regressor_kinds),
            obs_keys: split.obs_row_indices.iter().map(|&i| i as u64).collect(),
            mis_rows: split.mis_row_indices,
            targets,
            degenerate,
        })
    }

    fn evaluator(&self, folds: usize) -> ColumnEvaluator<'_> {
        ColumnEvaluator {
            problem: Problem::new(self.task, &self.targets, self.x_obs.view(), &self.obs_keys),
            objective: Objective {
                folds,
                ..Objective::for_task(self.task)
            },
        }
    }
}

struct Decision {
    config: LearnerConfig,
    score: Option<f64>,
    searched: bool,
    fallback: bool,
}

fn constant_decision() -> Decision {
    Decision {
        config: default_config(LearnerClass::Constant, Task::Regression),
        score: None,
        searched: false,
        fallback: true,
    }
}

pub fn run_hyperimpute_with(
    dataset: &IncompleteDataset,
    config: &EngineConfig,
    seed: u64,
    options: RunOptions<'_>,
) -> Result<EngineOutput> {
    config.validate()?;
    if dataset.n_cols() < 2 {
        return Err(EngineError::TooFewColumns(dataset.n_cols()));
    }
    let started = Instant::now();
    let mut current = match options.initial {
        Some(init) => {
            if init.source_mask() != dataset.mask() || init.n_cols() != dataset.n_cols() {
                return Err(EngineError::InitialMismatch);
            }
            ImputedDataset::from_parts(dataset, init.values().to_owned())?
        }
        None => baseline_impute(dataset)?,
    };
    let mask = dataset.mask().clone();
    let mut trace = ConvergenceTrace::default();
    let mut log = SelectionLog::default();
    let mut stats = RunStats::default();
    let eval_truth = |imp: &ImputedDataset| match options.truth {
        Some(t) if mask.n_missing() > 0 => metrics::evaluate(imp, t).ok().map(|r| (r.rmse, r.wd)),
        _ => None,
    };
    let metrics0 = eval_truth(&current);
    trace.records.push(IterationRecord {
        iteration: 0,
        objective: None,
        max_norm_change: None,
        rmse: metrics0.map(|m| m.0),
        wd: metrics0.map(|m| m.1),
        wall_time: started.elapsed().as_secs_f64(),
    });
    let mut order = mask.columns_with_missing();
    if order.is_empty() {
        trace.stop = Some(StopReason::NothingMissing);
        return Ok(EngineOutput {
            imputed: current,
            log,
            trace,
            stats,
            scaling: None,
        });
    }
    if config.visitation == Visitation::AscendingMissingness {
        order.sort_by_key(|&d| (mask.column_missing(d), d));
    }
    let scales = change_scales(dataset);
    let a = config.ablation;
    let mut scaling: Option<ResourceScaling> = None;
    let mut chosen: Vec<Option<LearnerConfig>> = vec![None; dataset.n_cols()];
    let mut global: Option<(LearnerConfig, f64)> = None;

    for iteration in 1..=config.max_outer_iters {
        let iter_start = Instant::now();
        let previous = current.values().to_owned();
        let mut objective = 0.0;
        let mut scored = 0usize;
        let mut complete = true;

        if a.auto_select && !a.column_wise && (iteration == 1 || a.adaptive) {
            let columns: Vec<ColumnData> = order
                .iter()
                .map(|&d| ColumnData::build(&current, d, config.folds))
                .collect::<Result<_>>()?;
            let usable: Vec<&ColumnData> = columns.iter().filter(|c| !c.degenerate).collect();
            let classes = config.classes_for(ColumnKind::Continuous);
            let scaling = ensure_scaling(&mut scaling, config, &classes, usable.first().copied(), seed);
            let summed = SummedEvaluator {
                columns: usable.iter().map(|c| c.evaluator(config.folds)).collect(),
            };
            let search_seed = seed::derive(seed, &[seed::label("search"), seed::label("global")]);
            global = if summed.columns.is_empty() {
                None
            } else {
                match model_search(&summed, &classes, &config.strategy, scaling, search_seed) {
                    Ok(r) => {
                        stats.absorb(&r);
                        Some((r.best, r.best_score))
                    }
                    Err(_) => None,
                }
            };
        }
        let global_fresh = !a.column_wise && (iteration == 1 || a.adaptive);

        for &d in &order {
            let data = ColumnData::build(&current, d, config.folds)?;
            let classes = config.classes_for(dataset.kinds()[d]);
            let decision = if data.degenerate {
                constant_decision()
            } else if !a.auto_select {
                Decision {
                    config: default_config(classes[0], data.task),
                    score: None,
                    searched: false,
                    fallback: false,
                }
            } else if !a.column_wise {
                match &global {
                    Some((c, s)) => Decision {
                        config: c.clone(),
                        score: global_fresh.then_some(*s),
                        searched: global_fresh,
                        fallback: false,
                    },
                    None => constant_decision(),
                }
            } else if let Some(prev) = chosen[d]
                .as_ref()
                .filter(|_| (!a.adaptive && iteration > 1) || sigma_should_skip(&log, d, config))
            {
                Decision {
                    config: prev.clone(),
                    score: None,
                    searched: false,
                    fallback: false,
                }
            } else {
                let scaling = ensure_scaling(&mut scaling, config, &classes, Some(&data), seed);
                let search_seed = seed::derive(seed, &[seed::label("search"), d as u64]);
                match model_search(&data.evaluator(config.folds), &classes, &config.strategy, scaling, search_seed) {
                    Ok(r) => {
                        stats.absorb(&r);
                        Decision {
                            config: r.best,
                            score: Some(r.best_score),
                            searched: true,
                            fallback: false,
                        }
                    }
                    Err(_) => constant_decision(),
                }
            };
            let fit_seed = seed::derive(seed, &[d as u64, seed::label("fit")]);
            let (decision, fills) = match refit_predict(&data, &decision.config, fit_seed) {
                Some(f) => (decision, f),
                None => {
                    let fallback = constant_decision();
                    let fills = refit_predict(&data, &fallback.config, fit_seed)
                        .expect("constant predictor fits any non-empty column");
                    (fallback, fills)
                }
            };
            stats.refits += 1;
            current.overwrite_missing(d, &data.mis_rows, &fills);
            if !decision.fallback {
                if let Some(s) = decision.score {
                    objective += s;
                    scored += 1;
                } else {
                    complete = false;
                }
                if decision.searched || chosen[d].is_none() {
                    chosen[d] = Some(decision.config.clone());
                }
            }
            log.entries.push(Selection {
                iteration,
                column: d,
                column_name: dataset.names()[d].clone(),
                class: decision.config.class,
                params: decision.config.params.clone(),
                resource_units: decision.config.resource_units,
                score: decision.score,
                searched: decision.searched,
                fallback: decision.fallback,
            });
        }
        let objective = if a.auto_select && !a.column_wise {
            // Per-column entries all carry the joint score; count it once.
            global.as_ref().filter(|_| global_fresh).map(|g| g.1)
        } else {
            (complete && scored > 0).then_some(objective)
        };
        let change = max_norm_change(previous.view(), current.values(), dataset, &scales);
        let m = eval_truth(&current);
        trace.records.push(IterationRecord {
            iteration,
            objective,
            max_norm_change: Some(change),
            rmse: m.map(|m| m.0),
            wd: m.map(|m| m.1),
            wall_time: iter_start.elapsed().as_secs_f64(),
        });
        if let Some(reason) = stop_reason(&trace, config) {
            trace.stop = Some(reason);
            break;
        }
    }
    Ok(EngineOutput {
        imputed: current,
        log,
        trace,
        stats,
        scaling,
    })
}

fn ensure_scaling<'s>(
    slot: &'s mut Option<ResourceScaling>,
    config: &EngineConfig,
    classes: &[LearnerClass],
    probe: Option<&ColumnData>,
    seed: u64,
) -> &'s ResourceScaling {
    slot.get_or_insert_with(|| {
        let max_resource = match config.strategy {
            SearchStrategy::Hyperband { max_resource, .. } => max_resource,
            _ => 1,
        };
        match (config.scaling, probe, config.strategy) {
            (ScalingMode::Calibrated, Some(p), SearchStrategy::Hyperband { .. }) => calibrate_resource_scaling(
                classes,
                p.task,
                &p.targets,
                p.x_obs.view(),
                max_resource,
                seed::derive(seed, &[seed::label("calibrate")]),
            ),
            _ => ResourceScaling::uniform(max_resource),
        }
    })
}

fn refit_predict(data: &ColumnData, config: &LearnerConfig, seed: u64) -> Option<Vec<f64>> {
    let model = fit_keyed(config, data.task, &data.targets, data.x_obs.view(), &data.obs_keys, seed).ok()?;
    let fills = model.predict(data.x_mis.view()).ok()?.imputations();
    fills.iter().all(|v| v.is_finite()).then_some(fills)
}

/// Population std of each continuous column's observed values (1 when
/// constant); unused for categorical columns.
fn change_scales(dataset: &IncompleteDataset) -> Vec<f64> {
    (0..dataset.n_cols())
        .map(|d| {
            let obs = dataset.observed_column(d);
            let n = obs.len() as f64;
            let mean = obs.iter().sum::<f64>() / n;
            let sd = (obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect()
}

fn max_norm_change(
    before: ArrayView2<'_, f64>,
    after: ArrayView2<'_, f64>,
    dataset: &IncompleteDataset,
    scales: &[f64],
) -> f64 {
    dataset
        .mask()
        .missing_cells()
        .map(|(i, d)| {
            let (a, b) = (before[[i, d]], after[[i, d]]);
            match dataset.kinds()[d] {
                ColumnKind::Continuous => (a - b).abs() / scales[d],
                ColumnKind::Categorical { .. } => f64::from(u8::from(a != b)),
            }
        })
        .fold(0.0, f64::max)
}
