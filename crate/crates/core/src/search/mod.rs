//! Per-column model search: cross-validated scoring of learner configs and
//! the Naive, Random and Hyperband strategies over the joint space of
//! classes and hyperparameters.

mod cv;
mod hyperband;
mod scaling;

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{default_config, sample_config, set_resource, LearnerClass, LearnerConfig, LearnerError, Task};
use crate::seed;

pub use cv::{assign_folds, cv_objective, Problem};
pub use hyperband::{hyperband_schedule, model_search_hyperband, schedule_evaluations, Bracket, Rung};
pub use scaling::{calibrate_resource_scaling, ClassScaling, ResourceScaling};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("insufficient data: {rows} rows for {folds} folds")]
    InsufficientData { rows: usize, folds: usize },
    #[error("empty catalogue")]
    EmptyCatalogue,
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("every candidate failed; last error: {0}")]
    Learner(#[from] LearnerError),
    #[error("objective does not match the prediction type")]
    ObjectiveMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    MinRmse,
    MinNegAuroc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub folds: usize,
}

impl Objective {
    pub fn for_task(task: Task) -> Self {
        let kind = if task.is_classification() {
            ObjectiveKind::MinNegAuroc
        } else {
            ObjectiveKind::MinRmse
        };
        Objective { kind, folds: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchStrategy {
    Naive,
    Random { n_samples: usize },
    Hyperband { eta: u32, max_resource: u32 },
}

impl Default for SearchStrategy {
    fn default() -> Self {
        SearchStrategy::Hyperband {
            eta: 3,
            max_resource: 27,
        }
    }
}

impl SearchStrategy {
    pub fn validate(&self) -> Result<(), SearchError> {
        match *self {
            SearchStrategy::Hyperband { eta, max_resource } => hyperband_schedule(eta, max_resource).map(|_| ()),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub config: LearnerConfig,
    pub score: f64,
    /// Abstract resource units (Hyperband), or the native budget otherwise.
    pub resource: u32,
    pub wall_time: f64,
    /// Served from the per-search score cache instead of refitting.
    pub cached: bool,
    /// `(bracket, rung)` for Hyperband evaluations.
    pub stage: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: LearnerConfig,
    pub best_score: f64,
    pub evaluations: Vec<Evaluation>,
}

impl SearchResult {
    /// Argmin over `evaluations`, earliest wins ties.
    pub fn from_evaluations(evaluations: Vec<Evaluation>) -> Result<Self, SearchError> {
        let mut best: Option<usize> = None;
        for (i, e) in evaluations.iter().enumerate() {
            if e.score.is_finite() && best.is_none_or(|b| e.score < evaluations[b].score) {
                best = Some(i);
            }
        }
        let Some(b) = best else {
            return Err(SearchError::InvalidStrategy("no candidate produced a finite score".into()));
        };
        Ok(SearchResult {
            best: evaluations[b].config.clone(),
            best_score: evaluations[b].score,
            evaluations,
        })
    }

    /// Candidate fits actually performed, excluding cache hits.
    pub fn fitted(&self) -> usize {
        self.evaluations.iter().filter(|e| !e.cached).count()
    }
}

/// Scores a config; lower is better.
pub trait Evaluator: Sync {
    fn task(&self) -> Task;
    fn score(&self, config: &LearnerConfig, seed: u64) -> Result<f64, SearchError>;
}

/// Cross-validated score on a single column.
pub struct ColumnEvaluator<'a> {
    pub problem: Problem<'a>,
    pub objective: Objective,
}

impl Evaluator for ColumnEvaluator<'_> {
    fn task(&self) -> Task {
        self.problem.task
    }

    fn score(&self, config: &LearnerConfig, seed: u64) -> Result<f64, SearchError> {
        cv_objective(config, &self.problem, &self.objective, seed)
    }
}

/// Sum of per-column cross-validated scores, for choosing one config
/// shared by all columns.
pub struct SummedEvaluator<'a> {
    pub columns: Vec<ColumnEvaluator<'a>>,
}

impl Evaluator for SummedEvaluator<'_> {
    fn task(&self) -> Task {
        self.columns.first().map_or(Task::Regression, |c| c.problem.task)
    }

    fn score(&self, config: &LearnerConfig, seed: u64) -> Result<f64, SearchError> {
        let mut total = 0.0;
        for (d, col) in self.columns.iter().enumerate() {
            total += col.score(config, seed::derive(seed, &[d as u64]))?;
        }
        Ok(total)
    }
}

pub(crate) struct Candidate {
    config: LearnerConfig,
    resource: u32,
    stage: Option<(usize, usize)>,
}

impl Candidate {
    fn plain(config: LearnerConfig) -> Self {
        let resource = config.resource_units;
        Candidate {
            config,
            resource,
            stage: None,
        }
    }

    fn at_resource(config: &LearnerConfig, units: u32, scaling: &ResourceScaling, stage: Option<(usize, usize)>) -> Self {
        Candidate {
            config: set_resource(config, scaling.native(config.class, units)),
            resource: units,
            stage,
        }
    }
}

/// Scores a batch in parallel and returns evaluations in candidate order.
/// Configs already scored in this search are served from `cache`. A
/// learner failure on one candidate scores it `+inf`; data-level errors
/// abort the search.
pub(crate) fn run_batch(
    evaluator: &dyn Evaluator,
    candidates: &[Candidate],
    cache: &mut HashMap<String, f64>,
    seed: u64,
) -> Result<Vec<Evaluation>, SearchError> {
    let keys: Vec<String> = candidates.iter().map(|c| c.config.key()).collect();
    let fresh: Vec<Option<Result<(f64, f64), SearchError>>> = candidates
        .par_iter()
        .zip(keys.par_iter())
        .map(|(c, k)| {
            if cache.contains_key(k) {
                return None;
            }
            let start = Instant::now();
            let score = match evaluator.score(&c.config, seed) {
                Ok(s) => Ok(s),
                Err(SearchError::Learner(_)) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            };
            Some(score.map(|s| (s, start.elapsed().as_secs_f64())))
        })
        .collect();
    let mut out = Vec::with_capacity(candidates.len());
    for ((c, k), f) in candidates.iter().zip(keys).zip(fresh) {
        let (score, wall_time, cached) = match f {
            Some(r) => {
                let (s, t) = r?;
                (s, t, false)
            }
            None => (cache[&k], 0.0, true),
        };
        // A duplicate inside one batch is scored twice; later copies count as cached.
        let cached = cached || cache.contains_key(&k);
        cache.entry(k).or_insert(score);
        out.push(Evaluation {
            config: c.config.clone(),
            score,
            resource: c.resource,
            wall_time,
            cached,
            stage: c.stage,
        });
    }
    Ok(out)
}

/// One evaluation of each class's defaults; catalogue order breaks ties.
pub fn model_search_naive(evaluator: &dyn Evaluator, catalogue: &[LearnerClass], seed: u64) -> Result<SearchResult, SearchError> {
    if catalogue.is_empty() {
        return Err(SearchError::EmptyCatalogue);
    }
    let task = evaluator.task();
    let candidates: Vec<Candidate> = catalogue.iter().map(|&c| Candidate::plain(default_config(c, task))).collect();
    let evaluations = run_batch(evaluator, &candidates, &mut HashMap::new(), seed)?;
    SearchResult::from_evaluations(evaluations)
}

/// The catalogue defaults followed by `n_samples` uniform draws, classes
/// taken round-robin. `n_samples = 0` is exactly the naive search.
pub fn model_search_random(
    evaluator: &dyn Evaluator,
    catalogue: &[LearnerClass],
    n_samples: usize,
    seed: u64,
) -> Result<SearchResult, SearchError> {
    if catalogue.is_empty() {
        return Err(SearchError::EmptyCatalogue);
    }
    let task = evaluator.task();
    let mut candidates: Vec<Candidate> = catalogue.iter().map(|&c| Candidate::plain(default_config(c, task))).collect();
    for i in 0..n_samples {
        let class = catalogue[i % catalogue.len()];
        let mut rng = seed::rng(seed::derive(seed, &[seed::label("random"), i as u64]));
        candidates.push(Candidate::plain(sample_config(class, task, &mut rng)));
    }
    let evaluations = run_batch(evaluator, &candidates, &mut HashMap::new(), seed)?;
    SearchResult::from_evaluations(evaluations)
}

pub fn model_search(
    evaluator: &dyn Evaluator,
    catalogue: &[LearnerClass],
    strategy: &SearchStrategy,
    scaling: &ResourceScaling,
    seed: u64,
) -> Result<SearchResult, SearchError> {
    match *strategy {
        SearchStrategy::Naive => model_search_naive(evaluator, catalogue, seed),
        SearchStrategy::Random { n_samples } => model_search_random(evaluator, catalogue, n_samples, seed),
        SearchStrategy::Hyperband { eta, max_resource } => {
            model_search_hyperband(evaluator, catalogue, eta, max_resource, scaling, seed)
        }
    }
}
