use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EngineConfig, SkipPolicy};
use crate::learners::{LearnerClass, LearnerConfig, ParamValue};

/// One column visit within an outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub iteration: usize,
    pub column: usize,
    pub column_name: String,
    pub class: LearnerClass,
    pub params: BTreeMap<String, ParamValue>,
    pub resource_units: u32,
    /// Cross-validated score of the chosen config, when a search ran.
    pub score: Option<f64>,
    pub searched: bool,
    /// The column was degenerate or every candidate failed; a constant
    /// predictor was installed instead.
    #[serde(default)]
    pub fallback: bool,
}

impl Selection {
    pub fn config(&self) -> LearnerConfig {
        LearnerConfig {
            class: self.class,
            params: self.params.clone(),
            resource_units: self.resource_units,
        }
    }

    fn same_choice(&self, other: &Selection) -> bool {
        self.class == other.class && self.params == other.params
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionLog {
    pub entries: Vec<Selection>,
}

impl SelectionLog {
    pub fn for_column(&self, column: usize) -> impl DoubleEndedIterator<Item = &Selection> {
        self.entries.iter().filter(move |e| e.column == column)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Sum of the best cross-validated scores over the columns searched in
    /// this iteration; absent when some visited column reused a config.
    pub objective: Option<f64>,
    /// Largest change of any imputed cell against the previous iteration,
    /// continuous cells in units of their column's observed std.
    pub max_norm_change: Option<f64>,
    pub rmse: Option<f64>,
    pub wd: Option<f64>,
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NothingMissing,
    MaxIterations,
    Converged,
    Plateau,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    /// Iteration 0 is the baseline fill.
    pub records: Vec<IterationRecord>,
    pub stop: Option<StopReason>,
}

impl ConvergenceTrace {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }
}

/// Which of the three stopping conditions holds for `trace`, if any.
/// Checked in the order: iteration budget, fixed point, objective plateau.
pub fn stop_reason(trace: &ConvergenceTrace, config: &EngineConfig) -> Option<StopReason> {
    let last = trace.records.last()?;
    if last.iteration >= config.max_outer_iters {
        return Some(StopReason::MaxIterations);
    }
    if last.max_norm_change.is_some_and(|c| c <= config.tol_imp) {
        return Some(StopReason::Converged);
    }
    if config.objective_patience > 0 && stale_rounds(trace) >= config.objective_patience {
        return Some(StopReason::Plateau);
    }
    None
}

/// Consecutive scored iterations, counted back from the latest, whose
/// objective failed to improve on the best one before them.
pub fn stale_rounds(trace: &ConvergenceTrace) -> usize {
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for obj in trace.records.iter().filter_map(|r| r.objective) {
        if obj < best {
            best = obj;
            stale = 0;
        } else {
            stale += 1;
        }
    }
    stale
}

pub fn gamma_should_stop(trace: &ConvergenceTrace, config: &EngineConfig) -> bool {
    stop_reason(trace, config).is_some()
}

/// Under `ReuseAfterStable { m }`, true when the last `m` selections for
/// column `d` picked the same class and parameters.
pub fn sigma_should_skip(log: &SelectionLog, d: usize, config: &EngineConfig) -> bool {
    match config.skip {
        SkipPolicy::Never => false,
        SkipPolicy::ReuseAfterStable { m } => {
            if m == 0 {
                return false;
            }
            let recent: Vec<&Selection> = log.for_column(d).rev().take(m).collect();
            recent.len() == m && recent.iter().all(|s| !s.fallback && s.same_choice(recent[0]))
        }
    }
}
