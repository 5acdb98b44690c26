use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{run_batch, Candidate, Evaluator, SearchError, SearchResult};
use crate::learners::{default_config, sample_config, LearnerClass};
use crate::search::scaling::ResourceScaling;
use crate::seed;

/// One successive-halving stage: `n` configurations at resource `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub n: usize,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub s: u32,
    pub rungs: Vec<Rung>,
}

impl Bracket {
    pub fn start(&self) -> (usize, f64) {
        (self.rungs[0].n, self.rungs[0].r)
    }
}

/// Largest `s` with `eta^s <= r`, in integer arithmetic.
fn floor_log(eta: u32, r: u32) -> u32 {
    let mut s = 0;
    let mut p = u64::from(eta);
    while p <= u64::from(r) {
        s += 1;
        p *= u64::from(eta);
    }
    s
}

/// Standard Hyperband brackets for `s = s_max..=0`: bracket `s` starts
/// `n = ceil((s_max+1) eta^s / (s+1))` configurations at `r = R eta^-s`;
/// rung `i` holds `floor(n eta^-i)` configurations at `r eta^i`.
pub fn hyperband_schedule(eta: u32, max_resource: u32) -> Result<Vec<Bracket>, SearchError> {
    if eta < 2 || max_resource < eta {
        return Err(SearchError::InvalidStrategy(format!(
            "hyperband needs eta >= 2 and R >= eta (got eta={eta}, R={max_resource})"
        )));
    }
    let s_max = floor_log(eta, max_resource);
    let eta_u = u64::from(eta);
    let mut brackets = Vec::new();
    for s in (0..=s_max).rev() {
        let eta_s = eta_u.pow(s);
        let num = u64::from(s_max + 1) * eta_s;
        let den = u64::from(s + 1);
        let n0 = num.div_ceil(den);
        let r0 = f64::from(max_resource) / eta_s as f64;
        let rungs = (0..=s)
            .map(|i| Rung {
                n: (n0 / eta_u.pow(i)) as usize,
                r: r0 * eta_u.pow(i) as f64,
            })
            .collect();
        brackets.push(Bracket { s, rungs });
    }
    Ok(brackets)
}

/// Total evaluations the schedule prescribes.
pub fn schedule_evaluations(brackets: &[Bracket]) -> usize {
    brackets.iter().flat_map(|b| b.rungs.iter()).map(|r| r.n).sum()
}

/// Runs every bracket of the schedule. Bracket `b` begins with the
/// catalogue defaults (rotated by `b`) and fills the remaining slots with
/// uniform draws, cycling through classes. Each rung keeps the
/// `floor(n / eta)` lowest scores, earlier evaluations winning ties.
pub fn model_search_hyperband(
    evaluator: &dyn Evaluator,
    catalogue: &[LearnerClass],
    eta: u32,
    max_resource: u32,
    scaling: &ResourceScaling,
    seed: u64,
) -> Result<SearchResult, SearchError> {
    if catalogue.is_empty() {
        return Err(SearchError::EmptyCatalogue);
    }
    let schedule = hyperband_schedule(eta, max_resource)?;
    let task = evaluator.task();
    let mut evaluations = Vec::new();
    let mut cache = HashMap::new();
    for (b, bracket) in schedule.iter().enumerate() {
        let (n0, _) = bracket.start();
        let mut rng = seed::rng(seed::derive(seed, &[seed::label("hyperband"), b as u64]));
        let mut pool: Vec<_> = (0..n0)
            .map(|j| {
                let class = catalogue[(j + b) % catalogue.len()];
                if j < catalogue.len() {
                    default_config(class, task)
                } else {
                    sample_config(class, task, &mut rng)
                }
            })
            .collect();
        for (i, rung) in bracket.rungs.iter().enumerate() {
            pool.truncate(rung.n);
            let units = rung.r.round().max(1.0) as u32;
            let candidates: Vec<Candidate> = pool
                .iter()
                .map(|c| Candidate::at_resource(c, units, scaling, Some((b, i))))
                .collect();
            let scored = run_batch(evaluator, &candidates, &mut cache, seed)?;
            let mut order: Vec<usize> = (0..scored.len()).collect();
            order.sort_by(|&x, &y| scored[x].score.total_cmp(&scored[y].score).then(x.cmp(&y)));
            let keep = rung.n / eta as usize;
            pool = order.iter().take(keep).map(|&k| pool[k].clone()).collect();
            evaluations.extend(scored);
        }
    }
    SearchResult::from_evaluations(evaluations)
}
