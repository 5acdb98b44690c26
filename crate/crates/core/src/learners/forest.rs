use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use super::tree::{grow, Presorted, Tree, TreeParams};
use super::Target;
use crate::seed;

/// Bagged CART ensemble. Bootstrap multiplicities are Poisson(1) draws keyed
/// by (seed, tree index, row key), so tree `t` depends only on the seed, `t`
/// and the training set as a keyed multiset: row order is irrelevant and a
/// larger ensemble extends a smaller one tree for tree.
#[derive(Clone, Debug)]
pub(crate) struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        target: &Target<'_>,
        row_keys: &[u64],
        params: &TreeParams,
        n_trees: usize,
        seed: u64,
    ) -> (Self, u64) {
        let sorted = Presorted::keyed(x, row_keys);
        let grown: Vec<(Tree, u64)> = (0..n_trees as u64)
            .into_par_iter()
            .map(|t| {
                let mut weights: Vec<f64> = row_keys
                    .iter()
                    .map(|&k| poisson1(seed::unit(seed::derive(seed, &[t, k]))))
                    .collect();
                if weights.iter().all(|&w| w == 0.0) {
                    weights.iter_mut().for_each(|w| *w = 1.0);
                }
                let g = grow(x, &sorted, target, &weights, params, seed::derive(seed, &[t, u64::MAX]));
                (g.tree, g.work)
            })
            .collect();
        let work = sorted.work() + grown.iter().map(|(_, w)| w).sum::<u64>();
        (
            Forest {
                trees: grown.into_iter().map(|(t, _)| t).collect(),
            },
            work,
        )
    }

    /// Average of the trees' leaf values, accumulated in tree order.
    pub fn predict_row(&self, row: ArrayView1<'_, f64>, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.leaf_value(row)) {
                *o += v;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
    }

    #[cfg(test)]
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}

/// Inverse CDF of Poisson(1).
fn poisson1(u: f64) -> f64 {
    let mut k = 0u32;
    let mut p = (-1.0f64).exp();
    let mut cdf = p;
    while u >= cdf && k < 32 {
        k += 1;
        p /= f64::from(k);
        cdf += p;
    }
    f64::from(k)
}
