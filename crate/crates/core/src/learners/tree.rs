//! CART regression and classification trees over presorted features.
//!
//! Regression splits maximize variance reduction, classification splits
//! maximize Gini reduction. Candidate splits are scanned feature by feature
//! in ascending order and threshold by threshold in ascending order; only a
//! strictly better gain replaces the incumbent, so ties go to the lowest
//! feature index and then the lowest threshold.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;

use super::Target;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaxFeatures {
    All,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "all" | "auto" => Some(MaxFeatures::All),
            "sqrt" => Some(MaxFeatures::Sqrt),
            "log2" => Some(MaxFeatures::Log2),
            _ => None,
        }
    }

    pub fn count(self, p: usize) -> usize {
        let m = match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (p as f64).log2().floor() as usize,
        };
        m.clamp(1, p.max(1))
    }
}

#[derive(Clone, Debug)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

/// Row indices of each feature sorted ascending by value. Ties, and the
/// order in which node statistics are accumulated, follow the row keys, so
/// permuting rows together with their keys reproduces the same tree
/// bit for bit.
#[derive(Clone, Debug)]
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
    by_key: Vec<u32>,
}

impl Presorted {
    pub fn new(x: ArrayView2<'_, f64>) -> Self {
        let keys: Vec<u64> = (0..x.nrows() as u64).collect();
        Self::keyed(x, &keys)
    }

    pub fn keyed(x: ArrayView2<'_, f64>, keys: &[u64]) -> Self {
        let mut by_key: Vec<u32> = (0..x.nrows() as u32).collect();
        by_key.sort_by_key(|&r| (keys[r as usize], r));
        let order = x
            .columns()
            .into_iter()
            .map(|col| {
                let mut idx = by_key.clone();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                idx
            })
            .collect();
        Presorted { order, by_key }
    }

    pub fn work(&self) -> u64 {
        let n = self.order.first().map_or(0, Vec::len) as u64;
        let p = self.order.len() as u64;
        n * p * (64 - n.leading_zeros() as u64).max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    /// `width` values per leaf.
    leaf_values: Vec<f64>,
    width: usize,
}

impl Tree {
    pub fn n_leaves(&self) -> usize {
        self.leaf_values.len() / self.width.max(1)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_index(&self, row: ArrayView1<'_, f64>) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(l) => return l as usize,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    pub fn leaf_value(&self, row: ArrayView1<'_, f64>) -> &[f64] {
        let l = self.leaf_index(row);
        &self.leaf_values[l * self.width..(l + 1) * self.width]
    }

    /// First value stored for `leaf`.
    pub(crate) fn leaf_values_of(&self, leaf: usize) -> f64 {
        self.leaf_values[leaf * self.width]
    }

    pub(crate) fn set_leaf_values(&mut self, values: Vec<f64>, width: usize) {
        debug_assert_eq!(values.len(), self.n_leaves() * width);
        self.leaf_values = values;
        self.width = width;
    }
}

pub(crate) struct Grown {
    pub tree: Tree,
    /// Training rows (positive weight) reaching each leaf.
    pub leaf_rows: Vec<Vec<u32>>,
    pub work: u64,
}

struct Pending {
    node: usize,
    depth: usize,
    rows: Vec<u32>,
    lists: Vec<Vec<u32>>,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Grows one tree. Rows with zero weight are ignored; weights act as
/// replication counts in every statistic, including the leaf-size limits.
pub(crate) fn grow(
    x: ArrayView2<'_, f64>,
    sorted: &Presorted,
    target: &Target<'_>,
    weights: &[f64],
    params: &TreeParams,
    key: u64,
) -> Grown {
    let n = x.nrows();
    let p = x.ncols();
    let width = match target {
        Target::Values(_) => 1,
        Target::Classes { n_classes, .. } => *n_classes,
    };
    let rows: Vec<u32> = sorted.by_key.iter().copied().filter(|&r| weights[r as usize] > 0.0).collect();
    let lists: Vec<Vec<u32>> = sorted
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&r| weights[r as usize] > 0.0).collect())
        .collect();
    let mut nodes = vec![Node::Leaf(0)];
    let mut leaf_values = Vec::new();
    let mut leaf_rows = Vec::new();
    let mut goes_left = vec![false; n];
    let mut work = 0u64;
    let mut stack = vec![Pending {
        node: 0,
        depth: 0,
        rows,
        lists,
    }];
    let n_candidates = params.max_features.count(p);
    let min_leaf = params.min_samples_leaf.max(1) as f64;
    while let Some(pending) = stack.pop() {
        let Pending {
            node,
            depth,
            rows,
            mut lists,
        } = pending;
        let stats = NodeStats::new(&rows, target, weights, width);
        work += rows.len() as u64;
        let splittable = p > 0
            && !stats.pure
            && params.max_depth.is_none_or(|d| depth < d)
            && stats.weight >= params.min_samples_split as f64
            && stats.weight >= 2.0 * min_leaf;
        let best = if splittable {
            let features: Vec<usize> = if n_candidates >= p {
                (0..p).collect()
            } else {
                let mut all: Vec<usize> = (0..p).collect();
                let mut rng = seed::rng(seed::derive(key, &[node as u64]));
                let (chosen, _) = all.partial_shuffle(&mut rng, n_candidates);
                let mut chosen = chosen.to_vec();
                chosen.sort_unstable();
                chosen
            };
            work += (rows.len() * features.len()) as u64;
            best_split(x, &lists, &features, target, weights, &stats, min_leaf)
        } else {
            None
        };
        match best {
            None => {
                let leaf = leaf_rows.len() as u32;
                leaf_values.extend(stats.leaf_value());
                leaf_rows.push(rows);
                nodes[node] = Node::Leaf(leaf);
            }
            Some(b) => {
                for &r in &rows {
                    goes_left[r as usize] = x[[r as usize, b.feature]] <= b.threshold;
                }
                let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
                    rows.iter().partition(|&&r| goes_left[r as usize]);
                let mut left_lists = Vec::with_capacity(p);
                let mut right_lists = Vec::with_capacity(p);
                for list in lists.drain(..) {
                    let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&r| goes_left[r as usize]);
                    left_lists.push(l);
                    right_lists.push(r);
                }
                work += (rows.len() * p) as u64;
                let left = nodes.len();
                nodes.push(Node::Leaf(0));
                let right = nodes.len();
                nodes.push(Node::Leaf(0));
                nodes[node] = Node::Split {
                    feature: b.feature as u32,
                    threshold: b.threshold,
                    left: left as u32,
                    right: right as u32,
                };
                stack.push(Pending {
                    node: right,
                    depth: depth + 1,
                    rows: right_rows,
                    lists: right_lists,
                });
                stack.push(Pending {
                    node: left,
                    depth: depth + 1,
                    rows: left_rows,
                    lists: left_lists,
                });
            }
        }
    }
    Grown {
        tree: Tree {
            nodes,
            leaf_values,
            width,
        },
        leaf_rows,
        work,
    }
}

struct NodeStats {
    weight: f64,
    /// Weighted mean for regression.
    mean: f64,
    /// Weighted class counts for classification.
    counts: Vec<f64>,
    pure: bool,
    regression: bool,
}

impl NodeStats {
    fn new(rows: &[u32], target: &Target<'_>, weights: &[f64], width: usize) -> Self {
        let weight: f64 = rows.iter().map(|&r| weights[r as usize]).sum();
        match target {
            Target::Values(y) => {
                let sum: f64 = rows.iter().map(|&r| weights[r as usize] * y[r as usize]).sum();
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &r in rows {
                    lo = lo.min(y[r as usize]);
                    hi = hi.max(y[r as usize]);
                }
                NodeStats {
                    weight,
                    mean: if weight > 0.0 { sum / weight } else { 0.0 },
                    counts: Vec::new(),
                    pure: !(hi > lo),
                    regression: true,
                }
            }
            Target::Classes { labels, .. } => {
                let mut counts = vec![0.0; width];
                for &r in rows {
                    counts[labels[r as usize] as usize] += weights[r as usize];
                }
                let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
                NodeStats {
                    weight,
                    mean: 0.0,
                    counts,
                    pure,
                    regression: false,
                }
            }
        }
    }

    fn leaf_value(&self) -> Vec<f64> {
        if self.regression {
            vec![self.mean]
        } else if self.weight > 0.0 {
            self.counts.iter().map(|c| c / self.weight).collect()
        } else {
            vec![1.0 / self.counts.len() as f64; self.counts.len()]
        }
    }
}

fn best_split(
    x: ArrayView2<'_, f64>,
    lists: &[Vec<u32>],
    features: &[usize],
    target: &Target<'_>,
    weights: &[f64],
    stats: &NodeStats,
    min_leaf: f64,
) -> Option<Best> {
    let total = stats.weight;
    let mut best: Option<Best> = None;
    let mut consider = |gain: f64, feature: usize, a: f64, b: f64| {
        if best.as_ref().is_none_or(|cur| gain > cur.gain) {
            let mid = a + (b - a) / 2.0;
            let threshold = if mid < b { mid } else { a };
            best = Some(Best {
                gain,
                feature,
                threshold,
            });
        }
    };
    match target {
        Target::Values(y) => {
            // sums of centered targets keep the gain well conditioned
            let total_sum: f64 = lists[features[0]]
                .iter()
                .map(|&r| weights[r as usize] * (y[r as usize] - stats.mean))
                .sum();
            let base = total_sum * total_sum / total;
            for &f in features {
                let list = &lists[f];
                let mut wl = 0.0;
                let mut sl = 0.0;
                for i in 0..list.len() - 1 {
                    let r = list[i] as usize;
                    let w = weights[r];
                    wl += w;
                    sl += w * (y[r] - stats.mean);
                    let a = x[[r, f]];
                    let b = x[[list[i + 1] as usize, f]];
                    if !(b > a) {
                        continue;
                    }
                    let wr = total - wl;
                    if wl < min_leaf || wr < min_leaf {
                        continue;
                    }
                    let sr = total_sum - sl;
                    let gain = sl * sl / wl + sr * sr / wr - base;
                    consider(gain, f, a, b);
                }
            }
        }
        Target::Classes { labels, .. } => {
            let k = stats.counts.len();
            let base: f64 = stats.counts.iter().map(|c| c * c).sum::<f64>() / total;
            let mut left = vec![0.0; k];
            for &f in features {
                let list = &lists[f];
                left.iter_mut().for_each(|c| *c = 0.0);
                let mut wl = 0.0;
                let mut sq_left = 0.0;
                let mut sq_right: f64 = stats.counts.iter().map(|c| c * c).sum();
                for i in 0..list.len() - 1 {
                    let r = list[i] as usize;
                    let w = weights[r];
                    let c = labels[r] as usize;
                    let right_c = stats.counts[c] - left[c];
                    sq_left += 2.0 * left[c] * w + w * w;
                    sq_right += -2.0 * right_c * w + w * w;
                    left[c] += w;
                    wl += w;
                    let a = x[[r, f]];
                    let b = x[[list[i + 1] as usize, f]];
                    if !(b > a) {
                        continue;
                    }
                    let wr = total - wl;
                    if wl < min_leaf || wr < min_leaf {
                        continue;
                    }
                    let gain = sq_left / wl + sq_right / wr - base;
                    consider(gain, f, a, b);
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn fit_plain(x: &Array2<f64>, target: &Target<'_>, params: &TreeParams) -> Tree {
        let sorted = Presorted::new(x.view());
        grow(x.view(), &sorted, target, &vec![1.0; x.nrows()], params, 0).tree
    }

    #[test]
    fn unbounded_tree_interpolates_distinct_rows() {
        let x = Array2::from_shape_fn((50, 2), |(i, j)| ((i * 17 + j * 5) % 23) as f64 + 0.01 * i as f64);
        let y: Vec<f64> = (0..50).map(|i| (i as f64 * 1.3).sin()).collect();
        let tree = fit_plain(&x, &Target::Values(&y), &TreeParams::default());
        for i in 0..50 {
            assert_eq!(tree.leaf_value(x.row(i))[0], y[i]);
        }
    }

    #[test]
    fn ties_pick_lowest_feature_then_threshold() {
        // both features separate the classes identically
        let x = array![[0.0, 10.0], [1.0, 11.0], [2.0, 12.0], [3.0, 13.0]];
        let labels = [0u32, 0, 1, 1];
        let t = fit_plain(&x, &Target::Classes { labels: &labels, n_classes: 2 }, &TreeParams::default());
        assert_eq!(t.nodes[0], Node::Split { feature: 0, threshold: 1.5, left: 1, right: 2 });
        // duplicated feature values: identical gains at two thresholds
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0.0, 1.0, 1.0, 0.0];
        let params = TreeParams { max_depth: Some(1), ..TreeParams::default() };
        let t = fit_plain(&x, &Target::Values(&y), &params);
        assert_eq!(t.nodes[0], Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 });
    }

    #[test]
    fn respects_depth_and_leaf_size() {
        let x = Array2::from_shape_fn((64, 3), |(i, j)| ((i * 31 + j * 11) % 64) as f64);
        let y: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let params = TreeParams { max_depth: Some(3), min_samples_leaf: 5, ..TreeParams::default() };
        let sorted = Presorted::new(x.view());
        let grown = grow(x.view(), &sorted, &Target::Values(&y), &vec![1.0; 64], &params, 0);
        assert!(grown.tree.depth() <= 3);
        assert!(grown.leaf_rows.iter().all(|r| r.len() >= 5));
        assert_eq!(grown.leaf_rows.iter().map(Vec::len).sum::<usize>(), 64);
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0.0, 0.0, 100.0, 0.0];
        let sorted = Presorted::new(x.view());
        let grown = grow(x.view(), &sorted, &Target::Values(&y), &[1.0, 1.0, 0.0, 1.0], &TreeParams::default(), 0);
        assert_eq!(grown.tree.n_leaves(), 1);
        assert_eq!(grown.tree.leaf_value(x.row(2))[0], 0.0);
    }
}
