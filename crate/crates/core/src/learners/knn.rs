use ndarray::{Array2, ArrayView2};

use super::scale::Standardizer;
use super::{Predictions, Target};

/// Brute-force k nearest neighbours in standardized regressor space.
/// Distance ties are broken by row key, so the neighbour set does not depend
/// on the order of the training rows.
#[derive(Clone, Debug)]
pub(crate) struct Knn {
    scaler: Standardizer,
    train: Array2<f64>,
    keys: Vec<u64>,
    values: Vec<f64>,
    /// Zero-based labels and class count for classification.
    classes: Option<(Vec<u32>, usize)>,
    k: usize,
}

impl Knn {
    pub fn fit(x: ArrayView2<'_, f64>, target: &Target<'_>, row_keys: &[u64], k: usize) -> Self {
        let scaler = Standardizer::fit(x);
        let train = scaler.transform(x);
        let (values, classes) = match target {
            Target::Values(y) => (y.to_vec(), None),
            Target::Classes { labels, n_classes } => (Vec::new(), Some((labels.to_vec(), *n_classes))),
        };
        Knn {
            scaler,
            train,
            keys: row_keys.to_vec(),
            values,
            classes,
            k: k.max(1),
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Predictions {
        let n_train = self.train.nrows();
        let k = self.k.min(n_train);
        let mut query = vec![0.0; x.ncols()];
        let mut cand: Vec<(f64, u64, usize)> = Vec::with_capacity(n_train);
        let mut values = Vec::new();
        let mut probs = self.classes.as_ref().map(|(_, c)| Array2::zeros((x.nrows(), *c)));
        for i in 0..x.nrows() {
            self.scaler.transform_row(x.row(i), &mut query);
            cand.clear();
            for (j, row) in self.train.rows().into_iter().enumerate() {
                let d: f64 = row.iter().zip(&query).map(|(a, b)| (a - b) * (a - b)).sum();
                cand.push((d, self.keys[j], j));
            }
            let order = |a: &(f64, u64, usize), b: &(f64, u64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < n_train {
                cand.select_nth_unstable_by(k - 1, order);
            }
            let nearest = &mut cand[..k];
            nearest.sort_unstable_by(order);
            match (&self.classes, probs.as_mut()) {
                (Some((labels, _)), Some(p)) => {
                    for &(_, _, j) in nearest.iter() {
                        p[[i, labels[j] as usize]] += 1.0;
                    }
                    p.row_mut(i).mapv_inplace(|c| c / k as f64);
                }
                _ => values.push(nearest.iter().map(|&(_, _, j)| self.values[j]).sum::<f64>() / k as f64),
            }
        }
        match probs {
            Some(p) => Predictions::Probabilities(p),
            None => Predictions::Values(values),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};

    #[test]
    fn averages_nearest_targets() {
        let x = array![[0.0], [1.0], [2.0], [10.0]];
        let y = [0.0, 2.0, 4.0, 100.0];
        let m = Knn::fit(x.view(), &Target::Values(&y), &[0, 1, 2, 3], 2);
        let Predictions::Values(v) = m.predict(array![[0.9]].view()) else { panic!() };
        assert_eq!(v, vec![1.0]);
    }

    #[test]
    fn permuting_training_rows_with_keys_changes_nothing() {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * 11 + j * 5) % 13) as f64);
        let y: Vec<f64> = (0..30).map(|i| i as f64 * 0.5).collect();
        let keys: Vec<u64> = (0..30).collect();
        let perm: Vec<usize> = (0..30).rev().collect();
        let a = Knn::fit(x.view(), &Target::Values(&y), &keys, 4);
        let xp = x.select(Axis(0), &perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let kp: Vec<u64> = perm.iter().map(|&i| keys[i]).collect();
        let b = Knn::fit(xp.view(), &Target::Values(&yp), &kp, 4);
        let probe = array![[3.0, 4.0], [0.0, 12.0], [6.5, 6.5]];
        let (Predictions::Values(pa), Predictions::Values(pb)) = (a.predict(probe.view()), b.predict(probe.view())) else {
            panic!()
        };
        for (u, v) in pa.iter().zip(&pb) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}
