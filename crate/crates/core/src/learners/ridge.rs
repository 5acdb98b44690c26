use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{normalize, LearnerError, Predictions, Result, Target};
use crate::linalg::Cholesky;

/// Ridge regression on centered raw regressors:
/// `min ½‖y − b − Xβ‖² + ½α‖β‖²`. Classification regresses each class
/// indicator and clips-and-normalizes the scores into probabilities.
#[derive(Clone, Debug)]
pub(crate) struct Ridge {
    /// One column of coefficients per output.
    coef: Array2<f64>,
    intercept: Vec<f64>,
    classification: bool,
}

impl Ridge {
    pub fn fit(x: ArrayView2<'_, f64>, target: &Target<'_>, alpha: f64) -> Result<Self> {
        let n = x.nrows();
        let p = x.ncols();
        let (y, classification) = match target {
            Target::Values(v) => (Array2::from_shape_fn((n, 1), |(i, _)| v[i]), false),
            Target::Classes { labels, n_classes } => (
                Array2::from_shape_fn((n, *n_classes), |(i, k)| f64::from(labels[i] as usize == k)),
                true,
            ),
        };
        let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
        let y_mean = y.mean_axis(Axis(0)).expect("non-empty");
        let xc = &x - &x_mean;
        let yc = &y - &y_mean;
        let mut gram = xc.t().dot(&xc);
        for j in 0..p {
            gram[[j, j]] += alpha;
        }
        let rhs = xc.t().dot(&yc);
        let chol = Cholesky::factor(&gram)
            .ok_or_else(|| LearnerError::Numeric("ridge system not positive definite".into()))?;
        let outputs = y.ncols();
        let mut coef = Array2::zeros((p, outputs));
        let mut intercept = Vec::with_capacity(outputs);
        for k in 0..outputs {
            let beta: Array1<f64> = if p == 0 { Array1::zeros(0) } else { chol.solve(&rhs.column(k).to_owned()) };
            intercept.push(y_mean[k] - x_mean.dot(&beta));
            coef.column_mut(k).assign(&beta);
        }
        Ok(Ridge {
            coef,
            intercept,
            classification,
        })
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Predictions {
        let mut scores = x.dot(&self.coef);
        for (k, mut col) in scores.columns_mut().into_iter().enumerate() {
            col += self.intercept[k];
        }
        if self.classification {
            for mut row in scores.rows_mut() {
                normalize(row.as_slice_mut().expect("standard layout"));
            }
            Predictions::Probabilities(scores)
        } else {
            Predictions::Values(scores.column(0).to_vec())
        }
    }

    #[cfg(test)]
    fn coefficients(&self) -> (Vec<f64>, f64) {
        (self.coef.column(0).to_vec(), self.intercept[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn loss(x: &Array2<f64>, y: &[f64], beta: &[f64], b: f64, alpha: f64) -> f64 {
        let mut l = 0.0;
        for (i, row) in x.rows().into_iter().enumerate() {
            let pred: f64 = b + row.iter().zip(beta).map(|(a, c)| a * c).sum::<f64>();
            l += 0.5 * (y[i] - pred).powi(2);
        }
        l + 0.5 * alpha * beta.iter().map(|c| c * c).sum::<f64>()
    }

    #[test]
    fn solution_zeroes_the_regularized_gradient() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 * 0.3 - 1.0 + j as f64);
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).cos() + x[[i, 0]] - 2.0 * x[[i, 2]]).collect();
        let alpha = 0.8;
        let model = Ridge::fit(x.view(), &Target::Values(&y), alpha).unwrap();
        let (beta, b) = model.coefficients();
        // central finite differences on the quadratic loss
        let h = 1e-5;
        let mut params: Vec<f64> = beta.clone();
        params.push(b);
        for j in 0..params.len() {
            let mut up = params.clone();
            let mut down = params.clone();
            up[j] += h;
            down[j] -= h;
            let split = |v: &[f64]| (v[..3].to_vec(), v[3]);
            let (bu, iu) = split(&up);
            let (bd, id) = split(&down);
            let g = (loss(&x, &y, &bu, iu, alpha) - loss(&x, &y, &bd, id, alpha)) / (2.0 * h);
            assert!(g.abs() < 1e-6, "finite-difference gradient {j}: {g}");
        }
        // analytic gradient
        let resid: Vec<f64> = (0..40)
            .map(|i| y[i] - b - (0..3).map(|j| x[[i, j]] * beta[j]).sum::<f64>())
            .collect();
        for j in 0..3 {
            let g = -(0..40).map(|i| x[[i, j]] * resid[i]).sum::<f64>() + alpha * beta[j];
            assert!(g.abs() < 1e-8, "{g}");
        }
        assert!(resid.iter().sum::<f64>().abs() < 1e-8);
    }
}
