use ndarray::{Array2, ArrayView1, ArrayView2};

/// Per-column centering and scaling fitted on training regressors.
/// Constant columns keep unit scale and become zero.
#[derive(Clone, Debug)]
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(m);
            scale.push(if sd > 1e-12 * (1.0 + m.abs()) { sd } else { 1.0 });
        }
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        Array2::from_shape_fn(x.dim(), |(i, j)| (x[[i, j]] - self.mean[j]) / self.scale[j])
    }

    pub fn transform_row(&self, row: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (row[j] - self.mean[j]) / self.scale[j];
        }
    }
}

/// Mean and population standard deviation of a target vector, with the
/// same constant-column rule.
pub(crate) fn target_scale(y: &[f64]) -> (f64, f64) {
    let n = y.len().max(1) as f64;
    let m = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
    (m, if sd > 1e-12 * (1.0 + m.abs()) { sd } else { 1.0 })
}
