use serde::{Deserialize, Serialize};

use super::{check_training_data, unit_weights};
use crate::Result;

/// Gaussian naive Bayes with variance smoothing of `1e-9 ×` the largest
/// feature variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Index 0 is the `false` class, 1 the `true` class.
    pub log_prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

const VAR_SMOOTHING: f64 = 1e-9;

impl GaussianNb {
    pub fn fit(x: &[Vec<f64>], y: &[bool], weights: Option<&[f64]>) -> Result<Self> {
        let d = check_training_data(x, y)?;
        let sw = unit_weights(x.len(), weights);
        let total: f64 = sw.iter().sum();
        let mut max_var: f64 = 0.0;
        for j in 0..d {
            let m = x.iter().zip(&sw).map(|(r, w)| w * r[j]).sum::<f64>() / total;
            let v = x.iter().zip(&sw).map(|(r, w)| w * (r[j] - m).powi(2)).sum::<f64>() / total;
            max_var = max_var.max(v);
        }
        let eps = if max_var > 0.0 { VAR_SMOOTHING * max_var } else { VAR_SMOOTHING };
        let mut log_prior = [0.0; 2];
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for class in 0..2 {
            let rows: Vec<(&Vec<f64>, f64)> = x
                .iter()
                .zip(y)
                .zip(&sw)
                .filter(|((_, t), _)| usize::from(**t) == class)
                .map(|((r, _), w)| (r, *w))
                .collect();
            let wsum: f64 = rows.iter().map(|(_, w)| w).sum();
            log_prior[class] = (wsum / total).ln();
            for j in 0..d {
                let m = rows.iter().map(|(r, w)| w * r[j]).sum::<f64>() / wsum;
                let v = rows.iter().map(|(r, w)| w * (r[j] - m).powi(2)).sum::<f64>() / wsum;
                mean[class][j] = m;
                var[class][j] = v + eps;
            }
        }
        Ok(GaussianNb { log_prior, mean, var })
    }

    pub fn dim(&self) -> usize {
        self.mean[0].len()
    }

    fn joint_log_likelihood(&self, class: usize, x: &[f64]) -> f64 {
        let mut ll = self.log_prior[class];
        for ((xi, m), v) in x.iter().zip(&self.mean[class]).zip(&self.var[class]) {
            ll -= 0.5 * (2.0 * std::f64::consts::PI * v).ln() + (xi - m).powi(2) / (2.0 * v);
        }
        ll
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.joint_log_likelihood(1, x) - self.joint_log_likelihood(0, x)
    }
}
