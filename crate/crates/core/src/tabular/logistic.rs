use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_training_data, unit_weights};
use crate::util::sigmoid;
use crate::{Error, Result};

/// L2-regularised logistic regression, `0.5·|w|² + C·Σ loss`, with an
/// unpenalised intercept, fitted by Newton's method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub c: f64,
}

impl LogisticRegression {
    pub fn fit(x: &[Vec<f64>], y: &[bool], weights: Option<&[f64]>, c: f64) -> Result<Self> {
        let d = check_training_data(x, y)?;
        if !(c > 0.0) {
            return Err(Error::Config("regularisation strength C must be positive".into()));
        }
        let sw = unit_weights(x.len(), weights);
        let n = x.len();
        let p = d + 1;
        let mut design = DMatrix::<f64>::zeros(n, p);
        for (i, row) in x.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                design[(i, j)] = *v;
            }
            design[(i, d)] = 1.0;
        }
        let target = DVector::from_iterator(n, y.iter().map(|b| f64::from(u8::from(*b))));
        let mut beta = DVector::<f64>::zeros(p);
        for _ in 0..100 {
            let z = &design * &beta;
            let mut grad = DVector::<f64>::zeros(p);
            let mut hess = DMatrix::<f64>::zeros(p, p);
            let mut resid = DVector::<f64>::zeros(n);
            let mut curv = DVector::<f64>::zeros(n);
            for i in 0..n {
                let pi = sigmoid(z[i]);
                resid[i] = c * sw[i] * (pi - target[i]);
                curv[i] = c * sw[i] * pi * (1.0 - pi);
            }
            grad += design.transpose() * &resid;
            let weighted = DMatrix::from_fn(n, p, |i, j| design[(i, j)] * curv[i]);
            hess += design.transpose() * weighted;
            for j in 0..d {
                grad[j] += beta[j];
                hess[(j, j)] += 1.0;
            }
            // keeps the intercept direction well-posed when it saturates
            hess[(d, d)] += 1e-10;
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => hess
                    .lu()
                    .solve(&grad)
                    .ok_or_else(|| Error::Validation("singular Hessian in logistic regression".into()))?,
            };
            beta -= &step;
            if step.amax() < 1e-10 {
                break;
            }
        }
        Ok(LogisticRegression {
            coef: beta.iter().take(d).copied().collect(),
            intercept: beta[d],
            c,
        })
    }

    pub fn dim(&self) -> usize {
        self.coef.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}
