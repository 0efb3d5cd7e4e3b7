use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_data, unit_weights};
use crate::util::sigmoid;
use crate::{Error, Result};

/// Linear support vector classifier (squared hinge loss, L2 penalty, bias as
/// a constant feature) trained by dual coordinate descent. Probabilities come
/// from a Platt sigmoid fitted on 3-fold out-of-fold decision values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvc {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub platt_a: f64,
    pub platt_b: f64,
}

const MAX_ITER: usize = 1000;
const TOL: f64 = 1e-4;
const CALIBRATION_FOLDS: usize = 3;

struct Hyperplane {
    coef: Vec<f64>,
    intercept: f64,
}

impl Hyperplane {
    fn decision(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

fn dual_cd(x: &[Vec<f64>], y: &[bool], sw: &[f64], c: f64, seed: u64) -> Hyperplane {
    let d = x[0].len();
    let n = x.len();
    let mut w = vec![0.0; d + 1];
    let mut alpha = vec![0.0; n];
    let sign: Vec<f64> = y.iter().map(|t| if *t { 1.0 } else { -1.0 }).collect();
    // squared hinge: the per-sample box is unbounded and D_ii = 1 / (2 C_i)
    let diag: Vec<f64> = sw.iter().map(|w| if *w > 0.0 { 1.0 / (2.0 * c * w) } else { f64::INFINITY }).collect();
    let qii: Vec<f64> = x.iter().zip(&diag).map(|(r, dd)| r.iter().map(|v| v * v).sum::<f64>() + 1.0 + dd).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ITER {
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            if !diag[i].is_finite() {
                continue;
            }
            let wx = w[d] + x[i].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let g = sign[i] * wx - 1.0 + diag[i] * alpha[i];
            let pg = if alpha[i] == 0.0 { g.min(0.0) } else { g };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).max(0.0);
                let delta = (alpha[i] - old) * sign[i];
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += delta * xj;
                }
                w[d] += delta;
            }
        }
        if pg_max - pg_min < TOL {
            break;
        }
    }
    let intercept = w[d];
    w.truncate(d);
    Hyperplane { coef: w, intercept }
}

/// Fit `P(true | f) = sigmoid(a·f + b)` with Platt's smoothed targets.
pub(crate) fn platt(decisions: &[f64], y: &[bool]) -> (f64, f64) {
    let n_pos = y.iter().filter(|t| **t).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let t: Vec<f64> = y.iter().map(|b| if *b { hi } else { lo }).collect();
    let loss = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&t)
            .map(|(f, ti)| {
                let z = a * f + b;
                // -[t log s(z) + (1-t) log(1-s(z))]
                z.max(0.0) - ti * z + (-z.abs()).exp().ln_1p()
            })
            .sum()
    };
    let (mut a, mut b) = (1.0, ((n_pos + 1.0) / (n_neg + 1.0)).ln());
    let mut current = loss(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for (f, ti) in decisions.iter().zip(&t) {
            let p = sigmoid(a * f + b);
            let e = p - ti;
            let s = p * (1.0 - p);
            ga += e * f;
            gb += e;
            haa += s * f * f;
            hab += s * f;
            hbb += s;
        }
        if ga.abs() < 1e-10 && gb.abs() < 1e-10 {
            break;
        }
        let det = haa * hbb - hab * hab;
        let (da, db) = if det.abs() > 1e-300 {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            (ga, gb)
        };
        let mut step = 1.0;
        loop {
            let (na, nb) = (a - step * da, b - step * db);
            let l = loss(na, nb);
            if l <= current - 1e-4 * step * (ga * da + gb * db) || step < 1e-10 {
                a = na;
                b = nb;
                current = l;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    (a, b)
}

impl LinearSvc {
    pub fn fit(x: &[Vec<f64>], y: &[bool], weights: Option<&[f64]>, c: f64, seed: u64) -> Result<Self> {
        check_training_data(x, y)?;
        if !(c > 0.0) {
            return Err(Error::Config("regularisation strength C must be positive".into()));
        }
        let sw = unit_weights(x.len(), weights);
        let full = dual_cd(x, y, &sw, c, seed);

        // out-of-fold decision values for calibration
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xca11));
        let mut fold = vec![0usize; x.len()];
        for (rank, i) in idx.iter().enumerate() {
            fold[*i] = rank % CALIBRATION_FOLDS;
        }
        let mut oof = vec![0.0; x.len()];
        let mut calibrated = true;
        for k in 0..CALIBRATION_FOLDS {
            let train: Vec<usize> = (0..x.len()).filter(|i| fold[*i] != k).collect();
            let tx: Vec<Vec<f64>> = train.iter().map(|i| x[*i].clone()).collect();
            let ty: Vec<bool> = train.iter().map(|i| y[*i]).collect();
            let tw: Vec<f64> = train.iter().map(|i| sw[*i]).collect();
            if check_training_data(&tx, &ty).is_err() {
                calibrated = false;
                break;
            }
            let h = dual_cd(&tx, &ty, &tw, c, seed.wrapping_add(k as u64 + 1));
            for i in (0..x.len()).filter(|i| fold[*i] == k) {
                oof[i] = h.decision(&x[i]);
            }
        }
        if !calibrated {
            for (i, r) in x.iter().enumerate() {
                oof[i] = full.decision(r);
            }
        }
        let (platt_a, platt_b) = platt(&oof, y);
        Ok(LinearSvc { coef: full.coef, intercept: full.intercept, platt_a, platt_b })
    }

    pub fn dim(&self) -> usize {
        self.coef.len()
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.platt_a * self.decision(x) + self.platt_b
    }
}
