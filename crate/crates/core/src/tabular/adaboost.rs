use serde::{Deserialize, Serialize};

use super::{check_training_data, unit_weights};
use crate::Result;

/// Decision stump voting `+1` for the `true` class when
/// `polarity · (x[feature] - threshold) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: f64,
    pub alpha: f64,
}

impl Stump {
    fn vote(&self, x: &[f64]) -> f64 {
        if self.polarity * (x[self.feature] - self.threshold) > 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Discrete AdaBoost (SAMME, two classes) over decision stumps. A stump with
/// its threshold below every value acts as a bias term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub dim: usize,
    pub stumps: Vec<Stump>,
}

/// Cap on a single stump's vote weight, reached when it has zero error.
const MAX_ALPHA: f64 = 10.0;

fn best_stump(x: &[Vec<f64>], y: &[bool], w: &[f64]) -> (usize, f64, f64, f64) {
    let d = x[0].len();
    let total: f64 = w.iter().sum();
    let pos_total: f64 = y.iter().zip(w).filter(|(t, _)| **t).map(|(_, w)| w).sum();
    let mut best = (0usize, f64::NEG_INFINITY, 1.0, f64::INFINITY);
    for f in 0..d {
        let mut sorted: Vec<(f64, f64, bool)> = x.iter().zip(w).zip(y).map(|((r, w), t)| (r[f], *w, *t)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        // threshold below everything: all rows are "above"
        let mut below_pos = 0.0;
        let mut below_w = 0.0;
        let mut k = 0;
        loop {
            let threshold = if k == 0 { sorted[0].0 - 1.0 } else { sorted[k - 1].0 };
            let above_pos = pos_total - below_pos;
            let above_neg = (total - below_w) - above_pos;
            // polarity +1 predicts true above the threshold
            let err_plus = above_neg + below_pos;
            let err_minus = total - err_plus;
            for (err, pol) in [(err_plus, 1.0), (err_minus, -1.0)] {
                if err < best.3 - 1e-12 {
                    best = (f, threshold, pol, err);
                }
            }
            if k == sorted.len() {
                break;
            }
            // advance past all rows sharing this value
            let v = sorted[k].0;
            while k < sorted.len() && sorted[k].0 == v {
                below_w += sorted[k].1;
                if sorted[k].2 {
                    below_pos += sorted[k].1;
                }
                k += 1;
            }
            if k == sorted.len() {
                break;
            }
            // midpoint threshold between distinct values
            let mid = 0.5 * (v + sorted[k].0);
            let above_pos = pos_total - below_pos;
            let above_neg = (total - below_w) - above_pos;
            let err_plus = above_neg + below_pos;
            let err_minus = total - err_plus;
            for (err, pol) in [(err_plus, 1.0), (err_minus, -1.0)] {
                if err < best.3 - 1e-12 {
                    best = (f, mid, pol, err);
                }
            }
        }
    }
    (best.0, best.1, best.2, best.3 / total)
}

impl AdaBoost {
    pub fn fit(x: &[Vec<f64>], y: &[bool], weights: Option<&[f64]>, rounds: usize) -> Result<Self> {
        let d = check_training_data(x, y)?;
        let mut w = unit_weights(x.len(), weights);
        let s: f64 = w.iter().sum();
        for v in w.iter_mut() {
            *v /= s;
        }
        let mut stumps = Vec::new();
        for _ in 0..rounds {
            let (feature, threshold, polarity, err) = best_stump(x, y, &w);
            if err >= 0.5 {
                break;
            }
            let alpha = if err <= 0.0 { MAX_ALPHA } else { ((1.0 - err) / err).ln().min(MAX_ALPHA) };
            let stump = Stump { feature, threshold, polarity, alpha };
            if err <= 0.0 {
                stumps.push(stump);
                break;
            }
            for ((r, t), wi) in x.iter().zip(y).zip(w.iter_mut()) {
                let correct = (stump.vote(r) > 0.0) == *t;
                if !correct {
                    *wi *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            for v in w.iter_mut() {
                *v /= s;
            }
            stumps.push(stump);
        }
        Ok(AdaBoost { dim: d, stumps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.stumps.iter().map(|s| s.alpha * s.vote(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_stump_stops_early() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i % 2), 0.0]).collect();
        let y: Vec<bool> = (0..10).map(|i| i % 2 == 1).collect();
        let m = AdaBoost::fit(&x, &y, None, 50).unwrap();
        assert_eq!(m.stumps.len(), 1);
        assert_eq!(m.stumps[0].alpha, MAX_ALPHA);
    }

    #[test]
    fn or_of_two_bits_is_fit_exactly() {
        // brute-force all 4 input patterns, repeated
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = f64::from(u8::from(i % 4 == 1 || i % 4 == 3));
            let b = f64::from(u8::from(i % 4 >= 2));
            x.push(vec![a, b, f64::from(u8::from(i % 3 == 0))]);
            y.push(a == 1.0 || b == 1.0);
        }
        let m = AdaBoost::fit(&x, &y, None, 50).unwrap();
        for (r, t) in x.iter().zip(&y) {
            assert_eq!(m.logit(r) > 0.0, *t);
        }
    }
}
