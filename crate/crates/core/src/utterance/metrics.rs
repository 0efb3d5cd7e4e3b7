use std::collections::BTreeSet;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

fn per_class<L: Ord + Clone>(predictions: &[Vec<L>], gold: &[Vec<L>]) -> Result<Vec<(L, Counts)>> {
    if predictions.len() != gold.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} gold label sets",
            predictions.len(),
            gold.len()
        )));
    }
    let classes: BTreeSet<L> = predictions.iter().chain(gold).flatten().cloned().collect();
    Ok(classes
        .into_iter()
        .map(|c| {
            let mut k = Counts::default();
            for (p, g) in predictions.iter().zip(gold) {
                match (p.contains(&c), g.contains(&c)) {
                    (true, true) => k.tp += 1,
                    (true, false) => k.fp += 1,
                    (false, true) => k.fn_ += 1,
                    (false, false) => {}
                }
            }
            (c, k)
        })
        .collect())
}

/// Multi-label macro F1 over every class that occurs in either the
/// predictions or the gold sets. Two empty inputs score 1.
pub fn multilabel_f1<L: Ord + Clone>(predictions: &[Vec<L>], gold: &[Vec<L>]) -> Result<f64> {
    let classes = per_class(predictions, gold)?;
    if classes.is_empty() {
        return Ok(1.0);
    }
    Ok(classes.iter().map(|(_, k)| k.f1()).sum::<f64>() / classes.len() as f64)
}

/// Multi-label micro F1 (counts pooled across classes).
pub fn multilabel_micro_f1<L: Ord + Clone>(predictions: &[Vec<L>], gold: &[Vec<L>]) -> Result<f64> {
    let classes = per_class(predictions, gold)?;
    if classes.is_empty() {
        return Ok(1.0);
    }
    let mut total = Counts::default();
    for (_, k) in classes {
        total.tp += k.tp;
        total.fp += k.fp;
        total.fn_ += k.fn_;
    }
    Ok(total.f1())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_two_class_case() {
        // class a: TP=1, FP=1, FN=0; class b: TP=0, FP=0, FN=1
        let pred = vec![vec!["a"], vec!["a"]];
        let gold = vec![vec!["a"], vec!["b"]];
        let f = multilabel_f1(&pred, &gold).unwrap();
        assert!((f - (2.0 / 3.0 + 0.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn extremes() {
        let gold = vec![vec![1, 2], vec![3]];
        assert_eq!(multilabel_f1(&gold, &gold).unwrap(), 1.0);
        let empty: Vec<Vec<i32>> = vec![vec![], vec![]];
        assert_eq!(multilabel_f1(&empty, &gold).unwrap(), 0.0);
        assert!(multilabel_f1(&empty[..1], &gold).is_err());
    }

    #[test]
    fn micro_pools_counts() {
        let pred = vec![vec!["a"], vec!["a"]];
        let gold = vec![vec!["a"], vec!["b"]];
        // TP=1, FP=1, FN=1
        assert!((multilabel_micro_f1(&pred, &gold).unwrap() - 0.5).abs() < 1e-12);
    }
}
