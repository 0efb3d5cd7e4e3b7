use serde::{Deserialize, Serialize};

use crate::corpus::BinaryOutcome;
use crate::{Error, Result};

/// Binary confusion counts with the negative outcome as the class of
/// interest: `tp` counts gold negatives predicted negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn from_predictions(predicted: &[BinaryOutcome], gold: &[BinaryOutcome]) -> Result<Self> {
        if predicted.len() != gold.len() {
            return Err(Error::Validation(format!(
                "{} predictions for {} gold labels",
                predicted.len(),
                gold.len()
            )));
        }
        let mut m = ConfusionMatrix::default();
        for (p, g) in predicted.iter().zip(gold) {
            match (p.is_negative(), g.is_negative()) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fn_ += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    /// The same predictions with the class roles swapped.
    pub fn swapped(&self) -> Self {
        ConfusionMatrix { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }

    fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }

    pub fn f1_negative(&self) -> f64 {
        Self::f1(self.tp, self.fp, self.fn_)
    }

    pub fn f1_non_negative(&self) -> f64 {
        Self::f1(self.tn, self.fn_, self.fp)
    }
}

/// Unweighted mean of the two per-class F1 scores. A class with no gold and
/// no predicted instances scores 0.
pub fn macro_f1(m: &ConfusionMatrix) -> Result<f64> {
    if m.total() == 0 {
        return Err(Error::InsufficientData("macro F1 of zero instances".into()));
    }
    Ok((m.f1_negative() + m.f1_non_negative()) / 2.0)
}

/// Recall of the negative class.
pub fn minority_recall(m: &ConfusionMatrix) -> Result<f64> {
    let gold_neg = m.tp + m.fn_;
    if gold_neg == 0 {
        return Err(Error::InsufficientData("minority recall is undefined without gold negatives".into()));
    }
    Ok(m.tp as f64 / gold_neg as f64)
}

/// Macro F1 and, when defined, minority recall.
pub fn score_matrix(m: &ConfusionMatrix) -> Result<(f64, Option<f64>)> {
    Ok((macro_f1(m)?, minority_recall(m).ok()))
}

/// Convenience for label vectors.
pub fn score(predicted: &[BinaryOutcome], gold: &[BinaryOutcome]) -> Result<(f64, f64)> {
    let m = ConfusionMatrix::from_predictions(predicted, gold)?;
    Ok((macro_f1(&m)?, minority_recall(&m)?))
}
