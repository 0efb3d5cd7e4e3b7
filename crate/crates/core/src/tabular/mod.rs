//! Classical classifiers over dense feature vectors.
//!
//! Labels are `true` for the negative outcome, and every model's decision
//! value is the log-odds of that class, so they can be stacked directly.

mod adaboost;
mod forest;
mod logistic;
mod nb;
mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use adaboost::AdaBoost;
pub use forest::RandomForest;
pub use logistic::LogisticRegression;
pub use nb::GaussianNb;
pub use svm::LinearSvc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TabularModelKind {
    LogisticRegression,
    SupportVector,
    GaussianNaiveBayes,
    RandomForest,
    Adaboost,
}

impl TabularModelKind {
    pub const ALL: [TabularModelKind; 5] = [
        TabularModelKind::LogisticRegression,
        TabularModelKind::SupportVector,
        TabularModelKind::GaussianNaiveBayes,
        TabularModelKind::RandomForest,
        TabularModelKind::Adaboost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TabularModelKind::LogisticRegression => "logistic_regression",
            TabularModelKind::SupportVector => "support_vector",
            TabularModelKind::GaussianNaiveBayes => "gaussian_naive_bayes",
            TabularModelKind::RandomForest => "random_forest",
            TabularModelKind::Adaboost => "adaboost",
        }
    }

    /// Short display name used in grid labels.
    pub fn short(self) -> &'static str {
        match self {
            TabularModelKind::LogisticRegression => "LR",
            TabularModelKind::SupportVector => "SVC",
            TabularModelKind::GaussianNaiveBayes => "GNB",
            TabularModelKind::RandomForest => "RF",
            TabularModelKind::Adaboost => "AdaBoost",
        }
    }
}

impl fmt::Display for TabularModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TabularModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TabularModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.short().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown tabular model {s:?}")))
    }
}

/// A fitted tabular model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TabularModel {
    LogisticRegression(LogisticRegression),
    SupportVector(LinearSvc),
    GaussianNaiveBayes(GaussianNb),
    RandomForest(RandomForest),
    Adaboost(AdaBoost),
}

impl TabularModel {
    pub fn fit(kind: TabularModelKind, x: &[Vec<f64>], y: &[bool], weights: Option<&[f64]>, seed: u64) -> Result<Self> {
        check_training_data(x, y)?;
        if let Some(w) = weights {
            if w.len() != x.len() || w.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Validation("sample weights must be non-negative, one per row".into()));
            }
        }
        Ok(match kind {
            TabularModelKind::LogisticRegression => {
                TabularModel::LogisticRegression(LogisticRegression::fit(x, y, weights, 1.0)?)
            }
            TabularModelKind::SupportVector => TabularModel::SupportVector(LinearSvc::fit(x, y, weights, 1.0, seed)?),
            TabularModelKind::GaussianNaiveBayes => TabularModel::GaussianNaiveBayes(GaussianNb::fit(x, y, weights)?),
            TabularModelKind::RandomForest => TabularModel::RandomForest(RandomForest::fit(x, y, weights, 100, seed)?),
            TabularModelKind::Adaboost => TabularModel::Adaboost(AdaBoost::fit(x, y, weights, 50)?),
        })
    }

    pub fn kind(&self) -> TabularModelKind {
        match self {
            TabularModel::LogisticRegression(_) => TabularModelKind::LogisticRegression,
            TabularModel::SupportVector(_) => TabularModelKind::SupportVector,
            TabularModel::GaussianNaiveBayes(_) => TabularModelKind::GaussianNaiveBayes,
            TabularModel::RandomForest(_) => TabularModelKind::RandomForest,
            TabularModel::Adaboost(_) => TabularModelKind::Adaboost,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TabularModel::LogisticRegression(m) => m.dim(),
            TabularModel::SupportVector(m) => m.dim(),
            TabularModel::GaussianNaiveBayes(m) => m.dim(),
            TabularModel::RandomForest(m) => m.dim(),
            TabularModel::Adaboost(m) => m.dim(),
        }
    }

    /// Log-odds of the positive (`true`) class.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Validation(format!(
                "expected a {}-dim vector, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(match self {
            TabularModel::LogisticRegression(m) => m.logit(x),
            TabularModel::SupportVector(m) => m.logit(x),
            TabularModel::GaussianNaiveBayes(m) => m.logit(x),
            TabularModel::RandomForest(m) => m.logit(x),
            TabularModel::Adaboost(m) => m.logit(x),
        })
    }

    pub fn proba(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            TabularModel::RandomForest(m) => {
                self.logit(x)?;
                m.proba(x)
            }
            _ => crate::util::sigmoid(self.logit(x)?),
        })
    }
}

/// Shared preconditions: non-empty, rectangular, finite, both classes.
pub(crate) fn check_training_data(x: &[Vec<f64>], y: &[bool]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Validation(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::Validation("feature vectors are empty".into()));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Validation(format!("row {i} has {} features, expected {dim}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("row {i} has a non-finite feature")));
        }
    }
    let pos = y.iter().filter(|b| **b).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::InsufficientData("training labels contain a single class".into()));
    }
    Ok(dim)
}

pub(crate) fn unit_weights(n: usize, weights: Option<&[f64]>) -> Vec<f64> {
    weights.map_or_else(|| vec![1.0; n], <[f64]>::to_vec)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Noise-free OR rule over two binary features among eight.
    pub(crate) fn or_rule_data(n: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let row: Vec<f64> = (0..8).map(|j| f64::from(((i * 7 + j * 13 + i / 3) % 5 == 0) as u8)).collect();
            y.push(row[1] == 1.0 || row[4] == 1.0);
            x.push(row);
        }
        (x, y)
    }

    #[test]
    fn every_kind_fits_a_separable_rule() {
        let (x, y) = or_rule_data(200);
        for kind in TabularModelKind::ALL {
            let m = TabularModel::fit(kind, &x, &y, None, 1).unwrap();
            let acc = x
                .iter()
                .zip(&y)
                .filter(|(r, t)| (m.proba(r).unwrap() > 0.5) == **t)
                .count() as f64
                / x.len() as f64;
            let floor = if kind == TabularModelKind::GaussianNaiveBayes { 0.8 } else { 0.99 };
            assert!(acc >= floor, "{kind}: {acc}");
            let p = m.proba(&x[0]).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (x, y) = or_rule_data(50);
        let m = TabularModel::fit(TabularModelKind::LogisticRegression, &x, &y, None, 0).unwrap();
        assert!(m.logit(&[0.0; 7]).is_err());
        let mut bad = x.clone();
        bad[3].pop();
        assert!(TabularModel::fit(TabularModelKind::Adaboost, &bad, &y, None, 0).is_err());
    }

    #[test]
    fn single_class_is_rejected() {
        let (x, _) = or_rule_data(20);
        let y = vec![true; 20];
        assert!(TabularModel::fit(TabularModelKind::RandomForest, &x, &y, None, 0).is_err());
    }

    #[test]
    fn kinds_parse_from_either_name() {
        assert_eq!("adaboost".parse::<TabularModelKind>().unwrap(), TabularModelKind::Adaboost);
        assert_eq!("svc".parse::<TabularModelKind>().unwrap(), TabularModelKind::SupportVector);
        assert!("xgboost".parse::<TabularModelKind>().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let (x, y) = or_rule_data(60);
        for kind in TabularModelKind::ALL {
            let m = TabularModel::fit(kind, &x, &y, None, 3).unwrap();
            let back: TabularModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            for r in &x {
                assert_eq!(m.logit(r).unwrap().to_bits(), back.logit(r).unwrap().to_bits());
            }
        }
    }
}
