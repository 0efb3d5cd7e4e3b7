use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BinaryOutcome, Conversation};
use crate::util::apportion;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    pub fold_index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            dev: 0.2,
            test: 0.2,
        }
    }
}

/// Session ids grouped by label, negatives first, each group shuffled.
fn shuffled_by_class(dataset: &[Conversation], seed: u64) -> Result<[Vec<String>; 2]> {
    let labeled = dataset
        .iter()
        .map(|c| Ok((c.session_id.clone(), c.label()?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(shuffle_labeled(&labeled, seed))
}

fn shuffle_labeled(labeled: &[(String, BinaryOutcome)], seed: u64) -> [Vec<String>; 2] {
    let mut classes: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    for (id, label) in labeled {
        let idx = match label {
            BinaryOutcome::Negative => 0,
            BinaryOutcome::NonNegative => 1,
        };
        classes[idx].push(id.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in &mut classes {
        class.shuffle(&mut rng);
    }
    classes
}

/// Per-class quotas for one carve-out, forcing at least one instance per class
/// when `require_each` is set.
fn class_quotas(available: &[usize; 2], total: usize, require_each: bool) -> Option<[usize; 2]> {
    let q = apportion(available, total);
    let mut q = [q[0], q[1]];
    if require_each {
        for c in 0..2 {
            if q[c] == 0 {
                let other = 1 - c;
                if available[c] == 0 || q[other] <= 1 {
                    return None;
                }
                q[c] += 1;
                q[other] -= 1;
            }
        }
    }
    (q[0] <= available[0] && q[1] <= available[1]).then_some(q)
}

/// Stratified train/dev/test partition. Split sizes are fixed on the whole
/// dataset first (so they stay within one session of the ratios) and then
/// apportioned across the two classes.
pub fn split_dataset(dataset: &[Conversation], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    let n = dataset.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 5 sessions to split, got {n}"
        )));
    }
    let sum = ratios.train + ratios.dev + ratios.test;
    if (sum - 1.0).abs() > 1e-9 || ratios.train <= 0.0 || ratios.dev <= 0.0 || ratios.test <= 0.0 {
        return Err(Error::Config(format!("split ratios must be positive and sum to 1, got {ratios:?}")));
    }
    let classes = shuffled_by_class(dataset, seed)?;
    let n_test = (n as f64 * ratios.test).round() as usize;
    let n_dev = (n as f64 * ratios.dev).round() as usize;

    let too_small = || {
        Error::InsufficientData(format!(
            "cannot place both classes in every split ({} negative, {} non-negative)",
            classes[0].len(),
            classes[1].len()
        ))
    };
    let avail = [classes[0].len(), classes[1].len()];
    let test_q = class_quotas(&avail, n_test, true).ok_or_else(too_small)?;
    let rest = [avail[0] - test_q[0], avail[1] - test_q[1]];
    let dev_q = class_quotas(&rest, n_dev, true).ok_or_else(too_small)?;
    if rest[0] - dev_q[0] == 0 || rest[1] - dev_q[1] == 0 {
        return Err(too_small());
    }

    let mut split = DatasetSplit {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
        fold_index: 0,
        seed,
    };
    for c in 0..2 {
        let ids = &classes[c];
        split.test.extend_from_slice(&ids[..test_q[c]]);
        split.dev.extend_from_slice(&ids[test_q[c]..test_q[c] + dev_q[c]]);
        split.train.extend_from_slice(&ids[test_q[c] + dev_q[c]..]);
    }
    Ok(split)
}

/// Stratified k-fold cross validation. Each fold's remaining sessions are
/// re-split 75/25 into train and dev.
pub fn make_folds(dataset: &[Conversation], n_folds: usize, seed: u64) -> Result<Vec<DatasetSplit>> {
    let labeled = dataset
        .iter()
        .map(|c| Ok((c.session_id.clone(), c.label()?)))
        .collect::<Result<Vec<_>>>()?;
    make_folds_labeled(&labeled, n_folds, seed)
}

/// [`make_folds`] over bare `(id, label)` pairs.
pub fn make_folds_labeled(labeled: &[(String, BinaryOutcome)], n_folds: usize, seed: u64) -> Result<Vec<DatasetSplit>> {
    if n_folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {n_folds}")));
    }
    let classes = shuffle_labeled(labeled, seed);
    let smallest = classes[0].len().min(classes[1].len());
    if n_folds > smallest {
        return Err(Error::InsufficientData(format!(
            "{n_folds} folds but the smaller class has only {smallest} sessions"
        )));
    }
    // dealing the class-ordered list round robin keeps both classes spread
    // evenly and fold sizes within one of each other
    let mut fold_of: Vec<(String, usize, usize)> = Vec::with_capacity(labeled.len());
    for (pos, (class, id)) in classes
        .iter()
        .enumerate()
        .flat_map(|(c, ids)| ids.iter().map(move |id| (c, id)))
        .enumerate()
    {
        fold_of.push((id.clone(), class, pos % n_folds));
    }

    let mut folds = Vec::with_capacity(n_folds);
    for f in 0..n_folds {
        let test: Vec<String> = fold_of
            .iter()
            .filter(|(_, _, k)| *k == f)
            .map(|(id, _, _)| id.clone())
            .collect();
        let mut rest: [Vec<String>; 2] = [Vec::new(), Vec::new()];
        for (id, class, k) in &fold_of {
            if *k != f {
                rest[*class].push(id.clone());
            }
        }
        let avail = [rest[0].len(), rest[1].len()];
        let n_rest = avail[0] + avail[1];
        let n_dev = (n_rest as f64 * 0.25).round() as usize;
        let dev_q = class_quotas(&avail, n_dev, false).expect("quota within availability");
        let mut train = Vec::new();
        let mut dev = Vec::new();
        for c in 0..2 {
            dev.extend_from_slice(&rest[c][..dev_q[c]]);
            train.extend_from_slice(&rest[c][dev_q[c]..]);
        }
        folds.push(DatasetSplit {
            train,
            dev,
            test,
            fold_index: f,
            seed,
        });
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Outcome, Source, Turn};
    use std::collections::HashSet;

    fn dataset(n: usize, n_neg: usize) -> Vec<Conversation> {
        (0..n)
            .map(|i| Conversation {
                session_id: format!("s{i:04}"),
                source: Source::Synthetic,
                outcome: Some(if i < n_neg { Outcome::Negative } else { Outcome::Positive }),
                turns: vec![Turn::help_seeker("hello")],
            })
            .collect()
    }

    fn assert_partition(split: &DatasetSplit, n: usize) {
        let all: HashSet<&String> =
            split.train.iter().chain(&split.dev).chain(&split.test).collect();
        assert_eq!(all.len(), n);
        assert_eq!(split.train.len() + split.dev.len() + split.test.len(), n);
    }

    #[test]
    fn ten_sessions_give_six_two_two() {
        let d = dataset(10, 3);
        let a = split_dataset(&d, SplitRatios::default(), 7).unwrap();
        let b = split_dataset(&d, SplitRatios::default(), 7).unwrap();
        assert_eq!((a.train.len(), a.dev.len(), a.test.len()), (6, 2, 2));
        assert_eq!(a, b);
        assert_partition(&a, 10);
    }

    #[test]
    fn large_dataset_proportions() {
        let d = dataset(1469, 238);
        let s = split_dataset(&d, SplitRatios::default(), 1).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (881, 294, 294));
        assert_partition(&s, 1469);
    }

    #[test]
    fn three_sessions_is_an_error() {
        assert!(split_dataset(&dataset(3, 1), SplitRatios::default(), 0).is_err());
    }

    #[test]
    fn single_negative_cannot_cover_all_splits() {
        assert!(split_dataset(&dataset(20, 1), SplitRatios::default(), 0).is_err());
    }

    #[test]
    fn folds_partition_the_dataset() {
        let d = dataset(100, 30);
        let folds = make_folds(&d, 10, 3).unwrap();
        let mut seen = HashSet::new();
        for f in &folds {
            assert_eq!(f.test.len(), 10);
            assert_partition(f, 100);
            for id in &f.test {
                assert!(seen.insert(id.clone()));
            }
            // 75/25 re-split of the remainder
            assert_eq!(f.dev.len(), 23);
        }
        assert_eq!(seen.len(), 100);
        assert_eq!(folds, make_folds(&d, 10, 3).unwrap());
    }

    #[test]
    fn small_dataset_fold_sizes() {
        let d = dataset(236, 31);
        let folds = make_folds(&d, 10, 11).unwrap();
        for f in &folds {
            assert!(f.test.len() == 23 || f.test.len() == 24, "{}", f.test.len());
        }
    }

    #[test]
    fn too_many_folds_for_minority() {
        assert!(make_folds(&dataset(100, 5), 10, 0).is_err());
        assert!(make_folds(&dataset(100, 50), 1, 0).is_err());
    }
}
