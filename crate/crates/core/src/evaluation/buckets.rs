use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{macro_f1, ConfusionMatrix};
use crate::corpus::{BinaryOutcome, Conversation};
use crate::encoding::{render_plain, Tokenizer};
use crate::{Error, Result};

pub const DEFAULT_BUCKET_EDGES: [usize; 3] = [1000, 2000, 3000];

/// Buckets with fewer instances than this are flagged.
pub const LOW_CONFIDENCE_N: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    /// Inclusive lower token bound.
    pub lo: usize,
    /// Exclusive upper bound; `None` for the last bucket.
    pub hi: Option<usize>,
}

impl Bucket {
    pub fn label(&self) -> String {
        let k = |t: usize| if t > 0 && t % 1000 == 0 { format!("{}K", t / 1000) } else { t.to_string() };
        match self.hi {
            Some(hi) => format!("{}-{}", k(self.lo), k(hi)),
            None => format!("{}+", k(self.lo)),
        }
    }

    fn contains(&self, tokens: usize) -> bool {
        tokens >= self.lo && self.hi.is_none_or(|hi| tokens < hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketScore {
    pub model_id: String,
    pub bucket: usize,
    pub n: usize,
    /// `None` for an empty bucket.
    pub macro_f1: Option<f64>,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketTable {
    pub edges: Vec<usize>,
    pub buckets: Vec<Bucket>,
    pub scores: Vec<BucketScore>,
}

impl BucketTable {
    /// Per-bucket F1 for one model, in bucket order.
    pub fn series(&self, model_id: &str) -> Vec<Option<f64>> {
        self.scores.iter().filter(|s| s.model_id == model_id).map(|s| s.macro_f1).collect()
    }

    /// Plot data: `bucket_edge,model_id,macro_f1,n`, one line per model and
    /// bucket, with the bucket's lower edge. Empty buckets leave F1 blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bucket_edge,model_id,macro_f1,n\n");
        for s in &self.scores {
            let f1 = s.macro_f1.map(|v| format!("{v:.6}")).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", self.buckets[s.bucket].lo, s.model_id, f1, s.n));
        }
        out
    }
}

fn buckets_for(edges: &[usize]) -> Result<Vec<Bucket>> {
    if edges.is_empty() {
        return Err(Error::Config("no bucket edges given".into()));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) || edges[0] == 0 {
        return Err(Error::Config(format!("bucket edges must be positive and increasing, got {edges:?}")));
    }
    let mut lo = 0;
    let mut out = Vec::new();
    for &e in edges {
        out.push(Bucket { lo, hi: Some(e) });
        lo = e;
    }
    out.push(Bucket { lo, hi: None });
    Ok(out)
}

/// Per-bucket macro F1 for each model. `predictions[model][i]`, `gold[i]`
/// and `tokens[i]` refer to the same instance.
pub fn bucket_table(
    predictions: &BTreeMap<String, Vec<BinaryOutcome>>,
    gold: &[BinaryOutcome],
    tokens: &[usize],
    edges: &[usize],
) -> Result<BucketTable> {
    let buckets = buckets_for(edges)?;
    if gold.is_empty() {
        return Err(Error::InsufficientData("no conversations to bucket".into()));
    }
    if tokens.len() != gold.len() {
        return Err(Error::Validation("token counts and labels differ in length".into()));
    }
    let which: Vec<usize> = tokens
        .iter()
        .map(|&t| buckets.iter().position(|b| b.contains(t)).expect("buckets cover every count"))
        .collect();
    let mut scores = Vec::new();
    for (model, pred) in predictions {
        if pred.len() != gold.len() {
            return Err(Error::Validation(format!("model {model} has {} predictions for {} instances", pred.len(), gold.len())));
        }
        for b in 0..buckets.len() {
            let idx: Vec<usize> = (0..gold.len()).filter(|&i| which[i] == b).collect();
            let f1 = if idx.is_empty() {
                None
            } else {
                let p: Vec<BinaryOutcome> = idx.iter().map(|&i| pred[i]).collect();
                let g: Vec<BinaryOutcome> = idx.iter().map(|&i| gold[i]).collect();
                Some(macro_f1(&ConfusionMatrix::from_predictions(&p, &g)?)?)
            };
            scores.push(BucketScore {
                model_id: model.clone(),
                bucket: b,
                n: idx.len(),
                macro_f1: f1,
                low_confidence: idx.len() < LOW_CONFIDENCE_N,
            });
        }
    }
    Ok(BucketTable { edges: edges.to_vec(), buckets, scores })
}

/// [`bucket_table`] with gold labels and token counts taken from the
/// conversations (full plain rendering).
pub fn length_bucket_report(
    predictions: &BTreeMap<String, Vec<BinaryOutcome>>,
    conversations: &[Conversation],
    edges: &[usize],
) -> Result<BucketTable> {
    let tokenizer = Tokenizer::default();
    let gold = conversations.iter().map(Conversation::label).collect::<Result<Vec<_>>>()?;
    let tokens = conversations
        .iter()
        .map(|c| Ok(tokenizer.count(&render_plain(&c.turns)?)))
        .collect::<Result<Vec<_>>>()?;
    bucket_table(predictions, &gold, &tokens, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use BinaryOutcome::{Negative as N, NonNegative as P};

    #[test]
    fn default_edges_make_four_buckets() {
        let b = buckets_for(&DEFAULT_BUCKET_EDGES).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b.iter().map(Bucket::label).collect::<Vec<_>>(), vec!["0-1K", "1K-2K", "2K-3K", "3K+"]);
        assert!(b[3].contains(3000) && b[2].contains(2999));
        assert!(buckets_for(&[]).is_err());
        assert!(buckets_for(&[2000, 1000]).is_err());
    }

    #[test]
    fn per_bucket_scores_and_flags() {
        let gold = vec![N, P, N, P, N, P];
        let tokens = vec![10, 20, 1500, 1600, 5000, 5100];
        let mut preds = BTreeMap::new();
        preds.insert("m".to_string(), vec![N, P, P, N, N, P]);
        let t = bucket_table(&preds, &gold, &tokens, &DEFAULT_BUCKET_EDGES).unwrap();
        assert_eq!(t.series("m"), vec![Some(1.0), Some(0.0), None, Some(1.0)]);
        assert!(t.scores.iter().all(|s| s.low_confidence));
        let csv = t.to_csv();
        assert!(csv.starts_with("bucket_edge,model_id,macro_f1,n\n0,m,1.000000,2\n"));
        assert!(csv.contains("\n2000,m,,0\n"));
        assert!(bucket_table(&preds, &[], &[], &DEFAULT_BUCKET_EDGES).is_err());
    }
}
