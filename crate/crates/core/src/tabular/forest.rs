use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_data, unit_weights};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf { p_true: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// CART tree with Gini impurity, grown until leaves are pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn proba(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { p_true } => return *p_true,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Bootstrap-aggregated CART trees with `sqrt(d)` candidate features per
/// split. The probability is the mean of the leaf class fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub dim: usize,
    pub trees: Vec<Tree>,
}

const PROBA_CLIP: f64 = 1e-6;

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    w: Vec<f64>,
    max_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p) * total
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>) -> usize {
        let total: f64 = rows.iter().map(|i| self.w[*i]).sum();
        let pos: f64 = rows.iter().filter(|i| self.y[**i]).map(|i| self.w[*i]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { p_true: if total > 0.0 { pos / total } else { 0.5 } });
        if pos <= 0.0 || pos >= total || rows.len() < 2 {
            return id;
        }
        let d = self.x[0].len();
        let parent = gini(pos, total);
        let mut best: Option<(f64, usize, f64)> = None;
        let candidates = sample(&mut self.rng, d, self.max_features.min(d)).into_vec();
        for f in candidates {
            let mut sorted: Vec<(f64, f64, bool)> = rows.iter().map(|i| (self.x[*i][f], self.w[*i], self.y[*i])).collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut lw, mut lp) = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                lw += sorted[k].1;
                if sorted[k].2 {
                    lp += sorted[k].1;
                }
                if sorted[k].0 == sorted[k + 1].0 {
                    continue;
                }
                let score = gini(lp, lw) + gini(pos - lp, total - lw);
                if score < parent - 1e-12 && best.map_or(true, |(s, _, _)| score < s) {
                    best = Some((score, f, 0.5 * (sorted[k].0 + sorted[k + 1].0)));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|i| self.x[*i][feature] <= threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[bool], weights: Option<&[f64]>, n_trees: usize, seed: u64) -> Result<Self> {
        let d = check_training_data(x, y)?;
        let sw = unit_weights(x.len(), weights);
        let max_features = ((d as f64).sqrt().floor() as usize).max(1);
        let n = x.len();
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(t as u64));
                let mut counts = vec![0.0; n];
                for _ in 0..n {
                    counts[rng.gen_range(0..n)] += 1.0;
                }
                let w: Vec<f64> = counts.iter().zip(&sw).map(|(c, s)| c * s).collect();
                let rows: Vec<usize> = (0..n).filter(|i| w[*i] > 0.0).collect();
                let mut g = Grower { x, y, w, max_features, rng, nodes: Vec::new() };
                g.grow(rows);
                Tree { nodes: g.nodes }
            })
            .collect();
        Ok(RandomForest { dim: d, trees })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.proba(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let p = self.proba(x).clamp(PROBA_CLIP, 1.0 - PROBA_CLIP);
        (p / (1.0 - p)).ln()
    }
}
