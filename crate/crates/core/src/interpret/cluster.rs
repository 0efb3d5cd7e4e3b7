use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default elbow threshold on the relative distortion drop.
pub const DEFAULT_THETA: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub n_init: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions { n_init: 10, max_iter: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from each point to its assigned centroid.
    pub distortion: f64,
    /// Per cluster, the fraction of its members carrying each label. Empty
    /// when no labels were supplied.
    pub composition: Vec<BTreeMap<String, f64>>,
    /// Distortion after each Lloyd iteration of the winning run.
    pub history: Vec<f64>,
}

impl ClusterResult {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = sq_dist(x, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn check(vectors: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > vectors.len() {
        return Err(Error::InsufficientData(format!("k = {k} exceeds the {} points", vectors.len())));
    }
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::Validation("vectors differ in dimension".into()));
    }
    Ok(())
}

/// k-means++ seeding, extending `start` up to `k` centroids.
fn plus_plus(vectors: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    if centroids.is_empty() {
        centroids.push(vectors[rng.gen_range(0..vectors.len())].clone());
    }
    while centroids.len() < k {
        let d2: Vec<f64> = vectors.iter().map(|v| nearest(v, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            d2.iter()
                .position(|d| {
                    u -= d;
                    u < 0.0
                })
                .unwrap_or_else(|| d2.iter().rposition(|d| *d > 0.0).unwrap_or(0))
        } else {
            rng.gen_range(0..vectors.len())
        };
        centroids.push(vectors[pick].clone());
    }
    centroids
}

/// Lloyd iterations. Empty clusters keep their previous centroid, so the
/// distortion never increases.
fn lloyd(vectors: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> (Vec<usize>, Vec<Vec<f64>>, f64, Vec<f64>) {
    let k = centroids.len();
    let d = vectors[0].len();
    let mut assign: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids).0).collect();
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (v, &a) in vectors.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(v) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<(usize, f64)> = vectors.iter().map(|v| nearest(v, &centroids)).collect();
        history.push(next.iter().map(|(_, d)| d).sum());
        let changed = next.iter().zip(&assign).any(|((a, _), b)| a != b);
        assign = next.into_iter().map(|(a, _)| a).collect();
        if !changed {
            break;
        }
    }
    let distortion = vectors.iter().zip(&assign).map(|(v, &a)| sq_dist(v, &centroids[a])).sum();
    (assign, centroids, distortion, history)
}

fn best_of(vectors: &[Vec<f64>], inits: Vec<Vec<Vec<f64>>>, max_iter: usize) -> ClusterResult {
    let mut best: Option<ClusterResult> = None;
    for init in inits {
        let k = init.len();
        let (assignments, centroids, distortion, history) = lloyd(vectors, init, max_iter);
        if best.as_ref().is_none_or(|b| distortion < b.distortion) {
            best = Some(ClusterResult { k, assignments, centroids, distortion, composition: Vec::new(), history });
        }
    }
    best.expect("at least one initialisation")
}

/// k-means with `n_init` k-means++ restarts; the lowest distortion wins.
pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64, opts: &KMeansOptions) -> Result<ClusterResult> {
    check(vectors, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inits = (0..opts.n_init.max(1)).map(|_| plus_plus(vectors, Vec::new(), k, &mut rng)).collect();
    Ok(best_of(vectors, inits, opts.max_iter))
}

fn composition<L: AsRef<str>>(result: &ClusterResult, labels: &[L]) -> Vec<BTreeMap<String, f64>> {
    let mut counts: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); result.k];
    let all: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
    for c in &mut counts {
        for l in &all {
            c.entry(l.clone()).or_insert(0);
        }
    }
    for (&a, l) in result.assignments.iter().zip(&all) {
        *counts[a].get_mut(l).expect("seeded above") += 1;
    }
    counts
        .into_iter()
        .map(|c| {
            let total: usize = c.values().sum();
            if total == 0 {
                return BTreeMap::new();
            }
            c.into_iter().map(|(l, n)| (l, n as f64 / total as f64)).collect()
        })
        .collect()
}

/// Cluster sentence vectors and report, per cluster, the share of sentences
/// from each summary mode (`labels[i]` is the mode of sentence `i`).
pub fn cluster_sentences<L: AsRef<str>>(vectors: &[Vec<f64>], labels: &[L], k: usize, seed: u64) -> Result<ClusterResult> {
    if labels.len() != vectors.len() {
        return Err(Error::Validation(format!("{} vectors but {} labels", vectors.len(), labels.len())));
    }
    let mut r = kmeans(vectors, k, seed, &KMeansOptions::default())?;
    r.composition = composition(&r, labels);
    Ok(r)
}

/// Distortion for every k in `ks` (ascending). Each k is also started from
/// the previous k's centroids plus one k-means++ draw per extra centroid,
/// which makes the distortion non-increasing in k.
pub fn distortion_sweep(vectors: &[Vec<f64>], ks: &[usize], seed: u64, opts: &KMeansOptions) -> Result<Vec<ClusterResult>> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::Config("empty k range".into()));
    }
    let mut out: Vec<ClusterResult> = Vec::new();
    for &k in &ks {
        check(vectors, k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut inits: Vec<Vec<Vec<f64>>> =
            (0..opts.n_init.max(1)).map(|_| plus_plus(vectors, Vec::new(), k, &mut rng)).collect();
        if let Some(prev) = out.last() {
            inits.push(plus_plus(vectors, prev.centroids.clone(), k, &mut rng));
        }
        out.push(best_of(vectors, inits, opts.max_iter));
    }
    Ok(out)
}

/// Elbow rule: the smallest k whose relative distortion drop to the next k
/// in the range is below `theta`; the largest k if no drop is that small.
pub fn choose_k(vectors: &[Vec<f64>], ks: &[usize], seed: u64, theta: f64) -> Result<usize> {
    let sweep = distortion_sweep(vectors, ks, seed, &KMeansOptions::default())?;
    for w in sweep.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.distortion <= 0.0 || (a.distortion - b.distortion) / a.distortion < theta {
            return Ok(a.k);
        }
    }
    Ok(sweep.last().expect("non-empty sweep").k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    pub(super) fn blobs(centres: &[(f64, f64)], per: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
        let c: Vec<Vec<f64>> = centres.iter().map(|&(x, y)| vec![x, y]).collect();
        blobs_nd(&c, per, spread, seed)
    }

    pub(super) fn blobs_nd(centres: &[Vec<f64>], per: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, spread).unwrap();
        centres
            .iter()
            .flat_map(|c| (0..per).map(|_| c.iter().map(|x| x + noise.sample(&mut rng)).collect()).collect::<Vec<Vec<f64>>>())
            .collect()
    }

    #[test]
    fn single_cluster_distortion_is_total_scatter() {
        let v = blobs(&[(0.0, 0.0)], 30, 1.0, 1);
        let r = kmeans(&v, 1, 0, &KMeansOptions::default()).unwrap();
        let n = v.len() as f64;
        let mean: Vec<f64> = (0..2).map(|j| v.iter().map(|p| p[j]).sum::<f64>() / n).collect();
        let scatter: f64 = v.iter().map(|p| sq_dist(p, &mean)).sum();
        assert!((r.distortion - scatter).abs() < 1e-9);
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let v = blobs(&[(0.0, 0.0), (20.0, 0.0)], 25, 0.5, 2);
        let r = kmeans(&v, 2, 0, &KMeansOptions::default()).unwrap();
        assert!(r.assignments[..25].iter().all(|a| *a == r.assignments[0]));
        assert!(r.assignments[25..].iter().all(|a| *a == r.assignments[25]));
        assert_ne!(r.assignments[0], r.assignments[25]);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn elbow_finds_three_blobs() {
        let centre = |i: usize| (0..8).map(|j| if j == i { 10.0 } else { 0.0 }).collect::<Vec<f64>>();
        let v = blobs_nd(&[centre(0), centre(1), centre(2)], 50, 1.0, 3);
        let ks: Vec<usize> = (1..=8).collect();
        assert_eq!(choose_k(&v, &ks, 0, DEFAULT_THETA).unwrap(), 3);
        let sweep = distortion_sweep(&v, &ks, 0, &KMeansOptions::default()).unwrap();
        assert!(sweep.windows(2).all(|w| w[1].distortion <= w[0].distortion));
        assert_eq!(choose_k(&v, &[1], 0, DEFAULT_THETA).unwrap(), 1);
        assert!(choose_k(&v, &[], 0, DEFAULT_THETA).is_err());
    }

    #[test]
    fn composition_of_a_pure_cluster() {
        let v = blobs(&[(0.0, 0.0), (20.0, 0.0)], 10, 0.5, 4);
        let labels: Vec<&str> = (0..20).map(|i| if i < 10 { "Stance" } else if i % 2 == 0 { "Summary" } else { "Stance" }).collect();
        let r = cluster_sentences(&v, &labels, 2, 0).unwrap();
        let pure = &r.composition[r.assignments[0]];
        assert_eq!(pure["Stance"], 1.0);
        assert_eq!(pure["Summary"], 0.0);
        for c in &r.composition {
            assert!((c.values().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(kmeans(&v, 21, 0, &KMeansOptions::default()).is_err());
    }

    #[test]
    fn reproducible_with_seed() {
        let v = blobs(&[(0.0, 0.0), (3.0, 3.0), (6.0, 0.0)], 20, 1.5, 5);
        assert_eq!(
            kmeans(&v, 3, 9, &KMeansOptions::default()).unwrap(),
            kmeans(&v, 3, 9, &KMeansOptions::default()).unwrap()
        );
    }
}
