//! Hashed bag-of-n-grams text encoder with a linear head, trained with
//! hand-written backprop and AdamW.
//!
//! Each input segment is encoded separately: token and bigram ids index an
//! embedding table, the rows are summed and scaled by `1/sqrt(n)`, and a
//! shared `tanh` projection maps the pooled vector to the segment
//! representation. Segment representations are concatenated and fed to one
//! sigmoid output per label. Special tokens (strategy markers, `[MASK]`) get
//! dedicated rows; the `[MASK]` row is pinned at zero.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{Tokenizer, MASK_TOKEN};
use crate::util::fnv1a;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderShape {
    /// Hash buckets for ordinary unigrams and bigrams.
    pub buckets: usize,
    pub dim: usize,
    pub bigrams: bool,
    /// Per-segment token budget; longer segments keep their head and tail.
    pub max_tokens: usize,
}

impl Default for EncoderShape {
    fn default() -> Self {
        EncoderShape { buckets: 1 << 14, dim: 32, bigrams: true, max_tokens: 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Optimiser settings used for encoder fine-tuning on real data.
    pub fn reference(seed: u64) -> Self {
        TrainConfig { batch_size: 16, lr: 3.44e-5, weight_decay: 3.61e-6, warmup_steps: 30, epochs: 10, seed }
    }

    /// Settings for the from-scratch hashed encoder at desk scale. Its
    /// embeddings start random, so it needs a far larger step size than a
    /// pre-trained encoder.
    pub fn desk(seed: u64) -> Self {
        TrainConfig { lr: 1e-2, warmup_steps: 10, ..TrainConfig::reference(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::Config("learning rate must be positive and weight decay non-negative".into()));
        }
        Ok(())
    }
}

/// Token ids of one segment after hashing.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentIds {
    ids: Vec<u32>,
    scale: f32,
}

/// A featurized input: one id list per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurized(Vec<SegmentIds>);

impl Featurized {
    pub fn n_segments(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashBagModel {
    shape: EncoderShape,
    n_segments: usize,
    n_outputs: usize,
    tokenizer: Tokenizer,
    mask_row: Option<u32>,
    emb: Vec<f32>,
    w: Vec<f32>,
    b: Vec<f32>,
    v: Vec<f32>,
    c: Vec<f32>,
}

/// Sizes needed to rebuild a model from its raw parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelLayout {
    pub shape: EncoderShape,
    pub n_segments: usize,
    pub n_outputs: usize,
    pub specials: Vec<String>,
}

impl HashBagModel {
    pub fn new(shape: EncoderShape, n_segments: usize, n_outputs: usize, tokenizer: Tokenizer, seed: u64) -> Result<Self> {
        if shape.buckets == 0 || shape.dim == 0 || n_segments == 0 || n_outputs == 0 || shape.max_tokens == 0 {
            return Err(Error::Config("encoder sizes must be positive".into()));
        }
        let d = shape.dim;
        let rows = shape.buckets + tokenizer.specials().len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb_dist = Normal::new(0.0f32, 0.1).expect("valid normal");
        let mut emb: Vec<f32> = (0..rows * d).map(|_| emb_dist.sample(&mut rng)).collect();
        let bound = (6.0 / (2 * d) as f32).sqrt();
        let w: Vec<f32> = (0..d * d).map(|_| rng.gen_range(-bound..bound)).collect();
        let head_bound = (1.0 / (n_segments * d) as f32).sqrt();
        let v: Vec<f32> = (0..n_outputs * n_segments * d).map(|_| rng.gen_range(-head_bound..head_bound)).collect();
        let mask_row = tokenizer.special_index(MASK_TOKEN).map(|i| (shape.buckets + i) as u32);
        if let Some(r) = mask_row {
            emb[r as usize * d..(r as usize + 1) * d].fill(0.0);
        }
        Ok(HashBagModel {
            shape,
            n_segments,
            n_outputs,
            tokenizer,
            mask_row,
            emb,
            w,
            b: vec![0.0; d],
            v,
            c: vec![0.0; n_outputs],
        })
    }

    pub fn layout(&self) -> ModelLayout {
        ModelLayout {
            shape: self.shape,
            n_segments: self.n_segments,
            n_outputs: self.n_outputs,
            specials: self.tokenizer.specials().to_vec(),
        }
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    fn param_blocks(&self) -> [&Vec<f32>; 5] {
        [&self.emb, &self.w, &self.b, &self.v, &self.c]
    }

    /// Parameters as little-endian f32, in a fixed block order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let n: usize = self.param_blocks().iter().map(|b| b.len()).sum();
        let mut out = Vec::with_capacity(n * 4);
        for block in self.param_blocks() {
            for x in block {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_le_bytes(layout: &ModelLayout, bytes: &[u8]) -> Result<Self> {
        let mut tokenizer = Tokenizer::default();
        for s in &layout.specials {
            tokenizer.add_special(s.clone());
        }
        if tokenizer.specials() != layout.specials.as_slice() {
            return Err(Error::Validation("special token list does not match the default tokenizer prefix".into()));
        }
        let mut model = HashBagModel::new(layout.shape, layout.n_segments, layout.n_outputs, tokenizer, 0)?;
        let total: usize = model.param_blocks().iter().map(|b| b.len()).sum();
        if bytes.len() != total * 4 {
            return Err(Error::Validation(format!(
                "weights file has {} bytes, expected {}",
                bytes.len(),
                total * 4
            )));
        }
        let mut floats = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        for block in [&mut model.emb, &mut model.w, &mut model.b, &mut model.v, &mut model.c] {
            for x in block.iter_mut() {
                *x = floats.next().expect("length checked");
            }
        }
        Ok(model)
    }

    fn bucket(&self, key: &[u8]) -> u32 {
        (fnv1a(key) % self.shape.buckets as u64) as u32
    }

    fn segment_ids(&self, text: &str) -> SegmentIds {
        let mut tokens = self.tokenizer.tokenize(text);
        let max = self.shape.max_tokens;
        if tokens.len() > max {
            let head = max / 2;
            let tail = max - head;
            let cut = tokens.len() - tail;
            tokens.drain(head..cut);
        }
        let special: Vec<Option<usize>> = tokens.iter().map(|t| self.tokenizer.special_index(t)).collect();
        let mut ids = Vec::with_capacity(tokens.len() * 2);
        for (t, sp) in tokens.iter().zip(&special) {
            let id = match sp {
                Some(i) => (self.shape.buckets + i) as u32,
                None => self.bucket(t.as_bytes()),
            };
            if Some(id) != self.mask_row {
                ids.push(id);
            }
        }
        if self.shape.bigrams {
            for i in 1..tokens.len() {
                if special[i - 1].is_none() && special[i].is_none() {
                    let key = format!("{}\u{1}{}", tokens[i - 1], tokens[i]);
                    ids.push(self.bucket(key.as_bytes()));
                }
            }
        }
        let scale = if tokens.is_empty() { 0.0 } else { 1.0 / (tokens.len() as f32).sqrt() };
        SegmentIds { ids, scale }
    }

    pub fn featurize(&self, segments: &[&str]) -> Result<Featurized> {
        if segments.len() != self.n_segments {
            return Err(Error::Validation(format!(
                "model expects {} input segments, got {}",
                self.n_segments,
                segments.len()
            )));
        }
        Ok(Featurized(segments.iter().map(|s| self.segment_ids(s)).collect()))
    }

    fn forward(&self, x: &Featurized) -> Forward {
        let d = self.shape.dim;
        let mut pooled = vec![0.0f32; self.n_segments * d];
        let mut hidden = vec![0.0f32; self.n_segments * d];
        for (s, seg) in x.0.iter().enumerate() {
            let p = &mut pooled[s * d..(s + 1) * d];
            for id in &seg.ids {
                let row = &self.emb[*id as usize * d..(*id as usize + 1) * d];
                for (a, r) in p.iter_mut().zip(row) {
                    *a += r;
                }
            }
            for a in p.iter_mut() {
                *a *= seg.scale;
            }
            let h = &mut hidden[s * d..(s + 1) * d];
            for (i, hi) in h.iter_mut().enumerate() {
                let wrow = &self.w[i * d..(i + 1) * d];
                let z: f32 = self.b[i] + wrow.iter().zip(p.iter()).map(|(a, b)| a * b).sum::<f32>();
                *hi = z.tanh();
            }
        }
        let width = self.n_segments * d;
        let logits = (0..self.n_outputs)
            .map(|o| {
                let vrow = &self.v[o * width..(o + 1) * width];
                self.c[o] + vrow.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f32>()
            })
            .collect();
        Forward { pooled, hidden, logits }
    }

    pub fn logits(&self, x: &Featurized) -> Vec<f64> {
        self.forward(x).logits.into_iter().map(f64::from).collect()
    }

    pub fn logits_batch(&self, xs: &[Featurized]) -> Vec<Vec<f64>> {
        xs.par_iter().map(|x| self.logits(x)).collect()
    }

    fn backward(&self, x: &Featurized, target: &[f32], weight: f32) -> (Gradient, f64) {
        let d = self.shape.dim;
        let width = self.n_segments * d;
        let fwd = self.forward(x);
        let mut loss = 0.0f64;
        let mut delta = vec![0.0f32; self.n_outputs];
        for o in 0..self.n_outputs {
            let z = fwd.logits[o];
            let p = crate::util::sigmoid(f64::from(z)) as f32;
            delta[o] = weight * (p - target[o]);
            // numerically stable BCE with logits
            let zf = f64::from(z);
            let y = f64::from(target[o]);
            loss += f64::from(weight) * (zf.max(0.0) - zf * y + (-zf.abs()).exp().ln_1p());
        }
        let mut g = Gradient::zeros(self);
        let mut dh = vec![0.0f32; width];
        for o in 0..self.n_outputs {
            g.c[o] += delta[o];
            let vrow = &self.v[o * width..(o + 1) * width];
            let gv = &mut g.v[o * width..(o + 1) * width];
            for j in 0..width {
                gv[j] += delta[o] * fwd.hidden[j];
                dh[j] += delta[o] * vrow[j];
            }
        }
        for (s, seg) in x.0.iter().enumerate() {
            let h = &fwd.hidden[s * d..(s + 1) * d];
            let p = &fwd.pooled[s * d..(s + 1) * d];
            let dz: Vec<f32> = (0..d).map(|i| dh[s * d + i] * (1.0 - h[i] * h[i])).collect();
            let mut dp = vec![0.0f32; d];
            for i in 0..d {
                g.b[i] += dz[i];
                let wrow = &self.w[i * d..(i + 1) * d];
                let gw = &mut g.w[i * d..(i + 1) * d];
                for j in 0..d {
                    gw[j] += dz[i] * p[j];
                    dp[j] += dz[i] * wrow[j];
                }
            }
            if seg.ids.is_empty() {
                continue;
            }
            for x in dp.iter_mut() {
                *x *= seg.scale;
            }
            for id in &seg.ids {
                g.emb.push((*id, dp.clone()));
            }
        }
        (g, loss)
    }
}

struct Forward {
    pooled: Vec<f32>,
    hidden: Vec<f32>,
    logits: Vec<f32>,
}

struct Gradient {
    emb: Vec<(u32, Vec<f32>)>,
    w: Vec<f32>,
    b: Vec<f32>,
    v: Vec<f32>,
    c: Vec<f32>,
}

impl Gradient {
    fn zeros(m: &HashBagModel) -> Self {
        Gradient {
            emb: Vec::new(),
            w: vec![0.0; m.w.len()],
            b: vec![0.0; m.b.len()],
            v: vec![0.0; m.v.len()],
            c: vec![0.0; m.c.len()],
        }
    }

    fn add(&mut self, other: Gradient) {
        self.emb.extend(other.emb);
        for (a, b) in [(&mut self.w, &other.w), (&mut self.b, &other.b), (&mut self.v, &other.v), (&mut self.c, &other.c)] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

struct AdamState {
    m: Vec<f32>,
    v: Vec<f32>,
}

impl AdamState {
    fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n] }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

struct Step {
    lr: f64,
    wd: f64,
    bc1: f64,
    bc2: f64,
}

impl Step {
    fn apply(&self, param: &mut f32, grad: f32, m: &mut f32, v: &mut f32) {
        let g = f64::from(grad);
        let mm = BETA1 * f64::from(*m) + (1.0 - BETA1) * g;
        let vv = BETA2 * f64::from(*v) + (1.0 - BETA2) * g * g;
        *m = mm as f32;
        *v = vv as f32;
        let update = (mm / self.bc1) / ((vv / self.bc2).sqrt() + EPS);
        let p = f64::from(*param);
        *param = (p - self.lr * (update + self.wd * p)) as f32;
    }
}

/// Linear warmup to the peak rate, then linear decay to zero.
pub fn learning_rate(step: usize, total_steps: usize, cfg: &TrainConfig) -> f64 {
    if cfg.warmup_steps > 0 && step < cfg.warmup_steps {
        return cfg.lr * (step + 1) as f64 / cfg.warmup_steps as f64;
    }
    let remaining = total_steps.saturating_sub(step) as f64;
    let span = total_steps.saturating_sub(cfg.warmup_steps).max(1) as f64;
    cfg.lr * (remaining / span).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub best_epoch: usize,
    pub epoch_scores: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

/// One training example: features, per-output targets in {0, 1}, and a loss
/// weight.
pub struct Example {
    pub x: Featurized,
    pub y: Vec<f32>,
    pub weight: f32,
}

/// Minibatch AdamW. After each epoch `score` is called on the current model
/// and the best-scoring epoch's parameters are kept (earliest on ties).
pub fn train(
    model: &mut HashBagModel,
    data: &[Example],
    cfg: &TrainConfig,
    mut score: impl FnMut(&HashBagModel) -> f64,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("no training examples".into()));
    }
    for ex in data {
        if ex.y.len() != model.n_outputs || ex.x.n_segments() != model.n_segments {
            return Err(Error::Validation("example shape does not match the model".into()));
        }
    }
    let d = model.shape.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut st_emb = AdamState::new(model.emb.len());
    let mut st_w = AdamState::new(model.w.len());
    let mut st_b = AdamState::new(model.b.len());
    let mut st_v = AdamState::new(model.v.len());
    let mut st_c = AdamState::new(model.c.len());
    let steps_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total = steps_per_epoch * cfg.epochs;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0usize;
    let mut best: Option<(f64, usize, HashBagModel)> = None;
    let mut scores = Vec::with_capacity(cfg.epochs);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut row_grad = vec![0.0f32; d];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let parts: Vec<(Gradient, f64)> = batch
                .par_iter()
                .map(|&i| model.backward(&data[i].x, &data[i].y, data[i].weight))
                .collect();
            let mut grad = Gradient::zeros(model);
            for (g, l) in parts {
                grad.add(g);
                epoch_loss += l;
            }
            let inv = 1.0 / batch.len() as f32;
            let t = (step + 1) as i32;
            let s = Step {
                lr: learning_rate(step, total, cfg),
                wd: cfg.weight_decay,
                bc1: 1.0 - BETA1.powi(t),
                bc2: 1.0 - BETA2.powi(t),
            };
            // dense blocks
            for (p, g, st) in [
                (&mut model.w, &grad.w, &mut st_w),
                (&mut model.b, &grad.b, &mut st_b),
                (&mut model.v, &grad.v, &mut st_v),
                (&mut model.c, &grad.c, &mut st_c),
            ] {
                for i in 0..p.len() {
                    s.apply(&mut p[i], g[i] * inv, &mut st.m[i], &mut st.v[i]);
                }
            }
            // sparse embedding rows: accumulate per row, update touched rows only
            let mut rows = grad.emb;
            rows.sort_by_key(|(id, _)| *id);
            let mut i = 0;
            while i < rows.len() {
                let id = rows[i].0;
                row_grad.fill(0.0);
                while i < rows.len() && rows[i].0 == id {
                    for (a, b) in row_grad.iter_mut().zip(&rows[i].1) {
                        *a += b;
                    }
                    i += 1;
                }
                if Some(id) == model.mask_row {
                    continue;
                }
                let base = id as usize * d;
                for j in 0..d {
                    s.apply(&mut model.emb[base + j], row_grad[j] * inv, &mut st_emb.m[base + j], &mut st_emb.v[base + j]);
                }
            }
            step += 1;
        }
        let sc = score(model);
        log::debug!("epoch {epoch}: loss {:.4}, score {sc:.4}", epoch_loss / data.len() as f64);
        scores.push(sc);
        losses.push(epoch_loss / data.len() as f64);
        if best.as_ref().map_or(true, |(b, _, _)| sc > *b) {
            best = Some((sc, epoch, model.clone()));
        }
    }
    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    *model = best_model;
    Ok(TrainReport { best_epoch, epoch_scores: scores, epoch_losses: losses })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EncoderShape {
        EncoderShape { buckets: 1 << 10, dim: 8, bigrams: true, max_tokens: 64 }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut m = HashBagModel::new(small(), 2, 2, Tokenizer::default(), 3).unwrap();
        for x in m.c.iter_mut() {
            *x = 0.1;
        }
        let x = m.featurize(&["the cat sat <Resources>", "on the mat"]).unwrap();
        let y = [1.0f32, 0.0];
        let (g, _) = m.backward(&x, &y, 1.0);
        let loss = |m: &HashBagModel| m.backward(&x, &y, 1.0).1;
        let eps = 1e-3f32;
        // dense w entry
        for idx in [0usize, 5, 17] {
            let mut plus = m.clone();
            plus.w[idx] += eps;
            let mut minus = m.clone();
            minus.w[idx] -= eps;
            let num = (loss(&plus) - loss(&minus)) / (2.0 * f64::from(eps));
            assert!((num - f64::from(g.w[idx])).abs() < 1e-3, "w[{idx}] {num} vs {}", g.w[idx]);
        }
        // an embedding entry of the first token
        let (id, grad_row) = &g.emb[0];
        let mut total = 0.0f32;
        for (i2, r) in &g.emb {
            if i2 == id {
                total += r[1];
            }
        }
        let _ = grad_row;
        let pos = *id as usize * 8 + 1;
        let mut plus = m.clone();
        plus.emb[pos] += eps;
        let mut minus = m.clone();
        minus.emb[pos] -= eps;
        let num = (loss(&plus) - loss(&minus)) / (2.0 * f64::from(eps));
        assert!((num - f64::from(total)).abs() < 1e-3, "{num} vs {total}");
    }

    #[test]
    fn mask_row_stays_zero_and_is_ignored() {
        let m = HashBagModel::new(small(), 1, 1, Tokenizer::default(), 1).unwrap();
        let a = m.featurize(&["hello [MASK] world"]).unwrap();
        assert!(a.0[0].ids.iter().all(|id| Some(*id) != m.mask_row));
        let row = m.mask_row.unwrap() as usize;
        assert!(m.emb[row * 8..(row + 1) * 8].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn learns_a_keyword() {
        let mut m = HashBagModel::new(small(), 1, 1, Tokenizer::default(), 7).unwrap();
        let words = ["alpha", "beta", "gamma", "delta", "eps"];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data: Vec<Example> = (0..200)
            .map(|i| {
                let pos = i % 2 == 0;
                let mut t: Vec<&str> = (0..6).map(|_| *words.choose(&mut rng).unwrap()).collect();
                if pos {
                    t.push("zebra");
                }
                t.shuffle(&mut rng);
                Example { x: m.featurize(&[&t.join(" ")]).unwrap(), y: vec![f32::from(u8::from(pos))], weight: 1.0 }
            })
            .collect();
        let cfg = TrainConfig { batch_size: 16, lr: 1e-2, weight_decay: 0.0, warmup_steps: 5, epochs: 5, seed: 1 };
        let mut epoch = 0.0;
        // prefer the last epoch
        train(&mut m, &data, &cfg, |_| {
            epoch += 1.0;
            epoch
        })
        .unwrap();
        let pos = m.logits(&m.featurize(&["alpha beta zebra gamma delta eps alpha"]).unwrap())[0];
        let neg = m.logits(&m.featurize(&["alpha beta gamma delta eps alpha"]).unwrap())[0];
        assert!(pos > 0.0 && neg < 0.0, "{pos} {neg}");
    }

    #[test]
    fn weights_round_trip() {
        let m = HashBagModel::new(small(), 2, 3, Tokenizer::default(), 5).unwrap();
        let back = HashBagModel::from_le_bytes(&m.layout(), &m.to_le_bytes()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn schedule_warms_up_then_decays() {
        let cfg = TrainConfig { batch_size: 1, lr: 1.0, weight_decay: 0.0, warmup_steps: 10, epochs: 1, seed: 0 };
        assert!((learning_rate(0, 100, &cfg) - 0.1).abs() < 1e-12);
        assert!((learning_rate(9, 100, &cfg) - 1.0).abs() < 1e-12);
        assert!(learning_rate(50, 100, &cfg) < 1.0);
        assert!(learning_rate(99, 100, &cfg) > 0.0);
    }
}
