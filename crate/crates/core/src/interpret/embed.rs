use crate::encoding::Tokenizer;
use crate::util::fnv1a;

/// Fixed-dimension, deterministic sentence embedding.
pub trait SentenceEmbedder: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, sentence: &str) -> Vec<f64>;
}

/// Signed feature hashing of unigrams and bigrams, L2-normalised. Sentences
/// sharing vocabulary land close together.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
    tokenizer: Tokenizer,
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashingEmbedder { dim: dim.max(1), seed, tokenizer: Tokenizer::default() }
    }

    fn add(&self, v: &mut [f64], feature: &str, weight: f64) {
        let mut bytes = self.seed.to_le_bytes().to_vec();
        bytes.extend_from_slice(feature.as_bytes());
        let h = fnv1a(&bytes);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % self.dim as u64) as usize] += sign * weight;
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(256, 0)
    }
}

impl SentenceEmbedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sentence: &str) -> Vec<f64> {
        let toks: Vec<String> = self
            .tokenizer
            .tokenize(sentence)
            .into_iter()
            .filter(|t| t.chars().any(char::is_alphanumeric))
            .collect();
        let mut v = vec![0.0; self.dim];
        for t in &toks {
            self.add(&mut v, t, 1.0);
        }
        for w in toks.windows(2) {
            self.add(&mut v, &format!("{} {}", w[0], w[1]), 0.5);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}
