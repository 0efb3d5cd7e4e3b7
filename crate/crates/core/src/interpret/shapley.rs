use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{EncodedInput, TokenSpan, Tokenizer, MASK_TOKEN};
use crate::{Error, Result};

/// Largest feature count for which full enumeration is allowed.
pub const MAX_EXACT_FEATURES: usize = 12;

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn mask_bits(mask: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

/// Shapley values from a table of all 2^n coalition values, indexed by
/// bitmask.
fn shapley_from_table(n: usize, table: &[f64]) -> Vec<f64> {
    // weight for a coalition of size s not containing i: s!(n-s-1)!/n!
    let w: Vec<f64> = (0..n).map(|s| 1.0 / (n as f64 * binom(n - 1, s))).collect();
    (0..n)
        .map(|i| {
            let bit = 1usize << i;
            (0..1usize << n)
                .filter(|m| m & bit == 0)
                .map(|m| w[m.count_ones() as usize] * (table[m | bit] - table[m]))
                .sum()
        })
        .collect()
}

/// Shapley values by enumerating every coalition. `value` receives a
/// membership vector (`true` = feature present).
pub fn exact_shapley<F: Fn(&[bool]) -> f64 + Sync>(value: F, n: usize) -> Result<Vec<f64>> {
    if n > MAX_EXACT_FEATURES {
        return Err(Error::Validation(format!(
            "exact Shapley enumeration is limited to {MAX_EXACT_FEATURES} features, got {n}"
        )));
    }
    let table: Vec<f64> = (0..1usize << n).into_par_iter().map(|m| value(&mask_bits(m, n))).collect();
    Ok(shapley_from_table(n, &table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMode {
    /// Every coalition evaluated.
    Exact,
    /// Coalitions sampled from the Shapley kernel.
    Sampled,
}

/// Coalitions (excluding empty and full) with their regression weights.
fn kernel_coalitions(n: usize, max_evals: usize, seed: u64) -> (Vec<Vec<bool>>, Vec<f64>, AttributionMode) {
    let kernel = |s: usize| (n - 1) as f64 / (binom(n, s) * (s * (n - s)) as f64);
    let full = (1usize << n.min(63)).saturating_sub(2);
    if n < 63 && full <= max_evals {
        let masks: Vec<Vec<bool>> = (1..(1usize << n) - 1).map(|m| mask_bits(m, n)).collect();
        let weights = masks.iter().map(|m| kernel(m.iter().filter(|b| **b).count())).collect();
        return (masks, weights, AttributionMode::Exact);
    }
    // sample sizes proportionally to the kernel's total mass per size and
    // pair each coalition with its complement
    let size_mass: Vec<f64> = (1..n).map(|s| kernel(s) * binom(n, s)).collect();
    let total: f64 = size_mass.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: HashMap<Vec<bool>, f64> = HashMap::new();
    let mut order = Vec::new();
    for _ in 0..(max_evals / 2).max(1) {
        let mut u = rng.gen::<f64>() * total;
        let mut s = n - 1;
        for (k, m) in size_mass.iter().enumerate() {
            if u < *m {
                s = k + 1;
                break;
            }
            u -= m;
        }
        let mut mask = vec![false; n];
        for i in sample(&mut rng, n, s) {
            mask[i] = true;
        }
        let comp: Vec<bool> = mask.iter().map(|b| !b).collect();
        for m in [mask, comp] {
            let e = counts.entry(m.clone()).or_insert_with(|| {
                order.push(m);
                0.0
            });
            *e += 1.0;
        }
    }
    let weights = order.iter().map(|m| counts[m]).collect();
    (order, weights, AttributionMode::Sampled)
}

/// Weighted least squares with the efficiency constraint folded in by
/// eliminating the last feature.
fn solve_kernel(n: usize, masks: &[Vec<bool>], weights: &[f64], values: &[f64], base: f64, full: f64) -> Result<Vec<f64>> {
    let delta = full - base;
    if n == 1 {
        return Ok(vec![delta]);
    }
    let m = masks.len();
    let mut a = DMatrix::<f64>::zeros(m, n - 1);
    let mut b = DVector::<f64>::zeros(m);
    for (r, (mask, (&w, &v))) in masks.iter().zip(weights.iter().zip(values)).enumerate() {
        let sw = w.sqrt();
        let last = f64::from(u8::from(mask[n - 1]));
        for j in 0..n - 1 {
            a[(r, j)] = sw * (f64::from(u8::from(mask[j])) - last);
        }
        b[r] = sw * (v - base - last * delta);
    }
    let x = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Validation(format!("kernel regression failed: {e}")))?;
    let mut phi: Vec<f64> = x.iter().copied().collect();
    phi.push(delta - phi.iter().sum::<f64>());
    Ok(phi)
}

/// Kernel-weighted regression estimate of Shapley values. With a budget
/// covering all 2^n - 2 proper coalitions the estimate is exact; otherwise
/// coalitions are sampled (seeded). Efficiency holds in both cases.
pub fn kernel_shapley<F: Fn(&[bool]) -> f64 + Sync>(
    value: F,
    n: usize,
    max_evals: usize,
    seed: u64,
) -> Result<(Vec<f64>, AttributionMode)> {
    kernel_try(|m| Ok(value(m)), n, max_evals, seed).map(|(phi, mode, _, _)| (phi, mode))
}

fn kernel_try<F: Fn(&[bool]) -> Result<f64> + Sync>(
    value: F,
    n: usize,
    max_evals: usize,
    seed: u64,
) -> Result<(Vec<f64>, AttributionMode, f64, f64)> {
    let base = value(&vec![false; n])?;
    let full = value(&vec![true; n])?;
    if n == 0 {
        return Ok((Vec::new(), AttributionMode::Exact, base, full));
    }
    let (masks, weights, mode) = kernel_coalitions(n, max_evals, seed);
    let values = masks.par_iter().map(|m| value(m)).collect::<Result<Vec<_>>>()?;
    let phi = solve_kernel(n, &masks, &weights, &values, base, full)?;
    Ok((phi, mode, base, full))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Token,
    /// Contiguous tokens up to and including punctuation.
    Phrase,
}

/// A maskable span of one input segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextUnit {
    pub segment: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub marker: bool,
    #[serde(skip)]
    tokens: usize,
}

const BREAKS: &[&str] = &[",", ".", ";", ":", "!", "?"];

/// Split every segment into attribution units. Strategy markers are always
/// units of their own.
pub fn text_units(input: &EncodedInput, kind: UnitKind, tokenizer: &Tokenizer) -> Vec<TextUnit> {
    let mut out = Vec::new();
    for (seg, text) in input.segments.iter().enumerate() {
        let spans: Vec<TokenSpan> = tokenizer.spans(text);
        let mut cur: Option<(usize, usize, usize)> = None;
        let push = |cur: &mut Option<(usize, usize, usize)>, out: &mut Vec<TextUnit>, marker: bool| {
            if let Some((start, end, tokens)) = cur.take() {
                out.push(TextUnit { segment: seg, start, end, text: text[start..end].to_string(), marker, tokens });
            }
        };
        for (k, sp) in spans.iter().enumerate() {
            let tok = &text[sp.start..sp.end];
            if sp.special && tok != MASK_TOKEN {
                push(&mut cur, &mut out, false);
                cur = Some((sp.start, sp.end, 1));
                push(&mut cur, &mut out, true);
                continue;
            }
            let newline_before = cur.is_some_and(|(_, end, _)| text[end..sp.start].contains('\n'));
            if kind == UnitKind::Token || newline_before {
                push(&mut cur, &mut out, false);
            }
            cur = Some(match cur {
                Some((start, _, n)) => (start, sp.end, n + 1),
                None => (sp.start, sp.end, 1),
            });
            let next_is_break = spans.get(k + 1).is_some_and(|n| BREAKS.contains(&&text[n.start..n.end]));
            if BREAKS.contains(&tok) && !next_is_break {
                push(&mut cur, &mut out, false);
            }
        }
        push(&mut cur, &mut out, false);
    }
    out
}

fn masked_input(input: &EncodedInput, units: &[TextUnit], present: &[bool]) -> Result<EncodedInput> {
    let mut segments = Vec::with_capacity(input.segments.len());
    for (seg, text) in input.segments.iter().enumerate() {
        let mut s = String::with_capacity(text.len());
        let mut pos = 0;
        for (u, _) in units.iter().zip(present).filter(|(u, p)| u.segment == seg && !**p) {
            s.push_str(&text[pos..u.start]);
            s.push(' ');
            s.push_str(&vec![MASK_TOKEN; u.tokens].join(" "));
            s.push(' ');
            pos = u.end;
        }
        s.push_str(&text[pos..]);
        segments.push(s);
    }
    Ok(EncodedInput { id: input.id.clone(), segments, provenance: input.provenance.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributionOptions {
    pub unit: UnitKind,
    /// Coalition budget for sampled estimation when there are more than
    /// [`MAX_EXACT_FEATURES`] units.
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for AttributionOptions {
    fn default() -> Self {
        AttributionOptions { unit: UnitKind::Phrase, max_evals: 4096, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionUnit {
    #[serde(flatten)]
    pub unit: TextUnit,
    /// Positive values push towards the negative outcome.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub id: String,
    pub units: Vec<AttributionUnit>,
    /// Prediction with every unit masked.
    pub base_value: f64,
    /// Prediction on the unmasked input.
    pub prediction: f64,
    pub mode: AttributionMode,
}

impl AttributionResult {
    /// `prediction - base_value - Σ scores`; zero up to rounding.
    pub fn efficiency_gap(&self) -> f64 {
        self.prediction - self.base_value - self.units.iter().map(|u| u.score).sum::<f64>()
    }
}

/// Shapley attribution of `predict` (probability of the negative outcome)
/// over the units of `input`. Masked units are replaced by one `[MASK]` per
/// token so positions are kept. Up to [`MAX_EXACT_FEATURES`] units are
/// enumerated exactly.
pub fn phrase_attribution<F>(predict: F, input: &EncodedInput, opts: &AttributionOptions) -> Result<AttributionResult>
where
    F: Fn(&EncodedInput) -> Result<f64> + Sync,
{
    let units = text_units(input, opts.unit, &Tokenizer::default());
    let n = units.len();
    let value = |present: &[bool]| -> Result<f64> {
        let x = masked_input(input, &units, present)?;
        predict(&x).map_err(|e| {
            let hidden: Vec<&str> =
                units.iter().zip(present).filter(|(_, p)| !**p).map(|(u, _)| u.text.as_str()).collect();
            Error::Validation(format!("prediction failed on {} with {hidden:?} masked: {e}", input.id))
        })
    };
    let (scores, mode, base, full) = if n <= MAX_EXACT_FEATURES {
        let table = (0..1usize << n).into_par_iter().map(|m| value(&mask_bits(m, n))).collect::<Result<Vec<_>>>()?;
        (shapley_from_table(n, &table), AttributionMode::Exact, table[0], table[(1 << n) - 1])
    } else {
        kernel_try(value, n, opts.max_evals, opts.seed)?
    };
    Ok(AttributionResult {
        id: input.id.clone(),
        units: units.into_iter().zip(scores).map(|(unit, score)| AttributionUnit { unit, score }).collect(),
        base_value: base,
        prediction: full,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::InputSource;

    #[test]
    fn additive_game_returns_weights() {
        let w = [0.5, -1.0, 2.0, 0.25];
        let phi = exact_shapley(|m| m.iter().zip(&w).filter(|(b, _)| **b).map(|(_, x)| x).sum(), 4).unwrap();
        for (a, b) in phi.iter().zip(&w) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn and_game_splits_evenly() {
        let phi = exact_shapley(|m| f64::from(u8::from(m[0] && m[1])), 2).unwrap();
        assert_eq!(phi, vec![0.5, 0.5]);
    }

    #[test]
    fn constant_game_is_zero_and_guard_applies() {
        assert!(exact_shapley(|_| 3.0, 5).unwrap().iter().all(|x| *x == 0.0));
        assert!(exact_shapley(|_| 0.0, 13).is_err());
    }

    #[test]
    fn kernel_matches_exact_on_a_nonlinear_game() {
        let v = |m: &[bool]| {
            let k = m.iter().filter(|b| **b).count() as f64;
            (k * 0.3).sin() + if m[0] && m[3] { 1.5 } else { 0.0 } - f64::from(u8::from(m[5])) * 0.7
        };
        let exact = exact_shapley(v, 8).unwrap();
        let (est, mode) = kernel_shapley(v, 8, 4096, 0).unwrap();
        assert_eq!(mode, AttributionMode::Exact);
        for (a, b) in exact.iter().zip(&est) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn sampled_estimate_is_efficient_and_close_for_additive_games() {
        let w: Vec<f64> = (0..16).map(|i| i as f64 / 10.0 - 0.7).collect();
        let v = |m: &[bool]| m.iter().zip(&w).filter(|(b, _)| **b).map(|(_, x)| x).sum::<f64>();
        let (est, mode) = kernel_shapley(v, 16, 2000, 3).unwrap();
        assert_eq!(mode, AttributionMode::Sampled);
        for (a, b) in est.iter().zip(&w) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn phrase_units_split_on_punctuation_and_markers() {
        let x = EncodedInput::single(
            "s",
            "Help seeker: I feel bad, really bad.\nCounselor: <Emotional Attending> That sounds hard...",
            InputSource::Utter,
        )
        .unwrap();
        let units: Vec<String> = text_units(&x, UnitKind::Phrase, &Tokenizer::default()).into_iter().map(|u| u.text).collect();
        assert_eq!(
            units,
            vec!["Help seeker:", "I feel bad,", "really bad.", "Counselor:", "<Emotional Attending>", "That sounds hard..."]
        );
        let tokens = text_units(&x, UnitKind::Token, &Tokenizer::default());
        assert_eq!(tokens.len(), Tokenizer::default().count(x.text()));
    }

    #[test]
    fn masking_keeps_token_count() {
        let x = EncodedInput::single("s", "one two, three.", InputSource::Conv).unwrap();
        let t = Tokenizer::default();
        let units = text_units(&x, UnitKind::Phrase, &t);
        let m = masked_input(&x, &units, &[false, true]).unwrap();
        assert_eq!(t.tokenize(m.text()), vec!["[MASK]", "[MASK]", "[MASK]", "three", "."]);
    }

    #[test]
    fn attribution_is_efficient_and_marker_sensitive() {
        let x = EncodedInput::single(
            "s",
            "Counselor: <Emotional Attending> I hear you, that is a lot. Help seeker: yes, thanks.",
            InputSource::Utter,
        )
        .unwrap();
        let predict = |e: &EncodedInput| -> Result<f64> {
            let t = e.text();
            Ok(0.2 + if t.contains("<Emotional Attending>") { 0.0 } else { 0.6 } + if t.contains("thanks") { -0.1 } else { 0.0 })
        };
        let r = phrase_attribution(predict, &x, &AttributionOptions::default()).unwrap();
        assert!(r.efficiency_gap().abs() < 1e-12);
        let marker = r.units.iter().find(|u| u.unit.marker).unwrap();
        assert!((marker.score + 0.6).abs() < 1e-12);
        assert!(r.units.iter().all(|u| u.score.abs() <= marker.score.abs()));
        let flat = phrase_attribution(|_| Ok(0.4), &x, &AttributionOptions::default()).unwrap();
        assert!(flat.units.iter().all(|u| u.score.abs() < 1e-12));
    }

    #[test]
    fn predict_errors_carry_unit_context() {
        let x = EncodedInput::single("s9", "a, b.", InputSource::Conv).unwrap();
        let err = phrase_attribution(|_| Err(Error::Validation("boom".into())), &x, &AttributionOptions::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("s9") && err.contains("boom"));
    }
}
