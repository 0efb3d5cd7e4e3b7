//! Outcome predictors behind one inference contract: text and dual-input
//! encoder classifiers, tabular models over session vectors, and the LLM
//! zero-shot answer wrapped as a model.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::BinaryOutcome;
use crate::encoding::{EncodedInput, InputSource, Tokenizer};
use crate::evaluation::{macro_f1, ConfusionMatrix};
use crate::nn::{train, EncoderShape, Example, HashBagModel, ModelLayout, TrainConfig, TrainReport};
use crate::session::{vector_len, SCHEMA_VERSION};
use crate::tabular::{TabularModel, TabularModelKind};
use crate::utterance::codebook;
use crate::util::{config_hash, unit_hash, read_bytes, read_json, write_bytes, write_json};
use crate::{Error, Result};

/// Logit magnitude used for the zero-shot model's hard answers.
pub const ZERO_SHOT_LOGIT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextClassifierConfig {
    pub encoder_name: String,
    pub max_tokens: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub epochs: usize,
    pub seed: u64,
    pub buckets: usize,
    pub dim: usize,
    pub bigrams: bool,
    /// Weight examples inversely to class frequency.
    pub class_weighting: bool,
}

impl Default for TextClassifierConfig {
    fn default() -> Self {
        let t = TrainConfig::reference(0);
        let s = EncoderShape::default();
        TextClassifierConfig {
            encoder_name: "hashbag".into(),
            max_tokens: s.max_tokens,
            batch_size: t.batch_size,
            learning_rate: t.lr,
            weight_decay: t.weight_decay,
            warmup_steps: t.warmup_steps,
            epochs: t.epochs,
            seed: 0,
            buckets: s.buckets,
            dim: s.dim,
            bigrams: s.bigrams,
            class_weighting: false,
        }
    }
}

impl TextClassifierConfig {
    /// Step sizes suited to the from-scratch hashed encoder.
    pub fn desk(seed: u64) -> Self {
        let t = TrainConfig::desk(seed);
        TextClassifierConfig {
            learning_rate: t.lr,
            warmup_steps: t.warmup_steps,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_name != "hashbag" {
            return Err(Error::Config(format!(
                "encoder {:?} is not available; the built-in encoder is \"hashbag\"",
                self.encoder_name
            )));
        }
        if self.max_tokens == 0 || self.buckets == 0 || self.dim == 0 {
            return Err(Error::Config("encoder sizes must be positive".into()));
        }
        self.train_config().validate()
    }

    fn shape(&self) -> EncoderShape {
        EncoderShape { buckets: self.buckets, dim: self.dim, bigrams: self.bigrams, max_tokens: self.max_tokens }
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            lr: self.learning_rate,
            weight_decay: self.weight_decay,
            warmup_steps: self.warmup_steps,
            epochs: self.epochs,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleKind {
    Text,
    Dual,
    Tabular,
    LlmZeroShot,
}

/// Which inputs a bundle consumes, in segment order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecipe {
    pub sources: Vec<InputSource>,
}

impl InputRecipe {
    pub fn new(sources: &[InputSource]) -> Self {
        InputRecipe { sources: sources.to_vec() }
    }

    pub fn label(&self) -> String {
        self.sources.iter().map(|s| s.label()).collect::<Vec<_>>().join("+")
    }
}

#[derive(Debug, Clone)]
pub enum Artifact {
    Encoder(HashBagModel),
    Tabular(TabularModel),
    ZeroShot,
}

/// A trained (or wrapped) outcome predictor.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub kind: BundleKind,
    pub recipe: InputRecipe,
    pub artifact: Artifact,
    pub config: Option<TextClassifierConfig>,
    pub config_hash: String,
    pub report: Option<TrainReport>,
}

/// One instance in the form a bundle consumes.
#[derive(Debug, Clone, Copy)]
pub enum Instance<'a> {
    Text(&'a EncodedInput),
    Vector(&'a [f64]),
    /// The LLM's own outcome answer for the conversation.
    LlmAnswer(BinaryOutcome),
}

/// Owned counterpart of [`Instance`], for datasets held in memory.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceData {
    Text(EncodedInput),
    Vector(Vec<f64>),
    LlmAnswer(BinaryOutcome),
}

impl InstanceData {
    pub fn as_instance(&self) -> Instance<'_> {
        match self {
            InstanceData::Text(x) => Instance::Text(x),
            InstanceData::Vector(v) => Instance::Vector(v),
            InstanceData::LlmAnswer(a) => Instance::LlmAnswer(*a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_negative: f64,
    pub logit: f64,
}

impl Prediction {
    pub fn from_logit(logit: f64) -> Self {
        Prediction { p_negative: crate::util::sigmoid(logit), logit }
    }

    pub fn label(&self) -> BinaryOutcome {
        BinaryOutcome::from_negative(self.p_negative >= 0.5)
    }
}

fn check_labels(labels: &[BinaryOutcome], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::Validation(format!("{n} inputs but {} labels", labels.len())));
    }
    if n == 0 {
        return Err(Error::InsufficientData("no training instances".into()));
    }
    let neg = labels.iter().filter(|l| l.is_negative()).count();
    if neg == 0 || neg == n {
        return Err(Error::InsufficientData("training labels contain a single class".into()));
    }
    Ok(())
}

fn recipe_of(inputs: &[EncodedInput]) -> Result<InputRecipe> {
    let first = &inputs[0].provenance;
    for x in inputs {
        if &x.provenance != first {
            return Err(Error::Validation(format!(
                "instance {} is {} but the batch starts with {}",
                x.id,
                x.label(),
                inputs[0].label()
            )));
        }
    }
    Ok(InputRecipe { sources: first.clone() })
}

fn check_segments(inputs: &[EncodedInput], config: &TextClassifierConfig, tokenizer: &Tokenizer) -> Result<()> {
    for x in inputs {
        for (seg, src) in x.segments.iter().zip(&x.provenance) {
            if seg.trim().is_empty() {
                return Err(Error::Validation(format!("instance {} has an empty {} segment", x.id, src.label())));
            }
            let n = tokenizer.count(seg);
            if n > config.max_tokens {
                return Err(Error::Validation(format!(
                    "instance {} has {n} tokens in its {} segment, over the {} budget; clip it first",
                    x.id,
                    src.label(),
                    config.max_tokens
                )));
            }
        }
    }
    Ok(())
}

fn target(label: BinaryOutcome) -> Vec<f32> {
    vec![if label.is_negative() { 1.0 } else { 0.0 }]
}

fn encoder_predict(model: &HashBagModel, input: &EncodedInput) -> Result<Prediction> {
    let segs: Vec<&str> = input.segments.iter().map(String::as_str).collect();
    let x = model.featurize(&segs)?;
    Ok(Prediction::from_logit(model.logits(&x)[0]))
}

/// Train an encoder classifier over single- or multi-segment inputs. Each
/// segment is encoded by the shared encoder and the representations are
/// concatenated before the head. The kept checkpoint is the epoch with the
/// best dev macro F1 (the last epoch when no dev set is given).
pub fn train_text_classifier(
    inputs: &[EncodedInput],
    labels: &[BinaryOutcome],
    dev: Option<(&[EncodedInput], &[BinaryOutcome])>,
    config: &TextClassifierConfig,
) -> Result<ModelBundle> {
    config.validate()?;
    check_labels(labels, inputs.len())?;
    let recipe = recipe_of(inputs)?;
    let tokenizer = Tokenizer::default();
    check_segments(inputs, config, &tokenizer)?;
    if let Some((dx, dy)) = dev {
        if dx.len() != dy.len() {
            return Err(Error::Validation("dev inputs and labels differ in length".into()));
        }
        if !dx.is_empty() && recipe_of(dx)? != recipe {
            return Err(Error::Validation("dev inputs use a different recipe".into()));
        }
        check_segments(dx, config, &tokenizer)?;
    }
    let n_seg = recipe.sources.len();
    let mut model = HashBagModel::new(config.shape(), n_seg, 1, tokenizer, config.seed)?;

    let n_neg = labels.iter().filter(|l| l.is_negative()).count() as f32;
    let n = labels.len() as f32;
    let weight = |l: BinaryOutcome| -> f32 {
        if !config.class_weighting {
            1.0
        } else if l.is_negative() {
            n / (2.0 * n_neg)
        } else {
            n / (2.0 * (n - n_neg))
        }
    };
    let data: Vec<Example> = inputs
        .iter()
        .zip(labels)
        .map(|(x, y)| {
            let segs: Vec<&str> = x.segments.iter().map(String::as_str).collect();
            Ok(Example { x: model.featurize(&segs)?, y: target(*y), weight: weight(*y) })
        })
        .collect::<Result<_>>()?;
    let dev_x = match dev {
        Some((dx, dy)) if !dx.is_empty() => Some((
            dx.iter()
                .map(|x| model.featurize(&x.segments.iter().map(String::as_str).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?,
            dy,
        )),
        _ => None,
    };
    let mut epoch = 0usize;
    let report = train(&mut model, &data, &config.train_config(), |m| {
        epoch += 1;
        match &dev_x {
            Some((xs, ys)) => {
                let pred: Vec<BinaryOutcome> = m
                    .logits_batch(xs)
                    .iter()
                    .map(|z| BinaryOutcome::from_negative(z[0] >= 0.0))
                    .collect();
                ConfusionMatrix::from_predictions(&pred, ys)
                    .and_then(|cm| macro_f1(&cm))
                    .unwrap_or(0.0)
            }
            None => epoch as f64,
        }
    })?;
    let kind = if n_seg == 1 { BundleKind::Text } else { BundleKind::Dual };
    Ok(ModelBundle {
        kind,
        recipe,
        artifact: Artifact::Encoder(model),
        config: Some(config.clone()),
        config_hash: config_hash(config)?,
        report: Some(report),
    })
}

/// Two-segment variant of [`train_text_classifier`]; every instance must
/// carry both segments.
pub fn train_dual_classifier(
    inputs: &[EncodedInput],
    labels: &[BinaryOutcome],
    dev: Option<(&[EncodedInput], &[BinaryOutcome])>,
    config: &TextClassifierConfig,
) -> Result<ModelBundle> {
    for x in inputs {
        if x.segments.len() != 2 {
            return Err(Error::Validation(format!(
                "dual classifier needs two segments, instance {} has {}",
                x.id,
                x.segments.len()
            )));
        }
    }
    train_text_classifier(inputs, labels, dev, config)
}

/// Fit a tabular model over one-hot session vectors.
pub fn train_tabular(
    kind: TabularModelKind,
    vectors: &[Vec<f64>],
    labels: &[BinaryOutcome],
    seed: u64,
) -> Result<ModelBundle> {
    check_labels(labels, vectors.len())?;
    let dim = vector_len();
    if let Some((i, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != dim) {
        return Err(Error::Validation(format!("vector {i} has {} entries, expected {dim}", v.len())));
    }
    let y: Vec<bool> = labels.iter().map(|l| l.is_negative()).collect();
    let model = TabularModel::fit(kind, vectors, &y, None, seed)?;
    Ok(ModelBundle {
        kind: BundleKind::Tabular,
        recipe: InputRecipe::new(&[InputSource::Session]),
        artifact: Artifact::Tabular(model),
        config: None,
        config_hash: config_hash(&(kind, seed))?,
        report: None,
    })
}

/// The LLM's zero-shot outcome answer as a model.
pub fn zero_shot_bundle(model_id: &str) -> Result<ModelBundle> {
    Ok(ModelBundle {
        kind: BundleKind::LlmZeroShot,
        recipe: InputRecipe::new(&[InputSource::Conv]),
        artifact: Artifact::ZeroShot,
        config: None,
        config_hash: config_hash(model_id)?,
        report: None,
    })
}

pub fn predict_proba(bundle: &ModelBundle, instance: Instance<'_>) -> Result<Prediction> {
    match (&bundle.artifact, instance) {
        (Artifact::Encoder(model), Instance::Text(input)) => {
            if input.provenance != bundle.recipe.sources {
                return Err(Error::Validation(format!(
                    "bundle expects {} input, got {}",
                    bundle.recipe.label(),
                    input.label()
                )));
            }
            encoder_predict(model, input)
        }
        (Artifact::Tabular(model), Instance::Vector(v)) => {
            let logit = model.logit(v)?;
            Ok(Prediction { p_negative: model.proba(v)?, logit })
        }
        (Artifact::ZeroShot, Instance::LlmAnswer(answer)) => Ok(if answer.is_negative() {
            Prediction { p_negative: 1.0, logit: ZERO_SHOT_LOGIT }
        } else {
            Prediction { p_negative: 0.0, logit: -ZERO_SHOT_LOGIT }
        }),
        (_, other) => Err(Error::Validation(format!(
            "{:?} bundle cannot score a {} instance",
            bundle.kind,
            match other {
                Instance::Text(_) => "text",
                Instance::Vector(_) => "vector",
                Instance::LlmAnswer(_) => "LLM answer",
            }
        ))),
    }
}

pub fn predict_batch(bundle: &ModelBundle, instances: &[Instance<'_>]) -> Result<Vec<Prediction>> {
    instances.par_iter().map(|i| predict_proba(bundle, *i)).collect()
}

/// How to build a model for one input column, used wherever models are
/// retrained per fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Encoder { config: TextClassifierConfig },
    Tabular { kind: TabularModelKind },
    ZeroShot { model_id: String },
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::Encoder { config } => config.encoder_name.clone(),
            ModelSpec::Tabular { kind } => kind.short().to_string(),
            ModelSpec::ZeroShot { model_id } => model_id.clone(),
        }
    }
}

/// Train `spec` on `xs`. Encoders hold out the instances whose hashed id
/// falls under `dev_fraction` for checkpoint selection; the split depends
/// only on the seed and the ids, never on which other instances are present.
pub fn fit_model(
    spec: &ModelSpec,
    ids: &[String],
    xs: &[InstanceData],
    ys: &[BinaryOutcome],
    dev_fraction: f64,
    seed: u64,
) -> Result<ModelBundle> {
    if ids.len() != xs.len() || xs.len() != ys.len() {
        return Err(Error::Validation("ids, inputs and labels differ in length".into()));
    }
    match spec {
        ModelSpec::Encoder { config } => {
            let mut texts = Vec::with_capacity(xs.len());
            for (id, x) in ids.iter().zip(xs) {
                match x {
                    InstanceData::Text(t) => texts.push(t.clone()),
                    _ => return Err(Error::Validation(format!("instance {id} is not text"))),
                }
            }
            let config = TextClassifierConfig { seed, ..config.clone() };
            let is_dev: Vec<bool> = ids.iter().map(|id| unit_hash(seed ^ DEV_SALT, id) < dev_fraction).collect();
            let pick = |dev: bool| -> (Vec<EncodedInput>, Vec<BinaryOutcome>) {
                texts
                    .iter()
                    .zip(ys)
                    .zip(&is_dev)
                    .filter(|(_, d)| **d == dev)
                    .map(|((x, y), _)| (x.clone(), *y))
                    .unzip()
            };
            let (tx, ty) = pick(false);
            let (dx, dy) = pick(true);
            let both = |y: &[BinaryOutcome]| y.iter().any(|l| l.is_negative()) && y.iter().any(|l| !l.is_negative());
            if dx.is_empty() || !both(&ty) {
                train_text_classifier(&texts, ys, None, &config)
            } else {
                train_text_classifier(&tx, &ty, Some((&dx, &dy)), &config)
            }
        }
        ModelSpec::Tabular { kind } => {
            let mut vecs = Vec::with_capacity(xs.len());
            for (id, x) in ids.iter().zip(xs) {
                match x {
                    InstanceData::Vector(v) => vecs.push(v.clone()),
                    _ => return Err(Error::Validation(format!("instance {id} is not a session vector"))),
                }
            }
            train_tabular(*kind, &vecs, ys, seed)
        }
        ModelSpec::ZeroShot { model_id } => zero_shot_bundle(model_id),
    }
}

const DEV_SALT: u64 = 0x6465_7673_706c_6974;

#[derive(Serialize, Deserialize)]
struct SavedBundle {
    kind: BundleKind,
    recipe: InputRecipe,
    config: Option<TextClassifierConfig>,
    config_hash: String,
    layout: Option<ModelLayout>,
    codebook_version: String,
    schema_version: String,
}

impl ModelBundle {
    /// Checkpoint layout: `config.json`, `weights.bin` (little-endian f32) and
    /// `vocab.json` for encoders, `model.json` for tabular models, and
    /// `metrics.json` with the per-epoch dev curve.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let layout = match &self.artifact {
            Artifact::Encoder(m) => Some(m.layout()),
            _ => None,
        };
        let saved = SavedBundle {
            kind: self.kind,
            recipe: self.recipe.clone(),
            config: self.config.clone(),
            config_hash: self.config_hash.clone(),
            layout: layout.clone(),
            codebook_version: codebook().version().to_string(),
            schema_version: SCHEMA_VERSION.to_string(),
        };
        write_json(&dir.join("config.json"), &saved)?;
        match &self.artifact {
            Artifact::Encoder(m) => {
                write_bytes(&dir.join("weights.bin"), &m.to_le_bytes())?;
                write_json(&dir.join("vocab.json"), m.tokenizer().specials())?;
            }
            Artifact::Tabular(m) => write_json(&dir.join("model.json"), m)?,
            Artifact::ZeroShot => {}
        }
        if let Some(r) = &self.report {
            write_json(&dir.join("metrics.json"), r)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let saved: SavedBundle = read_json(&dir.join("config.json"))?;
        if saved.codebook_version != codebook().version() || saved.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "bundle at {} was built with codebook {} / schema {}",
                dir.display(),
                saved.codebook_version,
                saved.schema_version
            )));
        }
        let artifact = match saved.kind {
            BundleKind::Text | BundleKind::Dual => {
                let layout = saved
                    .layout
                    .clone()
                    .ok_or_else(|| Error::Validation("encoder bundle without a layout".into()))?;
                Artifact::Encoder(HashBagModel::from_le_bytes(&layout, &read_bytes(&dir.join("weights.bin"))?)?)
            }
            BundleKind::Tabular => Artifact::Tabular(read_json(&dir.join("model.json"))?),
            BundleKind::LlmZeroShot => Artifact::ZeroShot,
        };
        let metrics = dir.join("metrics.json");
        let report = if metrics.exists() { Some(read_json(&metrics)?) } else { None };
        Ok(ModelBundle {
            kind: saved.kind,
            recipe: saved.recipe,
            artifact,
            config: saved.config,
            config_hash: saved.config_hash,
            report,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_generate, Channel, Leakage, OutcomeRule, SynthSpec};
    use crate::encoding::render_windowed;
    use crate::session::vectorize;

    fn small(seed: u64) -> TextClassifierConfig {
        TextClassifierConfig { buckets: 1 << 12, dim: 16, epochs: 6, ..TextClassifierConfig::desk(seed) }
    }

    fn lexical_corpus(n: usize, seed: u64) -> (Vec<EncodedInput>, Vec<BinaryOutcome>) {
        let spec = SynthSpec {
            n_sessions: n,
            seed,
            negative_rate: 0.5,
            rule: OutcomeRule::only(Channel::Lexical),
            leakage: Leakage { lexical: 0.9, ..Default::default() },
            ..Default::default()
        };
        let (convs, _) = synth_generate(&spec).unwrap();
        let xs = convs
            .iter()
            .map(|c| EncodedInput::single(&c.session_id, render_windowed(c, 4, false).unwrap(), InputSource::Conv).unwrap())
            .collect();
        let ys = convs.iter().map(|c| c.label().unwrap()).collect();
        (xs, ys)
    }

    fn accuracy(bundle: &ModelBundle, xs: &[EncodedInput], ys: &[BinaryOutcome]) -> f64 {
        let pred: Vec<BinaryOutcome> = xs.iter().map(|x| predict_proba(bundle, Instance::Text(x)).unwrap().label()).collect();
        macro_f1(&ConfusionMatrix::from_predictions(&pred, ys).unwrap()).unwrap()
    }

    #[test]
    fn learns_planted_lexical_signal() {
        let (xs, ys) = lexical_corpus(200, 1);
        let (tx, ty) = lexical_corpus(100, 2);
        let b = train_text_classifier(&xs[..150], &ys[..150], Some((&xs[150..], &ys[150..])), &small(0)).unwrap();
        let f1 = accuracy(&b, &tx, &ty);
        assert!(f1 >= 0.9, "macro F1 {f1}");
    }

    #[test]
    fn training_is_deterministic_and_survives_save_load() {
        let (xs, ys) = lexical_corpus(60, 3);
        let a = train_text_classifier(&xs[..40], &ys[..40], Some((&xs[40..], &ys[40..])), &small(5)).unwrap();
        let b = train_text_classifier(&xs[..40], &ys[..40], Some((&xs[40..], &ys[40..])), &small(5)).unwrap();
        assert_eq!(a.report, b.report);
        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path()).unwrap();
        let back = ModelBundle::load(dir.path()).unwrap();
        for x in &xs {
            let p = predict_proba(&a, Instance::Text(x)).unwrap();
            let q = predict_proba(&back, Instance::Text(x)).unwrap();
            assert_eq!(p.logit.to_bits(), q.logit.to_bits());
        }
    }

    #[test]
    fn single_class_and_budget_errors() {
        let (xs, _) = lexical_corpus(10, 4);
        let all_neg = vec![BinaryOutcome::Negative; 10];
        assert!(train_text_classifier(&xs, &all_neg, None, &small(0)).is_err());
        let long = EncodedInput::single("long", "word ".repeat(600), InputSource::Conv).unwrap();
        let err = train_text_classifier(
            &[long, xs[0].clone()],
            &[BinaryOutcome::Negative, BinaryOutcome::NonNegative],
            None,
            &small(0),
        )
        .unwrap_err();
        assert!(err.to_string().contains("long"));
    }

    #[test]
    fn dual_needs_two_segments() {
        let (xs, ys) = lexical_corpus(10, 5);
        assert!(train_dual_classifier(&xs, &ys, None, &small(0)).is_err());
        let pairs: Vec<EncodedInput> = xs
            .iter()
            .map(|x| x.clone().with_segment(x.text().to_string(), InputSource::Summary).unwrap())
            .collect();
        let b = train_dual_classifier(&pairs, &ys, None, &TextClassifierConfig { epochs: 1, ..small(0) }).unwrap();
        assert_eq!(b.kind, BundleKind::Dual);
        assert!(predict_proba(&b, Instance::Text(&xs[0])).is_err());
    }

    #[test]
    fn recipe_mismatch_is_an_error() {
        let (convs, lats) = synth_generate(&SynthSpec { n_sessions: 20, ..Default::default() }).unwrap();
        let vecs: Vec<Vec<f64>> = lats.iter().map(|l| vectorize(&l.session).unwrap()).collect();
        let ys: Vec<BinaryOutcome> = convs.iter().map(|c| c.label().unwrap()).collect();
        let b = train_tabular(TabularModelKind::Adaboost, &vecs, &ys, 0).unwrap();
        let text = EncodedInput::single("x", "hello", InputSource::Conv).unwrap();
        assert!(predict_proba(&b, Instance::Text(&text)).is_err());
        let p = predict_proba(&b, Instance::Vector(&vecs[0])).unwrap();
        assert!((0.0..=1.0).contains(&p.p_negative));
        assert!(train_tabular(TabularModelKind::Adaboost, &[vec![0.0; 59], vec![1.0; 59]], &ys[..2], 0).is_err());
    }

    #[test]
    fn adaboost_fits_the_session_rule_exactly() {
        let spec = SynthSpec { n_sessions: 300, seed: 8, negative_rate: 0.4, ..Default::default() };
        let (convs, lats) = synth_generate(&spec).unwrap();
        let vecs: Vec<Vec<f64>> = lats.iter().map(|l| vectorize(&l.session).unwrap()).collect();
        let ys: Vec<BinaryOutcome> = convs.iter().map(|c| c.label().unwrap()).collect();
        let b = train_tabular(TabularModelKind::Adaboost, &vecs, &ys, 0).unwrap();
        for (v, y) in vecs.iter().zip(&ys) {
            assert_eq!(predict_proba(&b, Instance::Vector(v)).unwrap().label(), *y);
        }
    }

    #[test]
    fn zero_shot_bundle_is_hard() {
        let b = zero_shot_bundle("mock").unwrap();
        let p = predict_proba(&b, Instance::LlmAnswer(BinaryOutcome::Negative)).unwrap();
        assert_eq!(p.p_negative, 1.0);
        let q = predict_proba(&b, Instance::LlmAnswer(BinaryOutcome::NonNegative)).unwrap();
        assert_eq!(q.p_negative, 0.0);
    }
}
