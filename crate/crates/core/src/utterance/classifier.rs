use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::codebook::{codebook, FeatureGroup, StrategyId};
use super::metrics::multilabel_f1;
use crate::corpus::{Conversation, SessionLatents, Speaker, Turn};
use crate::encoding::{render_plain, Tokenizer};
use crate::nn::{train, EncoderShape, Example, Featurized, HashBagModel, ModelLayout, TrainConfig, TrainReport};
use crate::util::{config_hash, read_bytes, read_json, write_bytes, write_json};
use crate::{Error, Result};

/// One output class of an utterance model. `Group` appears in fine models
/// only as a stand-in for fine labels too rare to learn on their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceLabel {
    Fine(StrategyId),
    Group(FeatureGroup),
}

impl UtteranceLabel {
    pub fn group(self) -> FeatureGroup {
        match self {
            UtteranceLabel::Fine(id) => id.group(),
            UtteranceLabel::Group(g) => g,
        }
    }
}

impl fmt::Display for UtteranceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtteranceLabel::Fine(id) => f.write_str(id.name()),
            UtteranceLabel::Group(g) => f.write_str(g.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Fine,
    Grouped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceExample {
    pub session_id: String,
    pub turn_index: usize,
    pub utterance: String,
    /// Previous turns, rendered plainly.
    pub context: String,
    pub labels: Vec<UtteranceLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtteranceConfig {
    /// Number of preceding turns shown as context.
    pub k: usize,
    pub threshold: f64,
    /// Per-class overrides keyed by label name.
    pub class_thresholds: BTreeMap<String, f64>,
    /// Fine labels with fewer training examples are merged into their group.
    pub min_support: usize,
    pub shape: EncoderShape,
    pub train: TrainConfig,
}

impl Default for UtteranceConfig {
    fn default() -> Self {
        UtteranceConfig {
            k: 4,
            threshold: 0.5,
            class_thresholds: BTreeMap::new(),
            min_support: 5,
            shape: EncoderShape::default(),
            train: TrainConfig::desk(0),
        }
    }
}

impl UtteranceConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let all = std::iter::once(&self.threshold).chain(self.class_thresholds.values());
        for t in all {
            if !(*t > 0.0 && *t < 1.0) {
                return Err(Error::Config(format!("threshold {t} must lie strictly between 0 and 1")));
            }
        }
        for name in self.class_thresholds.keys() {
            if codebook().find(name).is_none() && name.parse::<FeatureGroup>().is_err() {
                return Err(Error::Config(format!("threshold override for unknown class {name:?}")));
            }
        }
        Ok(())
    }
}

/// Plain rendering of up to `k` turns before `index`; empty at the start.
pub fn utterance_context(turns: &[Turn], index: usize, k: usize) -> Result<String> {
    let start = index.saturating_sub(k);
    if start == index {
        return Ok(String::new());
    }
    let context: Vec<Turn> = turns[start..index]
        .iter()
        .map(|t| Turn { utterance_features: None, ..t.clone() })
        .collect();
    render_plain(&context)
}

/// Training examples from human group labels in the corpus. Counselor turns
/// without labels, or with an empty set, are skipped.
pub fn examples_from_annotations(conversations: &[Conversation], k: usize) -> Result<Vec<UtteranceExample>> {
    let mut out = Vec::new();
    for c in conversations {
        for (i, t) in c.turns.iter().enumerate() {
            match &t.utterance_features {
                Some(groups) if t.speaker == Speaker::Counselor && !groups.is_empty() => {
                    out.push(UtteranceExample {
                        session_id: c.session_id.clone(),
                        turn_index: i,
                        utterance: t.text.clone(),
                        context: utterance_context(&c.turns, i, k)?,
                        labels: groups.iter().map(|g| UtteranceLabel::Group(*g)).collect(),
                    });
                }
                _ => {}
            }
        }
    }
    Ok(out)
}

/// Fine-labelled examples from synthetic latents.
pub fn examples_from_latents(
    conversations: &[Conversation],
    latents: &[SessionLatents],
    k: usize,
) -> Result<Vec<UtteranceExample>> {
    let by_id: BTreeMap<&str, &SessionLatents> = latents.iter().map(|l| (l.session_id.as_str(), l)).collect();
    let mut out = Vec::new();
    for c in conversations {
        let lat = by_id
            .get(c.session_id.as_str())
            .ok_or_else(|| Error::Validation(format!("no latents for session {}", c.session_id)))?;
        if lat.fine_labels.len() != c.turns.len() {
            return Err(Error::Validation(format!("latents of {} do not match its turns", c.session_id)));
        }
        for (i, (t, labels)) in c.turns.iter().zip(&lat.fine_labels).enumerate() {
            if t.speaker == Speaker::Counselor && !labels.is_empty() {
                out.push(UtteranceExample {
                    session_id: c.session_id.clone(),
                    turn_index: i,
                    utterance: t.text.clone(),
                    context: utterance_context(&c.turns, i, k)?,
                    labels: labels.iter().map(|l| UtteranceLabel::Fine(*l)).collect(),
                });
            }
        }
    }
    Ok(out)
}

/// Multi-label classifier over `[utterance, context]` input pairs.
#[derive(Debug, Clone)]
pub struct UtteranceModel {
    granularity: Granularity,
    classes: Vec<UtteranceLabel>,
    config: UtteranceConfig,
    model: HashBagModel,
    report: TrainReport,
}

#[derive(Serialize, Deserialize)]
struct SavedUtteranceConfig {
    granularity: Granularity,
    classes: Vec<UtteranceLabel>,
    config: UtteranceConfig,
    layout: ModelLayout,
    codebook_version: String,
    config_hash: String,
}

fn class_space(
    train: &[UtteranceExample],
    granularity: Granularity,
    universe: &[StrategyId],
    min_support: usize,
) -> Result<Vec<UtteranceLabel>> {
    match granularity {
        Granularity::Grouped => {
            let groups: BTreeSet<FeatureGroup> = universe.iter().map(|id| id.group()).collect();
            let mut support: BTreeMap<FeatureGroup, usize> = BTreeMap::new();
            for ex in train {
                let seen: BTreeSet<FeatureGroup> = ex.labels.iter().map(|l| l.group()).collect();
                for g in seen {
                    *support.entry(g).or_default() += 1;
                }
            }
            let missing: Vec<&str> = groups.iter().filter(|g| !support.contains_key(g)).map(|g| g.name()).collect();
            if !missing.is_empty() {
                return Err(Error::InsufficientData(format!("no training examples for {}", missing.join(", "))));
            }
            for g in &groups {
                if support[g] < min_support {
                    log::warn!("group {g} has only {} training examples", support[g]);
                }
            }
            Ok(groups.into_iter().map(UtteranceLabel::Group).collect())
        }
        Granularity::Fine => {
            let mut support: BTreeMap<StrategyId, usize> = BTreeMap::new();
            for ex in train {
                for l in &ex.labels {
                    match l {
                        UtteranceLabel::Fine(id) => *support.entry(*id).or_default() += 1,
                        UtteranceLabel::Group(_) => {
                            return Err(Error::Validation(format!(
                                "fine-grained training needs fine labels; {} turn {} only has groups",
                                ex.session_id, ex.turn_index
                            )))
                        }
                    }
                }
            }
            let missing: Vec<&str> = universe.iter().filter(|id| !support.contains_key(id)).map(|id| id.name()).collect();
            if !missing.is_empty() {
                return Err(Error::InsufficientData(format!("no training examples for {}", missing.join(", "))));
            }
            let mut classes = Vec::new();
            for id in universe {
                let n = support[id];
                if n >= min_support {
                    classes.push(UtteranceLabel::Fine(*id));
                } else {
                    log::warn!("{id} has {n} training examples, merging it into {}", id.group());
                    let pseudo = UtteranceLabel::Group(id.group());
                    if !classes.contains(&pseudo) {
                        classes.push(pseudo);
                    }
                }
            }
            Ok(classes)
        }
    }
}

/// Map gold labels into a model's class space, dropping labels outside it.
fn project(labels: &[UtteranceLabel], granularity: Granularity, classes: &[UtteranceLabel]) -> Vec<UtteranceLabel> {
    let mut out: Vec<UtteranceLabel> = labels
        .iter()
        .filter_map(|l| {
            let mapped = match granularity {
                Granularity::Grouped => UtteranceLabel::Group(l.group()),
                Granularity::Fine if classes.contains(l) => *l,
                Granularity::Fine => UtteranceLabel::Group(l.group()),
            };
            classes.contains(&mapped).then_some(mapped)
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

fn train_in_space(
    train_set: &[UtteranceExample],
    dev: Option<&[UtteranceExample]>,
    granularity: Granularity,
    universe: &[StrategyId],
    config: &UtteranceConfig,
) -> Result<UtteranceModel> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InsufficientData("no utterance examples".into()));
    }
    let classes = class_space(train_set, granularity, universe, config.min_support)?;
    let model = HashBagModel::new(config.shape, 2, classes.len(), Tokenizer::default(), config.train.seed)?;
    let mut um = UtteranceModel {
        granularity,
        classes,
        config: config.clone(),
        model,
        report: TrainReport { best_epoch: 0, epoch_scores: vec![], epoch_losses: vec![] },
    };
    let data: Vec<Example> = train_set
        .iter()
        .map(|ex| {
            let gold = project(&ex.labels, granularity, &um.classes);
            let y = um.classes.iter().map(|c| f32::from(u8::from(gold.contains(c)))).collect();
            Ok(Example { x: um.featurize(&ex.utterance, &ex.context)?, y, weight: 1.0 })
        })
        .collect::<Result<_>>()?;
    let dev_x: Vec<(Featurized, Vec<UtteranceLabel>)> = match dev {
        Some(d) => d
            .iter()
            .map(|ex| Ok((um.featurize(&ex.utterance, &ex.context)?, project(&ex.labels, granularity, &um.classes))))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let mut net = um.model.clone();
    let mut epoch = 0usize;
    let report = {
        let probe = um.clone();
        train(&mut net, &data, &config.train, |m| {
            epoch += 1;
            if dev_x.is_empty() {
                // without a dev set the last epoch wins
                return epoch as f64;
            }
            let preds: Vec<Vec<UtteranceLabel>> = dev_x
                .par_iter()
                .map(|(x, _)| probe.labels_from_logits(&m.logits(x), None))
                .collect();
            let gold: Vec<Vec<UtteranceLabel>> = dev_x.iter().map(|(_, g)| g.clone()).collect();
            multilabel_f1(&preds, &gold).unwrap_or(0.0)
        })?
    };
    um.model = net;
    um.report = report;
    Ok(um)
}

/// Train a fine-grained or grouped utterance classifier. Checkpoints are
/// chosen by dev macro F1 when a dev set is given.
pub fn train_utterance_classifier(
    train_set: &[UtteranceExample],
    dev: Option<&[UtteranceExample]>,
    granularity: Granularity,
    config: &UtteranceConfig,
) -> Result<UtteranceModel> {
    let universe: Vec<StrategyId> = codebook().ids().collect();
    train_in_space(train_set, dev, granularity, &universe, config)
}

impl UtteranceModel {
    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn classes(&self) -> &[UtteranceLabel] {
        &self.classes
    }

    pub fn config(&self) -> &UtteranceConfig {
        &self.config
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    fn featurize(&self, utterance: &str, context: &str) -> Result<Featurized> {
        self.model.featurize(&[utterance, context])
    }

    fn threshold_for(&self, class: UtteranceLabel) -> f64 {
        self.config
            .class_thresholds
            .get(&class.to_string())
            .copied()
            .unwrap_or(self.config.threshold)
    }

    fn labels_from_logits(&self, logits: &[f64], threshold: Option<f64>) -> Vec<UtteranceLabel> {
        self.classes
            .iter()
            .zip(logits)
            .filter(|(c, z)| crate::util::sigmoid(**z) >= threshold.unwrap_or_else(|| self.threshold_for(**c)))
            .map(|(c, _)| *c)
            .collect()
    }

    /// Independent per-class probabilities, in `classes()` order.
    pub fn probabilities(&self, utterance: &str, context: &str) -> Result<Vec<f64>> {
        let x = self.featurize(utterance, context)?;
        Ok(self.model.logits(&x).into_iter().map(crate::util::sigmoid).collect())
    }

    pub fn predict(&self, utterance: &str, context: &str) -> Result<Vec<UtteranceLabel>> {
        let x = self.featurize(utterance, context)?;
        Ok(self.labels_from_logits(&self.model.logits(&x), None))
    }

    /// Prediction with one threshold for every class.
    pub fn predict_at(&self, utterance: &str, context: &str, threshold: f64) -> Result<Vec<UtteranceLabel>> {
        let x = self.featurize(utterance, context)?;
        Ok(self.labels_from_logits(&self.model.logits(&x), Some(threshold)))
    }

    pub fn predict_examples(&self, examples: &[UtteranceExample]) -> Result<Vec<Vec<UtteranceLabel>>> {
        examples.par_iter().map(|ex| self.predict(&ex.utterance, &ex.context)).collect()
    }

    /// Gold labels of `examples` expressed in this model's class space.
    pub fn project_gold(&self, examples: &[UtteranceExample]) -> Vec<Vec<UtteranceLabel>> {
        examples.iter().map(|ex| project(&ex.labels, self.granularity, &self.classes)).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let saved = SavedUtteranceConfig {
            granularity: self.granularity,
            classes: self.classes.clone(),
            config: self.config.clone(),
            layout: self.model.layout(),
            codebook_version: codebook().version().to_string(),
            config_hash: config_hash(&self.config)?,
        };
        write_json(&dir.join("config.json"), &saved)?;
        write_bytes(&dir.join("weights.bin"), &self.model.to_le_bytes())?;
        write_json(&dir.join("metrics.json"), &self.report)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let saved: SavedUtteranceConfig = read_json(&dir.join("config.json"))?;
        if saved.codebook_version != codebook().version() {
            return Err(Error::Validation(format!(
                "model was trained with codebook version {}, this build ships {}",
                saved.codebook_version,
                codebook().version()
            )));
        }
        let model = HashBagModel::from_le_bytes(&saved.layout, &read_bytes(&dir.join("weights.bin"))?)?;
        let report = read_json(&dir.join("metrics.json"))?;
        Ok(UtteranceModel {
            granularity: saved.granularity,
            classes: saved.classes,
            config: saved.config,
            model,
            report,
        })
    }
}

/// Group classifier plus one fine classifier per group.
#[derive(Debug, Clone)]
pub struct HierarchicalModel {
    pub group: UtteranceModel,
    pub fine: BTreeMap<FeatureGroup, UtteranceModel>,
}

pub fn train_hierarchical(
    train_set: &[UtteranceExample],
    dev: Option<&[UtteranceExample]>,
    config: &UtteranceConfig,
) -> Result<HierarchicalModel> {
    let group = train_utterance_classifier(train_set, dev, Granularity::Grouped, config)?;
    let mut fine = BTreeMap::new();
    for g in FeatureGroup::ALL {
        let restrict = |exs: &[UtteranceExample]| -> Vec<UtteranceExample> {
            exs.iter()
                .filter(|ex| ex.labels.iter().any(|l| l.group() == g))
                .map(|ex| UtteranceExample {
                    labels: ex.labels.iter().copied().filter(|l| l.group() == g).collect(),
                    ..ex.clone()
                })
                .collect()
        };
        let sub_train = restrict(train_set);
        let sub_dev = dev.map(restrict);
        let model = train_in_space(&sub_train, sub_dev.as_deref(), Granularity::Fine, &g.members(), config)?;
        fine.insert(g, model);
    }
    Ok(HierarchicalModel { group, fine })
}

/// Two-step prediction: groups first, then fine labels inside each predicted
/// group. A predicted group always contributes at least its most likely fine
/// label.
pub fn hierarchical_predict(
    group_model: &UtteranceModel,
    fine_models: &BTreeMap<FeatureGroup, UtteranceModel>,
    utterance: &str,
    context: &str,
) -> Result<Vec<UtteranceLabel>> {
    if group_model.granularity() != Granularity::Grouped {
        return Err(Error::Validation("the first step needs a grouped model".into()));
    }
    let mut out = Vec::new();
    for label in group_model.predict(utterance, context)? {
        let g = label.group();
        let fine = fine_models
            .get(&g)
            .ok_or_else(|| Error::Validation(format!("no fine-grained model for group {g}")))?;
        let mut chosen = fine.predict(utterance, context)?;
        if chosen.is_empty() {
            let probs = fine.probabilities(utterance, context)?;
            let best = probs
                .iter()
                .enumerate()
                .fold(0, |b, (i, p)| if *p > probs[b] { i } else { b });
            chosen.push(fine.classes()[best]);
        }
        out.extend(chosen);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

impl HierarchicalModel {
    pub fn predict(&self, utterance: &str, context: &str) -> Result<Vec<UtteranceLabel>> {
        hierarchical_predict(&self.group, &self.fine, utterance, context)
    }

    pub fn predict_examples(&self, examples: &[UtteranceExample]) -> Result<Vec<Vec<UtteranceLabel>>> {
        examples.par_iter().map(|ex| self.predict(&ex.utterance, &ex.context)).collect()
    }
}

/// Fill group labels on counselor turns that have none. Existing labels,
/// including explicit empty sets, are kept as they are.
pub fn weak_annotate(dataset: &[Conversation], model: &UtteranceModel) -> Result<Vec<Conversation>> {
    if model.granularity() != Granularity::Grouped {
        return Err(Error::Validation("weak annotation uses a grouped model, got a fine-grained one".into()));
    }
    let k = model.config().k;
    dataset
        .par_iter()
        .map(|conv| {
            let mut out = conv.clone();
            for i in 0..conv.turns.len() {
                let t = &conv.turns[i];
                if t.speaker != Speaker::Counselor || t.utterance_features.is_some() {
                    continue;
                }
                let context = utterance_context(&conv.turns, i, k)?;
                let groups: Vec<FeatureGroup> = model.predict(&t.text, &context)?.into_iter().map(|l| l.group()).collect();
                out.turns[i] = t.clone().with_features(groups);
            }
            Ok(out)
        })
        .collect()
}
