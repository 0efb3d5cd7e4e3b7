use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::buckets::{bucket_table, BucketTable, DEFAULT_BUCKET_EDGES};
use super::metrics::{score_matrix, ConfusionMatrix};
use super::records::InstanceRecord;
use crate::corpus::{make_folds_labeled, BinaryOutcome, DatasetSplit};
use crate::encoding::{EncodedInput, InputSource, Tokenizer};
use crate::ensemble::{ensemble_predict, train_stack, StackComponent, StackDataset, StackSpec};
use crate::outcome::{
    predict_proba, train_tabular, train_text_classifier, zero_shot_bundle, InputRecipe, InstanceData,
    ModelSpec, Prediction, TextClassifierConfig,
};
use crate::tabular::TabularModelKind;
use crate::util::{config_hash, mean_std};
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Baseline,
    Utterance,
    Session,
    Summaries,
    Ensemble,
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Section::Baseline => "Baseline",
            Section::Utterance => "Utterance",
            Section::Session => "Session",
            Section::Summaries => "Summaries",
            Section::Ensemble => "Ensemble",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RowModel {
    /// The configured text encoder.
    Encoder,
    Tabular { kind: TabularModelKind },
    /// The LLM's own zero-shot outcome answer.
    Llm,
    /// Logit stacking over other rows, referenced by id.
    Ensemble { components: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub id: String,
    pub section: Section,
    pub sources: Vec<InputSource>,
    pub model: RowModel,
}

impl GridRow {
    fn new(id: &str, section: Section, sources: &[InputSource], model: RowModel) -> Self {
        GridRow { id: id.into(), section, sources: sources.to_vec(), model }
    }

    pub fn label(&self, encoder: &str, llm: &str) -> String {
        let inputs = self.sources.iter().map(|s| s.label()).collect::<Vec<_>>().join("+");
        match &self.model {
            RowModel::Encoder => format!("{inputs} ⇒ {encoder}"),
            RowModel::Tabular { kind } => format!("{inputs} one-hot ⇒ {}", kind.short()),
            RowModel::Llm => format!("{inputs} ⇒ {llm}"),
            RowModel::Ensemble { .. } => format!("{inputs} ⇒ Ensemble"),
        }
    }
}

/// The full grid: baselines, utterance features, session features,
/// summaries, and the stacked ensemble.
pub fn default_grid() -> Vec<GridRow> {
    use InputSource::*;
    use RowModel::*;
    use Section as S;
    vec![
        GridRow::new("conv", S::Baseline, &[Conv], Encoder),
        GridRow::new("conv_llm", S::Baseline, &[Conv], Llm),
        GridRow::new("utter", S::Utterance, &[Utter], Encoder),
        GridRow::new("utter_llm", S::Utterance, &[Utter], Llm),
        GridRow::new("session_adaboost", S::Session, &[Session], Tabular { kind: TabularModelKind::Adaboost }),
        GridRow::new("session", S::Session, &[Session], Encoder),
        GridRow::new("conv_session", S::Session, &[Conv, Session], Encoder),
        GridRow::new("utter_session", S::Session, &[Utter, Session], Encoder),
        GridRow::new("summary", S::Summaries, &[Summary], Encoder),
        GridRow::new("utter_summary", S::Summaries, &[Utter, Summary], Encoder),
        GridRow::new("utter_session_summary", S::Summaries, &[Utter, Session, Summary], Encoder),
        GridRow::new("stance", S::Summaries, &[Stance], Encoder),
        GridRow::new("utter_stance", S::Summaries, &[Utter, Stance], Encoder),
        GridRow::new("utter_session_stance", S::Summaries, &[Utter, Session, Stance], Encoder),
        GridRow::new(
            "ensemble",
            S::Ensemble,
            &[Utter, Session, Summary, Stance],
            Ensemble {
                components: vec!["utter".into(), "utter_session".into(), "utter_summary".into(), "utter_stance".into()],
            },
        ),
    ]
}

/// Rows of [`default_grid`] with the given ids, in grid order.
pub fn grid_rows(ids: &[String]) -> Result<Vec<GridRow>> {
    let all = default_grid();
    for id in ids {
        if !all.iter().any(|r| &r.id == id) {
            return Err(Error::Config(format!(
                "unknown grid row {id:?}; known rows: {}",
                all.iter().map(|r| r.id.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
    }
    Ok(all.into_iter().filter(|r| ids.contains(&r.id)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub folds: usize,
    pub seed: u64,
    pub text: TextClassifierConfig,
    /// Name used for LLM rows in labels.
    pub llm_name: String,
    pub bucket_edges: Vec<usize>,
    /// Inner folds for the ensemble's out-of-fold logits.
    pub oof_folds: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            folds: 10,
            seed: 0,
            text: TextClassifierConfig::desk(0),
            llm_name: "llm".into(),
            bucket_edges: DEFAULT_BUCKET_EDGES.to_vec(),
            oof_folds: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let (mean, std) = mean_std(values);
        Some(MeanStd { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub n: usize,
    pub macro_f1: f64,
    /// Undefined when the fold has no gold negatives.
    pub minority_recall: Option<f64>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePrediction {
    pub id: String,
    pub fold: usize,
    pub gold: BinaryOutcome,
    pub p_negative: f64,
    pub logit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub id: String,
    pub label: String,
    pub section: Section,
    pub sources: Vec<InputSource>,
    pub skipped: Option<String>,
    pub folds: Vec<FoldScore>,
    pub macro_f1: Option<MeanStd>,
    pub minority_recall: Option<MeanStd>,
    /// Sum of the fold confusion matrices.
    pub aggregate: Option<ConfusionMatrix>,
    /// Test-fold predictions for every instance, in dataset order.
    #[serde(skip)]
    pub predictions: Vec<InstancePrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: String,
    pub seed: u64,
    pub n_folds: usize,
    pub n_instances: usize,
    pub n_negative: usize,
    pub config_hash: String,
    pub config: GridConfig,
    pub rows: Vec<RowReport>,
    pub buckets: Option<BucketTable>,
}

impl ExperimentReport {
    pub fn row(&self, id: &str) -> Option<&RowReport> {
        self.rows.iter().find(|r| r.id == id)
    }
}

fn missing_reason(row: &GridRow, records: &[InstanceRecord]) -> Result<Option<String>> {
    let needs_llm = |r: &InstanceRecord| -> Result<bool> {
        Ok(match &row.model {
            RowModel::Llm => row.sources.len() != 1 || r.llm_answer(row.sources[0]).is_none(),
            RowModel::Tabular { .. } => r.session.is_none(),
            _ => {
                for s in &row.sources {
                    if r.text(*s)?.is_none() {
                        return Ok(true);
                    }
                }
                false
            }
        })
    };
    let mut missing = Vec::new();
    for r in records {
        if needs_llm(r)? {
            missing.push(r.id.as_str());
        }
    }
    if missing.is_empty() {
        return Ok(None);
    }
    let shown = missing.iter().take(5).copied().collect::<Vec<_>>().join(", ");
    Ok(Some(format!(
        "{} of {} sessions lack {} inputs ({shown}{})",
        missing.len(),
        records.len(),
        row.sources.iter().map(|s| s.label()).collect::<Vec<_>>().join("+"),
        if missing.len() > 5 { ", ..." } else { "" }
    )))
}

/// Model spec for a non-ensemble row.
pub fn row_model_spec(row: &GridRow, config: &GridConfig) -> Result<ModelSpec> {
    Ok(match &row.model {
        RowModel::Encoder => ModelSpec::Encoder { config: config.text.clone() },
        RowModel::Tabular { kind } => ModelSpec::Tabular { kind: *kind },
        RowModel::Llm => ModelSpec::ZeroShot { model_id: config.llm_name.clone() },
        RowModel::Ensemble { .. } => return Err(Error::Config(format!("row {} cannot be a stack component", row.id))),
    })
}

/// One record rendered for one non-ensemble row.
pub fn instance_data(row: &GridRow, r: &InstanceRecord, config: &GridConfig, tok: &Tokenizer) -> Result<InstanceData> {
    let missing = || Error::Validation(format!("session {} lacks inputs for row {}", r.id, row.id));
    Ok(match &row.model {
        RowModel::Encoder => InstanceData::Text(r.encoded(&row.sources, config.text.max_tokens, tok)?.ok_or_else(missing)?),
        RowModel::Tabular { .. } => InstanceData::Vector(r.vector()?.ok_or_else(missing)?),
        RowModel::Llm => InstanceData::LlmAnswer(r.llm_answer(row.sources[0]).ok_or_else(missing)?),
        RowModel::Ensemble { .. } => return Err(Error::Config("nested ensemble".into())),
    })
}

/// Train one row on one fold and score the held-out sessions.
fn run_fold(
    row: &GridRow,
    all_rows: &[GridRow],
    data: &BTreeMap<String, Vec<InstanceData>>,
    records: &[InstanceRecord],
    index: &BTreeMap<&str, usize>,
    split: &DatasetSplit,
    config: &GridConfig,
) -> Result<Vec<(usize, Prediction)>> {
    let idx = |ids: &[String]| -> Vec<usize> { ids.iter().map(|id| index[id.as_str()]).collect() };
    let (train, dev, test) = (idx(&split.train), idx(&split.dev), idx(&split.test));
    let labels = |rows: &[usize]| -> Vec<BinaryOutcome> { rows.iter().map(|&i| records[i].label).collect() };
    let seed = config.seed.wrapping_add(split.fold_index as u64);
    let context = |e: Error| Error::Validation(format!("row {} fold {}: {e}", row.id, split.fold_index));

    if let RowModel::Ensemble { components } = &row.model {
        let comp_rows: Vec<&GridRow> = components
            .iter()
            .map(|c| all_rows.iter().find(|r| &r.id == c).ok_or_else(|| Error::Config(format!("unknown component {c}"))))
            .collect::<Result<_>>()?;
        let fit: Vec<usize> = train.iter().chain(&dev).copied().collect();
        let spec = StackSpec {
            components: comp_rows
                .iter()
                .map(|r| {
                    Ok(StackComponent {
                        name: r.id.clone(),
                        recipe: InputRecipe::new(&r.sources),
                        model: row_model_spec(r, config)?,
                    })
                })
                .collect::<Result<_>>()?,
            meta_seed: seed,
            oof_folds: config.oof_folds,
            dev_fraction: 0.25,
        };
        let dataset = StackDataset {
            ids: fit.iter().map(|&i| records[i].id.clone()).collect(),
            labels: labels(&fit),
            columns: comp_rows.iter().map(|r| fit.iter().map(|&i| data[&r.id][i].clone()).collect()).collect(),
        };
        let stack = train_stack(&spec, &dataset).map_err(context)?;
        return test
            .iter()
            .map(|&i| {
                let xs: Vec<Option<&InstanceData>> = comp_rows.iter().map(|r| Some(&data[&r.id][i])).collect();
                let p = ensemble_predict(&stack, &xs)?;
                Ok((i, Prediction { p_negative: p.p_negative, logit: p.logit }))
            })
            .collect::<Result<_>>()
            .map_err(context);
    }

    let col = &data[&row.id];
    let bundle = match &row.model {
        RowModel::Encoder => {
            let text = |rows: &[usize]| -> Vec<EncodedInput> {
                rows.iter()
                    .map(|&i| match &col[i] {
                        InstanceData::Text(x) => x.clone(),
                        _ => unreachable!("encoder rows hold text"),
                    })
                    .collect()
            };
            let cfg = TextClassifierConfig { seed, ..config.text.clone() };
            let (dx, dy) = (text(&dev), labels(&dev));
            let dev_arg = (!dx.is_empty()).then_some((dx.as_slice(), dy.as_slice()));
            train_text_classifier(&text(&train), &labels(&train), dev_arg, &cfg).map_err(context)?
        }
        RowModel::Tabular { kind } => {
            let fit: Vec<usize> = train.iter().chain(&dev).copied().collect();
            let vecs: Vec<Vec<f64>> = fit
                .iter()
                .map(|&i| match &col[i] {
                    InstanceData::Vector(v) => v.clone(),
                    _ => unreachable!("tabular rows hold vectors"),
                })
                .collect();
            train_tabular(*kind, &vecs, &labels(&fit), seed).map_err(context)?
        }
        RowModel::Llm => zero_shot_bundle(&config.llm_name)?,
        RowModel::Ensemble { .. } => unreachable!("handled above"),
    };
    test.iter()
        .map(|&i| Ok((i, predict_proba(&bundle, col[i].as_instance())?)))
        .collect::<Result<_>>()
        .map_err(context)
}

/// Stratified k-fold evaluation of every row. Each fold's remaining
/// sessions are split 75/25 into train and dev; encoders keep their best
/// dev epoch, tabular models and the ensemble fit on train and dev
/// together. Rows whose inputs are missing are kept in the report with a
/// skip reason.
pub fn run_grid(records: &[InstanceRecord], rows: &[GridRow], config: &GridConfig) -> Result<ExperimentReport> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no sessions to evaluate".into()));
    }
    config.text.validate()?;
    let mut seen = BTreeSet::new();
    for r in rows {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Config(format!("grid row {} listed twice", r.id)));
        }
        if r.sources.is_empty() {
            return Err(Error::Config(format!("grid row {} has no inputs", r.id)));
        }
    }
    let index: BTreeMap<&str, usize> = records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    if index.len() != records.len() {
        return Err(Error::Validation("duplicate session ids".into()));
    }
    let labeled: Vec<(String, BinaryOutcome)> = records.iter().map(|r| (r.id.clone(), r.label)).collect();
    let splits = make_folds_labeled(&labeled, config.folds, config.seed)?;

    // rows an ensemble needs must be materialised even if not listed
    let mut needed: Vec<GridRow> = rows.to_vec();
    for r in rows {
        if let RowModel::Ensemble { components } = &r.model {
            for c in components {
                if !needed.iter().any(|x| &x.id == c) {
                    let extra = default_grid()
                        .into_iter()
                        .find(|x| &x.id == c)
                        .ok_or_else(|| Error::Config(format!("ensemble {} names unknown row {c}", r.id)))?;
                    needed.push(extra);
                }
            }
        }
    }

    let mut skipped: BTreeMap<String, String> = BTreeMap::new();
    for r in &needed {
        if let RowModel::Ensemble { .. } = r.model {
            continue;
        }
        if let Some(reason) = missing_reason(r, records)? {
            skipped.insert(r.id.clone(), reason);
        }
    }
    for r in rows {
        if let RowModel::Ensemble { components } = &r.model {
            if let Some(c) = components.iter().find(|c| skipped.contains_key(*c)) {
                skipped.insert(r.id.clone(), format!("component {c} skipped: {}", skipped[c]));
            }
        }
    }

    let tok = Tokenizer::default();
    let mut data: BTreeMap<String, Vec<InstanceData>> = BTreeMap::new();
    for r in &needed {
        if matches!(r.model, RowModel::Ensemble { .. }) || skipped.contains_key(&r.id) {
            continue;
        }
        let col = records.iter().map(|rec| instance_data(r, rec, config, &tok)).collect::<Result<Vec<_>>>()?;
        data.insert(r.id.clone(), col);
    }

    let jobs: Vec<(usize, usize)> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| !skipped.contains_key(&r.id))
        .flat_map(|(ri, _)| (0..splits.len()).map(move |f| (ri, f)))
        .collect();
    let results: Vec<((usize, usize), Result<Vec<(usize, Prediction)>>)> = jobs
        .par_iter()
        .map(|&(ri, f)| ((ri, f), run_fold(&rows[ri], &needed, &data, records, &index, &splits[f], config)))
        .collect();
    let mut by_row: BTreeMap<usize, Vec<(usize, Vec<(usize, Prediction)>)>> = BTreeMap::new();
    for ((ri, f), r) in results {
        by_row.entry(ri).or_default().push((f, r?));
    }

    let mut reports = Vec::new();
    for (ri, row) in rows.iter().enumerate() {
        let label = row.label(&config.text.encoder_name, &config.llm_name);
        if let Some(reason) = skipped.get(&row.id) {
            log::warn!("skipping grid row {}: {reason}", row.id);
            reports.push(RowReport {
                id: row.id.clone(),
                label,
                section: row.section,
                sources: row.sources.clone(),
                skipped: Some(reason.clone()),
                folds: Vec::new(),
                macro_f1: None,
                minority_recall: None,
                aggregate: None,
                predictions: Vec::new(),
            });
            continue;
        }
        let mut folds = Vec::new();
        let mut predictions: Vec<Option<InstancePrediction>> = vec![None; records.len()];
        let mut aggregate = ConfusionMatrix::default();
        for (f, preds) in by_row.remove(&ri).unwrap_or_default() {
            let pred: Vec<BinaryOutcome> = preds.iter().map(|(_, p)| p.label()).collect();
            let gold: Vec<BinaryOutcome> = preds.iter().map(|(i, _)| records[*i].label).collect();
            let cm = ConfusionMatrix::from_predictions(&pred, &gold)?;
            let (macro_f1, minority_recall) = score_matrix(&cm)?;
            aggregate.add(&cm);
            folds.push(FoldScore { fold: f, n: preds.len(), macro_f1, minority_recall, confusion: cm });
            for (i, p) in preds {
                predictions[i] = Some(InstancePrediction {
                    id: records[i].id.clone(),
                    fold: f,
                    gold: records[i].label,
                    p_negative: p.p_negative,
                    logit: p.logit,
                });
            }
        }
        folds.sort_by_key(|f| f.fold);
        let f1s: Vec<f64> = folds.iter().map(|f| f.macro_f1).collect();
        let recalls: Vec<f64> = folds.iter().filter_map(|f| f.minority_recall).collect();
        reports.push(RowReport {
            id: row.id.clone(),
            label,
            section: row.section,
            sources: row.sources.clone(),
            skipped: None,
            macro_f1: MeanStd::of(&f1s),
            minority_recall: MeanStd::of(&recalls),
            folds,
            aggregate: Some(aggregate),
            predictions: predictions.into_iter().map(|p| p.expect("every session is tested once")).collect(),
        });
    }
    reports.sort_by_key(|r| r.section);

    let buckets = if config.bucket_edges.is_empty() {
        None
    } else {
        let preds: BTreeMap<String, Vec<BinaryOutcome>> = reports
            .iter()
            .filter(|r| r.skipped.is_none())
            .map(|r| (r.id.clone(), r.predictions.iter().map(|p| BinaryOutcome::from_negative(p.p_negative >= 0.5)).collect()))
            .collect();
        let gold: Vec<BinaryOutcome> = records.iter().map(|r| r.label).collect();
        let tokens: Vec<usize> = records.iter().map(|r| r.tokens).collect();
        Some(bucket_table(&preds, &gold, &tokens, &config.bucket_edges)?)
    };

    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION.into(),
        seed: config.seed,
        n_folds: config.folds,
        n_instances: records.len(),
        n_negative: records.iter().filter(|r| r.label.is_negative()).count(),
        config_hash: config_hash(&(config, rows))?,
        config: config.clone(),
        rows: reports,
        buckets,
    })
}
