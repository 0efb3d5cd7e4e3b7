//! Logit stacking: component classifiers are retrained per fold so every
//! logit the meta-learner sees is out-of-fold, then a logistic regression
//! combines the raw logits. At prediction time each component's logit is
//! the mean over its fold models, so the meta-learner scores logits from
//! models of the same kind it was fitted on.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::BinaryOutcome;
use crate::outcome::{fit_model, predict_proba, InputRecipe, InstanceData, ModelBundle, ModelSpec, Prediction};
use crate::tabular::LogisticRegression;
use crate::util::{read_json, sha256_hex, unit_hash, write_json};
use crate::{Error, Result};

const FOLD_SALT: u64 = 0x6f6f_665f_666f_6c64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackComponent {
    pub name: String,
    pub recipe: InputRecipe,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    pub components: Vec<StackComponent>,
    pub meta_seed: u64,
    #[serde(default = "default_folds")]
    pub oof_folds: usize,
    #[serde(default = "default_dev_fraction")]
    pub dev_fraction: f64,
}

fn default_folds() -> usize {
    5
}

fn default_dev_fraction() -> f64 {
    0.25
}

impl StackSpec {
    pub fn new(components: Vec<StackComponent>, meta_seed: u64) -> Self {
        StackSpec { components, meta_seed, oof_folds: default_folds(), dev_fraction: default_dev_fraction() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.len() < 2 {
            return Err(Error::Config("a stack needs at least two components".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.components {
            if !seen.insert((c.recipe.label(), c.model.name())) {
                return Err(Error::Config(format!("component {} repeats another component's recipe", c.name)));
            }
        }
        if self.oof_folds < 2 {
            return Err(Error::Config(format!("oof_folds must be at least 2, got {}", self.oof_folds)));
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return Err(Error::Config("dev_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Fold of an instance. Depends only on the seed and the id, so removing
    /// one instance never moves another.
    pub fn fold_of(&self, id: &str) -> usize {
        ((unit_hash(self.meta_seed ^ FOLD_SALT, id) * self.oof_folds as f64) as usize).min(self.oof_folds - 1)
    }
}

/// Labelled instances with one input column per stack component.
#[derive(Debug, Clone)]
pub struct StackDataset {
    pub ids: Vec<String>,
    pub labels: Vec<BinaryOutcome>,
    /// `columns[c][i]` is instance `i` rendered for component `c`.
    pub columns: Vec<Vec<InstanceData>>,
}

impl StackDataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// The dataset without instance `index`.
    pub fn without(&self, index: usize) -> StackDataset {
        let keep = |i: usize| i != index;
        StackDataset {
            ids: self.ids.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, v)| v.clone()).collect(),
            labels: self.labels.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, v)| *v).collect(),
            columns: self
                .columns
                .iter()
                .map(|col| col.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, v)| v.clone()).collect())
                .collect(),
        }
    }

    fn validate(&self, spec: &StackSpec) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InsufficientData("stack dataset is empty".into()));
        }
        if self.labels.len() != self.len() || self.columns.len() != spec.components.len() {
            return Err(Error::Validation("stack dataset shape does not match its spec".into()));
        }
        for (c, col) in spec.components.iter().zip(&self.columns) {
            if col.len() != self.len() {
                return Err(Error::Validation(format!("component {} has {} inputs for {} ids", c.name, col.len(), self.len())));
            }
        }
        Ok(())
    }
}

/// Per-row out-of-fold logits, plus what was needed to audit them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedDesignMatrix {
    pub ids: Vec<String>,
    pub component_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<BinaryOutcome>,
    pub folds: Vec<usize>,
    /// Ids each fold's component models were trained on.
    pub fold_train_ids: Vec<Vec<String>>,
    /// Components whose out-of-fold logits have zero variance.
    pub constant_columns: Vec<String>,
}

impl StackedDesignMatrix {
    /// Check that no row's logit came from a model that trained on that row.
    pub fn audit(&self) -> Result<()> {
        for (i, id) in self.ids.iter().enumerate() {
            if self.fold_train_ids[self.folds[i]].contains(id) {
                return Err(Error::Validation(format!("instance {id} was in the training set of its own fold")));
            }
        }
        Ok(())
    }
}

fn train_component(
    spec: &StackSpec,
    c: usize,
    data: &StackDataset,
    rows: &[usize],
    label: &str,
) -> Result<ModelBundle> {
    let comp = &spec.components[c];
    let ids: Vec<String> = rows.iter().map(|&i| data.ids[i].clone()).collect();
    let xs: Vec<InstanceData> = rows.iter().map(|&i| data.columns[c][i].clone()).collect();
    let ys: Vec<BinaryOutcome> = rows.iter().map(|&i| data.labels[i]).collect();
    let seed = spec.meta_seed.wrapping_add(c as u64);
    fit_model(&comp.model, &ids, &xs, &ys, spec.dev_fraction, seed)
        .map_err(|e| Error::Validation(format!("component {} failed on {label}: {e}", comp.name)))
}

fn score(bundle: &ModelBundle, x: &InstanceData, component: &str, id: &str) -> Result<Prediction> {
    predict_proba(bundle, x.as_instance()).map_err(|e| Error::Validation(format!("component {component} on {id}: {e}")))
}

pub fn collect_oof_logits(spec: &StackSpec, data: &StackDataset) -> Result<StackedDesignMatrix> {
    Ok(oof_with_models(spec, data)?.0)
}

fn oof_with_models(spec: &StackSpec, data: &StackDataset) -> Result<(StackedDesignMatrix, Vec<Vec<Option<ModelBundle>>>)> {
    spec.validate()?;
    data.validate(spec)?;
    let n = data.len();
    let folds: Vec<usize> = data.ids.iter().map(|id| spec.fold_of(id)).collect();
    let k = spec.oof_folds;
    let mut rows = vec![vec![0.0; spec.components.len()]; n];
    let jobs: Vec<(usize, usize)> =
        (0..k).flat_map(|f| (0..spec.components.len()).map(move |c| (f, c))).collect();
    let results: Vec<Result<(Option<ModelBundle>, Vec<(usize, usize, f64)>)>> = jobs
        .par_iter()
        .map(|&(f, c)| {
            let held: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            if held.is_empty() {
                return Ok((None, Vec::new()));
            }
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let bundle = train_component(spec, c, data, &train, &format!("fold {f}"))?;
            let name = &spec.components[c].name;
            let zs = held
                .iter()
                .map(|&i| Ok((i, c, score(&bundle, &data.columns[c][i], name, &data.ids[i])?.logit)))
                .collect::<Result<Vec<_>>>()?;
            Ok((Some(bundle), zs))
        })
        .collect();
    let mut models: Vec<Vec<Option<ModelBundle>>> = vec![vec![None; spec.components.len()]; k];
    for (r, &(f, c)) in results.into_iter().zip(&jobs) {
        let (bundle, zs) = r?;
        models[f][c] = bundle;
        for (i, c, z) in zs {
            rows[i][c] = z;
        }
    }
    let fold_train_ids = (0..k)
        .map(|f| (0..n).filter(|&i| folds[i] != f).map(|i| data.ids[i].clone()).collect())
        .collect();
    let constant_columns = spec
        .components
        .iter()
        .enumerate()
        .filter(|(c, _)| rows.iter().all(|r| r[*c] == rows[0][*c]))
        .map(|(_, comp)| comp.name.clone())
        .collect::<Vec<_>>();
    for name in &constant_columns {
        log::warn!("component {name} produced constant out-of-fold logits");
    }
    Ok((
        StackedDesignMatrix {
            ids: data.ids.clone(),
            component_names: spec.components.iter().map(|c| c.name.clone()).collect(),
            rows,
            labels: data.labels.clone(),
            folds,
            fold_train_ids,
            constant_columns,
        },
        models,
    ))
}

/// Logistic regression over component logits, one weight per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub component_names: Vec<String>,
    pub model: LogisticRegression,
}

impl MetaModel {
    pub fn weights(&self) -> &[f64] {
        &self.model.coef
    }

    pub fn predict(&self, logits: &[f64]) -> Result<Prediction> {
        if logits.len() != self.model.dim() {
            return Err(Error::Validation(format!(
                "meta model takes {} logits, got {}",
                self.model.dim(),
                logits.len()
            )));
        }
        Ok(Prediction::from_logit(self.model.logit(logits)))
    }
}

pub fn train_meta(matrix: &StackedDesignMatrix) -> Result<MetaModel> {
    if matrix.rows.is_empty() {
        return Err(Error::InsufficientData("empty design matrix".into()));
    }
    let y: Vec<bool> = matrix.labels.iter().map(|l| l.is_negative()).collect();
    let model = LogisticRegression::fit(&matrix.rows, &y, None, 1.0)?;
    Ok(MetaModel { component_names: matrix.component_names.clone(), model })
}

/// Fold models per component plus the meta-learner.
#[derive(Debug, Clone)]
pub struct Stack {
    pub spec: StackSpec,
    /// `components[c]` holds component `c`'s model from every non-empty fold.
    pub components: Vec<Vec<ModelBundle>>,
    pub meta: MetaModel,
    pub oof: StackedDesignMatrix,
}

pub fn train_stack(spec: &StackSpec, data: &StackDataset) -> Result<Stack> {
    let (oof, fold_models) = oof_with_models(spec, data)?;
    oof.audit()?;
    let meta = train_meta(&oof)?;
    let components = (0..spec.components.len())
        .map(|c| fold_models.iter().filter_map(|f| f[c].clone()).collect())
        .collect();
    Ok(Stack { spec: spec.clone(), components, meta, oof })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub label: BinaryOutcome,
    pub p_negative: f64,
    pub logit: f64,
}

/// Score one instance; `inputs[c]` is the instance under component `c`'s recipe.
pub fn ensemble_predict(stack: &Stack, inputs: &[Option<&InstanceData>]) -> Result<EnsemblePrediction> {
    if inputs.len() != stack.components.len() {
        return Err(Error::Validation(format!(
            "stack has {} components, got {} inputs",
            stack.components.len(),
            inputs.len()
        )));
    }
    let mut logits = Vec::with_capacity(inputs.len());
    for ((comp, folds), x) in stack.spec.components.iter().zip(&stack.components).zip(inputs) {
        let x = x.ok_or_else(|| Error::Validation(format!("instance has no {} input", comp.recipe.label())))?;
        let mut sum = 0.0;
        for bundle in folds {
            sum += score(bundle, x, &comp.name, "instance")?.logit;
        }
        logits.push(sum / folds.len() as f64);
    }
    let p = stack.meta.predict(&logits)?;
    Ok(EnsemblePrediction { label: p.label(), p_negative: p.p_negative, logit: p.logit })
}

#[derive(Serialize, Deserialize)]
struct StackManifest {
    spec: StackSpec,
    meta: MetaModel,
    constant_columns: Vec<String>,
    /// sha256 over each fold checkpoint, per component.
    checkpoint_hashes: Vec<Vec<String>>,
}

fn dir_hash(dir: &Path) -> Result<String> {
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    names.sort();
    let mut bytes = Vec::new();
    for p in names {
        bytes.extend_from_slice(p.file_name().unwrap_or_default().as_encoded_bytes());
        bytes.extend_from_slice(&crate::util::read_bytes(&p)?);
    }
    Ok(sha256_hex(&bytes))
}

impl Stack {
    /// Writes `stack.json` (spec, meta coefficients, checkpoint hashes) and
    /// the fold checkpoints under `components/<component>/<fold>/`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut hashes = Vec::new();
        for (c, folds) in self.components.iter().enumerate() {
            let mut per_fold = Vec::new();
            for (f, b) in folds.iter().enumerate() {
                let d = dir.join("components").join(format!("{c:02}")).join(format!("{f:02}"));
                b.save(&d)?;
                per_fold.push(dir_hash(&d)?);
            }
            hashes.push(per_fold);
        }
        write_json(&dir.join("oof.json"), &self.oof)?;
        write_json(
            &dir.join("stack.json"),
            &StackManifest {
                spec: self.spec.clone(),
                meta: self.meta.clone(),
                constant_columns: self.oof.constant_columns.clone(),
                checkpoint_hashes: hashes,
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let m: StackManifest = read_json(&dir.join("stack.json"))?;
        let mut components = Vec::new();
        for (c, per_fold) in m.checkpoint_hashes.iter().enumerate() {
            let mut folds = Vec::new();
            for (f, want) in per_fold.iter().enumerate() {
                let d = dir.join("components").join(format!("{c:02}")).join(format!("{f:02}"));
                if &dir_hash(&d)? != want {
                    return Err(Error::Validation(format!(
                        "component checkpoint {} does not match the manifest",
                        d.display()
                    )));
                }
                folds.push(ModelBundle::load(&d)?);
            }
            components.push(folds);
        }
        Ok(Stack { spec: m.spec, components, meta: m.meta, oof: read_json(&dir.join("oof.json"))? })
    }
}
