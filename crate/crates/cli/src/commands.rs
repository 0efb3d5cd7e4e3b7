use std::collections::BTreeMap;
use std::time::Duration;

use counsel_core::corpus::{load_corpus, load_latents, synth_generate, write_corpus, write_latents, Conversation};
use counsel_core::encoding::{InputSource, Tokenizer};
use counsel_core::ensemble::{train_stack, StackComponent, StackDataset, StackSpec};
use counsel_core::evaluation::{
    attach_llm, base_records, default_grid, emit_report, extract_all, grid_rows, instance_data, render_table,
    row_model_spec, run_grid, GridConfig, GridRow, InstanceRecord, LlmOutputs, RowModel,
};
use counsel_core::interpret::{
    choose_k, cluster_sentences, distortion_sweep, phrase_attribution, project_2d, split_sentences, AttributionOptions,
    AttributionResult, HashingEmbedder, KMeansOptions, SentenceEmbedder,
};
use counsel_core::outcome::{fit_model, predict_proba, InputRecipe, Instance, InstanceData};
use counsel_core::session::{CacheStats, CachedClient, ChatClient, LlmOptions, MockLlm, ResponseCache};
use counsel_core::utterance::{examples_from_annotations, train_utterance_classifier, weak_annotate, Granularity};
use serde::Serialize;

use crate::config::{Provider, RunConfig};
use crate::http::OpenAiClient;
use crate::output::{write, write_json};
use crate::{CliError, Command};

pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Synth => synth(cfg),
        Command::Annotate => annotate(cfg),
        Command::Extract => extract(cfg),
        Command::Train => train(cfg),
        Command::Eval => eval(cfg),
        Command::Ensemble => ensemble(cfg),
        Command::Explain => explain(cfg),
        Command::Cluster => cluster(cfg),
    }
}

fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let (convs, lats) = synth_generate(&cfg.synth)?;
    let out = &cfg.paths.out;
    write_corpus(out.join("corpus.jsonl"), &convs)?;
    write_latents(out.join("latents.jsonl"), &lats)?;
    let negative = lats.iter().filter(|l| l.outcome.is_negative()).count();
    println!("wrote {} sessions ({negative} negative) to {}", convs.len(), out.display());
    Ok(())
}

fn annotate(cfg: &RunConfig) -> Result<(), CliError> {
    let a = &cfg.annotate;
    if a.granularity == Granularity::Fine {
        return Err(CliError::config(
            "weak annotation needs a grouped classifier; set annotate.granularity = \"grouped\"",
        ));
    }
    let labeled_path = a.labeled.as_ref().ok_or_else(|| CliError::config("annotate.labeled is not set"))?;
    let labeled = load_corpus(labeled_path)?;
    let examples = examples_from_annotations(&labeled, a.utterance.k)?;
    if examples.is_empty() {
        return Err(CliError::data(format!("{} has no annotated counselor turns", labeled_path.display())));
    }
    let model = train_utterance_classifier(&examples, None, Granularity::Grouped, &a.utterance)?;
    let out = &cfg.paths.out;
    model.save(&out.join("utterance_model"))?;
    println!("trained grouped classifier on {} utterances", examples.len());
    if let Some(path) = &a.unlabeled {
        let pool = load_corpus(path)?;
        let annotated = weak_annotate(&pool, &model)?;
        write_corpus(out.join("annotated.jsonl"), &annotated)?;
        println!("weakly annotated {} sessions", annotated.len());
    }
    Ok(())
}

fn llm_options(cfg: &RunConfig) -> LlmOptions {
    LlmOptions { budget: cfg.window.llm_budget, retries: cfg.llm.retries, ..Default::default() }
}

/// Run `f` with a cached client built from the LLM settings.
fn with_client<T>(
    cfg: &RunConfig,
    convs: &[Conversation],
    f: impl FnOnce(&CachedClient<'_>) -> Result<T, CliError>,
) -> Result<T, CliError> {
    let cache = ResponseCache::open(&cfg.paths.cache)?;
    let llm = &cfg.llm;
    if llm.offline {
        return f(&CachedClient::offline(llm.model.clone(), &cache));
    }
    let client: Box<dyn ChatClient> = match llm.provider {
        Provider::Mock => {
            let path = cfg.paths.latents_path();
            let lats = load_latents(&path)?;
            Box::new(MockLlm::new(convs, &lats, llm.corruption_rate, cfg.seed)?.with_model(llm.model.clone()))
        }
        Provider::Openai => {
            let key = std::env::var(&llm.api_key_env).map_err(|_| {
                CliError::config(format!(
                    "environment variable {} with the API key is not set (or run with --offline)",
                    llm.api_key_env
                ))
            })?;
            Box::new(OpenAiClient::new(
                &llm.model,
                &llm.base_url,
                key,
                llm.requests_per_minute,
                llm.retries,
                Duration::from_secs(llm.timeout_secs),
            ))
        }
    };
    f(&CachedClient::new(client.as_ref(), Some(&cache)))
}

fn run_extraction(cfg: &RunConfig, convs: &[Conversation]) -> Result<(BTreeMap<String, LlmOutputs>, CacheStats), CliError> {
    with_client(cfg, convs, |client| {
        let outputs = extract_all(convs, client, &llm_options(cfg))?;
        Ok((outputs, client.stats()))
    })
}

fn llm_outputs(cfg: &RunConfig, convs: &[Conversation]) -> Result<BTreeMap<String, LlmOutputs>, CliError> {
    if let Some(path) = &cfg.paths.features {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("reading {}: {e}", path.display())))?;
        return serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())));
    }
    Ok(run_extraction(cfg, convs)?.0)
}

fn extract(cfg: &RunConfig) -> Result<(), CliError> {
    let convs = load_corpus(&cfg.paths.corpus)?;
    let (outputs, stats) = run_extraction(cfg, &convs)?;
    write_json(&cfg.paths.out.join("features.json"), &outputs)?;
    println!(
        "cache: {} lookups, {} hits ({:.1}%), {} client calls",
        stats.lookups(),
        stats.hits,
        stats.hit_rate() * 100.0,
        stats.calls
    );
    Ok(())
}

fn row_needs_llm(row: &GridRow, all: &[GridRow]) -> bool {
    match &row.model {
        RowModel::Llm | RowModel::Tabular { .. } => true,
        RowModel::Encoder => row.sources.iter().any(|s| !matches!(s, InputSource::Conv | InputSource::Utter)),
        RowModel::Ensemble { components } => all
            .iter()
            .filter(|r| components.contains(&r.id))
            .any(|r| row_needs_llm(r, all)),
    }
}

fn records(cfg: &RunConfig, convs: &[Conversation], rows: &[GridRow]) -> Result<Vec<InstanceRecord>, CliError> {
    let mut recs = base_records(convs, cfg.window.k)?;
    let all = default_grid();
    if rows.iter().any(|r| row_needs_llm(r, &all)) {
        attach_llm(&mut recs, &llm_outputs(cfg, convs)?);
    }
    Ok(recs)
}

fn grid_config(cfg: &RunConfig) -> GridConfig {
    GridConfig {
        folds: cfg.grid.folds,
        seed: cfg.seed,
        text: cfg.model.clone(),
        llm_name: cfg.llm.model.clone(),
        bucket_edges: cfg.grid.bucket_edges.clone(),
        oof_folds: cfg.grid.oof_folds,
    }
}

fn one_row(id: &str) -> Result<GridRow, CliError> {
    Ok(grid_rows(&[id.to_string()])?.remove(0))
}

fn column(row: &GridRow, recs: &[InstanceRecord], gc: &GridConfig) -> Result<Vec<InstanceData>, CliError> {
    let tok = Tokenizer::default();
    Ok(recs.iter().map(|r| instance_data(row, r, gc, &tok)).collect::<counsel_core::Result<_>>()?)
}

fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let row = one_row(&cfg.train.row)?;
    if matches!(row.model, RowModel::Ensemble { .. }) {
        return Err(CliError::config("train.row names the ensemble; use the ensemble command"));
    }
    let convs = load_corpus(&cfg.paths.corpus)?;
    let recs = records(cfg, &convs, std::slice::from_ref(&row))?;
    let gc = grid_config(cfg);
    let xs = column(&row, &recs, &gc)?;
    let ids: Vec<String> = recs.iter().map(|r| r.id.clone()).collect();
    let ys: Vec<_> = recs.iter().map(|r| r.label).collect();
    let bundle = fit_model(&row_model_spec(&row, &gc)?, &ids, &xs, &ys, cfg.train.dev_fraction, cfg.seed)?;
    bundle.save(&cfg.paths.out.join("model"))?;
    println!("trained {} on {} sessions", row.label(&cfg.model.encoder_name, &cfg.llm.model), recs.len());
    Ok(())
}

fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let rows = if cfg.grid.rows.is_empty() { default_grid() } else { grid_rows(&cfg.grid.rows)? };
    let convs = load_corpus(&cfg.paths.corpus)?;
    let recs = records(cfg, &convs, &rows)?;
    let report = run_grid(&recs, &rows, &grid_config(cfg))?;
    emit_report(&report, &cfg.paths.out)?;
    print!("{}", render_table(&report));
    Ok(())
}

#[derive(Serialize)]
struct EnsembleSummary {
    row: String,
    n_instances: usize,
    oof_folds: usize,
    components: Vec<String>,
    meta_weights: Vec<f64>,
    meta_intercept: f64,
    constant_columns: Vec<String>,
    fold_partition_audit: &'static str,
}

fn ensemble(cfg: &RunConfig) -> Result<(), CliError> {
    let row = one_row(&cfg.ensemble.row)?;
    let RowModel::Ensemble { components } = &row.model else {
        return Err(CliError::config(format!("row {} is not an ensemble row", row.id)));
    };
    let comp_rows: Vec<GridRow> = components.iter().map(|c| one_row(c)).collect::<Result<_, _>>()?;
    let convs = load_corpus(&cfg.paths.corpus)?;
    let recs = records(cfg, &convs, std::slice::from_ref(&row))?;
    let gc = grid_config(cfg);
    let spec = StackSpec {
        components: comp_rows
            .iter()
            .map(|r| {
                Ok(StackComponent {
                    name: r.id.clone(),
                    recipe: InputRecipe::new(&r.sources),
                    model: row_model_spec(r, &gc)?,
                })
            })
            .collect::<counsel_core::Result<_>>()?,
        meta_seed: cfg.seed,
        oof_folds: cfg.grid.oof_folds,
        dev_fraction: cfg.ensemble.dev_fraction,
    };
    let data = StackDataset {
        ids: recs.iter().map(|r| r.id.clone()).collect(),
        labels: recs.iter().map(|r| r.label).collect(),
        columns: comp_rows.iter().map(|r| column(r, &recs, &gc)).collect::<Result<_, _>>()?,
    };
    let stack = train_stack(&spec, &data)?;
    stack.oof.audit()?;
    stack.save(&cfg.paths.out.join("stack"))?;
    let coef = stack.meta.weights().to_vec();
    let summary = EnsembleSummary {
        row: row.id.clone(),
        n_instances: recs.len(),
        oof_folds: spec.oof_folds,
        components: components.clone(),
        meta_weights: coef,
        meta_intercept: stack.meta.model.intercept,
        constant_columns: stack.oof.constant_columns.clone(),
        fold_partition_audit: "passed",
    };
    write_json(&cfg.paths.out.join("ensemble.json"), &summary)?;
    for (name, w) in summary.components.iter().zip(&summary.meta_weights) {
        println!("{name:<24} {w:+.4}");
    }
    Ok(())
}

#[derive(Serialize)]
struct RowExplanation {
    row: String,
    label: String,
    /// Sum of the scores of strategy-marker units.
    marker_score: f64,
    efficiency_gap: f64,
    #[serde(flatten)]
    attribution: AttributionResult,
}

#[derive(Serialize)]
struct SessionExplanation {
    session_id: String,
    gold: String,
    explanations: Vec<RowExplanation>,
}

fn explain(cfg: &RunConfig) -> Result<(), CliError> {
    let rows: Vec<GridRow> = cfg.explain.rows.iter().map(|r| one_row(r)).collect::<Result<_, _>>()?;
    if let Some(r) = rows.iter().find(|r| !matches!(r.model, RowModel::Encoder)) {
        return Err(CliError::config(format!("explain.rows: {} is not an encoder row", r.id)));
    }
    let convs = load_corpus(&cfg.paths.corpus)?;
    let recs = records(cfg, &convs, &rows)?;
    let targets: Vec<usize> = if cfg.explain.sessions.is_empty() {
        let first = recs
            .iter()
            .position(|r| r.label.is_negative())
            .ok_or_else(|| CliError::data("the corpus has no negative session to explain"))?;
        vec![first]
    } else {
        cfg.explain
            .sessions
            .iter()
            .map(|id| {
                recs.iter()
                    .position(|r| &r.id == id)
                    .ok_or_else(|| CliError::data(format!("session {id} is not in the corpus")))
            })
            .collect::<Result<_, _>>()?
    };
    let gc = grid_config(cfg);
    // models never see the sessions they explain
    let train_idx: Vec<usize> = (0..recs.len()).filter(|i| !targets.contains(i)).collect();
    let ids: Vec<String> = train_idx.iter().map(|&i| recs[i].id.clone()).collect();
    let ys: Vec<_> = train_idx.iter().map(|&i| recs[i].label).collect();
    let opts = AttributionOptions { unit: cfg.explain.unit, max_evals: cfg.explain.max_evals, seed: cfg.seed };

    let mut out: Vec<SessionExplanation> = targets
        .iter()
        .map(|&i| SessionExplanation {
            session_id: recs[i].id.clone(),
            gold: recs[i].label.as_str().to_string(),
            explanations: Vec::new(),
        })
        .collect();
    for row in &rows {
        let col = column(row, &recs, &gc)?;
        let xs: Vec<InstanceData> = train_idx.iter().map(|&i| col[i].clone()).collect();
        let bundle = fit_model(&row_model_spec(row, &gc)?, &ids, &xs, &ys, cfg.explain.dev_fraction, cfg.seed)?;
        for (slot, &i) in out.iter_mut().zip(&targets) {
            let InstanceData::Text(input) = &col[i] else { unreachable!("encoder rows hold text") };
            let result = phrase_attribution(
                |x| Ok(predict_proba(&bundle, Instance::Text(x))?.p_negative),
                input,
                &opts,
            )?;
            // + 0.0 turns the empty sum's -0.0 into 0.0
            slot.explanations.push(RowExplanation {
                row: row.id.clone(),
                label: row.label(&cfg.model.encoder_name, &cfg.llm.model),
                marker_score: result.units.iter().filter(|u| u.unit.marker).map(|u| u.score).sum::<f64>() + 0.0,
                efficiency_gap: result.efficiency_gap(),
                attribution: result,
            });
        }
    }
    write_json(&cfg.paths.out.join("attributions.json"), &out)?;
    for s in &out {
        for e in &s.explanations {
            println!(
                "{} [{}] p(negative) {:.3} from base {:.3}, markers {:+.3}",
                s.session_id, e.row, e.attribution.prediction, e.attribution.base_value, e.marker_score
            );
        }
    }
    Ok(())
}

/// One line per cluster: `Cluster 2 (n=40): Summary: 25.0%, Stance: 75.0%`.
pub fn composition_table(composition: &[BTreeMap<String, f64>], sizes: &[usize], modes: &[&str]) -> String {
    let mut out = String::new();
    for (c, (comp, n)) in composition.iter().zip(sizes).enumerate() {
        let parts: Vec<String> = modes
            .iter()
            .map(|m| format!("{m}: {:.1}%", comp.get(*m).copied().unwrap_or(0.0) * 100.0))
            .collect();
        out.push_str(&format!("Cluster {c} (n={n}): {}\n", parts.join(", ")));
    }
    out
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::data(format!("writing CSV: {e}"))
}

fn cluster(cfg: &RunConfig) -> Result<(), CliError> {
    let convs = load_corpus(&cfg.paths.corpus)?;
    let outputs = llm_outputs(cfg, &convs)?;
    let mut texts: Vec<(String, (String, &str))> = Vec::new();
    for c in &convs {
        let o = outputs
            .get(&c.session_id)
            .ok_or_else(|| CliError::data(format!("no summaries for session {}", c.session_id)))?;
        texts.push((o.summary.clone(), (c.session_id.clone(), "Summary")));
        texts.push((o.stance.clone(), (c.session_id.clone(), "Stance")));
    }
    let sentences = split_sentences(&texts);
    let embedder = HashingEmbedder::new(cfg.cluster.embed_dim, cfg.seed);
    let vectors: Vec<Vec<f64>> = sentences.iter().map(|(s, _)| embedder.embed(s)).collect();
    let ks: Vec<usize> = cfg.cluster.ks.iter().copied().filter(|&k| k >= 1 && k <= vectors.len()).collect();
    let opts = KMeansOptions::default();
    let sweep = if ks.is_empty() { Vec::new() } else { distortion_sweep(&vectors, &ks, cfg.seed, &opts)? };
    let k = match cfg.cluster.k {
        Some(k) => k,
        None => choose_k(&vectors, &ks, cfg.seed, cfg.cluster.theta)?,
    };
    let labels: Vec<&str> = sentences.iter().map(|(_, (_, m))| *m).collect();
    let result = cluster_sentences(&vectors, &labels, k, cfg.seed)?;
    let xy = project_2d(&vectors, cfg.seed)?;

    let out = &cfg.paths.out;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sentence_id", "session_id", "mode", "cluster", "x", "y", "text"]).map_err(csv_err)?;
    for (i, ((text, (sid, mode)), (x, y))) in sentences.iter().zip(&xy).enumerate() {
        w.write_record([
            i.to_string(),
            sid.clone(),
            mode.to_string(),
            result.assignments[i].to_string(),
            format!("{x:.6}"),
            format!("{y:.6}"),
            text.clone(),
        ])
        .map_err(csv_err)?;
    }
    write(&out.join("clusters.csv"), &w.into_inner().map_err(csv_err)?)?;
    let mut d = String::from("k,distortion\n");
    for r in &sweep {
        d.push_str(&format!("{},{:.6}\n", r.k, r.distortion));
    }
    write(&out.join("distortion.csv"), d.as_bytes())?;
    let table = composition_table(&result.composition, &result.sizes(), &["Summary", "Stance"]);
    write(&out.join("composition.txt"), table.as_bytes())?;
    write_json(&out.join("clusters.json"), &result)?;
    println!("{} sentences in {k} clusters", sentences.len());
    print!("{table}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_layout() {
        let mut a = BTreeMap::new();
        a.insert("Stance".to_string(), 1.0);
        let mut b = BTreeMap::new();
        b.insert("Summary".to_string(), 0.25);
        b.insert("Stance".to_string(), 0.75);
        let t = composition_table(&[a, b], &[3, 4], &["Summary", "Stance"]);
        assert_eq!(t, "Cluster 0 (n=3): Summary: 0.0%, Stance: 100.0%\nCluster 1 (n=4): Summary: 25.0%, Stance: 75.0%\n");
    }
}
