//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line even when the others fail.
//! `ACCEPTANCE_ONLY=4,7` restricts the run to a subset.

#[path = "../../core/tests/common/strategies.rs"]
mod strategies;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use counsel_core::corpus::{
    split_dataset, synth_generate, BinaryOutcome, Channel, Degradation, Leakage, OutcomeRule, SplitRatios, SynthSpec,
};
use counsel_core::encoding::{
    inject_utterance_markers, render_plain, truncate_for_llm, window_turns, InputSource, Tokenizer,
};
use counsel_core::ensemble::{collect_oof_logits, StackComponent, StackDataset, StackSpec};
use counsel_core::evaluation::{
    attach_llm, base_records, emit_report, extract_all, grid_rows, run_grid, score, GridConfig, InstanceRecord,
    LlmOutputs,
};
use counsel_core::interpret::{choose_k, distortion_sweep, exact_shapley, kernel_shapley, AttributionMode, KMeansOptions};
use counsel_core::outcome::{
    predict_batch, train_tabular, train_text_classifier, InputRecipe, Instance, InstanceData, ModelSpec,
    TextClassifierConfig,
};
use counsel_core::session::{devectorize, question_schema, vectorize, CachedClient, LlmOptions, MockLlm, Provenance};
use counsel_core::tabular::TabularModelKind;
use counsel_core::utterance::{
    examples_from_latents, multilabel_f1, train_hierarchical, train_utterance_classifier, Granularity,
    UtteranceConfig, UtteranceExample, UtteranceLabel,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use strategies::*;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(PtConfig { cases, failure_persistence: None, ..PtConfig::default() })
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_counsel")
}

fn cli(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin()).args(args).current_dir(dir).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("counsel {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

/// Records with mock-LLM outputs attached.
fn mock_records(spec: &SynthSpec) -> Vec<InstanceRecord> {
    let (convs, lats) = synth_generate(spec).unwrap();
    let mock = MockLlm::new(&convs, &lats, 0.0, spec.seed).unwrap();
    let client = CachedClient::new(&mock, None);
    let out = extract_all(&convs, &client, &LlmOptions::default()).unwrap();
    let mut recs = base_records(&convs, 4).unwrap();
    attach_llm(&mut recs, &out);
    recs
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn c1_windowing() -> Verdict {
    let start = Instant::now();
    let tok = Tokenizer::default();
    let mut r = runner(500);
    r.run(&(conversation(30), 0usize..12), |(conv, k)| {
        let w = window_turns(&conv, k);
        prop_assert_eq!(w.len(), conv.turns.len().min(2 * k));
        let mut it = conv.turns.iter();
        for t in &w {
            prop_assert!(it.any(|u| u == t), "window is not a subsequence");
        }
        Ok(())
    })
    .map_err(|e| format!("window laws: {e}"))?;
    r.run(&conversation(20), |conv| {
        let bare = strip_features(&conv);
        prop_assert_eq!(inject_utterance_markers(&bare.turns).unwrap(), render_plain(&bare.turns).unwrap());
        Ok(())
    })
    .map_err(|e| format!("marker injection: {e}"))?;
    r.run(&(conversation(40), 20usize..200), |(conv, budget)| {
        if let Ok(once) = truncate_for_llm(&conv, budget, &tok) {
            prop_assert_eq!(truncate_for_llm(&once, budget, &tok).unwrap(), once);
        }
        Ok(())
    })
    .map_err(|e| format!("truncation: {e}"))?;
    let took = start.elapsed();
    check(took < Duration::from_secs(10), format!("3 x 500 cases in {took:.1?} (limit 10 s)"))
}

fn c2_schema() -> Verdict {
    let schema = question_schema();
    let total: usize = schema.iter().map(|q| q.choices.len()).sum();
    if schema.len() != 12 || total != 60 {
        return Err(format!("{} questions, {total} choices", schema.len()));
    }
    runner(1000)
        .run(&session_features(), |f| {
            let v = vectorize(&f).unwrap();
            prop_assert_eq!(devectorize(&v, Provenance::Planted).unwrap(), f);
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;
    Ok("12 questions, 60 choices, 1000 round trips".into())
}

fn c3_shapley() -> Verdict {
    let start = Instant::now();
    runner(500)
        .run(&value_table(10), |(n, table)| {
            let v = |m: &[bool]| table[mask_index(m)];
            let exact = exact_shapley(v, n).unwrap();
            let (kernel, mode) = kernel_shapley(v, n, 4096, 0).unwrap();
            prop_assert_eq!(mode, AttributionMode::Exact);
            for (a, b) in exact.iter().zip(&kernel) {
                prop_assert!((a - b).abs() <= 1e-6, "exact {} kernel {}", a, b);
            }
            let total: f64 = exact.iter().sum();
            prop_assert!((total - (table[(1 << n) - 1] - table[0])).abs() < 1e-9, "efficiency");
            Ok(())
        })
        .map_err(|e| format!("kernel vs exact: {e}"))?;
    runner(500)
        .run(&value_table(8), |(n, table)| {
            if n < 3 {
                return Ok(());
            }
            // player 0 is null, players 1 and 2 are interchangeable
            let canon = |m: &[bool]| {
                let mut m = m.to_vec();
                m[0] = false;
                if m[1] && !m[2] {
                    m.swap(1, 2);
                }
                mask_index(&m)
            };
            let phi = exact_shapley(|m| table[canon(m)], n).unwrap();
            prop_assert!(phi[0].abs() < 1e-9, "null player got {}", phi[0]);
            prop_assert!((phi[1] - phi[2]).abs() < 1e-9, "symmetry");
            Ok(())
        })
        .map_err(|e| format!("axioms: {e}"))?;
    let took = start.elapsed();
    check(took < Duration::from_secs(120), format!("500 kernel/exact pairs and 500 axiom games in {took:.1?}"))
}

fn c4_mock_end_to_end() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
seed = 11
[paths]
corpus = "data/corpus.jsonl"
cache = "cache"
[synth]
n_sessions = 500
negative_rate = 0.4
noise_rate = 0.0
rule = { channels = ["session"], min_active = 1 }
leakage = { strategy_text = 1.0, session_text = 0.0, lexical = 0.0, fine_confusion = 0.0 }
"#,
    );
    let cfg = cfg.to_str().unwrap();
    cli(dir.path(), &["synth", "--config", cfg, "--out", "data"])?;
    let summary = cli(dir.path(), &["extract", "--config", cfg, "--mock", "--out", "extract"])?;
    let features: BTreeMap<String, LlmOutputs> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("extract/features.json")).unwrap()).unwrap();
    let convs = counsel_core::corpus::load_corpus(dir.path().join("data/corpus.jsonl")).unwrap();
    let mut recs = base_records(&convs, 4).unwrap();
    attach_llm(&mut recs, &features);

    let split = split_dataset(&convs, SplitRatios::default(), 11).unwrap();
    let pick = |ids: &[String]| -> Vec<&InstanceRecord> { ids.iter().map(|id| recs.iter().find(|r| &r.id == id).unwrap()).collect() };
    let (train, dev, test) = (pick(&split.train), pick(&split.dev), pick(&split.test));
    let fit: Vec<&InstanceRecord> = train.iter().chain(&dev).copied().collect();

    let vecs: Vec<Vec<f64>> = fit.iter().map(|r| r.vector().unwrap().unwrap()).collect();
    let ys: Vec<BinaryOutcome> = fit.iter().map(|r| r.label).collect();
    let gold: Vec<BinaryOutcome> = test.iter().map(|r| r.label).collect();
    let tab = train_tabular(TabularModelKind::Adaboost, &vecs, &ys, 11).unwrap();
    let test_vecs: Vec<Vec<f64>> = test.iter().map(|r| r.vector().unwrap().unwrap()).collect();
    let tab_pred: Vec<BinaryOutcome> = test_vecs
        .iter()
        .map(|v| counsel_core::outcome::predict_proba(&tab, Instance::Vector(v)).unwrap().label())
        .collect();
    let (tab_f1, _) = score(&tab_pred, &gold).unwrap();

    let tok = Tokenizer::default();
    let config = TextClassifierConfig::desk(11);
    let enc = |rs: &[&InstanceRecord]| -> Vec<_> {
        rs.iter().map(|r| r.encoded(&[InputSource::Conv], config.max_tokens, &tok).unwrap().unwrap()).collect()
    };
    let (tx, dx, sx) = (enc(&train), enc(&dev), enc(&test));
    let ty: Vec<BinaryOutcome> = train.iter().map(|r| r.label).collect();
    let dy: Vec<BinaryOutcome> = dev.iter().map(|r| r.label).collect();
    let conv = train_text_classifier(&tx, &ty, Some((&dx, &dy)), &config).unwrap();
    let inst: Vec<Instance> = sx.iter().map(Instance::Text).collect();
    let conv_pred: Vec<BinaryOutcome> = predict_batch(&conv, &inst).unwrap().iter().map(|p| p.label()).collect();
    let (conv_f1, _) = score(&conv_pred, &gold).unwrap();
    check(
        tab_f1 >= 0.95 && conv_f1 <= 0.70,
        format!(
            "session one-hot AdaBoost F1 {:.2} (need >= 95), Conv F1 {:.2} (need <= 70); extract: {}",
            tab_f1 * 100.0,
            conv_f1 * 100.0,
            summary.trim()
        ),
    )
}

fn c5_utterance_features() -> Verdict {
    let rows = grid_rows(&["conv".into(), "utter".into()]).unwrap();
    let (mut f1, mut rec) = ([Vec::new(), Vec::new()], [Vec::new(), Vec::new()]);
    for seed in 0..5u64 {
        let spec = SynthSpec {
            n_sessions: 300,
            seed,
            negative_rate: 0.4,
            rule: OutcomeRule::only(Channel::Strategy),
            leakage: Leakage { strategy_text: 0.2, ..Default::default() },
            ..Default::default()
        };
        let (convs, _) = synth_generate(&spec).unwrap();
        let recs = base_records(&convs, 4).unwrap();
        let cfg = GridConfig { folds: 5, seed, text: TextClassifierConfig::desk(seed), ..Default::default() };
        let report = run_grid(&recs, &rows, &cfg).unwrap();
        for (i, id) in ["conv", "utter"].iter().enumerate() {
            let row = report.row(id).unwrap();
            f1[i].push(row.macro_f1.unwrap().mean);
            rec[i].push(row.minority_recall.unwrap().mean);
        }
    }
    let (df1, drec) = ((mean(&f1[1]) - mean(&f1[0])) * 100.0, (mean(&rec[1]) - mean(&rec[0])) * 100.0);
    check(
        df1 >= 5.0 && drec >= 10.0,
        format!(
            "Utter {:.2}/{:.2} vs Conv {:.2}/{:.2} (F1/recall over 5 seeds): +{df1:.2} F1 (need 5), +{drec:.2} recall (need 10)",
            mean(&f1[1]) * 100.0,
            mean(&rec[1]) * 100.0,
            mean(&f1[0]) * 100.0,
            mean(&rec[0]) * 100.0
        ),
    )
}

fn c6_ensemble() -> Verdict {
    let ids: Vec<String> =
        ["utter", "utter_session", "utter_summary", "utter_stance", "ensemble"].iter().map(|s| s.to_string()).collect();
    let rows = grid_rows(&ids).unwrap();
    let (mut ens, mut best) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let spec = SynthSpec {
            n_sessions: 200,
            seed,
            negative_rate: 0.4,
            rule: OutcomeRule::any(&[Channel::Session, Channel::Strategy]),
            leakage: Leakage { strategy_text: 0.3, ..Default::default() },
            // stance summaries disagree with the outcome for a share of sessions
            degradation: Some(Degradation { min_tokens: 0, flip_rate: 0.2 }),
            ..Default::default()
        };
        let recs = mock_records(&spec);
        let cfg = GridConfig { folds: 5, seed, text: TextClassifierConfig::desk(seed), ..Default::default() };
        let report = run_grid(&recs, &rows, &cfg).unwrap();
        let score_of = |id: &str| report.row(id).unwrap().macro_f1.unwrap().mean;
        ens.push(score_of("ensemble"));
        best.push(ids[..4].iter().map(|id| score_of(id)).fold(f64::MIN, f64::max));
    }
    let gap = (mean(&ens) - mean(&best)) * 100.0;

    // fold-partition audit at n = 50
    let spec = SynthSpec { n_sessions: 50, seed: 5, negative_rate: 0.4, ..Default::default() };
    let recs = mock_records(&spec);
    let tok = Tokenizer::default();
    let text = TextClassifierConfig { epochs: 3, ..TextClassifierConfig::desk(5) };
    let stack_spec = StackSpec::new(
        vec![
            StackComponent {
                name: "utter".into(),
                recipe: InputRecipe::new(&[InputSource::Utter]),
                model: ModelSpec::Encoder { config: text.clone() },
            },
            StackComponent {
                name: "session".into(),
                recipe: InputRecipe::new(&[InputSource::Session]),
                model: ModelSpec::Tabular { kind: TabularModelKind::LogisticRegression },
            },
        ],
        5,
    );
    let data = StackDataset {
        ids: recs.iter().map(|r| r.id.clone()).collect(),
        labels: recs.iter().map(|r| r.label).collect(),
        columns: vec![
            recs.iter()
                .map(|r| InstanceData::Text(r.encoded(&[InputSource::Utter], text.max_tokens, &tok).unwrap().unwrap()))
                .collect(),
            recs.iter().map(|r| InstanceData::Vector(r.vector().unwrap().unwrap())).collect(),
        ],
    };
    let m = collect_oof_logits(&stack_spec, &data).map_err(|e| e.to_string())?;
    m.audit().map_err(|e| e.to_string())?;
    let mut held_out: Vec<&String> = Vec::new();
    for (f, train_ids) in m.fold_train_ids.iter().enumerate() {
        let test: Vec<&String> = m.ids.iter().zip(&m.folds).filter(|(_, k)| **k == f).map(|(id, _)| id).collect();
        if test.iter().any(|id| train_ids.contains(id)) || test.len() + train_ids.len() != 50 {
            return Err(format!("fold {f} is not a partition"));
        }
        held_out.extend(test);
    }
    held_out.sort();
    held_out.dedup();
    check(
        gap >= -1.0 && held_out.len() == 50,
        format!(
            "ensemble {:.2} vs best component {:.2} (mean over 5 seeds, gap {gap:+.2}, need >= -1); audit: 50/50 held out once",
            mean(&ens) * 100.0,
            mean(&best) * 100.0
        ),
    )
}

fn c7_length_buckets() -> Verdict {
    let spec = SynthSpec {
        n_sessions: 400,
        seed: 7,
        negative_rate: 0.4,
        rule: OutcomeRule::only(Channel::Session),
        degradation: Some(Degradation::default()),
        ..SynthSpec::default().long_profile()
    };
    let recs = mock_records(&spec);
    let rows = grid_rows(&["session_adaboost".into(), "stance".into()]).unwrap();
    let cfg = GridConfig { folds: 5, seed: 7, ..Default::default() };
    let report = run_grid(&recs, &rows, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("buckets.csv")).unwrap();
    let table = report.buckets.as_ref().unwrap();
    let counts: Vec<usize> = table.scores.iter().filter(|s| s.model_id == "stance").map(|s| s.n).collect();
    let stance = table.series("stance");
    let session = table.series("session_adaboost");
    let last = stance.len() - 1;
    let before: Vec<f64> = stance[..last].iter().flatten().copied().collect();
    let (Some(after), false) = (stance[last], before.is_empty()) else {
        return Err(format!("empty buckets, counts {counts:?}"));
    };
    let drop = (mean(&before) - after) * 100.0;
    let sess: Vec<f64> = session.iter().flatten().copied().collect();
    let spread = (sess.iter().copied().fold(f64::MIN, f64::max) - sess.iter().copied().fold(f64::MAX, f64::min)) * 100.0;
    let fmt = |s: &[Option<f64>]| s.iter().map(|v| v.map_or("-".into(), |x| format!("{:.1}", x * 100.0))).collect::<Vec<_>>().join("/");
    check(
        drop >= 5.0 && spread <= 3.0 && csv.lines().count() == 1 + 2 * stance.len(),
        format!(
            "bucket sizes {counts:?}; stance {} drops {drop:.1} after 3K (need 5); session {} spread {spread:.1} (max 3); buckets.csv written",
            fmt(&stance),
            fmt(&session)
        ),
    )
}

fn c8_clustering() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut blobs = Vec::new();
    for c in 0..3 {
        for _ in 0..50 {
            blobs.push((0..8).map(|d| noise.sample(&mut rng) + if d == c { 10.0 } else { 0.0 }).collect::<Vec<f64>>());
        }
    }
    let ks: Vec<usize> = (1..=8).collect();
    let k = choose_k(&blobs, &ks, 8, 0.15).map_err(|e| e.to_string())?;
    let sweep = distortion_sweep(&blobs, &ks, 8, &KMeansOptions::default()).map_err(|e| e.to_string())?;
    let monotone = sweep.windows(2).all(|w| w[1].distortion <= w[0].distortion);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "seed = 8\n[paths]\ncorpus = \"data/corpus.jsonl\"\ncache = \"cache\"\n[synth]\nn_sessions = 60\nnegative_rate = 0.4\n",
    );
    let cfg = cfg.to_str().unwrap();
    cli(dir.path(), &["synth", "--config", cfg, "--out", "data"])?;
    cli(dir.path(), &["cluster", "--config", cfg, "--mock", "--out", "cluster"])?;
    let table = std::fs::read_to_string(dir.path().join("cluster/composition.txt")).unwrap();
    let pure = table.lines().find(|l| l.ends_with("Summary: 0.0%, Stance: 100.0%"));
    check(
        k == 3 && monotone && pure.is_some(),
        format!("choose_k = {k}, distortion non-increasing: {monotone}, stance-only cluster: {}", pure.unwrap_or("none")),
    )
}

fn c9_grouped_vs_fine() -> Verdict {
    let spec = SynthSpec {
        n_sessions: 240,
        seed: 9,
        leakage: Leakage { fine_confusion: 0.5, ..Default::default() },
        ..Default::default()
    };
    let (convs, lats) = synth_generate(&spec).unwrap();
    let ex = examples_from_latents(&convs, &lats, 4).unwrap();
    let is_test = |e: &UtteranceExample| e.session_id.trim_start_matches("syn").parse::<usize>().unwrap() % 4 == 0;
    let train: Vec<UtteranceExample> = ex.iter().filter(|e| !is_test(e)).cloned().collect();
    let test: Vec<UtteranceExample> = ex.iter().filter(|e| is_test(e)).cloned().collect();
    let cfg = UtteranceConfig::default();
    let grouped = train_utterance_classifier(&train, None, Granularity::Grouped, &cfg).unwrap();
    let fine = train_utterance_classifier(&train, None, Granularity::Fine, &cfg).unwrap();
    let hier = train_hierarchical(&train, None, &cfg).unwrap();
    let fine_gold: Vec<Vec<UtteranceLabel>> = test.iter().map(|e| e.labels.clone()).collect();
    let g = multilabel_f1(&grouped.predict_examples(&test).unwrap(), &grouped.project_gold(&test)).unwrap();
    let f = multilabel_f1(&fine.predict_examples(&test).unwrap(), &fine_gold).unwrap();
    let h = multilabel_f1(&hier.predict_examples(&test).unwrap(), &fine_gold).unwrap();
    check(
        g >= f && h >= f - 0.02,
        format!("grouped {:.2} >= fine {:.2}; hierarchical {:.2} >= fine - 2", g * 100.0, f * 100.0, h * 100.0),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn c10_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
seed = 10
[paths]
corpus = "data/corpus.jsonl"
cache = "cache"
[synth]
n_sessions = 40
negative_rate = 0.4
[model]
epochs = 3
buckets = 4096
dim = 16
[grid]
rows = ["conv", "utter_llm", "session_adaboost", "utter_stance", "ensemble"]
folds = 2
oof_folds = 2
[annotate]
labeled = "data/corpus.jsonl"
unlabeled = "data/corpus.jsonl"
[cluster]
ks = [1, 2, 3, 4, 5]
"#,
    );
    let cfg = cfg.to_str().unwrap();
    let mut checked = Vec::new();
    for cmd in ["synth", "annotate", "extract", "train", "eval", "ensemble", "explain", "cluster"] {
        let out = if cmd == "synth" { "data".to_string() } else { format!("runs/{cmd}") };
        let args = |force: bool| {
            let mut a = vec![cmd, "--config", cfg, "--mock", "--out", out.as_str()];
            if force {
                a.push("--force");
            }
            a
        };
        cli(dir.path(), &args(false))?;
        let first = snapshot(&dir.path().join(&out));
        cli(dir.path(), &args(true))?;
        let second = snapshot(&dir.path().join(&out));
        if first != second {
            let differ: Vec<String> = first
                .keys()
                .chain(second.keys())
                .filter(|k| first.get(*k) != second.get(*k))
                .map(|k| k.display().to_string())
                .collect();
            return Err(format!("{cmd}: rerun changed {differ:?}"));
        }
        checked.push(format!("{cmd} ({} files)", first.len()));
    }
    Ok(format!("byte-identical reruns: {}", checked.join(", ")))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "windowing and encoding properties", c1_windowing),
        (2, "schema integrity and vector round trip", c2_schema),
        (3, "Shapley oracle", c3_shapley),
        (4, "mock end-to-end", c4_mock_end_to_end),
        (5, "utterance features help", c5_utterance_features),
        (6, "ensemble dominance and OOF audit", c6_ensemble),
        (7, "length-bucket degradation", c7_length_buckets),
        (8, "clustering", c8_clustering),
        (9, "grouped vs fine-grained", c9_grouped_vs_fine),
        (10, "CLI determinism", c10_determinism),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    // cargo passes harness flags such as --list; a listing run does nothing
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failed = 0;
    for (n, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {n:>2} PASS [{name}] {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL [{name}] {detail} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
