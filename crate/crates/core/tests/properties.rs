mod common;

use common::strategies::*;
use counsel_core::corpus::{make_folds_labeled, BinaryOutcome};
use counsel_core::encoding::{inject_utterance_markers, render_plain, truncate_for_llm, window_turns, Tokenizer};
use counsel_core::ensemble::{StackComponent, StackSpec};
use counsel_core::evaluation::{macro_f1, minority_recall, ConfusionMatrix};
use counsel_core::interpret::{cluster_sentences, exact_shapley, kernel_shapley, AttributionMode};
use counsel_core::outcome::{InputRecipe, ModelSpec};
use counsel_core::tabular::TabularModelKind;
use counsel_core::encoding::InputSource;
use counsel_core::session::{devectorize, vectorize, Provenance};
use proptest::prelude::*;
use proptest::test_runner::Config;

proptest! {
    #![proptest_config(Config::with_cases(256))]

    #[test]
    fn window_is_an_ordered_subsequence(conv in conversation(30), k in 0usize..12) {
        let w = window_turns(&conv, k);
        prop_assert_eq!(w.len(), conv.turns.len().min(2 * k));
        let mut it = conv.turns.iter();
        for t in &w {
            prop_assert!(it.any(|u| u == t));
        }
        if conv.turns.len() > 2 * k {
            prop_assert_eq!(&w[..k], &conv.turns[..k]);
            prop_assert_eq!(&w[k..], &conv.turns[conv.turns.len() - k..]);
        }
    }

    #[test]
    fn markers_without_features_render_plain(conv in conversation(20)) {
        let bare = strip_features(&conv);
        prop_assert_eq!(inject_utterance_markers(&bare.turns).unwrap(), render_plain(&bare.turns).unwrap());
        let mut empty = bare.clone();
        for t in empty.turns.iter_mut().filter(|t| t.speaker == counsel_core::corpus::Speaker::Counselor) {
            t.utterance_features = Some(Vec::new());
        }
        prop_assert_eq!(inject_utterance_markers(&empty.turns).unwrap(), render_plain(&bare.turns).unwrap());
    }

    #[test]
    fn truncation_is_idempotent(conv in conversation(40), budget in 20usize..200) {
        let tok = Tokenizer::default();
        if let Ok(once) = truncate_for_llm(&conv, budget, &tok) {
            prop_assert!(tok.count(&render_plain(&once.turns).unwrap()) <= budget);
            prop_assert_eq!(once.turns.first(), conv.turns.first());
            prop_assert_eq!(once.turns.last(), conv.turns.last());
            let twice = truncate_for_llm(&once, budget, &tok).unwrap();
            prop_assert_eq!(twice, once);
        }
    }

    #[test]
    fn fold_assignment_is_a_partition(n_neg in 3usize..30, n_pos in 3usize..60, k in 2usize..4, seed in any::<u64>()) {
        let labeled: Vec<(String, BinaryOutcome)> = (0..n_neg + n_pos)
            .map(|i| (format!("s{i}"), BinaryOutcome::from_negative(i < n_neg)))
            .collect();
        let folds = make_folds_labeled(&labeled, k, seed).unwrap();
        let mut seen: Vec<&String> = folds.iter().flat_map(|f| &f.test).collect();
        seen.sort();
        let mut all: Vec<&String> = labeled.iter().map(|(id, _)| id).collect();
        all.sort();
        prop_assert_eq!(seen, all);
        for f in &folds {
            let mut ids: Vec<&String> = f.train.iter().chain(&f.dev).chain(&f.test).collect();
            prop_assert_eq!(ids.len(), labeled.len());
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), labeled.len());
        }
    }

    #[test]
    fn stack_folds_depend_only_on_seed_and_id(seed in any::<u64>(), ids in prop::collection::vec("[a-z0-9]{1,10}", 1..40), folds in 2usize..8) {
        let comp = |r: InputSource| StackComponent {
            name: r.label().into(),
            recipe: InputRecipe::new(&[r]),
            model: ModelSpec::Tabular { kind: TabularModelKind::LogisticRegression },
        };
        let mut spec = StackSpec::new(vec![comp(InputSource::Conv), comp(InputSource::Utter)], seed);
        spec.oof_folds = folds;
        let other = StackSpec { components: vec![comp(InputSource::Stance), comp(InputSource::Summary)], ..spec.clone() };
        for id in &ids {
            let f = spec.fold_of(id);
            prop_assert!(f < folds);
            prop_assert_eq!(f, other.fold_of(id));
        }
    }

    #[test]
    fn metrics_are_consistent(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
        let m = ConfusionMatrix { tp, fp, tn, fn_ };
        prop_assume!(m.total() > 0);
        let f = macro_f1(&m).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - macro_f1(&m.swapped()).unwrap()).abs() < 1e-12);
        if tp + fn_ > 0 {
            let r = minority_recall(&m).unwrap();
            prop_assert!((r - tp as f64 / (tp + fn_) as f64).abs() < 1e-12);
        } else {
            prop_assert!(minority_recall(&m).is_err());
        }
        if fp == 0 && fn_ == 0 && tp > 0 && tn > 0 {
            prop_assert_eq!(f, 1.0);
        }
    }
}

proptest! {
    #![proptest_config(Config::with_cases(1000))]

    #[test]
    fn session_vectors_round_trip(f in session_features()) {
        let v = vectorize(&f).unwrap();
        prop_assert_eq!(v.len(), 60);
        let back = devectorize(&v, Provenance::Planted).unwrap();
        prop_assert_eq!(back, f);
    }
}

proptest! {
    #![proptest_config(Config::with_cases(500))]

    #[test]
    fn kernel_matches_exact_and_axioms_hold((n, table) in value_table(10)) {
        let v = |m: &[bool]| table[mask_index(m)];
        let exact = exact_shapley(v, n).unwrap();
        let (kernel, mode) = kernel_shapley(v, n, 4096, 0).unwrap();
        prop_assert_eq!(mode, AttributionMode::Exact);
        for (a, b) in exact.iter().zip(&kernel) {
            prop_assert!((a - b).abs() < 1e-6, "exact {a} kernel {b}");
        }
        let total: f64 = exact.iter().sum();
        prop_assert!((total - (table[(1 << n) - 1] - table[0])).abs() < 1e-9);
    }

    #[test]
    fn symmetric_and_null_players((n, table) in value_table(8)) {
        prop_assume!(n >= 3);
        // player 0 is null, players 1 and 2 are interchangeable
        let canon = |m: &[bool]| {
            let mut m = m.to_vec();
            m[0] = false;
            if m[1] && !m[2] {
                m.swap(1, 2);
            }
            mask_index(&m)
        };
        let v = |m: &[bool]| table[canon(m)];
        let phi = exact_shapley(v, n).unwrap();
        prop_assert!(phi[0].abs() < 1e-9);
        prop_assert!((phi[1] - phi[2]).abs() < 1e-9);
        let (kernel, _) = kernel_shapley(v, n, 4096, 0).unwrap();
        prop_assert!(kernel[0].abs() < 1e-6);
        prop_assert!((kernel[1] - kernel[2]).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(Config::with_cases(32))]

    #[test]
    fn cluster_composition_sums_to_one_and_ignores_order(
        labels in prop::collection::vec(prop_oneof![Just("Summary"), Just("Stance")], 30),
        perm_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let vectors: Vec<Vec<f64>> = (0..labels.len())
            .map(|i| {
                let c = (i % 3) as f64 * 100.0;
                vec![c + (i as f64 * 0.37).sin(), (i as f64 * 0.71).cos()]
            })
            .collect();
        let a = cluster_sentences(&vectors, &labels, 3, 0).unwrap();
        for comp in &a.composition {
            prop_assert!((comp.values().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let pv: Vec<Vec<f64>> = order.iter().map(|&i| vectors[i].clone()).collect();
        let pl: Vec<&str> = order.iter().map(|&i| labels[i]).collect();
        let b = cluster_sentences(&pv, &pl, 3, 0).unwrap();
        let key = |r: &counsel_core::interpret::ClusterResult| {
            let mut c: Vec<String> = r.composition.iter().map(|m| format!("{m:?}")).collect();
            c.sort();
            c
        };
        prop_assert_eq!(key(&a), key(&b));
    }
}
