//! Proptest strategies shared by the property suites.
#![allow(dead_code)]

use counsel_core::corpus::{Conversation, Outcome, Source, Turn};
use counsel_core::session::{question_schema, Answer, Provenance, SessionFeatures};
use counsel_core::utterance::FeatureGroup;
use proptest::prelude::*;

pub fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,8}",
        Just("okay".to_string()),
        Just("I'm".to_string()),
        Just("safe,".to_string()),
        Just("help.".to_string()),
    ]
}

pub fn turn() -> impl Strategy<Value = Turn> {
    (
        any::<bool>(),
        prop::collection::vec(word(), 1..12),
        prop::option::of(prop::collection::vec(0usize..4, 0..3)),
    )
        .prop_map(|(counselor, words, groups)| {
            let text = words.join(" ");
            if counselor {
                let t = Turn::counselor(text);
                match groups {
                    Some(g) => t.with_features(g.into_iter().map(|i| FeatureGroup::ALL[i])),
                    None => t,
                }
            } else {
                Turn::help_seeker(text)
            }
        })
}

pub fn conversation(max_turns: usize) -> impl Strategy<Value = Conversation> {
    prop::collection::vec(turn(), 1..max_turns).prop_map(|turns| Conversation {
        session_id: "p0".into(),
        source: Source::Synthetic,
        outcome: Some(Outcome::Neutral),
        turns,
    })
}

pub fn strip_features(c: &Conversation) -> Conversation {
    let mut c = c.clone();
    for t in &mut c.turns {
        t.utterance_features = None;
    }
    c
}

/// Any valid feature set: each question unanswerable or answered with one
/// choice, or a non-empty subset for multi-select questions. Choices come
/// in schema order, which is what devectorize produces.
pub fn session_features() -> impl Strategy<Value = SessionFeatures> {
    let per_question: Vec<BoxedStrategy<Answer>> = question_schema()
        .iter()
        .map(|q| {
            let n = q.choices.len();
            let choices = q.choices.clone();
            if q.multi_select {
                prop::collection::vec(any::<bool>(), n)
                    .prop_map(move |mask| {
                        let picked: Vec<String> =
                            choices.iter().zip(&mask).filter(|(_, m)| **m).map(|(c, _)| c.clone()).collect();
                        if picked.is_empty() {
                            Answer::Unanswerable
                        } else {
                            Answer::Chosen(picked)
                        }
                    })
                    .boxed()
            } else {
                (0..=n)
                    .prop_map(move |i| if i == n { Answer::Unanswerable } else { Answer::single(choices[i].clone()) })
                    .boxed()
            }
        })
        .collect();
    per_question.prop_map(|answers| {
        let mut f = SessionFeatures::new(Provenance::Planted);
        for (q, a) in question_schema().iter().zip(answers) {
            f.set(q.question_id, a);
        }
        f
    })
}

/// Value function over `n` players given as a full table of coalition values.
pub fn value_table(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec(-5.0f64..5.0, 1 << n)))
}

pub fn mask_index(mask: &[bool]) -> usize {
    mask.iter().enumerate().map(|(i, b)| usize::from(*b) << i).sum()
}
