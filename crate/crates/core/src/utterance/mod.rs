//! Counseling-strategy codebook, multi-label utterance classifiers and weak
//! annotation of unlabeled counselor turns.

mod classifier;
mod codebook;
mod metrics;

pub use classifier::{
    examples_from_annotations, examples_from_latents, hierarchical_predict, train_hierarchical,
    train_utterance_classifier, utterance_context, weak_annotate, Granularity, HierarchicalModel,
    UtteranceConfig, UtteranceExample, UtteranceLabel, UtteranceModel,
};
pub use codebook::{codebook, group_of, Codebook, FeatureGroup, StrategyFeature, StrategyId};
pub use metrics::{multilabel_f1, multilabel_micro_f1, Counts};
