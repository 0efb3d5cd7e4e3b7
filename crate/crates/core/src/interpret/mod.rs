//! Attribution and summary-sentence analysis: Shapley values over masked
//! text units, sentence splitting, sentence embeddings, k-means with elbow
//! selection, and a 2-D projection for plotting.

mod cluster;
mod embed;
mod project;
mod sentences;
mod shapley;

pub use cluster::{choose_k, cluster_sentences, distortion_sweep, kmeans, ClusterResult, KMeansOptions, DEFAULT_THETA};
pub use embed::{HashingEmbedder, SentenceEmbedder};
pub use project::project_2d;
pub use sentences::split_sentences;
pub use shapley::{
    exact_shapley, kernel_shapley, phrase_attribution, text_units, AttributionMode, AttributionOptions,
    AttributionResult, AttributionUnit, TextUnit, UnitKind, MAX_EXACT_FEATURES,
};
