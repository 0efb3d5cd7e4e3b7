//! Outcome prediction for crisis-counseling conversations.
//!
//! The crate fuses three views of a conversation to predict whether the help
//! seeker left feeling more positive:
//!
//! * the raw transcript, windowed to the first and last `k` turns,
//! * counseling-strategy markers on counselor turns, drawn from an 18-feature
//!   codebook grouped into four families,
//! * session-level answers extracted by an LLM from 12 constrained-choice
//!   questions, plus free-form plain and stance summaries.
//!
//! A synthetic generator with planted latents stands in for private data and
//! doubles as the oracle for the end-to-end tests.

pub mod corpus;
pub mod encoding;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod interpret;
pub mod nn;
pub mod outcome;
pub mod session;
pub mod tabular;
pub mod utterance;

pub use error::{Error, ErrorKind, Result};

pub(crate) mod util;
