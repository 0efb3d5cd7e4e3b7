//! Conversations, outcomes, ingestion, splitting and the synthetic generator.

mod io;
mod split;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::utterance::FeatureGroup;
use crate::{Error, Result};

pub use io::{load_corpus, load_latents, parse_corpus, write_corpus, write_latents};
pub use split::{make_folds, make_folds_labeled, split_dataset, DatasetSplit, SplitRatios};
pub use synth::{synth_generate, Channel, Degradation, Leakage, OutcomeRule, SessionLatents, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    HelpSeeker,
    Counselor,
}

impl Speaker {
    pub fn label(self) -> &'static str {
        match self {
            Speaker::HelpSeeker => "Help seeker",
            Speaker::Counselor => "Counselor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    /// `None` means the turn was never annotated; `Some(vec![])` means it was
    /// annotated and no strategy applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance_features: Option<Vec<FeatureGroup>>,
}

impl Turn {
    pub fn help_seeker(text: impl Into<String>) -> Self {
        Turn {
            speaker: Speaker::HelpSeeker,
            text: text.into(),
            utterance_features: None,
        }
    }

    pub fn counselor(text: impl Into<String>) -> Self {
        Turn {
            speaker: Speaker::Counselor,
            text: text.into(),
            utterance_features: None,
        }
    }

    pub fn with_features(mut self, groups: impl IntoIterator<Item = FeatureGroup>) -> Self {
        let mut groups: Vec<FeatureGroup> = groups.into_iter().collect();
        groups.sort();
        groups.dedup();
        self.utterance_features = Some(groups);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::Validation("turn text is empty".into()));
        }
        if self.speaker == Speaker::HelpSeeker && self.utterance_features.is_some() {
            return Err(Error::Validation(
                "utterance features are only allowed on counselor turns".into(),
            ));
        }
        if let Some(g) = FeatureGroup::ALL.iter().find(|g| self.text.contains(&g.marker())) {
            return Err(Error::Validation(format!(
                "turn text contains the reserved marker {}",
                g.marker()
            )));
        }
        Ok(())
    }
}

/// Post-conversation survey answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Negative,
    Neutral,
    Positive,
}

impl Outcome {
    pub fn collapse(self) -> BinaryOutcome {
        match self {
            Outcome::Negative => BinaryOutcome::Negative,
            Outcome::Neutral | Outcome::Positive => BinaryOutcome::NonNegative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryOutcome {
    Negative,
    NonNegative,
}

impl BinaryOutcome {
    pub fn is_negative(self) -> bool {
        self == BinaryOutcome::Negative
    }

    pub fn from_negative(negative: bool) -> Self {
        if negative {
            BinaryOutcome::Negative
        } else {
            BinaryOutcome::NonNegative
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryOutcome::Negative => "negative",
            BinaryOutcome::NonNegative => "non_negative",
        }
    }
}

impl fmt::Display for BinaryOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Collapse a survey label to the binary task. Also accepts the binary labels
/// themselves so the mapping is idempotent.
pub fn collapse_outcome(label: &str) -> Result<BinaryOutcome> {
    match label {
        "negative" => Ok(BinaryOutcome::Negative),
        "neutral" | "positive" | "non_negative" => Ok(BinaryOutcome::NonNegative),
        other => Err(Error::Validation(format!("unknown outcome label {other:?}"))),
    }
}

impl FromStr for BinaryOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        collapse_outcome(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    DSmall,
    DLarge,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub session_id: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn validate(&self) -> Result<()> {
        if self.session_id.is_empty() {
            return Err(Error::Validation("empty session_id".into()));
        }
        if self.turns.is_empty() {
            return Err(Error::Validation(format!("session {} has no turns", self.session_id)));
        }
        for (i, t) in self.turns.iter().enumerate() {
            t.validate().map_err(|e| {
                Error::Validation(format!("session {} turn {}: {e}", self.session_id, i + 1))
            })?;
        }
        Ok(())
    }

    pub fn binary_outcome(&self) -> Option<BinaryOutcome> {
        self.outcome.map(Outcome::collapse)
    }

    /// Binary label, or an error naming the session when the outcome is absent.
    pub fn label(&self) -> Result<BinaryOutcome> {
        self.binary_outcome()
            .ok_or_else(|| Error::Validation(format!("session {} has no outcome", self.session_id)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapse_maps_three_classes() {
        assert_eq!(collapse_outcome("neutral").unwrap(), BinaryOutcome::NonNegative);
        assert_eq!(collapse_outcome("negative").unwrap(), BinaryOutcome::Negative);
        assert_eq!(collapse_outcome("positive").unwrap(), BinaryOutcome::NonNegative);
        assert!(collapse_outcome("meh").is_err());
    }

    #[test]
    fn collapse_is_idempotent() {
        for label in ["negative", "neutral", "positive"] {
            let once = collapse_outcome(label).unwrap();
            assert_eq!(collapse_outcome(once.as_str()).unwrap(), once);
        }
    }

    #[test]
    fn help_seeker_turns_cannot_carry_features() {
        let t = Turn::help_seeker("hi").with_features([FeatureGroup::Resources]);
        assert!(t.validate().is_err());
        assert!(Turn::counselor("hi").with_features([]).validate().is_ok());
        assert!(Turn::counselor("   ").validate().is_err());
    }

    #[test]
    fn marker_literals_are_reserved() {
        assert!(Turn::help_seeker("look <Resources> here").validate().is_err());
    }
}
