//! The counseling-strategy codebook: 18 fine-grained features in four groups.
//!
//! Row order of the shipped data file is the canonical order used for
//! serialization, marker emission and reporting.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

const CODEBOOK_JSON: &str = include_str!("../../data/codebook.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureGroup {
    EmotionalAttending,
    FactRelated,
    ProblemSolving,
    Resources,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::EmotionalAttending,
        FeatureGroup::FactRelated,
        FeatureGroup::ProblemSolving,
        FeatureGroup::Resources,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::EmotionalAttending => "Emotional Attending",
            FeatureGroup::FactRelated => "Fact Related",
            FeatureGroup::ProblemSolving => "Problem Solving",
            FeatureGroup::Resources => "Resources",
        }
    }

    /// Marker token injected in front of counselor text, e.g. `<Resources>`.
    pub fn marker(self) -> String {
        format!("<{}>", self.name())
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn members(self) -> Vec<StrategyId> {
        codebook()
            .features()
            .iter()
            .filter(|f| f.group == self)
            .map(|f| f.id)
            .collect()
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown feature group {s:?}")))
    }
}

impl Serialize for FeatureGroup {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for FeatureGroup {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Index of a fine-grained strategy feature in codebook row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrategyId(u8);

impl StrategyId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Option<StrategyId> {
        (i < codebook().len()).then_some(StrategyId(i as u8))
    }

    pub fn feature(self) -> &'static StrategyFeature {
        &codebook().features()[self.index()]
    }

    pub fn name(self) -> &'static str {
        &self.feature().name
    }

    pub fn group(self) -> FeatureGroup {
        self.feature().group
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        codebook()
            .find(s)
            .ok_or_else(|| Error::Validation(format!("unknown strategy feature {s:?}")))
    }
}

impl Serialize for StrategyId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for StrategyId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyFeature {
    #[serde(skip)]
    pub id: StrategyId,
    pub name: String,
    pub group: FeatureGroup,
    pub description: String,
}

#[derive(Debug)]
pub struct Codebook {
    version: String,
    features: Vec<StrategyFeature>,
}

impl Codebook {
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn features(&self) -> &[StrategyFeature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<StrategyId> {
        self.features.iter().find(|f| f.name == name).map(|f| f.id)
    }

    pub fn ids(&self) -> impl Iterator<Item = StrategyId> + '_ {
        self.features.iter().map(|f| f.id)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            version: &'a str,
            features: &'a [StrategyFeature],
        }
        serde_json::to_string_pretty(&Out {
            version: &self.version,
            features: &self.features,
        })
        .expect("codebook serializes")
    }
}

fn parse_codebook(json: &str) -> Result<Codebook> {
    #[derive(Deserialize)]
    struct RawFeature {
        name: String,
        group: FeatureGroup,
        description: String,
    }
    #[derive(Deserialize)]
    struct Raw {
        version: String,
        features: Vec<RawFeature>,
    }
    let raw: Raw = serde_json::from_str(json)?;
    let mut features = Vec::with_capacity(raw.features.len());
    for (i, f) in raw.features.into_iter().enumerate() {
        if features.iter().any(|g: &StrategyFeature| g.name == f.name) {
            return Err(Error::Validation(format!("duplicate feature {:?}", f.name)));
        }
        features.push(StrategyFeature {
            id: StrategyId(i as u8),
            name: f.name,
            group: f.group,
            description: f.description,
        });
    }
    // canonical order requires groups to be contiguous and in enum order
    if features.windows(2).any(|w| w[0].group > w[1].group) {
        return Err(Error::Validation("codebook rows must be ordered by group".into()));
    }
    Ok(Codebook {
        version: raw.version,
        features,
    })
}

/// The shipped codebook.
pub fn codebook() -> &'static Codebook {
    static CODEBOOK: OnceLock<Codebook> = OnceLock::new();
    CODEBOOK.get_or_init(|| parse_codebook(CODEBOOK_JSON).expect("shipped codebook is valid"))
}

pub fn group_of(name: &str) -> Result<FeatureGroup> {
    name.parse::<StrategyId>().map(StrategyId::group)
}
