use std::path::{Path, PathBuf};

use counsel_core::corpus::SynthSpec;
use counsel_core::evaluation::DEFAULT_BUCKET_EDGES;
use counsel_core::interpret::{UnitKind, DEFAULT_THETA};
use counsel_core::outcome::TextClassifierConfig;
use counsel_core::session::DEFAULT_LLM_BUDGET;
use counsel_core::utterance::{Granularity, UtteranceConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything one run needs. Loaded from TOML, overridden by flags, and
/// written back out resolved so any artifact can be reproduced from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Run seed. Copied into `synth.seed`, `model.seed` and every other
    /// seeded step when the config is resolved.
    pub seed: u64,
    pub paths: Paths,
    pub window: WindowConfig,
    pub llm: LlmSettings,
    pub grid: GridSection,
    pub train: TrainSection,
    pub ensemble: EnsembleSection,
    pub explain: ExplainSection,
    pub cluster: ClusterSection,
    pub synth: SynthSpec,
    pub model: TextClassifierConfig,
    pub annotate: AnnotateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            paths: Paths::default(),
            window: WindowConfig::default(),
            llm: LlmSettings::default(),
            grid: GridSection::default(),
            train: TrainSection::default(),
            ensemble: EnsembleSection::default(),
            explain: ExplainSection::default(),
            cluster: ClusterSection::default(),
            synth: SynthSpec::default(),
            model: TextClassifierConfig::desk(0),
            annotate: AnnotateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    /// Generator latents, needed by the mock LLM. Defaults to
    /// `latents.jsonl` next to the corpus.
    pub latents: Option<PathBuf>,
    /// LLM outputs written by `extract`. When unset, commands that need
    /// them run extraction through the cache.
    pub features: Option<PathBuf>,
    pub cache: PathBuf,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: "corpus.jsonl".into(),
            latents: None,
            features: None,
            cache: "llm-cache".into(),
            out: "out".into(),
        }
    }
}

impl Paths {
    pub fn latents_path(&self) -> PathBuf {
        self.latents.clone().unwrap_or_else(|| self.corpus.with_file_name("latents.jsonl"))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.cache);
        fix(&mut self.out);
        if let Some(p) = &mut self.latents {
            fix(p);
        }
        if let Some(p) = &mut self.features {
            fix(p);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Turns kept from each end of a conversation for classifier input.
    pub k: usize,
    /// Token budget of the text shown to the LLM.
    pub llm_budget: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { k: 4, llm_budget: DEFAULT_LLM_BUDGET }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    /// Answers from the generator latents; needs the latents file.
    Mock,
    /// Any endpoint speaking the OpenAI chat-completions protocol.
    Openai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub provider: Provider,
    pub model: String,
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub requests_per_minute: u32,
    /// Cache only; a miss is an error and no request leaves the process.
    pub offline: bool,
    pub retries: usize,
    pub timeout_secs: u64,
    /// Share of mock answers replaced by another valid choice.
    pub corruption_rate: f64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            provider: Provider::Openai,
            model: "gpt-3.5-turbo".into(),
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            requests_per_minute: 60,
            offline: false,
            retries: 3,
            timeout_secs: 60,
            corruption_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Row ids to run; empty runs the whole grid.
    pub rows: Vec<String>,
    pub folds: usize,
    pub oof_folds: usize,
    pub bucket_edges: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { rows: Vec::new(), folds: 10, oof_folds: 5, bucket_edges: DEFAULT_BUCKET_EDGES.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Grid row whose input and model to train.
    pub row: String,
    pub dev_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { row: "utter".into(), dev_fraction: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub row: String,
    pub dev_fraction: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection { row: "ensemble".into(), dev_fraction: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    /// Sessions to explain. Empty picks the first negative session.
    pub sessions: Vec<String>,
    /// Encoder rows whose predictions are explained side by side.
    pub rows: Vec<String>,
    pub unit: UnitKind,
    pub max_evals: usize,
    pub dev_fraction: f64,
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection {
            sessions: Vec::new(),
            rows: vec!["conv".into(), "utter".into()],
            unit: UnitKind::Phrase,
            max_evals: 4096,
            dev_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    /// Candidate cluster counts for the elbow rule.
    pub ks: Vec<usize>,
    /// Fixed k; skips the elbow rule when set.
    pub k: Option<usize>,
    pub theta: f64,
    pub embed_dim: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection { ks: (1..=10).collect(), k: None, theta: DEFAULT_THETA, embed_dim: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateSection {
    /// Corpus whose counselor turns carry human strategy groups.
    pub labeled: Option<PathBuf>,
    /// Corpus to label weakly.
    pub unlabeled: Option<PathBuf>,
    pub granularity: Granularity,
    pub utterance: UtteranceConfig,
}

impl Default for AnnotateSection {
    fn default() -> Self {
        AnnotateSection {
            labeled: None,
            unlabeled: None,
            granularity: Granularity::Grouped,
            utterance: UtteranceConfig::default(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub offline: bool,
    pub mock: bool,
}

impl RunConfig {
    /// Read a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("reading {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            cfg.paths.rebase(dir);
        }
        Ok(cfg)
    }

    /// Apply flag overrides and propagate the run seed.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self, CliError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.paths.out = out.clone();
        }
        if o.offline {
            self.llm.offline = true;
        }
        if o.mock {
            self.llm.provider = Provider::Mock;
            if self.llm.model == LlmSettings::default().model {
                self.llm.model = "mock-llm".into();
            }
        }
        self.synth.seed = self.seed;
        self.model.seed = self.seed;
        self.annotate.utterance.train.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(CliError::from)?;
        self.annotate.utterance.validate().map_err(CliError::from)?;
        if self.window.llm_budget == 0 {
            return Err(CliError::config("window.llm_budget must be positive"));
        }
        if self.llm.requests_per_minute == 0 {
            return Err(CliError::config("llm.requests_per_minute must be positive"));
        }
        for f in [self.train.dev_fraction, self.ensemble.dev_fraction, self.explain.dev_fraction] {
            if !(0.0..1.0).contains(&f) {
                return Err(CliError::config(format!("dev fraction {f} must lie in [0, 1)")));
            }
        }
        if self.cluster.ks.is_empty() && self.cluster.k.is_none() {
            return Err(CliError::config("cluster.ks is empty and no cluster.k is set"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::config(format!("serializing the resolved config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let cfg = RunConfig::default().resolve(&Overrides { seed: Some(7), mock: true, ..Default::default() }).unwrap();
        assert_eq!(cfg.synth.seed, 7);
        assert_eq!(cfg.model.seed, 7);
        assert_eq!(cfg.llm.provider, Provider::Mock);
        let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[llm]\nprovider = \"other\"").is_err());
        // nested library sections are checked too
        assert!(toml::from_str::<RunConfig>("[synth]\nn_session = 10").is_err());
        assert!(toml::from_str::<RunConfig>("[model]\nepoch = 2").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[paths]\ncorpus = \"data/c.jsonl\"\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.paths.corpus, dir.path().join("data/c.jsonl"));
        assert_eq!(cfg.paths.latents_path(), dir.path().join("data/latents.jsonl"));
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut cfg = RunConfig::default();
        cfg.llm.requests_per_minute = 0;
        assert!(cfg.resolve(&Overrides::default()).is_err());
    }
}
