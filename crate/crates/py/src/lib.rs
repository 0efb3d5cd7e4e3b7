//! Python bindings. Structured values cross the boundary as JSON, so a
//! Python dict has the same shape as the corresponding serde type.

use std::collections::BTreeMap;

use counsel_core::corpus::{self, BinaryOutcome, Conversation, SessionLatents, SynthSpec};
use counsel_core::evaluation::{self, attach_llm, base_records, extract_all, GridConfig, LlmOutputs};
use counsel_core::interpret;
use counsel_core::session::{self, CachedClient, LlmOptions, MockLlm, SessionFeatures};
use counsel_core::ErrorKind;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(counsel, CounselError, PyException);
create_exception!(counsel, ConfigError, CounselError);
create_exception!(counsel, DataError, CounselError);
create_exception!(counsel, ClientError, CounselError);

fn err(e: counsel_core::Error) -> PyErr {
    match e.kind() {
        ErrorKind::Config => ConfigError::new_err(e.to_string()),
        ErrorKind::Data => DataError::new_err(e.to_string()),
        ErrorKind::Client => ClientError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| DataError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| ConfigError::new_err(e.to_string()))
}

fn outcome(label: &str) -> PyResult<BinaryOutcome> {
    match label {
        "negative" => Ok(BinaryOutcome::Negative),
        "non_negative" => Ok(BinaryOutcome::NonNegative),
        other => Err(ConfigError::new_err(format!("unknown outcome {other:?}; use negative or non_negative"))),
    }
}

/// A set of sessions, optionally with the generator latents behind them.
#[pyclass(module = "counsel")]
struct Corpus {
    conversations: Vec<Conversation>,
    latents: Option<Vec<SessionLatents>>,
}

#[pymethods]
impl Corpus {
    /// Generate a synthetic corpus. `spec` holds generator settings; missing
    /// keys take their defaults.
    #[staticmethod]
    #[pyo3(signature = (spec=None))]
    fn generate(spec: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let spec: SynthSpec = match spec {
            Some(s) => from_py(s)?,
            None => SynthSpec::default(),
        };
        let (conversations, latents) = corpus::synth_generate(&spec).map_err(err)?;
        Ok(Corpus { conversations, latents: Some(latents) })
    }

    #[staticmethod]
    #[pyo3(signature = (path, latents=None))]
    fn load(path: &str, latents: Option<&str>) -> PyResult<Self> {
        let conversations = corpus::load_corpus(path).map_err(err)?;
        let latents = latents.map(corpus::load_latents).transpose().map_err(err)?;
        Ok(Corpus { conversations, latents })
    }

    #[pyo3(signature = (path, latents=None))]
    fn save(&self, path: &str, latents: Option<&str>) -> PyResult<()> {
        corpus::write_corpus(path, &self.conversations).map_err(err)?;
        match (latents, &self.latents) {
            (Some(p), Some(l)) => corpus::write_latents(p, l).map_err(err),
            (Some(_), None) => Err(ConfigError::new_err("this corpus has no latents")),
            (None, _) => Ok(()),
        }
    }

    fn __len__(&self) -> usize {
        self.conversations.len()
    }

    fn session_ids(&self) -> Vec<String> {
        self.conversations.iter().map(|c| c.session_id.clone()).collect()
    }

    fn sessions<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.conversations)
    }

    /// Collapsed labels, `negative` or `non_negative`.
    fn labels(&self) -> PyResult<Vec<&'static str>> {
        self.conversations.iter().map(|c| Ok(c.label().map_err(err)?.as_str())).collect()
    }

    /// Session features, summaries and the zero-shot answer for every
    /// session, answered by the mock LLM built from the latents.
    #[pyo3(signature = (seed=0))]
    fn extract_mock<'py>(&self, py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.mock_outputs(seed)?)
    }

    /// Cross-validate grid rows and return the report. Rows that need LLM
    /// outputs use the mock LLM.
    #[pyo3(signature = (rows, config=None))]
    fn evaluate<'py>(&self, py: Python<'py>, rows: Vec<String>, config: Option<&Bound<'_, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
        let config: GridConfig = match config {
            Some(c) => from_py(c)?,
            None => GridConfig::default(),
        };
        let rows = evaluation::grid_rows(&rows).map_err(err)?;
        let mut records = base_records(&self.conversations, 4).map_err(err)?;
        if self.latents.is_some() {
            attach_llm(&mut records, &self.mock_outputs(config.seed)?);
        }
        let report = py.detach(|| evaluation::run_grid(&records, &rows, &config)).map_err(err)?;
        to_py(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("Corpus({} sessions, latents={})", self.conversations.len(), self.latents.is_some())
    }
}

impl Corpus {
    fn mock_outputs(&self, seed: u64) -> PyResult<BTreeMap<String, LlmOutputs>> {
        let latents = self.latents.as_ref().ok_or_else(|| ConfigError::new_err("the mock LLM needs latents"))?;
        let mock = MockLlm::new(&self.conversations, latents, 0.0, seed).map_err(err)?;
        let client = CachedClient::new(&mock, None);
        extract_all(&self.conversations, &client, &LlmOptions::default()).map_err(err)
    }
}

/// The twelve session questions with their answer choices.
#[pyfunction]
fn question_schema(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &session::question_schema())
}

/// One-hot vector of a session-feature record.
#[pyfunction]
fn vectorize(features: &Bound<'_, PyAny>) -> PyResult<Vec<f64>> {
    let f: SessionFeatures = from_py(features)?;
    session::vectorize(&f).map_err(err)
}

fn table_game(values: &[f64], n: usize) -> PyResult<impl Fn(&[bool]) -> f64 + Sync + '_> {
    if n >= usize::BITS as usize || values.len() != 1 << n {
        return Err(ConfigError::new_err(format!("need 2^{n} coalition values, got {}", values.len())));
    }
    Ok(move |mask: &[bool]| {
        let idx = mask.iter().enumerate().filter(|(_, b)| **b).fold(0usize, |acc, (i, _)| acc | 1 << i);
        values[idx]
    })
}

/// Exact Shapley values of a game given as a table of `2^n` coalition
/// values, indexed by bitmask with player `i` at bit `i`.
#[pyfunction]
fn exact_shapley(values: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
    interpret::exact_shapley(table_game(&values, n)?, n).map_err(err)
}

/// Kernel SHAP estimate for the same table game; exact when `2^n` fits
/// within `max_evals`.
#[pyfunction]
#[pyo3(signature = (values, n, max_evals=4096, seed=0))]
fn kernel_shapley(values: Vec<f64>, n: usize, max_evals: usize, seed: u64) -> PyResult<Vec<f64>> {
    Ok(interpret::kernel_shapley(table_game(&values, n)?, n, max_evals, seed).map_err(err)?.0)
}

/// Macro F1 and negative-class recall of label lists.
#[pyfunction]
fn score(predicted: Vec<String>, gold: Vec<String>) -> PyResult<(f64, f64)> {
    let p = predicted.iter().map(|s| outcome(s)).collect::<PyResult<Vec<_>>>()?;
    let g = gold.iter().map(|s| outcome(s)).collect::<PyResult<Vec<_>>>()?;
    evaluation::score(&p, &g).map_err(err)
}

/// Ids of every experiment-grid row.
#[pyfunction]
fn grid_rows() -> Vec<String> {
    evaluation::default_grid().into_iter().map(|r| r.id).collect()
}

/// Run the command-line tool in-process and return its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv = std::iter::once("counsel".to_string()).chain(args);
    py.detach(|| counsel_cli::run(argv))
}

#[pymodule]
pub fn counsel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_function(wrap_pyfunction!(question_schema, m)?)?;
    m.add_function(wrap_pyfunction!(vectorize, m)?)?;
    m.add_function(wrap_pyfunction!(exact_shapley, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_shapley, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(grid_rows, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    let py = m.py();
    m.add("CounselError", py.get_type::<CounselError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("ClientError", py.get_type::<ClientError>())?;
    Ok(())
}
