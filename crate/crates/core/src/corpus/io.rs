use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{Conversation, Outcome, SessionLatents, Source, Turn};
use crate::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConversation {
    session_id: String,
    source: Source,
    outcome: Option<RawOutcome>,
    turns: Vec<Turn>,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawOutcome {
    Negative,
    Neutral,
    Positive,
    PreferNotToAnswer,
}

/// Load a JSONL corpus. Sessions answered "prefer not to answer" are dropped.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Conversation>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_corpus(&text, path)
}

pub fn parse_corpus(text: &str, origin: &Path) -> Result<Vec<Conversation>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: PathBuf::from(origin),
            line: i + 1,
            message,
        };
        let raw: RawConversation =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if !seen.insert(raw.session_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate session_id {:?} (line {})",
                raw.session_id,
                i + 1
            )));
        }
        let outcome = match raw.outcome {
            Some(RawOutcome::PreferNotToAnswer) => continue,
            Some(RawOutcome::Negative) => Some(Outcome::Negative),
            Some(RawOutcome::Neutral) => Some(Outcome::Neutral),
            Some(RawOutcome::Positive) => Some(Outcome::Positive),
            None => None,
        };
        let conv = Conversation {
            session_id: raw.session_id,
            source: raw.source,
            outcome,
            turns: raw.turns,
        };
        conv.validate().map_err(|e| parse_err(e.to_string()))?;
        out.push(conv);
    }
    Ok(out)
}

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn write_corpus(path: impl AsRef<Path>, conversations: &[Conversation]) -> Result<()> {
    write_jsonl(path.as_ref(), conversations)
}

pub fn write_latents(path: impl AsRef<Path>, latents: &[SessionLatents]) -> Result<()> {
    write_jsonl(path.as_ref(), latents)
}

pub fn load_latents(path: impl AsRef<Path>) -> Result<Vec<SessionLatents>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
