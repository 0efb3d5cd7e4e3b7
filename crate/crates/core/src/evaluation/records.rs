use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{BinaryOutcome, Conversation};
use crate::encoding::{clip_middle, render_plain, render_windowed, EncodedInput, InputSource, Tokenizer};
use crate::session::{
    extract_session_features, predict_outcome_via_llm, render_for_llm, summarize_both, textualize, vectorize,
    CachedClient, LlmOptions, SessionFeatures,
};
use crate::{Error, Result};

/// Everything the grid needs about one session, precomputed once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub label: BinaryOutcome,
    /// Token count of the full plain rendering.
    pub tokens: usize,
    pub conv: String,
    pub utter: String,
    pub session: Option<SessionFeatures>,
    pub summary: Option<String>,
    pub stance: Option<String>,
    /// The LLM's zero-shot outcome on the plain rendering.
    pub llm_conv: Option<BinaryOutcome>,
    /// The LLM's zero-shot outcome on the marker rendering.
    pub llm_utter: Option<BinaryOutcome>,
}

impl InstanceRecord {
    /// Text for one input source, if available.
    pub fn text(&self, source: InputSource) -> Result<Option<String>> {
        Ok(match source {
            InputSource::Conv => Some(self.conv.clone()),
            InputSource::Utter => Some(self.utter.clone()),
            InputSource::Session => self.session.as_ref().map(textualize).transpose()?,
            InputSource::Summary => self.summary.clone(),
            InputSource::Stance => self.stance.clone(),
        })
    }

    /// Multi-segment encoder input, each segment clipped to `max_tokens`.
    pub fn encoded(&self, sources: &[InputSource], max_tokens: usize, tokenizer: &Tokenizer) -> Result<Option<EncodedInput>> {
        let mut out: Option<EncodedInput> = None;
        for &src in sources {
            let Some(text) = self.text(src)? else { return Ok(None) };
            let text = clip_middle(&text, max_tokens, tokenizer);
            out = Some(match out {
                None => EncodedInput::single(&self.id, text, src)?,
                Some(x) => x.with_segment(text, src)?,
            });
        }
        Ok(out)
    }

    pub fn vector(&self) -> Result<Option<Vec<f64>>> {
        self.session.as_ref().map(vectorize).transpose()
    }

    pub fn llm_answer(&self, source: InputSource) -> Option<BinaryOutcome> {
        match source {
            InputSource::Conv => self.llm_conv,
            InputSource::Utter => self.llm_utter,
            _ => None,
        }
    }
}

/// Records with the text renderings filled in and no LLM outputs.
pub fn base_records(conversations: &[Conversation], k: usize) -> Result<Vec<InstanceRecord>> {
    let tokenizer = Tokenizer::default();
    conversations
        .iter()
        .map(|c| {
            Ok(InstanceRecord {
                id: c.session_id.clone(),
                label: c.label()?,
                tokens: tokenizer.count(&render_plain(&c.turns)?),
                conv: render_windowed(c, k, false)?,
                utter: render_windowed(c, k, true)?,
                session: None,
                summary: None,
                stance: None,
                llm_conv: None,
                llm_utter: None,
            })
        })
        .collect()
}

/// LLM outputs for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmOutputs {
    pub session: SessionFeatures,
    pub summary: String,
    pub stance: String,
    pub llm_conv: BinaryOutcome,
    pub llm_utter: BinaryOutcome,
}

/// Run every LLM step for every conversation. Sessions that fail because
/// the cache is cold while offline are collected and reported together.
pub fn extract_all(
    conversations: &[Conversation],
    client: &CachedClient<'_>,
    opts: &LlmOptions,
) -> Result<BTreeMap<String, LlmOutputs>> {
    let results: Vec<(String, Result<LlmOutputs>)> = conversations
        .par_iter()
        .map(|c| {
            let run = || -> Result<LlmOutputs> {
                let plain = render_for_llm(c, false, opts)?;
                let marked = render_for_llm(c, true, opts)?;
                let pair = summarize_both(&plain, client, opts)?;
                Ok(LlmOutputs {
                    session: extract_session_features(&plain, client, opts)?,
                    summary: pair.plain,
                    stance: pair.stance,
                    llm_conv: predict_outcome_via_llm(&plain, client, opts)?,
                    llm_utter: predict_outcome_via_llm(&marked, client, opts)?,
                })
            };
            (c.session_id.clone(), run())
        })
        .collect();
    let mut out = BTreeMap::new();
    let mut offline = Vec::new();
    for (id, r) in results {
        match r {
            Ok(v) => {
                out.insert(id, v);
            }
            Err(Error::Offline(_)) => offline.push(id),
            Err(e) => return Err(e),
        }
    }
    if !offline.is_empty() {
        let shown: Vec<&str> = offline.iter().take(10).map(String::as_str).collect();
        return Err(Error::Offline(format!(
            "{} sessions have no cached LLM responses: {}{}",
            offline.len(),
            shown.join(", "),
            if offline.len() > shown.len() { ", ..." } else { "" }
        )));
    }
    Ok(out)
}

/// Attach LLM outputs to records by session id.
pub fn attach_llm(records: &mut [InstanceRecord], outputs: &BTreeMap<String, LlmOutputs>) {
    for r in records {
        if let Some(o) = outputs.get(&r.id) {
            r.session = Some(o.session.clone());
            r.summary = Some(o.summary.clone());
            r.stance = Some(o.stance.clone());
            r.llm_conv = Some(o.llm_conv);
            r.llm_utter = Some(o.llm_utter);
        }
    }
}
