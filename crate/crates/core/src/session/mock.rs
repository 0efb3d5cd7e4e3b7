//! Deterministic chat client backed by synthetic latents.

use std::collections::HashMap;

use super::client::{ChatClient, ChatRequest};
use super::features::Answer;
use super::schema::QuestionId;
use super::schema::{question_schema, OUTCOME_PROMPT, PLAIN_SUMMARY_PROMPT, STANCE_SUMMARY_PROMPT, SYSTEM_PREFIX};
use crate::corpus::{Conversation, SessionLatents};
use crate::encoding::{render_plain, GAP_LINE};
use crate::utterance::FeatureGroup;
use crate::util::unit_hash;
use crate::{Error, Result};

/// Answers every prompt from the planted latents of the session whose
/// transcript appears in the system message. With `corruption_rate > 0`, a
/// hash-selected share of question answers is replaced by another valid
/// choice.
pub struct MockLlm {
    model: String,
    corruption_rate: f64,
    seed: u64,
    sessions: Vec<MockSession>,
    by_first_line: HashMap<String, Vec<usize>>,
}

struct MockSession {
    lines: Vec<String>,
    latents: SessionLatents,
}

impl MockLlm {
    pub fn new(conversations: &[Conversation], latents: &[SessionLatents], corruption_rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&corruption_rate) {
            return Err(Error::Config(format!("corruption rate {corruption_rate} is not a probability")));
        }
        let by_id: HashMap<&str, &SessionLatents> = latents.iter().map(|l| (l.session_id.as_str(), l)).collect();
        let mut sessions = Vec::with_capacity(conversations.len());
        let mut by_first_line: HashMap<String, Vec<usize>> = HashMap::new();
        for conv in conversations {
            let lat = by_id.get(conv.session_id.as_str()).ok_or_else(|| {
                Error::Validation(format!("no latents for session {}", conv.session_id))
            })?;
            let lines: Vec<String> = render_plain(&conv.turns)?.lines().map(String::from).collect();
            by_first_line.entry(lines[0].clone()).or_default().push(sessions.len());
            sessions.push(MockSession { lines, latents: (*lat).clone() });
        }
        Ok(MockLlm { model: "mock-llm".into(), corruption_rate, seed, sessions, by_first_line })
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    fn identify(&self, system: &str) -> Result<&SessionLatents> {
        let text = system.strip_prefix(SYSTEM_PREFIX).ok_or_else(|| {
            Error::Client("mock: system message lacks the expected prefix".into())
        })?;
        let lines: Vec<String> = text
            .lines()
            .filter(|l| *l != GAP_LINE)
            .map(strip_markers)
            .collect();
        let first = lines.first().ok_or_else(|| Error::Client("mock: empty conversation".into()))?;
        let candidates = self.by_first_line.get(first).map(Vec::as_slice).unwrap_or(&[]);
        let matches: Vec<&MockSession> = candidates
            .iter()
            .map(|i| &self.sessions[*i])
            .filter(|s| is_subsequence(&lines, &s.lines))
            .collect();
        match matches.as_slice() {
            [one] => Ok(&one.latents),
            [] => Err(Error::Client("mock: conversation does not match any known session".into())),
            many => {
                let first = &many[0].latents;
                if many.iter().all(|m| m.latents.session == first.session && m.latents.stance_negative == first.stance_negative) {
                    Ok(first)
                } else {
                    Err(Error::Client("mock: conversation matches several sessions".into()))
                }
            }
        }
    }

    fn corrupt(&self, key: &str) -> Option<f64> {
        if self.corruption_rate == 0.0 {
            return None;
        }
        let u = unit_hash(self.seed, key);
        (u < self.corruption_rate).then(|| unit_hash(self.seed ^ 0x5bd1_e995, key))
    }
}

/// Summaries mention who is involved and what happened, but not how the help
/// seeker reacted, so they carry less than the full session answers.
fn plain_summary(latents: &SessionLatents) -> String {
    let f = &latents.session;
    let get = |q: QuestionId| f.answer(q).choices().join(" and ").to_lowercase();
    format!(
        "The help seeker, a {}, talks about {} abuse involving {}. They came for {} and the counselor responds with {}.",
        get(QuestionId::HelpSeekerIdentity),
        get(QuestionId::AbuseType),
        get(QuestionId::PerpetratorIdentity),
        get(QuestionId::HelpSeekerNeeds),
        get(QuestionId::CounselorResponse),
    )
}

fn strip_markers(line: &str) -> String {
    let mut out = line.to_string();
    for g in FeatureGroup::ALL {
        out = out.replace(&format!("{} ", g.marker()), "");
    }
    out
}

fn is_subsequence(needle: &[String], haystack: &[String]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

impl ChatClient for MockLlm {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let latents = self.identify(&request.system)?;
        let user = request.user.as_str();
        if user == PLAIN_SUMMARY_PROMPT {
            return Ok(plain_summary(latents));
        }
        if user == STANCE_SUMMARY_PROMPT {
            let stance = if latents.stance_negative {
                "The help seeker would not have felt more positive after the conversation, remaining upset and unconvinced."
            } else {
                "The help seeker would have felt more positive after the conversation, ending calmer and reassured."
            };
            return Ok(format!("{} {stance}", plain_summary(latents)));
        }
        if user.starts_with(OUTCOME_PROMPT) {
            return Ok(if latents.stance_negative { "0" } else { "1" }.to_string());
        }
        let schema = question_schema()
            .iter()
            .find(|s| user.starts_with(&s.prompt_text))
            .ok_or_else(|| Error::Client("mock: unrecognised prompt".into()))?;
        let planted = match latents.session.answer(schema.question_id) {
            Answer::Chosen(c) => c.clone(),
            Answer::Unanswerable => return Ok("I cannot tell from the conversation.".into()),
        };
        let key = format!("{}/{}", latents.session_id, schema.question_id);
        if let Some(u) = self.corrupt(&key) {
            let others: Vec<&String> = schema.choices.iter().filter(|c| !planted.contains(c)).collect();
            if !others.is_empty() {
                let pick = ((u * others.len() as f64) as usize).min(others.len() - 1);
                return Ok(others[pick].clone());
            }
        }
        Ok(planted.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_generate, SynthSpec};
    use crate::session::client::CachedClient;
    use crate::session::extract::{extract_session_features, predict_outcome_via_llm, render_for_llm, LlmOptions};

    #[test]
    fn exact_planted_answers_round_trip() {
        let (convs, lats) = synth_generate(&SynthSpec { n_sessions: 12, seed: 2, ..Default::default() }).unwrap();
        let mock = MockLlm::new(&convs, &lats, 0.0, 0).unwrap();
        let client = CachedClient::new(&mock, None);
        let opts = LlmOptions::default();
        for (c, l) in convs.iter().zip(&lats) {
            for markers in [false, true] {
                let text = render_for_llm(c, markers, &opts).unwrap();
                let f = extract_session_features(&text, &client, &opts).unwrap();
                assert_eq!(f.answers, l.session.answers, "{}", c.session_id);
            }
            let text = render_for_llm(c, false, &opts).unwrap();
            let out = predict_outcome_via_llm(&text, &client, &opts).unwrap();
            assert_eq!(out.is_negative(), l.stance_negative);
        }
    }

    #[test]
    fn truncated_long_sessions_are_still_identified() {
        let spec = SynthSpec { n_sessions: 6, seed: 4, ..Default::default() }.long_profile();
        let (convs, lats) = synth_generate(&spec).unwrap();
        let mock = MockLlm::new(&convs, &lats, 0.0, 0).unwrap();
        let client = CachedClient::new(&mock, None);
        let opts = LlmOptions { budget: 600, ..Default::default() };
        for (c, l) in convs.iter().zip(&lats) {
            let text = render_for_llm(c, true, &opts).unwrap();
            let f = extract_session_features(&text, &client, &opts).unwrap();
            assert_eq!(f.answers, l.session.answers);
        }
    }

    #[test]
    fn corruption_changes_some_answers() {
        let (convs, lats) = synth_generate(&SynthSpec { n_sessions: 10, seed: 9, ..Default::default() }).unwrap();
        let mock = MockLlm::new(&convs, &lats, 0.5, 1).unwrap();
        let client = CachedClient::new(&mock, None);
        let opts = LlmOptions::default();
        let mut differing = 0;
        for (c, l) in convs.iter().zip(&lats) {
            let f = extract_session_features(&render_for_llm(c, false, &opts).unwrap(), &client, &opts).unwrap();
            differing += f.answers.iter().filter(|(q, a)| l.session.answer(**q) != *a).count();
        }
        assert!(differing > 20 && differing < 100, "{differing}");
    }
}
