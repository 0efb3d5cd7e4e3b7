use serde::{Deserialize, Serialize};

use super::client::{CachedClient, ChatRequest};
use super::features::{Answer, Provenance, SessionFeatures};
use super::parse::{parse_binary, parse_choice};
use super::schema::{
    question_schema, QuestionSchema, OUTCOME_PROMPT, PLAIN_SUMMARY_PROMPT, STANCE_SUMMARY_PROMPT,
    SYSTEM_PREFIX,
};
use crate::corpus::{BinaryOutcome, Conversation};
use crate::encoding::{inject_utterance_markers, render_plain, truncate_for_llm, Tokenizer};
use crate::{Error, Result};

/// Context window of the hosted chat model.
pub const DEFAULT_LLM_BUDGET: usize = 4096;

const CLARIFICATIONS: [&str; 3] = [
    "Answer with only the category names exactly as listed, nothing else.",
    "Reply using only the exact category text from the list.",
    "Respond with category names copied verbatim from the list and no other words.",
];

const BINARY_CLARIFICATIONS: [&str; 3] = [
    "Reply with the single character 0 or 1.",
    "Only answer 0 or 1.",
    "Your entire answer must be 0 or 1.",
];

#[derive(Debug, Clone)]
pub struct LlmOptions {
    pub budget: usize,
    /// Retries after a parse failure.
    pub retries: usize,
    pub temperature: f64,
    pub tokenizer: Tokenizer,
}

impl Default for LlmOptions {
    fn default() -> Self {
        LlmOptions {
            budget: DEFAULT_LLM_BUDGET,
            retries: 3,
            temperature: 0.0,
            tokenizer: Tokenizer::default(),
        }
    }
}

/// Conversation text as shown to the LLM: truncated to the budget, optionally
/// with strategy markers.
pub fn render_for_llm(conversation: &Conversation, markers: bool, opts: &LlmOptions) -> Result<String> {
    let mut budget = opts.budget;
    loop {
        let truncated = truncate_for_llm(conversation, budget, &opts.tokenizer)?;
        let text = if markers {
            inject_utterance_markers(&truncated.turns)?
        } else {
            render_plain(&truncated.turns)?
        };
        let used = opts.tokenizer.count(&text);
        if used <= opts.budget {
            return Ok(text);
        }
        // markers pushed it over; shrink the plain budget by the overflow
        budget = budget.saturating_sub(used - opts.budget).max(1);
    }
}

fn request(model: &str, conversation_text: &str, user: String, opts: &LlmOptions) -> Result<ChatRequest> {
    let used = opts.tokenizer.count(conversation_text);
    if used > opts.budget {
        return Err(Error::Validation(format!(
            "conversation has {used} tokens, over the LLM budget of {}; truncate it first",
            opts.budget
        )));
    }
    Ok(ChatRequest {
        model: model.to_string(),
        system: format!("{SYSTEM_PREFIX}{conversation_text}"),
        user,
        temperature: opts.temperature,
    })
}

/// Stand-alone request for one question. Questions never share history.
pub fn build_prompt(
    question: &QuestionSchema,
    conversation_text: &str,
    model: &str,
    opts: &LlmOptions,
) -> Result<ChatRequest> {
    request(model, conversation_text, question.prompt_text.clone(), opts)
}

fn with_clarification(mut req: ChatRequest, attempt: usize, notes: &[&str]) -> ChatRequest {
    if attempt > 0 {
        req.user = format!("{}\n{}", req.user, notes[(attempt - 1) % notes.len()]);
    }
    req
}

enum Asked {
    Parsed(Vec<String>),
    Failed(Vec<String>),
}

fn ask_question(
    question: &QuestionSchema,
    conversation_text: &str,
    client: &CachedClient<'_>,
    opts: &LlmOptions,
) -> Result<Asked> {
    let base = build_prompt(question, conversation_text, client.model(), opts)?;
    let mut raws = Vec::new();
    for attempt in 0..=opts.retries {
        let req = with_clarification(base.clone(), attempt, &CLARIFICATIONS);
        let raw = client.complete(&req).map_err(|e| match e {
            Error::Client(m) => Error::Client(format!("{}: {m}", question.question_id.title())),
            Error::Offline(m) => Error::Offline(format!("{}: {m}", question.question_id.title())),
            other => other,
        })?;
        match parse_choice(&raw, question) {
            Ok(choices) => {
                client.record_parsed(&req, serde_json::json!(choices))?;
                raws.push(raw);
                return Ok(Asked::Parsed(choices));
            }
            Err(Error::ParseFailure { .. }) => raws.push(raw),
            Err(e) => return Err(e),
        }
    }
    Ok(Asked::Failed(raws))
}

/// Ask all 12 questions. Unparseable answers fall back to "Not clear" where
/// the question offers it and are otherwise marked unanswerable.
pub fn extract_session_features(
    conversation_text: &str,
    client: &CachedClient<'_>,
    opts: &LlmOptions,
) -> Result<SessionFeatures> {
    let mut out = SessionFeatures::new(Provenance::Llm);
    for question in question_schema() {
        let q = question.question_id;
        match ask_question(question, conversation_text, client, opts)? {
            Asked::Parsed(choices) => {
                out.answers.insert(q, Answer::Chosen(choices));
            }
            Asked::Failed(raws) => {
                log::warn!("no parseable answer for {}, using fallback", q.title());
                let fallback = match question.neutral_choice() {
                    Some(c) => Answer::single(c),
                    None => Answer::Unanswerable,
                };
                out.answers.insert(q, fallback);
                out.raw_responses.insert(q, raws);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    Plain,
    Stance,
}

impl SummaryMode {
    pub fn prompt(self) -> &'static str {
        match self {
            SummaryMode::Plain => PLAIN_SUMMARY_PROMPT,
            SummaryMode::Stance => STANCE_SUMMARY_PROMPT,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SummaryMode::Plain => "Summary",
            SummaryMode::Stance => "Stance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryPair {
    pub plain: String,
    pub stance: String,
    pub word_budget: usize,
}

/// Free-form summary. The 150-word budget is part of the prompt only.
pub fn summarize(
    conversation_text: &str,
    client: &CachedClient<'_>,
    mode: SummaryMode,
    opts: &LlmOptions,
) -> Result<String> {
    let req = request(client.model(), conversation_text, mode.prompt().to_string(), opts)?;
    let out = client.complete(&req)?;
    if out.trim().is_empty() {
        return Err(Error::Client(format!("empty {} summary", mode.label())));
    }
    Ok(out.trim().to_string())
}

pub fn summarize_both(
    conversation_text: &str,
    client: &CachedClient<'_>,
    opts: &LlmOptions,
) -> Result<SummaryPair> {
    Ok(SummaryPair {
        plain: summarize(conversation_text, client, SummaryMode::Plain, opts)?,
        stance: summarize(conversation_text, client, SummaryMode::Stance, opts)?,
        word_budget: 150,
    })
}

/// Zero-shot outcome prediction: `0` is negative, `1` non-negative.
pub fn predict_outcome_via_llm(
    conversation_text: &str,
    client: &CachedClient<'_>,
    opts: &LlmOptions,
) -> Result<BinaryOutcome> {
    let base = request(client.model(), conversation_text, OUTCOME_PROMPT.to_string(), opts)?;
    let mut seen = Vec::new();
    for attempt in 0..=opts.retries {
        let req = with_clarification(base.clone(), attempt, &BINARY_CLARIFICATIONS);
        let raw = client.complete(&req)?;
        if let Some(positive) = parse_binary(&raw) {
            client.record_parsed(&req, serde_json::json!(if positive { 1 } else { 0 }))?;
            return Ok(BinaryOutcome::from_negative(!positive));
        }
        seen.push(raw);
    }
    Err(Error::ParseFailure {
        question: "conversation outcome".into(),
        raw: seen.join(" | "),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::client::ChatClient;
    use crate::session::schema::{schema_for, QuestionId};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Fixed(&'static str, AtomicUsize);

    impl ChatClient for Fixed {
        fn model_id(&self) -> &str {
            "fixed"
        }
        fn complete(&self, _: &ChatRequest) -> Result<String> {
            self.1.fetch_add(1, Ordering::Relaxed);
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn system_message_carries_conversation() {
        let req = build_prompt(schema_for(QuestionId::AbuseType), "Help seeker: hi", "m", &LlmOptions::default()).unwrap();
        assert!(req.system.starts_with("You are a helpful assistant"));
        assert!(req.system.ends_with("Help seeker: hi"));
        assert_eq!(req.temperature, 0.0);
    }

    #[test]
    fn questions_are_independent() {
        let opts = LlmOptions::default();
        let a = build_prompt(schema_for(QuestionId::AbuseType), "c", "m", &opts).unwrap();
        let b = build_prompt(schema_for(QuestionId::AbuseSeverity), "c", "m", &opts).unwrap();
        assert_eq!(a.system, b.system);
        assert!(!b.user.contains(&a.user));
    }

    #[test]
    fn over_budget_conversation_is_rejected() {
        let text = "word ".repeat(6000);
        let err = build_prompt(schema_for(QuestionId::AbuseType), &text, "m", &LlmOptions::default()).unwrap_err();
        assert!(err.to_string().contains("truncate"));
    }

    #[test]
    fn gibberish_falls_back() {
        let client = Fixed("purple monkey dishwasher", AtomicUsize::new(0));
        let cached = CachedClient::new(&client, None);
        let f = extract_session_features("Help seeker: hi", &cached, &LlmOptions::default()).unwrap();
        for q in QuestionId::ALL {
            let expect = match q {
                QuestionId::HelpSeekerNeeds | QuestionId::CounselorResponse => Answer::single("Not clear"),
                _ => Answer::Unanswerable,
            };
            assert_eq!(f.answer(q), &expect, "{q}");
        }
        // one initial attempt plus three retries per question
        assert_eq!(client.1.load(Ordering::Relaxed), 12 * 4);
        assert_eq!(f.raw_responses.len(), 12);
    }

    #[test]
    fn binary_outcome_parsing() {
        let one = Fixed(" 1 ", AtomicUsize::new(0));
        let out = predict_outcome_via_llm("c", &CachedClient::new(&one, None), &LlmOptions::default()).unwrap();
        assert_eq!(out, BinaryOutcome::NonNegative);
        let zero = Fixed("0", AtomicUsize::new(0));
        let out = predict_outcome_via_llm("c", &CachedClient::new(&zero, None), &LlmOptions::default()).unwrap();
        assert_eq!(out, BinaryOutcome::Negative);
        let maybe = Fixed("maybe", AtomicUsize::new(0));
        assert!(predict_outcome_via_llm("c", &CachedClient::new(&maybe, None), &LlmOptions::default()).is_err());
    }

    #[test]
    fn plain_summary_prompt_text() {
        assert_eq!(SummaryMode::Plain.prompt(), "Summarize the conversation in 150 words.");
    }
}
