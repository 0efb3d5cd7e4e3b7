//! Session-level features: the 12-question schema, LLM extraction with
//! caching and retries, summaries, and the deterministic mock client.

pub mod client;
pub mod extract;
mod features;
pub mod mock;
mod parse;
mod schema;

pub use client::{CacheRecord, CacheStats, CachedClient, ChatClient, ChatRequest, ResponseCache};
pub use extract::{
    build_prompt, extract_session_features, predict_outcome_via_llm, render_for_llm, summarize,
    summarize_both, LlmOptions, SummaryMode, SummaryPair, DEFAULT_LLM_BUDGET,
};
pub use features::{devectorize, textualize, vectorize, Answer, Provenance, SessionFeatures};
pub use mock::MockLlm;
pub use parse::{parse_binary, parse_choice};
pub use schema::{
    question_schema, question_schema_with, schema_for, vector_len, QuestionId,
    QuestionSchema, INSTRUCTION, NEUTRAL_CHOICE, OUTCOME_PROMPT, PLAIN_SUMMARY_PROMPT,
    SCHEMA_VERSION, STANCE_SUMMARY_PROMPT, SYSTEM_PREFIX,
};
