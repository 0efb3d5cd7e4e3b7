use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::schema::{question_schema, schema_for, validate_choice, vector_len, QuestionId};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Chosen(Vec<String>),
    Unanswerable,
}

impl Answer {
    pub fn single(choice: impl Into<String>) -> Self {
        Answer::Chosen(vec![choice.into()])
    }

    pub fn choices(&self) -> &[String] {
        match self {
            Answer::Chosen(c) => c,
            Answer::Unanswerable => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Llm,
    Mock,
    Planted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionFeatures {
    pub answers: BTreeMap<QuestionId, Answer>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub raw_responses: BTreeMap<QuestionId, Vec<String>>,
}

impl SessionFeatures {
    pub fn new(provenance: Provenance) -> Self {
        SessionFeatures {
            answers: BTreeMap::new(),
            provenance,
            raw_responses: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, q: QuestionId, answer: Answer) -> &mut Self {
        self.answers.insert(q, answer);
        self
    }

    pub fn answer(&self, q: QuestionId) -> &Answer {
        self.answers.get(&q).unwrap_or(&Answer::Unanswerable)
    }

    /// First chosen value, if any.
    pub fn first(&self, q: QuestionId) -> Option<&str> {
        self.answer(q).choices().first().map(String::as_str)
    }

    /// Every question answered or marked unanswerable, every choice in schema,
    /// single-select questions holding at most one choice.
    pub fn validate(&self) -> Result<()> {
        for q in QuestionId::ALL {
            let Some(answer) = self.answers.get(&q) else {
                return Err(Error::Validation(format!("no answer recorded for {}", q.title())));
            };
            if let Answer::Chosen(choices) = answer {
                if choices.is_empty() {
                    return Err(Error::Validation(format!("empty choice list for {}", q.title())));
                }
                if choices.len() > 1 && !schema_for(q).multi_select {
                    return Err(Error::Validation(format!("{} is single-select", q.title())));
                }
                for c in choices {
                    validate_choice(q, c)?;
                }
            }
        }
        Ok(())
    }
}

/// One-hot encoding over the 60 choices in schema order. Unanswerable
/// questions leave their block zero.
pub fn vectorize(features: &SessionFeatures) -> Result<Vec<f64>> {
    let mut v = vec![0.0; vector_len()];
    for (q, answer) in &features.answers {
        let schema = schema_for(*q);
        for c in answer.choices() {
            let idx = validate_choice(*q, c)?;
            v[schema.offset + idx] = 1.0;
        }
    }
    Ok(v)
}

/// Inverse of [`vectorize`]. Blocks with no set bit become unanswerable.
pub fn devectorize(vector: &[f64], provenance: Provenance) -> Result<SessionFeatures> {
    if vector.len() != vector_len() {
        return Err(Error::Validation(format!(
            "expected a {}-dimensional vector, got {}",
            vector_len(),
            vector.len()
        )));
    }
    let mut out = SessionFeatures::new(provenance);
    for schema in question_schema() {
        let chosen: Vec<String> = schema
            .choices
            .iter()
            .enumerate()
            .filter(|(i, _)| vector[schema.offset + i] > 0.5)
            .map(|(_, c)| c.clone())
            .collect();
        let answer = if chosen.is_empty() {
            Answer::Unanswerable
        } else {
            Answer::Chosen(chosen)
        };
        out.answers.insert(schema.question_id, answer);
    }
    Ok(out)
}

fn join_phrases(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn slot(features: &SessionFeatures, q: QuestionId, unclear: &str) -> String {
    match features.answer(q) {
        Answer::Chosen(c) => join_phrases(&c.iter().map(|s| s.to_lowercase()).collect::<Vec<_>>()),
        Answer::Unanswerable => unclear.to_string(),
    }
}

fn mandatory(features: &SessionFeatures, q: QuestionId) -> Result<String> {
    match features.answer(q) {
        Answer::Chosen(c) if !c.is_empty() => Ok(join_phrases(
            &c.iter().map(|s| s.to_lowercase()).collect::<Vec<_>>(),
        )),
        _ => Err(Error::Validation(format!(
            "{} is required to textualize session features",
            q.title()
        ))),
    }
}

/// Natural-language explanation of the session features, filled from a fixed
/// template.
pub fn textualize(features: &SessionFeatures) -> Result<String> {
    use QuestionId as Q;
    let identity = mandatory(features, Q::HelpSeekerIdentity)?;
    let abuse_type = mandatory(features, Q::AbuseType)?;
    let perpetrator = mandatory(features, Q::PerpetratorIdentity)?;
    let article = match identity.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "An",
        _ => "A",
    };
    let severity = match features.answer(Q::AbuseSeverity) {
        Answer::Chosen(c) => join_phrases(&c.iter().map(|s| s.to_lowercase()).collect::<Vec<_>>()),
        Answer::Unanswerable => "unclear severity".to_string(),
    };
    let hs_negative = match features.first(Q::HelpSeekerNegativeAttitudes) {
        Some("Yes") => "negative attitudes".to_string(),
        Some("No") => "no negative attitudes".to_string(),
        _ => "unclear attitudes".to_string(),
    };
    Ok(format!(
        "{article} {identity} is seeking for {needs} regarding the situation where there has been \
         {abuse_type} abuse ({severity}) by {perpetrator}. The counselor explores the issues with \
         {strategies} and focuses on {response}. The help seeker tried {tried} to resolve the \
         situation and the counselor suggests {advice}. About the suggestion, the help seeker is \
         {reaction}. In the chat, the help seeker shows {hs_negative}. The counselor's attitudes \
         seems to be {counselor_negative} in the conversation.",
        needs = slot(features, Q::HelpSeekerNeeds, "unclear needs"),
        strategies = slot(features, Q::CounselorStrategies, "unclear strategies"),
        response = slot(features, Q::CounselorResponse, "an unclear response"),
        tried = slot(features, Q::WhatsBeenTried, "unclear things"),
        advice = slot(features, Q::CounselorAdvice, "nothing clear"),
        reaction = slot(features, Q::HelpSeekerReaction, "unclear"),
        counselor_negative = slot(features, Q::CounselorNegativeAttitudes, "unclear"),
    ))
}
