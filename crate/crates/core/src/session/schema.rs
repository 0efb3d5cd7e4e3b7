use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

pub const SYSTEM_PREFIX: &str = "You are a helpful assistant to help me understand the chat conversation between HelpSeeker and Counselor. Briefly answer questions about the conversation. ";

pub const INSTRUCTION: &str =
    "Don't answer in sentences and answer by only choosing one from the given categories";

pub const PLAIN_SUMMARY_PROMPT: &str = "Summarize the conversation in 150 words.";

pub const STANCE_SUMMARY_PROMPT: &str = "Summarize the conversation in 150 words, focusing on whether the help seeker would have felt more positive after the conversation.";

pub const OUTCOME_PROMPT: &str = "Would the help seeker have felt more positive after the conversation? Answer '0' if they would not feel more positive at all, and answer '1' otherwise.";

/// Choice used when an answer cannot be parsed, for questions that have one.
pub const NEUTRAL_CHOICE: &str = "Not clear";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionId {
    HelpSeekerIdentity,
    PerpetratorIdentity,
    AbuseType,
    AbuseSeverity,
    HelpSeekerNeeds,
    CounselorResponse,
    CounselorStrategies,
    WhatsBeenTried,
    CounselorAdvice,
    HelpSeekerReaction,
    CounselorNegativeAttitudes,
    HelpSeekerNegativeAttitudes,
}

impl QuestionId {
    pub const ALL: [QuestionId; 12] = [
        QuestionId::HelpSeekerIdentity,
        QuestionId::PerpetratorIdentity,
        QuestionId::AbuseType,
        QuestionId::AbuseSeverity,
        QuestionId::HelpSeekerNeeds,
        QuestionId::CounselorResponse,
        QuestionId::CounselorStrategies,
        QuestionId::WhatsBeenTried,
        QuestionId::CounselorAdvice,
        QuestionId::HelpSeekerReaction,
        QuestionId::CounselorNegativeAttitudes,
        QuestionId::HelpSeekerNegativeAttitudes,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn title(self) -> &'static str {
        match self {
            QuestionId::HelpSeekerIdentity => "Help seeker's identity",
            QuestionId::PerpetratorIdentity => "Perpetrator's identity",
            QuestionId::AbuseType => "Type of abuse",
            QuestionId::AbuseSeverity => "Severity of abuse",
            QuestionId::HelpSeekerNeeds => "Help seeker's needs",
            QuestionId::CounselorResponse => "Counselor's response",
            QuestionId::CounselorStrategies => "Counselor's strategies",
            QuestionId::WhatsBeenTried => "What's been tried",
            QuestionId::CounselorAdvice => "Counselor's advice",
            QuestionId::HelpSeekerReaction => "Help seeker's reaction",
            QuestionId::CounselorNegativeAttitudes => "Counselor's negative attitudes",
            QuestionId::HelpSeekerNegativeAttitudes => "Help seeker's negative attitudes",
        }
    }

    pub fn from_title(title: &str) -> Option<QuestionId> {
        QuestionId::ALL.into_iter().find(|q| q.title().eq_ignore_ascii_case(title))
    }

    fn question_text(self) -> &'static str {
        match self {
            QuestionId::HelpSeekerIdentity => "Who is the HelpSeeker?",
            QuestionId::PerpetratorIdentity => "Who is the perpetrator?",
            QuestionId::AbuseType => "What is the type of the abuse or the stress?",
            QuestionId::AbuseSeverity => "What is the nature and severity of the abuse or the stress?",
            QuestionId::HelpSeekerNeeds => "Why does the HelpSeeker come talk to the Counselor?",
            QuestionId::CounselorResponse => "How does the Counselor help the HelpSeeker?",
            QuestionId::CounselorStrategies => "How does the Counselor explore the issue?",
            QuestionId::WhatsBeenTried => "What are the things that have previously done by the HelpSeeker to resolve the situation?",
            QuestionId::CounselorAdvice => "What are the things suggested by the Counselor to resolve the situation?",
            QuestionId::HelpSeekerReaction => "What is the HelpSeeker's reaction to the Counselor's suggestion?",
            QuestionId::CounselorNegativeAttitudes => "Are there any indications that the Counselor hurt the HelpSeeker's feelings?",
            QuestionId::HelpSeekerNegativeAttitudes => "Are there any indications that the HelpSeeker didn't like the chat? Consider if they are being hopeless, doubtful, denial, dissatisfied, etc.",
        }
    }

    fn choice_list(self) -> &'static [&'static str] {
        match self {
            QuestionId::HelpSeekerIdentity => &[
                "Maltreated child", "Family member", "Peer/Friend", "Other known adult", "Unknown person", "Other",
            ],
            QuestionId::PerpetratorIdentity => &[
                "Parents", "Siblings", "Step-parents", "Ex-partners", "Other family member", "Peer/Friend", "Other",
            ],
            QuestionId::AbuseType => &[
                "Physical", "Verbal/Emotional", "Neglect/Careless", "Stress from family/friends/school",
            ],
            QuestionId::AbuseSeverity => &[
                "Imminent danger", "Persistent abuse", "Poor care", "Casual behavior",
            ],
            QuestionId::HelpSeekerNeeds => &[
                "Seeking resources", "Getting emotional support", "Reporting the situation", "Practical advice", "Not clear",
            ],
            QuestionId::CounselorResponse => &[
                "Providing resources", "Reflection of feelings", "Affirmation or reassurance", "Providing advice", "Not clear",
            ],
            QuestionId::CounselorStrategies => &[
                "Interpreting", "Reflecting feelings", "Asking questions", "Validating", "Providing information",
            ],
            QuestionId::WhatsBeenTried => &[
                "Contacting authorities", "Talking to professionals", "Talking to others", "Self care methods", "Others", "None",
            ],
            QuestionId::CounselorAdvice => &[
                "Contacting authorities", "Talking to professionals", "Talking to others", "Self care methods", "Others",
            ],
            QuestionId::HelpSeekerReaction => &[
                "Accepting", "Accepting with concern", "Doubting", "Has already been tried", "Denying",
            ],
            QuestionId::CounselorNegativeAttitudes => &[
                "Trivializing issues", "Lacking validation", "Pushy tone", "Lacking exploration", "Lacking solutions", "None",
            ],
            QuestionId::HelpSeekerNegativeAttitudes => &["Yes", "No"],
        }
    }

    fn default_multi_select(self) -> bool {
        matches!(self, QuestionId::CounselorStrategies | QuestionId::WhatsBeenTried)
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSchema {
    pub question_id: QuestionId,
    pub prompt_text: String,
    pub choices: Vec<String>,
    pub multi_select: bool,
    /// Offset of this question's block in the one-hot vector.
    pub offset: usize,
}

impl QuestionSchema {
    pub fn choice_index(&self, choice: &str) -> Option<usize> {
        self.choices.iter().position(|c| c == choice)
    }

    pub fn neutral_choice(&self) -> Option<&str> {
        self.choices
            .iter()
            .find(|c| c.as_str() == NEUTRAL_CHOICE)
            .map(String::as_str)
    }
}

fn build_schema(multi_select: &[QuestionId]) -> Vec<QuestionSchema> {
    let mut offset = 0;
    QuestionId::ALL
        .iter()
        .map(|&q| {
            let choices: Vec<String> = q.choice_list().iter().map(|c| c.to_string()).collect();
            let prompt_text = format!(
                "{} {}. Categories: {}",
                q.question_text(),
                INSTRUCTION,
                choices.join(", ")
            );
            let schema = QuestionSchema {
                question_id: q,
                prompt_text,
                multi_select: multi_select.contains(&q),
                offset,
                choices,
            };
            offset += schema.choices.len();
            schema
        })
        .collect()
}

/// The 12 session questions, with strategies and what's-been-tried as
/// multi-select.
pub fn question_schema() -> &'static [QuestionSchema] {
    static SCHEMA: OnceLock<Vec<QuestionSchema>> = OnceLock::new();
    SCHEMA.get_or_init(|| {
        let multi: Vec<QuestionId> = QuestionId::ALL
            .into_iter()
            .filter(|q| q.default_multi_select())
            .collect();
        build_schema(&multi)
    })
}

/// Schema with a caller-chosen set of multi-select questions.
pub fn question_schema_with(multi_select: &[QuestionId]) -> Vec<QuestionSchema> {
    build_schema(multi_select)
}

pub fn schema_for(q: QuestionId) -> &'static QuestionSchema {
    &question_schema()[q.index()]
}

pub fn vector_len() -> usize {
    question_schema().iter().map(|q| q.choices.len()).sum()
}

pub(crate) fn validate_choice(q: QuestionId, choice: &str) -> Result<usize> {
    schema_for(q).choice_index(choice).ok_or_else(|| {
        Error::Validation(format!("{choice:?} is not a choice of {}", q.title()))
    })
}
