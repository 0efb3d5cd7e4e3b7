//! Turn windowing, token budgets, strategy-marker injection and multi-segment
//! input assembly.

mod tokenizer;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Conversation, Speaker, Turn};
use crate::{Error, Result};

pub use tokenizer::{TokenSpan, Tokenizer, MASK_TOKEN};

/// Line inserted between the head and tail windows when turns were skipped.
pub const GAP_LINE: &str = "...";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Turns taken from each end of the conversation.
    pub k: usize,
    pub max_tokens: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { k: 4, max_tokens: 512 }
    }
}

impl WindowSpec {
    pub fn new(k: usize, max_tokens: usize) -> Result<Self> {
        let spec = WindowSpec { k, max_tokens };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_tokens < 16 {
            return Err(Error::Config(format!(
                "max_tokens must be at least 16, got {}",
                self.max_tokens
            )));
        }
        Ok(())
    }
}

/// First `k` and last `k` turns, in order, without duplication.
pub fn window_turns(conversation: &Conversation, k: usize) -> Vec<Turn> {
    let turns = &conversation.turns;
    if turns.len() <= 2 * k {
        return turns.clone();
    }
    turns[..k]
        .iter()
        .chain(&turns[turns.len() - k..])
        .cloned()
        .collect()
}

fn render_line(turn: &Turn, markers: bool) -> String {
    let label = turn.speaker.label();
    match (&turn.utterance_features, turn.speaker, markers) {
        (Some(groups), Speaker::Counselor, true) if !groups.is_empty() => {
            let mut groups = groups.clone();
            groups.sort();
            groups.dedup();
            let tags: Vec<String> = groups.iter().map(|g| g.marker()).collect();
            format!("{label}: {} {}", tags.join(" "), turn.text)
        }
        _ => format!("{label}: {}", turn.text),
    }
}

fn render(turns: &[Turn], markers: bool) -> Result<String> {
    if turns.is_empty() {
        return Err(Error::Validation("cannot render an empty turn list".into()));
    }
    for t in turns {
        if t.speaker == Speaker::HelpSeeker && t.utterance_features.is_some() {
            return Err(Error::Validation("help seeker turn carries utterance features".into()));
        }
    }
    Ok(turns
        .iter()
        .map(|t| render_line(t, markers))
        .collect::<Vec<_>>()
        .join("\n"))
}

/// `Help seeker: ...` / `Counselor: ...`, one turn per line.
pub fn render_plain(turns: &[Turn]) -> Result<String> {
    render(turns, false)
}

/// Like [`render_plain`], with `<Group>` markers in codebook order in front of
/// annotated counselor turns.
pub fn inject_utterance_markers(turns: &[Turn]) -> Result<String> {
    render(turns, true)
}

/// Windowed rendering used as classifier input. Windowing happens before
/// marker injection, and a [`GAP_LINE`] separates non-adjacent halves.
pub fn render_windowed(conversation: &Conversation, k: usize, markers: bool) -> Result<String> {
    let turns = &conversation.turns;
    if turns.len() <= 2 * k {
        return render(turns, markers);
    }
    if k == 0 {
        return Err(Error::Validation("window of zero turns renders nothing".into()));
    }
    let head = render(&turns[..k], markers)?;
    let tail = render(&turns[turns.len() - k..], markers)?;
    Ok(format!("{head}\n{GAP_LINE}\n{tail}"))
}

/// Drop middle turns, innermost first, until the plain rendering fits.
/// The first and last turns are never removed.
pub fn truncate_for_llm(
    conversation: &Conversation,
    max_tokens: usize,
    tokenizer: &Tokenizer,
) -> Result<Conversation> {
    if max_tokens == 0 {
        return Err(Error::Config("max_tokens must be positive".into()));
    }
    let cost = |turns: &[Turn]| -> Result<usize> { Ok(tokenizer.count(&render_plain(turns)?)) };
    if cost(&conversation.turns)? <= max_tokens {
        return Ok(conversation.clone());
    }
    let n = conversation.turns.len();
    if n <= 2 {
        return Err(Error::Validation(format!(
            "session {} exceeds {max_tokens} tokens and has no removable turns",
            conversation.session_id
        )));
    }
    // middle indices ordered by distance from the centre, lower index first on ties
    let mut order: Vec<usize> = (1..n - 1).collect();
    let centre2 = (n - 1) as i64; // twice the centre position
    order.sort_by_key(|&i| ((2 * i as i64 - centre2).abs(), i));

    let mut keep = vec![true; n];
    for idx in order {
        keep[idx] = false;
        let kept: Vec<Turn> = conversation
            .turns
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(t, _)| t.clone())
            .collect();
        if cost(&kept)? <= max_tokens {
            return Ok(Conversation {
                turns: kept,
                ..conversation.clone()
            });
        }
    }
    Err(Error::Validation(format!(
        "session {} cannot fit {max_tokens} tokens even with only its first and last turns",
        conversation.session_id
    )))
}

/// Clip a rendered text to a token budget by dropping tokens from the middle.
/// Used when a windowed rendering still exceeds the encoder budget.
pub fn clip_middle(text: &str, max_tokens: usize, tokenizer: &Tokenizer) -> String {
    let tokens = tokenizer.tokenize(text);
    if tokens.len() <= max_tokens {
        return text.to_string();
    }
    let keep = max_tokens.saturating_sub(tokenizer.count(GAP_LINE));
    let head = keep / 2;
    let tail = keep - head;
    let mut out: Vec<&str> = tokens[..head].iter().map(String::as_str).collect();
    out.push(GAP_LINE);
    out.extend(tokens[tokens.len() - tail..].iter().map(String::as_str));
    out.join(" ")
}

/// Which row of the input grid a text segment comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Conv,
    Utter,
    Session,
    Summary,
    Stance,
}

impl InputSource {
    pub const ALL: [InputSource; 5] = [
        InputSource::Conv,
        InputSource::Utter,
        InputSource::Session,
        InputSource::Summary,
        InputSource::Stance,
    ];

    pub fn label(self) -> &'static str {
        match self {
            InputSource::Conv => "Conv",
            InputSource::Utter => "Utter",
            InputSource::Session => "Session",
            InputSource::Summary => "Summary",
            InputSource::Stance => "Stance",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        InputSource::ALL
            .into_iter()
            .find(|src| src.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown input source {s:?}")))
    }
}

impl fmt::Display for InputSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One classifier input: a primary text plus optional auxiliary segments,
/// each encoded separately downstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub id: String,
    pub segments: Vec<String>,
    pub provenance: Vec<InputSource>,
}

impl EncodedInput {
    pub fn single(id: impl Into<String>, text: impl Into<String>, source: InputSource) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Validation("empty input text".into()));
        }
        Ok(EncodedInput {
            id: id.into(),
            segments: vec![text],
            provenance: vec![source],
        })
    }

    pub fn text(&self) -> &str {
        &self.segments[0]
    }

    pub fn pair_text(&self) -> Option<&str> {
        self.segments.get(1).map(String::as_str)
    }

    /// `Utter+Stance` style label.
    pub fn label(&self) -> String {
        self.provenance
            .iter()
            .map(|s| s.label())
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Append another segment.
    pub fn with_segment(mut self, text: impl Into<String>, source: InputSource) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Validation(format!("empty {} segment", source.label())));
        }
        if self.provenance.contains(&source) {
            return Err(Error::Validation(format!("duplicate {} segment", source.label())));
        }
        self.segments.push(text);
        self.provenance.push(source);
        Ok(self)
    }
}

/// Two-segment input for the concatenating dual classifier.
pub fn assemble_dual_input(
    id: impl Into<String>,
    primary: (&str, InputSource),
    auxiliary: (&str, InputSource),
) -> Result<EncodedInput> {
    EncodedInput::single(id, primary.0, primary.1)?.with_segment(auxiliary.0, auxiliary.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use crate::utterance::FeatureGroup;

    fn conv(n: usize) -> Conversation {
        Conversation {
            session_id: "s".into(),
            source: Source::Synthetic,
            outcome: None,
            turns: (1..=n)
                .map(|i| {
                    if i % 2 == 1 {
                        Turn::help_seeker(format!("turn {i}"))
                    } else {
                        Turn::counselor(format!("turn {i}"))
                    }
                })
                .collect(),
        }
    }

    fn texts(turns: &[Turn]) -> Vec<String> {
        turns.iter().map(|t| t.text.clone()).collect()
    }

    #[test]
    fn window_of_ten_with_k4() {
        let w = window_turns(&conv(10), 4);
        let expect: Vec<String> = [1, 2, 3, 4, 7, 8, 9, 10].iter().map(|i| format!("turn {i}")).collect();
        assert_eq!(texts(&w), expect);
    }

    #[test]
    fn short_conversation_kept_whole() {
        assert_eq!(window_turns(&conv(6), 4).len(), 6);
        assert!(window_turns(&conv(6), 0).is_empty());
    }

    #[test]
    fn renders_speaker_labels() {
        let turns = vec![Turn::help_seeker("I am abused by my parents.")];
        assert_eq!(render_plain(&turns).unwrap(), "Help seeker: I am abused by my parents.");
        assert!(render_plain(&[]).is_err());
        let two = vec![Turn::help_seeker("a"), Turn::counselor("b")];
        assert_eq!(render_plain(&two).unwrap(), "Help seeker: a\nCounselor: b");
    }

    #[test]
    fn injects_marker_before_counselor_text() {
        let turns = vec![
            Turn::help_seeker("I am abused by my parents."),
            Turn::counselor("I am sorry that happened.").with_features([FeatureGroup::EmotionalAttending]),
        ];
        assert_eq!(
            inject_utterance_markers(&turns).unwrap(),
            "Help seeker: I am abused by my parents.\nCounselor: <Emotional Attending> I am sorry that happened."
        );
    }

    #[test]
    fn markers_follow_codebook_order() {
        let t = Turn::counselor("Call CPS.").with_features([FeatureGroup::Resources, FeatureGroup::FactRelated]);
        assert_eq!(
            inject_utterance_markers(&[t]).unwrap(),
            "Counselor: <Fact Related> <Resources> Call CPS."
        );
    }

    #[test]
    fn empty_feature_set_renders_plain() {
        let turns = vec![Turn::counselor("ok").with_features([])];
        assert_eq!(inject_utterance_markers(&turns).unwrap(), render_plain(&turns).unwrap());
    }

    #[test]
    fn windowed_rendering_inserts_gap() {
        let text = render_windowed(&conv(10), 1, false).unwrap();
        assert_eq!(text, "Help seeker: turn 1\n...\nCounselor: turn 10");
        assert_eq!(render_windowed(&conv(2), 1, false).unwrap().lines().count(), 2);
    }

    #[test]
    fn truncation_removes_centre_turn_first() {
        let tok = Tokenizer::default();
        let c = conv(9);
        let full = tok.count(&render_plain(&c.turns).unwrap());
        let out = truncate_for_llm(&c, full - 1, &tok).unwrap();
        let expect: Vec<String> = [1, 2, 3, 4, 6, 7, 8, 9].iter().map(|i| format!("turn {i}")).collect();
        assert_eq!(texts(&out.turns), expect);
        // turn 5 costs 5 tokens; one more over budget and turn 4 goes next
        let out = truncate_for_llm(&c, full - 6, &tok).unwrap();
        let expect: Vec<String> = [1, 2, 3, 6, 7, 8, 9].iter().map(|i| format!("turn {i}")).collect();
        assert_eq!(texts(&out.turns), expect);
    }

    #[test]
    fn truncation_identity_within_budget() {
        let c = conv(5);
        assert_eq!(truncate_for_llm(&c, 10_000, &Tokenizer::default()).unwrap(), c);
    }

    #[test]
    fn single_giant_turn_cannot_be_truncated() {
        let mut c = conv(1);
        c.turns[0].text = "word ".repeat(100);
        assert!(truncate_for_llm(&c, 20, &Tokenizer::default()).is_err());
    }

    #[test]
    fn dual_input_contract() {
        let d = assemble_dual_input("s", ("conv", InputSource::Utter), ("stance", InputSource::Stance)).unwrap();
        assert_eq!(d.label(), "Utter+Stance");
        assert_eq!(d.pair_text(), Some("stance"));
        assert!(assemble_dual_input("s", ("", InputSource::Conv), ("x", InputSource::Session)).is_err());
        assert!(assemble_dual_input("s", ("x", InputSource::Conv), (" ", InputSource::Session)).is_err());
    }

    #[test]
    fn clip_middle_respects_budget() {
        let tok = Tokenizer::default();
        let text = (0..100).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let clipped = clip_middle(&text, 20, &tok);
        assert!(tok.count(&clipped) <= 20);
        assert!(clipped.starts_with("w0"));
        assert!(clipped.ends_with("w99"));
    }
}
