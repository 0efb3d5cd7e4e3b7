use serde::{Deserialize, Serialize};

use crate::utterance::FeatureGroup;

/// Mask token used when attribution hides a unit. Position is kept, content is
/// dropped.
pub const MASK_TOKEN: &str = "[MASK]";

/// Lower-casing word/punctuation tokenizer with registered special tokens that
/// are never split. Budgets everywhere are measured with this tokenizer.
/// One token's byte range in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
    pub special: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    specials: Vec<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        let mut specials: Vec<String> = FeatureGroup::ALL.iter().map(|g| g.marker()).collect();
        specials.push(MASK_TOKEN.to_string());
        Tokenizer { specials }
    }
}

impl Tokenizer {
    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    pub fn special_index(&self, token: &str) -> Option<usize> {
        self.specials.iter().position(|s| s == token)
    }

    pub fn add_special(&mut self, token: impl Into<String>) {
        let token = token.into();
        if !self.specials.contains(&token) {
            self.specials.push(token);
        }
    }

    fn special_at(&self, s: &str) -> Option<&str> {
        self.specials
            .iter()
            .find(|sp| s.starts_with(sp.as_str()))
            .map(String::as_str)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.spans(text)
            .into_iter()
            .map(|t| if t.special { text[t.start..t.end].to_string() } else { text[t.start..t.end].to_lowercase() })
            .collect()
    }

    /// Byte ranges of the tokens in `text`, in order.
    pub fn spans(&self, text: &str) -> Vec<TokenSpan> {
        let mut out = Vec::new();
        let mut word: Option<usize> = None;
        let close = |word: &mut Option<usize>, end: usize, out: &mut Vec<TokenSpan>| {
            if let Some(start) = word.take() {
                out.push(TokenSpan { start, end, special: false });
            }
        };
        let mut i = 0;
        while i < text.len() {
            let rest = &text[i..];
            if let Some(sp) = self.special_at(rest) {
                close(&mut word, i, &mut out);
                out.push(TokenSpan { start: i, end: i + sp.len(), special: true });
                i += sp.len();
                continue;
            }
            let ch = rest.chars().next().expect("non-empty rest");
            if ch.is_whitespace() {
                close(&mut word, i, &mut out);
            } else if ch.is_alphanumeric() || ch == '\'' {
                word.get_or_insert(i);
            } else {
                close(&mut word, i, &mut out);
                out.push(TokenSpan { start: i, end: i + ch.len_utf8(), special: false });
            }
            i += ch.len_utf8();
        }
        close(&mut word, text.len(), &mut out);
        out
    }

    pub fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_words_and_punctuation() {
        let t = Tokenizer::default();
        assert_eq!(
            t.tokenize("Help seeker: I'm OK."),
            vec!["help", "seeker", ":", "i'm", "ok", "."]
        );
    }

    #[test]
    fn markers_stay_whole() {
        let t = Tokenizer::default();
        let toks = t.tokenize("Counselor: <Emotional Attending> <Fact Related> Sorry.");
        assert_eq!(toks[2], "<Emotional Attending>");
        assert_eq!(toks[3], "<Fact Related>");
        assert_eq!(t.count("<Resources>"), 1);
        assert_eq!(t.tokenize("[MASK] [MASK]"), vec!["[MASK]", "[MASK]"]);
    }

    #[test]
    fn spans_cover_tokens() {
        let t = Tokenizer::default();
        let text = "Hi <Resources>call,  now";
        let spans = t.spans(text);
        let parts: Vec<&str> = spans.iter().map(|s| &text[s.start..s.end]).collect();
        assert_eq!(parts, vec!["Hi", "<Resources>", "call", ",", "now"]);
        assert!(spans[1].special);
    }
}
