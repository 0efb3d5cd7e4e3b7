use super::schema::QuestionSchema;
use crate::{Error, Result};

/// Lowercase, map every non-alphanumeric run to one space, trim.
fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Whole-word occurrences of `needle` in `haystack`, both normalized.
fn word_matches(haystack: &str, needle: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if needle.is_empty() {
        return out;
    }
    let bytes = haystack.as_bytes();
    let mut start = 0;
    while let Some(pos) = haystack[start..].find(needle) {
        let s = start + pos;
        let e = s + needle.len();
        let left_ok = s == 0 || bytes[s - 1] == b' ';
        let right_ok = e == haystack.len() || bytes[e] == b' ';
        if left_ok && right_ok {
            out.push((s, e));
        }
        start = s + 1;
    }
    out
}

/// Surface forms a choice can be recognised by: the full name and, for
/// slash-joined choices like `Verbal/Emotional`, each alternative.
fn surface_forms(choice: &str) -> Vec<String> {
    let mut forms = vec![normalize(choice)];
    if choice.contains('/') {
        for part in choice.split('/') {
            let n = normalize(part);
            if !n.is_empty() && !forms.contains(&n) {
                forms.push(n);
            }
        }
    }
    forms
}

/// Map a raw LLM response onto the question's choices.
///
/// An exact (normalized) match wins. Otherwise every choice mentioned in the
/// response is collected, with matches nested inside longer matches dropped
/// (`parents` inside `step parents`). Single-select questions need exactly one
/// distinct choice.
pub fn parse_choice(raw: &str, question: &QuestionSchema) -> Result<Vec<String>> {
    let failure = || Error::ParseFailure {
        question: question.question_id.title().to_string(),
        raw: raw.to_string(),
    };
    if question.choices.is_empty() {
        return Err(failure());
    }
    let response = normalize(raw);
    if response.is_empty() {
        return Err(failure());
    }
    if let Some(c) = question.choices.iter().find(|c| surface_forms(c).contains(&response)) {
        return Ok(vec![c.clone()]);
    }

    let mut spans: Vec<(usize, usize, usize)> = Vec::new();
    for (ci, choice) in question.choices.iter().enumerate() {
        for form in surface_forms(choice) {
            for (s, e) in word_matches(&response, &form) {
                spans.push((s, e, ci));
            }
        }
    }
    spans.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
    let mut kept: Vec<(usize, usize, usize)> = Vec::new();
    for span in spans {
        if kept.iter().all(|k| span.1 <= k.0 || span.0 >= k.1) {
            kept.push(span);
        }
    }
    let mut chosen: Vec<usize> = kept.into_iter().map(|(_, _, ci)| ci).collect();
    chosen.sort_unstable();
    chosen.dedup();

    match (chosen.len(), question.multi_select) {
        (0, _) => Err(failure()),
        (1, _) | (_, true) => Ok(chosen.into_iter().map(|i| question.choices[i].clone()).collect()),
        _ => Err(failure()),
    }
}

/// Strict `0`/`1` answer to the outcome question. `0` means not more positive.
pub fn parse_binary(raw: &str) -> Option<bool> {
    match raw.trim().trim_matches(|c| c == '\'' || c == '"' || c == '`').trim() {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}
