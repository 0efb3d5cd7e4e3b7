/// Lower-cased words that end in a period without ending a sentence.
const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "etc.", "vs.", "mr.", "mrs.", "ms.", "dr.", "st.", "jr.", "sr.", "approx.", "no.", "u.s.", "a.m.",
    "p.m.", "cf.", "al.",
];

fn ends_sentence(word: &str) -> bool {
    let trimmed = word.trim_end_matches(['"', '\'', ')']);
    if !trimmed.ends_with(['.', '!', '?']) {
        return false;
    }
    !ABBREVIATIONS.contains(&trimmed.to_lowercase().as_str())
}

/// Rule-based sentence segmentation: a sentence ends at a word finishing
/// with `.`, `!` or `?` (optionally followed by closing quotes or brackets)
/// unless that word is a known abbreviation. Each sentence keeps the label
/// of the text it came from.
pub fn split_sentences<S: AsRef<str>, M: Clone>(texts: &[(S, M)]) -> Vec<(String, M)> {
    let mut out = Vec::new();
    for (text, mode) in texts {
        let mut cur: Vec<&str> = Vec::new();
        for word in text.as_ref().split_whitespace() {
            cur.push(word);
            if ends_sentence(word) {
                out.push((cur.join(" "), mode.clone()));
                cur.clear();
            }
        }
        if !cur.is_empty() {
            out.push((cur.join(" "), mode.clone()));
        }
    }
    out
}
