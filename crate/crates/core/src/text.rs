//! Word splitting shared by dataset construction and the encoder tokenizer.
//!
//! Text is lowercased and split on whitespace; inside each chunk, runs of
//! alphanumeric characters form words and every other character becomes a
//! token of its own. Reserved tokens (target markers, the unknown token) are
//! passed through untouched when they appear as a whole chunk.

/// Token emitted for out-of-vocabulary words.
pub const UNK: &str = "«unk»";
/// Opening target marker.
pub const OPEN_MARKER: &str = "«t»";
/// Closing target marker.
pub const CLOSE_MARKER: &str = "«/t»";
/// Default separator between a lemma and its definition.
pub const GLOSS_SEPARATOR: &str = ";";

const PASSTHROUGH: [&str; 3] = [UNK, OPEN_MARKER, CLOSE_MARKER];

/// Splits raw text into lowercase word and punctuation tokens.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if PASSTHROUGH.contains(&chunk) {
            out.push(chunk.to_string());
            continue;
        }
        let mut word = String::new();
        for ch in chunk.chars() {
            if ch.is_alphanumeric() {
                word.extend(ch.to_lowercase());
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(ch.to_lowercase().collect());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

/// Turns a WordNet-style lemma (`take_up`) into display words (`take up`).
pub fn lemma_to_words(lemma: &str) -> String {
    lemma.replace('_', " ")
}

/// Normalizes a lemma for lexicon lookup: lowercase, whitespace joined by `_`.
pub fn lookup_lemma(lemma: &str) -> String {
    lemma
        .split(|c: char| c.is_whitespace() || c == '_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
        .to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation_and_lowercases() {
        assert_eq!(split_words("An Apple."), vec!["an", "apple", "."]);
        assert_eq!(split_words("a;b"), vec!["a", ";", "b"]);
    }

    #[test]
    fn markers_pass_through() {
        assert_eq!(split_words("«t» bank «/t»"), vec![OPEN_MARKER, "bank", CLOSE_MARKER]);
    }

    #[test]
    fn lemma_normalization() {
        assert_eq!(lookup_lemma("Take up"), "take_up");
        assert_eq!(lookup_lemma("take_up"), "take_up");
        assert_eq!(lemma_to_words("take_up"), "take up");
    }
}
