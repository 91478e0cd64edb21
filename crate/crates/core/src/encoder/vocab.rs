use std::collections::HashMap;

use crate::datasets::WeakText;
use crate::text::{self, CLOSE_MARKER, GLOSS_SEPARATOR, OPEN_MARKER, UNK};

pub type TokenId = u32;

/// Token inventory; ids are dense from 0 and the reserved tokens come first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Self::RESERVED.iter().map(|s| s.to_string()).collect()).expect("reserved tokens are distinct")
    }
}

impl Vocabulary {
    pub const RESERVED: [&'static str; 4] = [UNK, OPEN_MARKER, CLOSE_MARKER, GLOSS_SEPARATOR];
    pub const UNK_ID: TokenId = 0;
    pub const OPEN_ID: TokenId = 1;
    pub const CLOSE_ID: TokenId = 2;
    pub const SEPARATOR_ID: TokenId = 3;

    /// Builds a vocabulary from token occurrences, keeping tokens seen at
    /// least `min_count` times. Order: reserved, then count descending, then
    /// lexicographic.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count.max(1) && !Self::RESERVED.contains(t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut all: Vec<String> = Self::RESERVED.iter().map(|s| s.to_string()).collect();
        all.extend(kept.into_iter().map(|(t, _)| t.to_string()));
        Self::from_tokens(all).expect("tokens are distinct")
    }

    /// Restores a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, String> {
        if tokens.len() < Self::RESERVED.len() || tokens[..Self::RESERVED.len()] != Self::RESERVED {
            return Err("vocabulary does not start with the reserved tokens".into());
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as TokenId).is_some() {
                return Err(format!("duplicate vocabulary token {t:?}"));
            }
        }
        Ok(Self { tokens, ids })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Id of a token, or the unknown id.
    pub fn id(&self, token: &str) -> TokenId {
        self.ids.get(token).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn tokenize(&self, text: &WeakText) -> Vec<TokenId> {
        text.tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Splits raw text with the shared word rule, then maps to ids.
    pub fn tokenize_str(&self, raw: &str) -> Vec<TokenId> {
        text::split_words(raw).iter().map(|t| self.id(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_and_unknowns() {
        let v = Vocabulary::build(["apple", "an", "apple", "."], 1);
        assert_eq!(v.tokens()[..4], Vocabulary::RESERVED.map(String::from));
        assert_eq!(v.token(4), Some("apple"));
        let ids = v.tokenize_str("An Apple.");
        assert_eq!(ids, vec![v.id("an"), v.id("apple"), v.id(".")]);
        assert!(ids.iter().all(|&i| i != Vocabulary::UNK_ID));
        assert_eq!(v.tokenize_str("pear"), vec![Vocabulary::UNK_ID]);
        let marked = WeakText {
            tokens: vec!["«t»".into(), "bank".into(), "«/t»".into()],
        };
        assert_eq!(
            v.tokenize(&marked),
            vec![Vocabulary::OPEN_ID, Vocabulary::UNK_ID, Vocabulary::CLOSE_ID]
        );
    }

    #[test]
    fn min_count_filters() {
        let v = Vocabulary::build(["a", "a", "b"], 2);
        assert_eq!(v.len(), 5);
        assert_eq!(v.id("b"), Vocabulary::UNK_ID);
    }

    #[test]
    fn restore_validates() {
        assert!(Vocabulary::from_tokens(vec!["x".into()]).is_err());
        let mut t: Vec<String> = Vocabulary::RESERVED.iter().map(|s| s.to_string()).collect();
        t.push("a".into());
        t.push("a".into());
        assert!(Vocabulary::from_tokens(t).is_err());
    }
}
