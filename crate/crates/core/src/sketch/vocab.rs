use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::kb::label::tokenize;

pub const UNK: usize = 0;
pub const PAD: usize = 1;

/// Dense token index with reserved UNK and PAD entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from(vec!["<unk>".to_string(), "<pad>".to_string()])
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Builds from texts in order of first appearance.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocabulary::default();
        v.extend(texts);
        v
    }

    /// Adds unseen tokens; returns how many were added.
    pub fn extend<'a>(&mut self, texts: impl IntoIterator<Item = &'a str>) -> usize {
        let before = self.tokens.len();
        for text in texts {
            for tok in tokenize(text) {
                if !self.index.contains_key(&tok) {
                    self.index.insert(tok.clone(), self.tokens.len());
                    self.tokens.push(tok);
                }
            }
        }
        self.tokens.len() - before
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.get(t)).collect()
    }
}
