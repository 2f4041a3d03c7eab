//! Description preprocessing: tokenization, stopwords, stemming, vocabulary.

use std::collections::{BTreeSet, HashMap, HashSet};

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords.txt");

const MIN_TOKEN_LEN: usize = 3;

#[derive(Clone, Debug)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The shipped English list.
    pub fn builtin() -> Self {
        Self::from_lines(BUILTIN_STOPWORDS)
    }

    pub fn from_lines(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Lowercases, splits on non-alphabetic characters, drops stopwords and
/// words shorter than three characters, then stems what remains.
pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let stemmer = Stemmer::create(Algorithm::English);
    text.to_lowercase()
        .split(|c: char| !c.is_alphabetic())
        .filter(|w| w.chars().count() >= MIN_TOKEN_LEN && !stopwords.contains(w))
        .map(|w| stemmer.stem(w).into_owned())
        .collect()
}

/// A document as vocabulary indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub tokens: Vec<u32>,
}

impl TokenizedDoc {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Sorted word list; a word's index is its rank, so the vocabulary does not
/// depend on document order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn build<'a, I, D>(docs: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        let words: BTreeSet<&String> = docs.into_iter().flatten().collect();
        Self::from(words.into_iter().cloned().collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: u32) -> Option<&str> {
        self.words.get(idx as usize).map(String::as_str)
    }

    /// Maps words to indices, dropping out-of-vocabulary words.
    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> TokenizedDoc {
        TokenizedDoc {
            tokens: words.iter().filter_map(|w| self.get(w.as_ref())).collect(),
        }
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(mut words: Vec<String>) -> Self {
        words.sort();
        words.dedup();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Vocabulary { words, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_and_drops_punctuation() {
        let sw = Stopwords::builtin();
        assert_eq!(tokenize("Location and Music!!", &sw), vec!["locat", "music"]);
    }

    #[test]
    fn empty_and_stopword_only_inputs() {
        let sw = Stopwords::builtin();
        assert!(tokenize("", &sw).is_empty());
        assert!(tokenize("the of and", &sw).is_empty());
        assert!(tokenize("a an to ox", &sw).is_empty());
    }

    #[test]
    fn vocabulary_is_order_independent() {
        let a = vec!["music".to_string(), "locat".to_string()];
        let b = vec!["video".to_string(), "music".to_string()];
        let v1 = Vocabulary::build([&a, &b]);
        let v2 = Vocabulary::build([&b, &a]);
        assert_eq!(v1, v2);
        assert_eq!(v1.len(), 3);
        assert_eq!(v1.encode(&["video", "unknown", "locat"]).tokens, vec![2, 0]);
    }
}
