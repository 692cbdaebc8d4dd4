//! Tokenization, stopword lists and stemming shared by headline and
//! message processing.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};

use crate::error::{Error, Result};

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Lowercases `text`, drops apostrophes and splits on everything that is
/// not alphanumeric.
///
/// ```
/// assert_eq!(vqevent::text::tokenize("Mandela's  legacy, LIVE!"), ["mandelas", "legacy", "live"]);
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered: String = text
        .chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .flat_map(char::to_lowercase)
        .collect();
    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// A set of words ignored during preprocessing.
///
/// Starts from a standard English list and grows with articulation words
/// learned from the keyword graph. Persisted one word per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: BTreeSet<String>,
}

impl Stoplist {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn english() -> Self {
        Self::from_lines(ENGLISH_STOPWORDS)
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut list = Self::empty();
        list.extend(words);
        list
    }

    fn from_lines(text: &str) -> Self {
        Self::from_words(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_lines(&text))
    }

    /// One word per line, sorted, UTF-8.
    pub fn to_file_contents(&self) -> String {
        let mut out = String::new();
        for w in &self.words {
            out.push_str(w);
            out.push('\n');
        }
        out
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn insert(&mut self, word: &str) -> bool {
        let w = word.trim().to_lowercase();
        !w.is_empty() && self.words.insert(w)
    }

    pub fn extend<I, S>(&mut self, words: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for w in words {
            self.insert(w.as_ref());
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// English Snowball (Porter2) stemmer.
pub struct WordStemmer(Stemmer);

impl WordStemmer {
    pub fn english() -> Self {
        WordStemmer(Stemmer::create(Algorithm::English))
    }

    pub fn stem(&self, word: &str) -> String {
        self.0.stem(word).into_owned()
    }
}

impl Default for WordStemmer {
    fn default() -> Self {
        Self::english()
    }
}

impl std::fmt::Debug for WordStemmer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("WordStemmer(english)")
    }
}

/// Entities found by scanning raw message text.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct TextEntities {
    pub mentions: Vec<String>,
    pub hashtags: Vec<String>,
    pub urls: Vec<String>,
}

/// Finds `@mention`, `#hashtag` and `http(s)://` tokens in whitespace
/// separated text. Mentions and hashtags are lowercased.
pub fn scan_entities(text: &str) -> TextEntities {
    let mut found = TextEntities::default();
    for raw in text.split_whitespace() {
        if raw.starts_with("http://") || raw.starts_with("https://") {
            let url = raw.trim_end_matches(['.', ',', ')', ';', '!', '?']);
            found.urls.push(url.to_owned());
            continue;
        }
        let (sigil, rest) = match raw.chars().next() {
            Some(c @ ('@' | '#')) => (c, &raw[1..]),
            _ => continue,
        };
        let name: String = rest
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .flat_map(char::to_lowercase)
            .collect();
        if name.is_empty() {
            continue;
        }
        if sigil == '@' {
            found.mentions.push(name);
        } else {
            found.hashtags.push(name);
        }
    }
    found
}
