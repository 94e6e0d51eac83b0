//! Tokenization, vocabularies, n-gram count vectors and padded index sequences.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Identifier of the bundled stopword list.
pub const STOPWORDS_VERSION: &str = "en-v1";

/// Default sequence length fed to the recurrent network.
pub const DEFAULT_MAX_LEN: usize = 300;

/// Separator between the two tokens of a bigram feature. The tokenizer never
/// emits whitespace, so joined bigrams cannot collide with unigrams.
const BIGRAM_SEP: char = ' ';

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    pub fn none() -> Self {
        Stopwords::default()
    }

    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    /// One token per line; `#` starts a comment.
    pub fn parse(content: &str) -> Self {
        let words = content
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_lowercase)
            .collect();
        Stopwords { words }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&content))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Sorted word list, for persistence.
    pub fn to_sorted_vec(&self) -> Vec<String> {
        let mut v: Vec<String> = self.words.iter().cloned().collect();
        v.sort();
        v
    }

    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        Stopwords {
            words: words.into_iter().collect(),
        }
    }
}

fn is_token_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.'
}

/// Lower-cases, splits on runs of characters outside `[a-z0-9_.]`, trims
/// surrounding dots and drops stopwords and empty tokens.
pub fn preprocess(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let lowered = text.to_lowercase();
    lowered
        .split(|c: char| !is_token_char(c))
        .map(|t| t.trim_matches('.'))
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .map(str::to_string)
        .collect()
}

/// Token → index map. Index 0 is reserved for padding, so real tokens are
/// numbered `1..=size` in order of first occurrence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocabulary::default();
        for t in tokens {
            vocab.insert(t.as_ref());
        }
        vocab
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.tokens.push(token.to_string());
            self.index.insert(token.to_string(), self.tokens.len() as u32);
        }
    }

    /// Every distinct token of the preprocessed training text.
    pub fn build(train: &Corpus, stopwords: &Stopwords) -> Self {
        let mut vocab = Vocabulary::default();
        for d in train.documents() {
            for t in preprocess(&d.text, stopwords) {
                vocab.insert(&t);
            }
        }
        vocab
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Token at a 1-based index.
    pub fn token(&self, index: u32) -> Option<&str> {
        index
            .checked_sub(1)
            .and_then(|i| self.tokens.get(i as usize))
            .map(String::as_str)
    }

    /// Tokens in index order (index 1 first).
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Index shared by every token unknown to this vocabulary.
    pub fn oov_index(&self) -> u32 {
        self.tokens.len() as u32 + 1
    }

    pub fn hash_hex(&self) -> String {
        hash_lines(&self.tokens)
    }
}

pub(crate) fn hash_lines(lines: &[String]) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Sparse vector of n-gram counts, entries sorted by feature index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseCountVector {
    entries: Vec<(u32, u32)>,
}

impl SparseCountVector {
    /// Builds from (index, count) pairs; duplicate indices are summed and zero
    /// counts dropped.
    pub fn from_pairs(mut pairs: Vec<(u32, u32)>) -> Self {
        pairs.sort_unstable_by_key(|p| p.0);
        let mut entries: Vec<(u32, u32)> = Vec::with_capacity(pairs.len());
        for (i, c) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => entries.push((i, c)),
            }
        }
        entries.retain(|e| e.1 > 0);
        SparseCountVector { entries }
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> u32 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|k| self.entries[k].1)
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.1 as u64).sum()
    }

    pub fn squared_norm(&self) -> u64 {
        self.entries.iter().map(|e| (e.1 as u64).pow(2)).sum()
    }

    pub fn dot(&self, other: &SparseCountVector) -> u64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut acc = 0u64;
        while let (Some(x), Some(y)) = (a.peek(), b.peek()) {
            match x.0.cmp(&y.0) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    acc += x.1 as u64 * y.1 as u64;
                    a.next();
                    b.next();
                }
            }
        }
        acc
    }

    /// Exact squared Euclidean distance (counts are integers).
    pub fn squared_distance(&self, other: &SparseCountVector) -> u64 {
        self.squared_norm() + other.squared_norm() - 2 * self.dot(other)
    }

    /// `w · x` for a dense weight vector.
    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, c)| w[i as usize] * c as f64)
            .sum()
    }
}

/// Fixed unigram/bigram feature space learned from training text.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NgramSpace {
    max_order: usize,
    features: Vec<String>,
    index: HashMap<String, u32>,
}

fn bigram(a: &str, b: &str) -> String {
    let mut s = String::with_capacity(a.len() + b.len() + 1);
    s.push_str(a);
    s.push(BIGRAM_SEP);
    s.push_str(b);
    s
}

impl NgramSpace {
    /// Feature space over unigrams (`max_order` = 1) or unigrams and adjacent
    /// bigrams (`max_order` = 2), indexed from 0 by first occurrence.
    pub fn build<'a, I>(documents: I, max_order: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if !(1..=2).contains(&max_order) {
            return Err(Error::InvalidArgument(format!(
                "n-gram order must be 1 or 2, got {max_order}"
            )));
        }
        let mut space = NgramSpace {
            max_order,
            ..Default::default()
        };
        for tokens in documents {
            for t in tokens {
                space.insert(t.clone());
            }
            if max_order == 2 {
                for w in tokens.windows(2) {
                    space.insert(bigram(&w[0], &w[1]));
                }
            }
        }
        Ok(space)
    }

    pub fn from_features(max_order: usize, features: Vec<String>) -> Self {
        let index = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i as u32))
            .collect();
        NgramSpace {
            max_order,
            features,
            index,
        }
    }

    fn insert(&mut self, feature: String) {
        if !self.index.contains_key(&feature) {
            self.index.insert(feature.clone(), self.features.len() as u32);
            self.features.push(feature);
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn feature_index(&self, feature: &str) -> Option<u32> {
        self.index.get(feature).copied()
    }

    pub fn bigram_index(&self, a: &str, b: &str) -> Option<u32> {
        self.feature_index(&bigram(a, b))
    }

    /// Counts of in-space unigrams and adjacent bigrams; anything unseen at
    /// build time contributes nothing.
    pub fn vectorize(&self, tokens: &[String]) -> SparseCountVector {
        let mut pairs = Vec::with_capacity(tokens.len() * self.max_order);
        for t in tokens {
            if let Some(i) = self.index.get(t.as_str()) {
                pairs.push((*i, 1));
            }
        }
        if self.max_order == 2 {
            for w in tokens.windows(2) {
                if let Some(i) = self.bigram_index(&w[0], &w[1]) {
                    pairs.push((i, 1));
                }
            }
        }
        SparseCountVector::from_pairs(pairs)
    }

    pub fn hash_hex(&self) -> String {
        hash_lines(&self.features)
    }
}

/// Fixed-length sequence of vocabulary indices, zero-padded at the tail.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexSequence(Vec<u32>);

impl IndexSequence {
    pub fn from_indices(indices: Vec<u32>) -> Self {
        IndexSequence(indices)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn max_len(&self) -> usize {
        self.0.len()
    }

    /// Number of leading non-pad positions.
    pub fn content_len(&self) -> usize {
        self.0.iter().position(|&i| i == 0).unwrap_or(self.0.len())
    }
}

/// Maps the first `max_len` tokens to vocabulary indices. Tokens missing from
/// the vocabulary take the shared OOV slot `vocab.size() + 1`.
pub fn to_sequence(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> IndexSequence {
    let oov = vocab.oov_index();
    let mut out: Vec<u32> = tokens
        .iter()
        .take(max_len)
        .map(|t| vocab.get(t).unwrap_or(oov))
        .collect();
    out.resize(max_len, 0);
    IndexSequence(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn preprocess_examples() {
        let sw = Stopwords::from_words(["the".to_string()]);
        assert_eq!(preprocess("Returns the index", &sw), toks(&["returns", "index"]));
        assert!(preprocess("", &sw).is_empty());
        assert_eq!(
            preprocess("Math.PI constant", &Stopwords::none()),
            toks(&["math.pi", "constant"])
        );
        assert_eq!(
            preprocess("See java.util.List. (x_y)...", &Stopwords::none()),
            toks(&["see", "java.util.list", "x_y"])
        );
    }

    #[test]
    fn bundled_stopwords() {
        let sw = Stopwords::english();
        assert!(sw.len() >= 150);
        assert!(sw.contains("the") && sw.contains("of"));
        assert!(!sw.contains("returns"));
        let parsed = Stopwords::parse("# header\nfoo\n  Bar  # trailing\n\n");
        assert_eq!(parsed.to_sorted_vec(), toks(&["bar", "foo"]));
    }

    #[test]
    fn vocabulary_first_occurrence() {
        let v = Vocabulary::from_tokens(["a", "b", "a"]);
        assert_eq!(v.size(), 2);
        assert_eq!((v.get("a"), v.get("b")), (Some(1), Some(2)));
        assert_eq!(v.token(1), Some("a"));
        assert_eq!(v.token(0), None);
        assert_eq!(v.get("zzz"), None);
    }

    #[test]
    fn ngram_counts() {
        let space = NgramSpace::build([toks(&["a", "b", "a"]).as_slice()], 2).unwrap();
        let x = space.vectorize(&toks(&["a", "b", "a"]));
        assert_eq!(x.get(space.feature_index("a").unwrap()), 2);
        assert_eq!(x.get(space.feature_index("b").unwrap()), 1);
        assert_eq!(x.get(space.bigram_index("a", "b").unwrap()), 1);
        assert_eq!(x.get(space.bigram_index("b", "a").unwrap()), 1);
        assert_eq!(x.total(), 5);
        assert!(space.vectorize(&[]).is_empty());
        // unseen token and its bigrams vanish
        let y = space.vectorize(&toks(&["a", "zzz", "b"]));
        assert_eq!(y.total(), 2);
        assert!(NgramSpace::build(std::iter::empty(), 3).is_err());
    }

    #[test]
    fn sequences() {
        let v = Vocabulary::from_tokens(["x", "y"]);
        assert_eq!(to_sequence(&toks(&["x", "y"]), &v, 5).as_slice(), &[1, 2, 0, 0, 0]);
        let long: Vec<String> = (0..400).map(|_| "x".to_string()).collect();
        let s = to_sequence(&long, &v, 300);
        assert_eq!(s.max_len(), 300);
        assert!(s.as_slice().iter().all(|&i| i == 1));
        assert!(to_sequence(&[], &v, 4).as_slice().iter().all(|&i| i == 0));
        assert_eq!(to_sequence(&toks(&["q", "x"]), &v, 3).as_slice(), &[3, 1, 0]);
    }

    #[test]
    fn sparse_distance() {
        let a = SparseCountVector::from_pairs(vec![(0, 1), (3, 2)]);
        let b = SparseCountVector::from_pairs(vec![(3, 1), (5, 4), (3, 1)]);
        assert_eq!(b.get(3), 2);
        assert_eq!(a.dot(&b), 4);
        assert_eq!(a.squared_distance(&b), 1 + 16);
        assert_eq!(a.squared_distance(&a), 0);
    }

    proptest! {
        #[test]
        fn preprocess_idempotent(text in "[ -~]{0,80}") {
            let sw = Stopwords::english();
            let once = preprocess(&text, &sw);
            let twice = preprocess(&once.join(" "), &sw);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn ngram_conservation(train in prop::collection::vec("[a-e]", 0..12),
                              query in prop::collection::vec("[a-g]", 0..12)) {
            let space = NgramSpace::build([train.as_slice()], 2).unwrap();
            let x = space.vectorize(&query);
            let uni = query.iter().filter(|t| space.feature_index(t).is_some()).count() as u64;
            let bi = query.windows(2).filter(|w| space.bigram_index(&w[0], &w[1]).is_some()).count() as u64;
            prop_assert_eq!(x.total(), uni + bi);
        }

        #[test]
        fn sequence_shape(tokens in prop::collection::vec("[a-f]", 0..40), max_len in 1usize..30) {
            let v = Vocabulary::from_tokens(["a", "b", "c"]);
            let s = to_sequence(&tokens, &v, max_len);
            prop_assert_eq!(s.max_len(), max_len);
            let k = s.content_len();
            prop_assert!(s.as_slice()[k..].iter().all(|&i| i == 0));
            prop_assert!(s.as_slice()[..k].iter().all(|&i| (1..=v.oov_index()).contains(&i)));
        }
    }
}
