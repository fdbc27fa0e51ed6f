use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, TemporalSlice};

/// Word/id mapping with per-word counts.
///
/// Ids are dense in `[0, len)`. Words are ordered by descending count with
/// lexicographic tie-breaks at construction; words appended later by
/// [`Vocabulary::extend`] follow the same ordering among themselves but never
/// displace existing ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    #[serde(skip)]
    index: HashMap<String, u32>,
    words: Vec<String>,
    counts: Vec<u64>,
    min_count: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from raw counts, dropping words below `min_count`.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Result<Self, CorpusError> {
        if min_count == 0 {
            return Err(CorpusError::InvalidMinCount);
        }
        let mut vocab = Vocabulary {
            index: HashMap::new(),
            words: Vec::new(),
            counts: Vec::new(),
            min_count,
        };
        vocab.push_sorted(counts.into_iter().filter(|(_, c)| *c >= min_count).collect());
        if vocab.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        Ok(vocab)
    }

    pub fn from_documents<'a, I, D>(docs: I, min_count: u64) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        Self::from_counts(count_tokens(docs), min_count)
    }

    /// Rebuilds from stored words and counts (used when loading models).
    pub fn from_parts(words: Vec<String>, counts: Vec<u64>, min_count: u64) -> Result<Self, CorpusError> {
        if words.len() != counts.len() {
            return Err(CorpusError::ConfigInvalid(
                "vocabulary words and counts differ in length".into(),
            ));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(CorpusError::ConfigInvalid(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Vocabulary { index, words, counts, min_count })
    }

    fn push_sorted(&mut self, mut entries: Vec<(String, u64)>) -> usize {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let added = entries.len();
        for (word, count) in entries {
            self.index.insert(word.clone(), self.words.len() as u32);
            self.words.push(word);
            self.counts.push(count);
        }
        added
    }

    /// Adds `new_counts` to the vocabulary. Known words accumulate their
    /// counts; unknown words are appended when they reach `min_count` within
    /// `new_counts` alone. Returns the number of appended words.
    pub fn extend(&mut self, new_counts: HashMap<String, u64>) -> usize {
        let mut fresh = Vec::new();
        for (word, count) in new_counts {
            match self.index.get(&word) {
                Some(&id) => self.counts[id as usize] += count,
                None if count >= self.min_count => fresh.push((word, count)),
                None => {}
            }
        }
        self.push_sorted(fresh)
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> Option<u64> {
        self.counts.get(id as usize).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Maps a token sequence to ids, dropping out-of-vocabulary tokens.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.id(t.as_ref())).collect()
    }

    /// Restores the word index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
    }
}

pub fn count_tokens<'a, I, D>(docs: I) -> HashMap<String, u64>
where
    I: IntoIterator<Item = D>,
    D: IntoIterator<Item = &'a String>,
{
    let mut counts = HashMap::new();
    for doc in docs {
        for tok in doc {
            *counts.entry(tok.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Aggregates counts over all `slices` and keeps words seen at least
/// `min_count` times.
pub fn build_vocabulary(slices: &[TemporalSlice], min_count: u64) -> Result<Vocabulary, CorpusError> {
    Vocabulary::from_documents(slices.iter().flat_map(|s| s.documents.iter()), min_count)
}
