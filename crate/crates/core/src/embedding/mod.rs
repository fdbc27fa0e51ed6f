//! CBOW word embeddings trained with negative sampling, with incremental
//! updates over successive temporal slices.

mod cbow;
mod io;
mod noise;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{count_tokens, CorpusError, TemporalSlice, Vocabulary};
use crate::matrix::Matrix;
use crate::rng::seeded_rng;

pub use cbow::{loss_and_grad as cbow_loss_and_grad_raw, CbowGradients};
pub(crate) use cbow::{train_epochs, ContextMatrix};
pub use io::{load_model, read_vectors, save_model, write_vectors};
pub use noise::NoiseTable;

pub(crate) const STREAM_INIT: u64 = 0x1417;
pub(crate) const STREAM_TRAIN: u64 = 0x7a19;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("vocabulary is empty after applying min_count")]
    EmptyVocabulary,
    #[error("slice for year {0} has no tokens")]
    EmptySlice(i32),
    #[error("id {id} out of range for {len} rows")]
    IdOutOfRange { id: u32, len: usize },
    #[error("context window is empty")]
    EmptyContext,
    #[error("invalid embedding config: {0}")]
    ConfigInvalid(String),
    #[error("{path}: line {line}: {msg}")]
    Format { path: String, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<CorpusError> for EmbeddingError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::EmptyVocabulary => EmbeddingError::EmptyVocabulary,
            other => EmbeddingError::ConfigInvalid(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            min_lr: 1e-4,
            min_count: 2,
            seed: 0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let bad = |m: &str| Err(EmbeddingError::ConfigInvalid(m.into()));
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if self.window == 0 || self.negatives == 0 || self.min_count == 0 {
            return bad("window, negatives and min_count must be positive");
        }
        if !(self.initial_lr > 0.0) || !(self.min_lr >= 0.0) || self.min_lr > self.initial_lr {
            return bad("learning rates must satisfy 0 <= min_lr <= initial_lr, initial_lr > 0");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        EmbeddingConfig { seed, ..self.clone() }
    }
}

/// Fills `row` uniformly in `[-0.5/dim, 0.5/dim]`.
pub(crate) fn init_row<R: Rng>(row: &mut [f64], rng: &mut R) {
    let half = 0.5 / row.len() as f64;
    for v in row {
        *v = rng.gen_range(-half..=half);
    }
}

pub(crate) fn init_input(rows: usize, dim: usize, seed: u64, stream: u64) -> Matrix {
    let mut rng = seeded_rng(seed, &[STREAM_INIT, stream]);
    let mut m = Matrix::zeros(0, dim);
    m.grow(rows, |r| init_row(r, &mut rng));
    m
}

/// A trained CBOW model: vocabulary, word (input) vectors, context (output)
/// vectors and the negative-sampling table.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    vocab: Vocabulary,
    input: Matrix,
    output: Matrix,
    noise: NoiseTable,
}

impl EmbeddingModel {
    pub fn from_parts(vocab: Vocabulary, input: Matrix, output: Matrix) -> Result<Self, EmbeddingError> {
        if input.rows() != vocab.len() || output.rows() != vocab.len() || input.cols() != output.cols() {
            return Err(EmbeddingError::ConfigInvalid(format!(
                "matrix shapes {}x{} / {}x{} do not match vocabulary of {}",
                input.rows(),
                input.cols(),
                output.rows(),
                output.cols(),
                vocab.len()
            )));
        }
        let noise = NoiseTable::from_counts(vocab.counts());
        Ok(EmbeddingModel { vocab, input, output, noise })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Word vectors, one row per vocabulary id.
    pub fn input(&self) -> &Matrix {
        &self.input
    }

    /// Context vectors, one row per vocabulary id.
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn noise(&self) -> &NoiseTable {
        &self.noise
    }

    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    pub fn into_parts(self) -> (Vocabulary, Matrix, Matrix, NoiseTable) {
        (self.vocab, self.input, self.output, self.noise)
    }

    pub fn cbow_loss_and_grad(
        &self,
        center: u32,
        context: &[u32],
        negatives: &[u32],
    ) -> Result<CbowGradients, EmbeddingError> {
        cbow::loss_and_grad(&self.input, &self.output, center, context, negatives)
    }

    pub fn lookup(&self) -> EmbeddingLookup {
        EmbeddingLookup::new(self.vocab.clone(), self.input.clone())
    }
}

pub(crate) fn encode_docs<S: AsRef<str>>(vocab: &Vocabulary, docs: &[Vec<S>]) -> Vec<Vec<u32>> {
    docs.iter().map(|d| vocab.encode(d)).filter(|d| !d.is_empty()).collect()
}

/// Trains CBOW with negative sampling on `corpus`.
pub fn train_cbow(corpus: &[Vec<String>], cfg: &EmbeddingConfig) -> Result<EmbeddingModel, EmbeddingError> {
    train_cbow_logged(corpus, cfg).map(|(m, _)| m)
}

/// [`train_cbow`] that also returns the mean loss of every epoch.
pub fn train_cbow_logged(
    corpus: &[Vec<String>],
    cfg: &EmbeddingConfig,
) -> Result<(EmbeddingModel, Vec<f64>), EmbeddingError> {
    cfg.validate()?;
    if corpus.iter().all(Vec::is_empty) {
        return Err(EmbeddingError::EmptyCorpus);
    }
    let vocab = Vocabulary::from_documents(corpus, cfg.min_count)?;
    let mut input = init_input(vocab.len(), cfg.dim, cfg.seed, 0);
    let mut output = Matrix::zeros(vocab.len(), cfg.dim);
    let noise = NoiseTable::from_counts(vocab.counts());
    let docs = encode_docs(&vocab, corpus);
    let mut rng = seeded_rng(cfg.seed, &[STREAM_TRAIN]);
    let losses = train_epochs(&mut input, ContextMatrix::Trainable(&mut output), &docs, &noise, cfg, &mut rng);
    Ok((EmbeddingModel { vocab, input, output, noise }, losses))
}

/// Continues training `model` on `slice`.
///
/// Words new to the model that reach `min_count` within the slice are
/// appended (existing ids never move) and initialized as in
/// [`train_cbow`]. Counts accumulate, the sampling table is rebuilt, and the
/// learning-rate schedule restarts. Only the new slice is trained on.
pub fn update_incremental(
    model: EmbeddingModel,
    slice: &TemporalSlice,
    cfg: &EmbeddingConfig,
) -> Result<EmbeddingModel, EmbeddingError> {
    cfg.validate()?;
    if slice.token_count() == 0 {
        return Err(EmbeddingError::EmptySlice(slice.year));
    }
    if cfg.dim != model.dim() {
        return Err(EmbeddingError::ConfigInvalid(format!(
            "config dim {} does not match model dim {}",
            cfg.dim,
            model.dim()
        )));
    }
    let EmbeddingModel { mut vocab, mut input, mut output, .. } = model;
    let old_len = vocab.len();
    let added = vocab.extend(count_tokens(&slice.documents));
    let mut rng = seeded_rng(cfg.seed, &[STREAM_INIT, old_len as u64]);
    input.grow(added, |r| init_row(r, &mut rng));
    output.grow(added, |_| {});
    let noise = NoiseTable::from_counts(vocab.counts());
    let docs = encode_docs(&vocab, &slice.documents);
    let mut rng = seeded_rng(cfg.seed, &[STREAM_TRAIN, slice.year as u64]);
    train_epochs(&mut input, ContextMatrix::Trainable(&mut output), &docs, &noise, cfg, &mut rng);
    Ok(EmbeddingModel { vocab, input, output, noise })
}

/// Counts of vector lookups, split into hits and out-of-vocabulary misses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupStats {
    pub hits: usize,
    pub oov: usize,
}

impl std::ops::AddAssign for LookupStats {
    fn add_assign(&mut self, rhs: Self) {
        self.hits += rhs.hits;
        self.oov += rhs.oov;
    }
}

/// Word-to-vector view handed to the classifier. Out-of-vocabulary words
/// map to the zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingLookup {
    vocab: Vocabulary,
    vectors: Matrix,
}

impl EmbeddingLookup {
    pub fn new(vocab: Vocabulary, vectors: Matrix) -> Self {
        assert_eq!(vocab.len(), vectors.rows(), "one vector per vocabulary word");
        EmbeddingLookup { vocab, vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    /// The vector of an in-vocabulary word.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vocab.id(word).map(|id| self.vectors.row(id as usize))
    }

    /// Copies the vector of `word` into `out`, or zeros for OOV words.
    pub fn lookup_into(&self, word: &str, out: &mut [f64], stats: &mut LookupStats) {
        match self.get(word) {
            Some(v) => {
                out.copy_from_slice(v);
                stats.hits += 1;
            }
            None => {
                out.fill(0.0);
                stats.oov += 1;
            }
        }
    }

    pub fn lookup(&self, word: &str) -> Vec<f64> {
        self.get(word).map_or_else(|| vec![0.0; self.dim()], <[f64]>::to_vec)
    }

    pub fn lookup_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> (Vec<Vec<f64>>, LookupStats) {
        let mut stats = LookupStats::default();
        let vecs = tokens
            .iter()
            .map(|t| {
                let mut v = vec![0.0; self.dim()];
                self.lookup_into(t.as_ref(), &mut v, &mut stats);
                v
            })
            .collect();
        (vecs, stats)
    }
}
