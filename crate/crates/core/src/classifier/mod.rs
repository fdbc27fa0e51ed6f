//! Single-region text CNN stance classifier.
//!
//! Posts are encoded as `max_len x dim` matrices of frozen word vectors.
//! One bank of `num_filters` kernels of width `kernel_width` slides over
//! token positions (valid padding), followed by ReLU, max-pooling over
//! positions, a dense layer and a softmax over the two stances.

mod adam;
mod checkpoint;
mod metrics;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabelledPost, StanceLabel};
use crate::embedding::{EmbeddingLookup, LookupStats};
use crate::matrix::{axpy, dot};
use crate::rng::seeded_rng;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, write_predictions, CheckpointHeader};
pub use metrics::{macro_f1, F1Report};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{predictions} predictions for {golds} gold labels")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("invalid classifier config: {0}")]
    ConfigInvalid(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub num_filters: usize,
    pub kernel_width: usize,
    pub max_len: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub num_classes: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            num_filters: 32,
            kernel_width: 5,
            max_len: 32,
            lr: 2e-5,
            epochs: 10,
            batch_size: 32,
            num_classes: 2,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let positive = [self.num_filters, self.kernel_width, self.max_len, self.batch_size, self.num_classes];
        if positive.contains(&0) || !(self.lr > 0.0) {
            return Err(ClassifierError::ConfigInvalid("all sizes and lr must be positive".into()));
        }
        if self.kernel_width > self.max_len {
            return Err(ClassifierError::ConfigInvalid("kernel_width exceeds max_len".into()));
        }
        if self.num_classes != StanceLabel::ALL.len() {
            return Err(ClassifierError::ConfigInvalid("stance classification has two classes".into()));
        }
        Ok(())
    }

    /// Number of valid convolution positions.
    pub fn positions(&self) -> usize {
        self.max_len - self.kernel_width + 1
    }
}

/// A post as a zero-padded `max_len x dim` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedPost {
    pub data: Vec<f64>,
    /// Rows that came from tokens; rows at and beyond `len` are zero.
    pub len: usize,
    pub dim: usize,
    pub label: StanceLabel,
}

/// Maps the first `max_len` tokens through `lookup`, zero-padding the rest.
pub fn encode(tokens: &[String], lookup: &EmbeddingLookup, max_len: usize, label: StanceLabel) -> (EncodedPost, LookupStats) {
    let dim = lookup.dim();
    let mut data = vec![0.0; max_len * dim];
    let mut stats = LookupStats::default();
    let len = tokens.len().min(max_len);
    for (row, tok) in data.chunks_exact_mut(dim).zip(&tokens[..len]) {
        lookup.lookup_into(tok, row, &mut stats);
    }
    (EncodedPost { data, len, dim, label }, stats)
}

pub fn encode_posts(posts: &[LabelledPost], lookup: &EmbeddingLookup, max_len: usize) -> (Vec<EncodedPost>, LookupStats) {
    let mut stats = LookupStats::default();
    let encoded = posts
        .iter()
        .map(|p| {
            let (e, s) = encode(&p.tokens, lookup, max_len, p.label);
            stats += s;
            e
        })
        .collect();
    (encoded, stats)
}

/// Parameters of the text CNN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextCnn {
    pub config: ClassifierConfig,
    pub dim: usize,
    /// `num_filters x (kernel_width * dim)`; within a filter, offset `k`
    /// and embedding component `d` sit at `k * dim + d`.
    pub filters: Vec<f64>,
    pub filter_bias: Vec<f64>,
    /// `num_filters x num_classes`.
    pub dense: Vec<f64>,
    pub dense_bias: Vec<f64>,
}

/// Gradients with the same layout as [`TextCnn`]'s parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnGradients {
    pub filters: Vec<f64>,
    pub filter_bias: Vec<f64>,
    pub dense: Vec<f64>,
    pub dense_bias: Vec<f64>,
}

impl CnnGradients {
    fn zeros(cnn: &TextCnn) -> Self {
        CnnGradients {
            filters: vec![0.0; cnn.filters.len()],
            filter_bias: vec![0.0; cnn.filter_bias.len()],
            dense: vec![0.0; cnn.dense.len()],
            dense_bias: vec![0.0; cnn.dense_bias.len()],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.filters, &self.filter_bias, &self.dense, &self.dense_bias]
    }
}

/// Intermediate values of one forward pass needed for backprop.
#[derive(Clone, Debug)]
pub struct Activations {
    pub pooled: Vec<f64>,
    /// Position that won the max-pool per filter; `None` when every
    /// position was clipped by the ReLU.
    pub argmax: Vec<Option<usize>>,
    pub probs: Vec<f64>,
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Gradient of cross-entropy w.r.t. the logits for a target distribution.
pub fn softmax_ce_grad(probs: &[f64], target: &[f64]) -> Vec<f64> {
    probs.iter().zip(target).map(|(p, t)| p - t).collect()
}

impl TextCnn {
    /// Glorot-uniform filters, zero biases and a zero dense layer.
    pub fn new(config: ClassifierConfig, dim: usize) -> Result<Self, ClassifierError> {
        config.validate()?;
        if dim == 0 {
            return Err(ClassifierError::ConfigInvalid("embedding dim must be positive".into()));
        }
        let fan = config.kernel_width * dim;
        let limit = (6.0 / (fan + config.kernel_width * config.num_filters) as f64).sqrt();
        let mut rng = seeded_rng(config.seed, &[0xc0de]);
        let filters = (0..config.num_filters * fan).map(|_| rng.gen_range(-limit..=limit)).collect();
        Ok(TextCnn {
            filter_bias: vec![0.0; config.num_filters],
            dense: vec![0.0; config.num_filters * config.num_classes],
            dense_bias: vec![0.0; config.num_classes],
            filters,
            dim,
            config,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.filters.len() + self.filter_bias.len() + self.dense.len() + self.dense_bias.len()
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.filters, &self.filter_bias, &self.dense, &self.dense_bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.filters, &mut self.filter_bias, &mut self.dense, &mut self.dense_bias]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_shape(&self, post: &EncodedPost) -> Result<(), ClassifierError> {
        if post.dim != self.dim || post.data.len() != self.config.max_len * self.dim {
            return Err(ClassifierError::ShapeMismatch(format!(
                "expected {}x{} input, got {} values with dim {}",
                self.config.max_len,
                self.dim,
                post.data.len(),
                post.dim
            )));
        }
        Ok(())
    }

    fn activations(&self, post: &EncodedPost) -> Activations {
        let (nf, kw, dim) = (self.config.num_filters, self.config.kernel_width, self.dim);
        let width = kw * dim;
        let positions = self.config.positions();
        // Windows starting at or after `len` are all padding, so their score is the bias alone.
        let live = post.len.min(positions);
        let mut pooled = vec![0.0; nf];
        let mut argmax = vec![None; nf];
        for f in 0..nf {
            let w = &self.filters[f * width..(f + 1) * width];
            let b = self.filter_bias[f];
            let mut best = 0.0;
            let mut arg = None;
            for p in 0..live {
                let z = b + dot(w, &post.data[p * dim..p * dim + width]);
                if z > best {
                    best = z;
                    arg = Some(p);
                }
            }
            if live < positions && b > best {
                best = b;
                arg = Some(live);
            }
            pooled[f] = best;
            argmax[f] = arg;
        }
        let nc = self.config.num_classes;
        let mut logits = self.dense_bias.clone();
        for (f, &v) in pooled.iter().enumerate() {
            if v != 0.0 {
                axpy(v, &self.dense[f * nc..(f + 1) * nc], &mut logits);
            }
        }
        Activations { pooled, argmax, probs: softmax(&logits) }
    }

    /// Class probabilities, indexed by [`StanceLabel::index`].
    pub fn forward(&self, post: &EncodedPost) -> Result<Vec<f64>, ClassifierError> {
        self.check_shape(post)?;
        Ok(self.activations(post).probs)
    }

    pub fn predict(&self, post: &EncodedPost) -> Result<StanceLabel, ClassifierError> {
        let probs = self.forward(post)?;
        let best = if probs[1] > probs[0] { 1 } else { 0 };
        Ok(StanceLabel::from_index(best).expect("two classes"))
    }

    fn accumulate(&self, post: &EncodedPost, act: &Activations, weight: f64, grads: &mut CnnGradients) {
        let (kw, dim, nc) = (self.config.kernel_width, self.dim, self.config.num_classes);
        let width = kw * dim;
        let mut dlogits = act.probs.clone();
        dlogits[post.label.index()] -= 1.0;
        for d in &mut dlogits {
            *d *= weight;
        }
        axpy(1.0, &dlogits, &mut grads.dense_bias);
        for (f, (&pooled, arg)) in act.pooled.iter().zip(&act.argmax).enumerate() {
            let row = &self.dense[f * nc..(f + 1) * nc];
            if pooled != 0.0 {
                axpy(pooled, &dlogits, &mut grads.dense[f * nc..(f + 1) * nc]);
            }
            let Some(p) = *arg else { continue };
            let dpooled = dot(row, &dlogits);
            grads.filter_bias[f] += dpooled;
            if p < post.len {
                axpy(dpooled, &post.data[p * dim..p * dim + width], &mut grads.filters[f * width..(f + 1) * width]);
            }
        }
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn loss_and_grad(&self, batch: &[&EncodedPost]) -> Result<(f64, CnnGradients), ClassifierError> {
        let mut grads = CnnGradients::zeros(self);
        let weight = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        for post in batch {
            self.check_shape(post)?;
            let act = self.activations(post);
            loss -= act.probs[post.label.index()].max(f64::MIN_POSITIVE).ln() * weight;
            self.accumulate(post, &act, weight, &mut grads);
        }
        Ok((loss, grads))
    }

    pub fn loss(&self, batch: &[&EncodedPost]) -> Result<f64, ClassifierError> {
        let weight = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        for post in batch {
            let probs = self.forward(post)?;
            loss -= probs[post.label.index()].max(f64::MIN_POSITIVE).ln() * weight;
        }
        Ok(loss)
    }

    pub fn evaluate(&self, posts: &[EncodedPost]) -> Result<F1Report, ClassifierError> {
        let preds = posts.iter().map(|p| self.predict(p)).collect::<Result<Vec<_>, _>>()?;
        let golds: Vec<StanceLabel> = posts.iter().map(|p| p.label).collect();
        macro_f1(&preds, &golds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub eval_macro_f1: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainedClassifier {
    pub model: TextCnn,
    pub log: Vec<EpochLog>,
}

/// Trains for exactly `config.epochs` epochs of shuffled mini-batches with
/// Adam; the eval split is only monitored. The returned model is the one
/// after the last epoch.
pub fn train_classifier(
    train: &[EncodedPost],
    eval: &[EncodedPost],
    config: &ClassifierConfig,
) -> Result<TrainedClassifier, ClassifierError> {
    let first = train.first().ok_or(ClassifierError::EmptyTraining)?;
    let mut model = TextCnn::new(config.clone(), first.dim)?;
    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(&sizes);
    let mut rng = seeded_rng(config.seed, &[0x5ffe]);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EncodedPost> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = model.loss_and_grad(&batch)?;
            loss_sum += loss;
            batches += 1;
            adam.update(&mut model.tensors_mut(), &grads.tensors(), config.lr);
        }
        let eval_macro_f1 = if eval.is_empty() { None } else { Some(model.evaluate(eval)?.macro_f1) };
        log::debug!("epoch {epoch}: train loss {:.6}, eval macro-F1 {:?}", loss_sum / batches as f64, eval_macro_f1);
        log.push(EpochLog { epoch, train_loss: loss_sum / batches as f64, eval_macro_f1 });
    }
    Ok(TrainedClassifier { model, log })
}

/// Denominator floor of the relative error, below which differences are
/// judged on an absolute scale.
pub const REL_ERR_FLOOR: f64 = 1e-6;
pub const FD_EPSILON: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Largest relative error between backprop gradients of the mean batch loss
/// and central finite differences, over every parameter. The batch is put
/// in a canonical order first, so the result does not depend on the order
/// it was given in.
pub fn gradients_check(cnn: &TextCnn, batch: &[EncodedPost]) -> Result<f64, ClassifierError> {
    let mut refs: Vec<&EncodedPost> = batch.iter().collect();
    refs.sort_by(|a, b| {
        a.label.cmp(&b.label).then_with(|| {
            a.data
                .iter()
                .map(|v| v.to_bits())
                .cmp(b.data.iter().map(|v| v.to_bits()))
        })
    });
    let (_, grads) = cnn.loss_and_grad(&refs)?;
    let mut probe = cnn.clone();
    let mut worst: f64 = 0.0;
    for t in 0..4 {
        for i in 0..grads.tensors()[t].len() {
            let original = probe.tensors()[t][i];
            probe.tensors_mut()[t][i] = original + FD_EPSILON;
            let up = probe.loss(&refs)?;
            probe.tensors_mut()[t][i] = original - FD_EPSILON;
            let down = probe.loss(&refs)?;
            probe.tensors_mut()[t][i] = original;
            let numeric = (up - down) / (2.0 * FD_EPSILON);
            worst = worst.max(relative_error(grads.tensors()[t][i], numeric));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::matrix::Matrix;
    use rand_chacha::ChaCha8Rng;

    fn small_config(seed: u64) -> ClassifierConfig {
        ClassifierConfig { num_filters: 4, kernel_width: 3, max_len: 8, seed, ..Default::default() }
    }

    fn random_post(cfg: &ClassifierConfig, dim: usize, len: usize, rng: &mut ChaCha8Rng) -> EncodedPost {
        let mut data = vec![0.0; cfg.max_len * dim];
        for v in &mut data[..len * dim] {
            *v = rng.gen_range(-1.0..1.0);
        }
        let label = if rng.gen_bool(0.5) { StanceLabel::Support } else { StanceLabel::Oppose };
        EncodedPost { data, len, dim, label }
    }

    fn randomize(cnn: &mut TextCnn, rng: &mut ChaCha8Rng) {
        for t in cnn.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
    }

    /// Direct-summation reference for the whole forward pass.
    fn naive_forward(cnn: &TextCnn, x: &EncodedPost) -> Vec<f64> {
        let c = &cnn.config;
        let mut pooled = vec![0.0f64; c.num_filters];
        for f in 0..c.num_filters {
            let mut best = f64::NEG_INFINITY;
            for p in 0..=(c.max_len - c.kernel_width) {
                let mut z = cnn.filter_bias[f];
                for k in 0..c.kernel_width {
                    for d in 0..cnn.dim {
                        z += cnn.filters[f * c.kernel_width * cnn.dim + k * cnn.dim + d] * x.data[(p + k) * cnn.dim + d];
                    }
                }
                best = best.max(z.max(0.0));
            }
            pooled[f] = best;
        }
        let mut logits = vec![0.0; c.num_classes];
        for cl in 0..c.num_classes {
            logits[cl] = cnn.dense_bias[cl];
            for f in 0..c.num_filters {
                logits[cl] += pooled[f] * cnn.dense[f * c.num_classes + cl];
            }
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    }

    #[test]
    fn zero_input_gives_uniform_output() {
        let cnn = TextCnn::new(ClassifierConfig::default(), 6).unwrap();
        let post = EncodedPost { data: vec![0.0; 32 * 6], len: 0, dim: 6, label: StanceLabel::Support };
        assert_eq!(cnn.forward(&post).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let mut rng = seeded_rng(11, &[]);
        for trial in 0..20 {
            let cfg = ClassifierConfig { num_filters: 4, kernel_width: 5, max_len: 32, seed: trial, ..Default::default() };
            let mut cnn = TextCnn::new(cfg.clone(), 6).unwrap();
            randomize(&mut cnn, &mut rng);
            let len = rng.gen_range(0..=32);
            let post = random_post(&cfg, 6, len, &mut rng);
            let fast = cnn.forward(&post).unwrap();
            let slow = naive_forward(&cnn, &post);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "trial {trial}: {fast:?} vs {slow:?}");
            }
            assert!((fast.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shape_mismatch() {
        let cnn = TextCnn::new(small_config(0), 6).unwrap();
        let post = EncodedPost { data: vec![0.0; 10], len: 0, dim: 6, label: StanceLabel::Support };
        assert!(matches!(cnn.forward(&post), Err(ClassifierError::ShapeMismatch(_))));
    }

    #[test]
    fn parameter_counts() {
        let cnn = TextCnn::new(ClassifierConfig::default(), 10).unwrap();
        assert_eq!(cnn.filters.len(), 32 * 5 * 10);
        assert_eq!(cnn.parameter_count(), 32 * 50 + 32 + 64 + 2);
        assert_eq!(ClassifierConfig::default().positions(), 28);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = seeded_rng(5, &[]);
        let cfg = small_config(1);
        let mut cnn = TextCnn::new(cfg.clone(), 6).unwrap();
        randomize(&mut cnn, &mut rng);
        let batch: Vec<EncodedPost> = (0..5).map(|i| random_post(&cfg, 6, 2 + i, &mut rng)).collect();
        let err = gradients_check(&cnn, &batch).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn gradient_check_ignores_batch_order() {
        let mut rng = seeded_rng(6, &[]);
        let cfg = small_config(2);
        let mut cnn = TextCnn::new(cfg.clone(), 6).unwrap();
        randomize(&mut cnn, &mut rng);
        let batch: Vec<EncodedPost> = (0..6).map(|_| random_post(&cfg, 6, 5, &mut rng)).collect();
        let mut reversed = batch.clone();
        reversed.reverse();
        assert_eq!(gradients_check(&cnn, &batch).unwrap(), gradients_check(&cnn, &reversed).unwrap());
    }

    #[test]
    fn ce_gradient_vanishes_at_target() {
        let probs = softmax(&[0.3, -1.2]);
        assert!(softmax_ce_grad(&probs, &probs).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn max_pool_ignores_small_non_argmax_perturbations() {
        let mut rng = seeded_rng(8, &[]);
        let cfg = small_config(3);
        let mut cnn = TextCnn::new(cfg.clone(), 6).unwrap();
        randomize(&mut cnn, &mut rng);
        let post = random_post(&cfg, 6, 8, &mut rng);
        let act = cnn.activations(&post);
        // The last token only feeds the last position.
        let last = cfg.max_len - 1;
        if act.argmax.iter().all(|a| *a != Some(cfg.positions() - 1)) {
            let mut nudged = post.clone();
            nudged.data[last * 6] += 1e-9;
            let act2 = cnn.activations(&nudged);
            assert_eq!(act.pooled, act2.pooled);
        }
    }

    fn toy_lookup() -> EmbeddingLookup {
        let vocab = Vocabulary::from_parts(vec!["a".into(), "b".into()], vec![1, 1], 1).unwrap();
        EmbeddingLookup::new(vocab, Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]))
    }

    #[test]
    fn encode_truncates_and_pads() {
        let lookup = toy_lookup();
        let long: Vec<String> = (0..40).map(|i| if i % 2 == 0 { "a".into() } else { "b".into() }).collect();
        let (e, _) = encode(&long, &lookup, 32, StanceLabel::Support);
        assert_eq!(e.len, 32);
        assert_eq!(e.data.len(), 64);
        assert_eq!(&e.data[62..], &[3.0, 4.0]);
        let short: Vec<String> = vec!["a".into(), "zz".into(), "b".into()];
        let (e, stats) = encode(&short, &lookup, 32, StanceLabel::Oppose);
        assert_eq!(&e.data[..6], &[1.0, 2.0, 0.0, 0.0, 3.0, 4.0]);
        assert!(e.data[6..].iter().all(|&v| v == 0.0));
        assert_eq!(stats, LookupStats { hits: 2, oov: 1 });
        let (e, _) = encode(&["q".to_string(), "r".to_string()], &lookup, 32, StanceLabel::Oppose);
        assert!(e.data.iter().all(|&v| v == 0.0));
    }

    fn separable(n: usize, seed: u64) -> Vec<EncodedPost> {
        let mut rng = seeded_rng(seed, &[77]);
        let (max_len, dim) = (32, 8);
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { StanceLabel::Support } else { StanceLabel::Oppose };
                let sign = if label == StanceLabel::Support { 1.0 } else { -1.0 };
                let len = rng.gen_range(6..20);
                let mut data = vec![0.0; max_len * dim];
                for row in data[..len * dim].chunks_exact_mut(dim) {
                    for (d, v) in row.iter_mut().enumerate() {
                        let centre = if d < 4 { sign } else { 0.0 };
                        *v = centre + rng.gen_range(-0.3..0.3);
                    }
                }
                EncodedPost { data, len, dim, label }
            })
            .collect()
    }

    #[test]
    fn training_reduces_loss_and_fits_separable_data() {
        for seed in 0..5 {
            let data = separable(200, seed);
            let cfg = ClassifierConfig { seed, ..Default::default() };
            let trained = train_classifier(&data, &data[..20], &cfg).unwrap();
            assert_eq!(trained.log.len(), 10);
            assert!(trained.log[9].train_loss < trained.log[0].train_loss, "seed {seed}: {:?}", trained.log);
            let acc = data.iter().filter(|p| trained.model.predict(p).unwrap() == p.label).count() as f64 / 200.0;
            assert!(acc >= 0.95, "seed {seed}: accuracy {acc}");
            assert!(trained.model.is_finite());
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable(64, 3);
        let cfg = ClassifierConfig { seed: 9, ..Default::default() };
        let a = train_classifier(&data, &[], &cfg).unwrap();
        let b = train_classifier(&data, &[], &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert!(matches!(train_classifier(&[], &[], &cfg), Err(ClassifierError::EmptyTraining)));
    }
}
