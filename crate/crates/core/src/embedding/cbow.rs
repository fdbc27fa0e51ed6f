//! The CBOW negative-sampling objective and its SGD loop.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingConfig, EmbeddingError, NoiseTable};
use crate::matrix::{axpy, dot, Matrix};

/// `ln σ(x)` without overflow.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss of one CBOW example and its gradients, keyed by row id.
#[derive(Clone, Debug, PartialEq)]
pub struct CbowGradients {
    pub loss: f64,
    pub input: BTreeMap<u32, Vec<f64>>,
    pub output: BTreeMap<u32, Vec<f64>>,
}

fn check_ids(ids: &[u32], rows: usize) -> Result<(), EmbeddingError> {
    match ids.iter().find(|&&id| id as usize >= rows) {
        Some(&id) => Err(EmbeddingError::IdOutOfRange { id, len: rows }),
        None => Ok(()),
    }
}

/// `-ln σ(h·c_center) - Σ ln σ(-h·c_neg)` with `h` the mean of the context
/// rows of `input`.
pub fn loss_and_grad(
    input: &Matrix,
    output: &Matrix,
    center: u32,
    context: &[u32],
    negatives: &[u32],
) -> Result<CbowGradients, EmbeddingError> {
    if context.is_empty() {
        return Err(EmbeddingError::EmptyContext);
    }
    check_ids(context, input.rows())?;
    check_ids(&[center], output.rows())?;
    check_ids(negatives, output.rows())?;
    let dim = input.cols();
    let scale = 1.0 / context.len() as f64;
    let mut h = vec![0.0; dim];
    for &c in context {
        axpy(scale, input.row(c as usize), &mut h);
    }
    let mut grad_h = vec![0.0; dim];
    let mut out_grads: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut loss = 0.0;
    let targets = std::iter::once((center, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (target, label) in targets {
        let row = output.row(target as usize);
        let score = dot(&h, row);
        loss -= if label == 1.0 { log_sigmoid(score) } else { log_sigmoid(-score) };
        let g = sigmoid(score) - label;
        axpy(g, row, &mut grad_h);
        axpy(g, &h, out_grads.entry(target).or_insert_with(|| vec![0.0; dim]));
    }
    let mut in_grads: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for &c in context {
        axpy(scale, &grad_h, in_grads.entry(c).or_insert_with(|| vec![0.0; dim]));
    }
    Ok(CbowGradients { loss, input: in_grads, output: out_grads })
}

/// Output matrix used while training: updated normally, or held fixed.
pub(crate) enum ContextMatrix<'a> {
    Trainable(&'a mut Matrix),
    Frozen(&'a Matrix),
}

impl ContextMatrix<'_> {
    fn row(&self, i: usize) -> &[f64] {
        match self {
            ContextMatrix::Trainable(m) => m.row(i),
            ContextMatrix::Frozen(m) => m.row(i),
        }
    }
}

struct Scratch {
    h: Vec<f64>,
    grad_h: Vec<f64>,
    context: Vec<u32>,
}

/// One in-place SGD step; returns the example loss.
fn sgd_step(
    input: &mut Matrix,
    output: &mut ContextMatrix<'_>,
    center: u32,
    negatives: &[u32],
    lr: f64,
    scratch: &mut Scratch,
) -> f64 {
    let Scratch { h, grad_h, context } = scratch;
    let scale = 1.0 / context.len() as f64;
    h.fill(0.0);
    grad_h.fill(0.0);
    for &c in context.iter() {
        axpy(scale, input.row(c as usize), h);
    }
    let mut loss = 0.0;
    let targets = std::iter::once((center, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (target, label) in targets {
        let score = dot(h, output.row(target as usize));
        loss -= if label == 1.0 { log_sigmoid(score) } else { log_sigmoid(-score) };
        let g = sigmoid(score) - label;
        axpy(g, output.row(target as usize), grad_h);
        if let ContextMatrix::Trainable(m) = output {
            axpy(-lr * g, h, m.row_mut(target as usize));
        }
    }
    for &c in context.iter() {
        axpy(-lr * scale, grad_h, input.row_mut(c as usize));
    }
    loss
}

/// Runs `cfg.epochs` passes over `docs`. The learning rate decays linearly
/// from `initial_lr` to `min_lr` over all token positions of all epochs.
/// Returns the mean example loss of each epoch.
pub(crate) fn train_epochs(
    input: &mut Matrix,
    mut output: ContextMatrix<'_>,
    docs: &[Vec<u32>],
    noise: &NoiseTable,
    cfg: &EmbeddingConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let tokens: usize = docs.iter().map(Vec::len).sum();
    let total = (tokens * cfg.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut scratch = Scratch {
        h: vec![0.0; input.cols()],
        grad_h: vec![0.0; input.cols()],
        context: Vec::with_capacity(2 * cfg.window),
    };
    let mut negatives = Vec::with_capacity(cfg.negatives);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (mut loss_sum, mut steps) = (0.0, 0usize);
        for doc in docs {
            for pos in 0..doc.len() {
                let lr = cfg.initial_lr - (cfg.initial_lr - cfg.min_lr) * (processed as f64 / total);
                processed += 1;
                let reach = rng.gen_range(1..=cfg.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach + 1).min(doc.len());
                scratch.context.clear();
                scratch.context.extend_from_slice(&doc[lo..pos]);
                scratch.context.extend_from_slice(&doc[pos + 1..hi]);
                if scratch.context.is_empty() {
                    continue;
                }
                let center = doc[pos];
                negatives.clear();
                for _ in 0..cfg.negatives {
                    let n = noise.sample(rng);
                    if n != center {
                        negatives.push(n);
                    }
                }
                loss_sum += sgd_step(input, &mut output, center, &negatives, lr, &mut scratch);
                steps += 1;
            }
        }
        epoch_losses.push(if steps > 0 { loss_sum / steps as f64 } else { 0.0 });
    }
    epoch_losses
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-0.5..0.5)).collect())
    }

    #[test]
    fn zero_context_matrix_gives_ln2_per_term() {
        let mut rng = seeded_rng(1, &[]);
        let input = random_matrix(20, 8, &mut rng);
        let output = Matrix::zeros(20, 8);
        let g = loss_and_grad(&input, &output, 3, &[1, 2, 4], &[5, 6, 7, 8]).unwrap();
        assert!((g.loss - 5.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_ids() {
        let m = Matrix::zeros(4, 2);
        assert!(matches!(loss_and_grad(&m, &m, 0, &[], &[1]), Err(EmbeddingError::EmptyContext)));
        assert!(matches!(
            loss_and_grad(&m, &m, 0, &[9], &[1]),
            Err(EmbeddingError::IdOutOfRange { id: 9, len: 4 })
        ));
        assert!(matches!(
            loss_and_grad(&m, &m, 4, &[1], &[1]),
            Err(EmbeddingError::IdOutOfRange { id: 4, .. })
        ));
    }

    #[test]
    fn touched_rows_only() {
        let mut rng = seeded_rng(2, &[]);
        let input = random_matrix(20, 8, &mut rng);
        let output = random_matrix(20, 8, &mut rng);
        let g = loss_and_grad(&input, &output, 0, &[3, 3, 5], &[7, 9, 7]).unwrap();
        assert_eq!(g.input.keys().copied().collect::<Vec<_>>(), [3, 5]);
        assert_eq!(g.output.keys().copied().collect::<Vec<_>>(), [0, 7, 9]);
    }

    #[test]
    fn sgd_step_matches_gradient() {
        let mut rng = seeded_rng(3, &[]);
        let mut input = random_matrix(10, 6, &mut rng);
        let mut output = random_matrix(10, 6, &mut rng);
        let (in0, out0) = (input.clone(), output.clone());
        let g = loss_and_grad(&input, &output, 1, &[2, 3], &[4]).unwrap();
        let lr = 0.1;
        let mut scratch = Scratch { h: vec![0.0; 6], grad_h: vec![0.0; 6], context: vec![2, 3] };
        let loss = sgd_step(&mut input, &mut ContextMatrix::Trainable(&mut output), 1, &[4], lr, &mut scratch);
        assert!((loss - g.loss).abs() < 1e-12);
        for (id, grad) in &g.input {
            for d in 0..6 {
                let expect = in0.row(*id as usize)[d] - lr * grad[d];
                assert!((input.row(*id as usize)[d] - expect).abs() < 1e-12);
            }
        }
        for (id, grad) in &g.output {
            for d in 0..6 {
                let expect = out0.row(*id as usize)[d] - lr * grad[d];
                assert!((output.row(*id as usize)[d] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!(log_sigmoid(-800.0).is_finite());
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_sigmoid(800.0), 0.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
