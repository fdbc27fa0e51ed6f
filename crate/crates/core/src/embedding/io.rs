//! word2vec-style text persistence.
//!
//! `<path>` holds the word vectors: a `<vocab_size> <dim>` header, then one
//! line per word with the word followed by `dim` decimals. `<path>.ctx`
//! holds the context vectors in the same layout, and `<path>.vocab.json`
//! the word counts and `min_count`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingModel};
use crate::corpus::Vocabulary;
use crate::matrix::Matrix;

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_vectors(path: &Path, words: &[String], vectors: &Matrix) -> Result<(), EmbeddingError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{} {}", words.len(), vectors.cols())?;
    for (i, word) in words.iter().enumerate() {
        w.write_all(word.as_bytes())?;
        for v in vectors.row(i) {
            write!(w, " {v:.8}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vectors(path: &Path) -> Result<(Vec<String>, Matrix), EmbeddingError> {
    let name = path.display().to_string();
    let err = |line: usize, msg: String| EmbeddingError::Format { path: name.clone(), line, msg };
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.ok_or_else(|| err(1, "missing header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| err(1, format!("bad header {header:?}: {e}")))?;
    let [rows, dim] = dims[..] else {
        return Err(err(1, format!("header must be '<vocab_size> <dim>', got {header:?}")));
    };
    let mut words = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    for i in 0..rows {
        let line_no = i + 2;
        let line = lines
            .next()
            .transpose()?
            .ok_or_else(|| err(line_no, format!("expected {rows} word lines, found {i}")))?;
        let mut parts = line.split_whitespace();
        let word = parts.next().ok_or_else(|| err(line_no, "empty line".into()))?;
        let values: Vec<f64> = parts
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(line_no, format!("word {word:?}: {e}")))?;
        if values.len() != dim {
            return Err(err(
                line_no,
                format!("word {word:?} has {} components, expected {dim}", values.len()),
            ));
        }
        words.push(word.to_string());
        data.extend(values);
    }
    if let Some(extra) = lines.next().transpose()? {
        if !extra.trim().is_empty() {
            return Err(err(rows + 2, "more word lines than the header declares".into()));
        }
    }
    Ok((words, Matrix::from_vec(rows, dim, data)))
}

#[derive(Serialize, Deserialize)]
struct VocabSidecar {
    min_count: u64,
    counts: Vec<u64>,
}

pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<(), EmbeddingError> {
    let words = model.vocab().words();
    write_vectors(path, words, model.input())?;
    write_vectors(&sidecar(path, ".ctx"), words, model.output())?;
    let side = VocabSidecar { min_count: model.vocab().min_count(), counts: model.vocab().counts().to_vec() };
    let json = serde_json::to_string(&side).map_err(|e| EmbeddingError::ConfigInvalid(e.to_string()))?;
    std::fs::write(sidecar(path, ".vocab.json"), json)?;
    Ok(())
}

/// Loads a model written by [`save_model`]. Without a counts sidecar every
/// word gets count 1.
pub fn load_model(path: &Path) -> Result<EmbeddingModel, EmbeddingError> {
    let (words, input) = read_vectors(path)?;
    let ctx_path = sidecar(path, ".ctx");
    let (ctx_words, output) = read_vectors(&ctx_path)?;
    if ctx_words != words {
        return Err(EmbeddingError::Format {
            path: ctx_path.display().to_string(),
            line: 1,
            msg: "context vocabulary differs from word vocabulary".into(),
        });
    }
    let vocab_path = sidecar(path, ".vocab.json");
    let (counts, min_count) = match std::fs::read_to_string(&vocab_path) {
        Ok(s) => {
            let side: VocabSidecar = serde_json::from_str(&s).map_err(|e| EmbeddingError::Format {
                path: vocab_path.display().to_string(),
                line: e.line(),
                msg: e.to_string(),
            })?;
            (side.counts, side.min_count)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => (vec![1; words.len()], 1),
        Err(e) => return Err(e.into()),
    };
    let vocab = Vocabulary::from_parts(words, counts, min_count)?;
    EmbeddingModel::from_parts(vocab, input, output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{train_cbow, EmbeddingConfig};

    fn model() -> EmbeddingModel {
        let corpus: Vec<Vec<String>> = ["a b c d", "b c d e", "e f a"]
            .iter()
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect();
        train_cbow(&corpus, &EmbeddingConfig { dim: 6, min_count: 1, ..Default::default() }).unwrap()
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = model();
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.vocab().words(), m.vocab().words());
        assert_eq!(back.vocab().counts(), m.vocab().counts());
        for (a, b) in [(m.input(), back.input()), (m.output(), back.output())] {
            let max = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(max < 1e-6, "{max}");
        }
    }

    #[test]
    fn truncated_file_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "3 4\na 1 2 3 4\nb 1 2 3 4\n").unwrap();
        match read_vectors(&path) {
            Err(EmbeddingError::Format { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dim_mismatch_names_word() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "2 3\na 1 2 3\nbeta 1 2\n").unwrap();
        match read_vectors(&path) {
            Err(EmbeddingError::Format { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("beta"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "two 3\n").unwrap();
        assert!(matches!(read_vectors(&path), Err(EmbeddingError::Format { line: 1, .. })));
    }
}
