use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierConfig, ClassifierError, EncodedPost, TextCnn};

/// First line of a checkpoint file. The parameter tensors follow as raw
/// little-endian `f64` values in the order filters, filter bias, dense,
/// dense bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ClassifierConfig,
    pub dim: usize,
    pub lengths: [usize; 4],
}

pub fn save_checkpoint(path: &Path, cnn: &TextCnn) -> Result<(), ClassifierError> {
    let tensors = cnn.tensors();
    let header = CheckpointHeader {
        config: cnn.config.clone(),
        dim: cnn.dim,
        lengths: [tensors[0].len(), tensors[1].len(), tensors[2].len(), tensors[3].len()],
    };
    let mut out = BufWriter::new(File::create(path)?);
    let json = serde_json::to_string(&header).map_err(|e| ClassifierError::Checkpoint(e.to_string()))?;
    writeln!(out, "{json}")?;
    for t in tensors {
        for v in t {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TextCnn, ClassifierError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: CheckpointHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| ClassifierError::Checkpoint(format!("{}: {e}", path.display())))?;
    let mut cnn = TextCnn::new(header.config.clone(), header.dim)?;
    let expected = cnn.tensors().map(|t| t.len());
    if expected != header.lengths {
        return Err(ClassifierError::Checkpoint(format!(
            "{}: tensor lengths {:?} do not match the configuration ({:?})",
            path.display(),
            header.lengths,
            expected
        )));
    }
    let mut buf = [0u8; 8];
    for t in cnn.tensors_mut() {
        for v in t.iter_mut() {
            reader
                .read_exact(&mut buf)
                .map_err(|_| ClassifierError::Checkpoint(format!("{}: truncated parameters", path.display())))?;
            *v = f64::from_le_bytes(buf);
        }
    }
    if reader.read(&mut buf)? != 0 {
        return Err(ClassifierError::Checkpoint(format!("{}: trailing bytes", path.display())));
    }
    Ok(cnn)
}

/// Writes `id,p_support,p_oppose,predicted,gold` rows.
pub fn write_predictions(path: &Path, cnn: &TextCnn, posts: &[EncodedPost]) -> Result<(), ClassifierError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ClassifierError::Checkpoint(e.to_string()))?;
    let csv_err = |e: csv::Error| ClassifierError::Checkpoint(e.to_string());
    w.write_record(["id", "p_support", "p_oppose", "predicted", "gold"]).map_err(csv_err)?;
    for (i, post) in posts.iter().enumerate() {
        let probs = cnn.forward(post)?;
        let predicted = cnn.predict(post)?;
        w.write_record([
            i.to_string(),
            format!("{:.6}", probs[0]),
            format!("{:.6}", probs[1]),
            predicted.to_string(),
            post.label.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn checkpoint_round_trips_bitwise() {
        let cfg = ClassifierConfig { num_filters: 3, kernel_width: 2, max_len: 5, seed: 4, ..Default::default() };
        let mut cnn = TextCnn::new(cfg, 3).unwrap();
        let mut rng = crate::rng::seeded_rng(1, &[]);
        for v in cnn.dense.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &cnn).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), cnn);

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(ClassifierError::Checkpoint(_))));
    }
}
