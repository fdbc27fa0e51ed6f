//! On-disk corpus layout:
//!
//! ```text
//! <dir>/slices/<year>.txt                        one document per line, tokens space-separated
//! <dir>/labelled/<year>/{train,eval,test}.jsonl  one LabelledPost per line
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{CorpusError, LabelledDataset, LabelledPost, TemporalSlice, YearSplits};

const SPLITS: [&str; 3] = ["train", "eval", "test"];

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> CorpusError {
    CorpusError::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

pub fn write_slice(path: &Path, slice: &TemporalSlice) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    for doc in &slice.documents {
        writeln!(out, "{}", doc.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_slice(path: &Path, year: i32) -> Result<TemporalSlice, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut documents = Vec::new();
    for line in reader.lines() {
        documents.push(line?.split_whitespace().map(str::to_string).collect());
    }
    Ok(TemporalSlice { year, documents })
}

pub fn write_posts(path: &Path, posts: &[LabelledPost]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    for post in posts {
        serde_json::to_writer(&mut out, post).map_err(|e| CorpusError::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_posts(path: &Path) -> Result<Vec<LabelledPost>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut posts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        posts.push(serde_json::from_str(&line).map_err(|e| parse_error(path, i + 1, e.to_string()))?);
    }
    Ok(posts)
}

pub fn write_corpus_dir(dir: &Path, slices: &[TemporalSlice], dataset: &LabelledDataset) -> Result<(), CorpusError> {
    fs::create_dir_all(dir.join("slices"))?;
    for slice in slices {
        write_slice(&dir.join("slices").join(format!("{}.txt", slice.year)), slice)?;
    }
    for (year, splits) in &dataset.years {
        let ydir = dir.join("labelled").join(year.to_string());
        fs::create_dir_all(&ydir)?;
        for name in SPLITS {
            let posts = splits.split(name).expect("known split name");
            write_posts(&ydir.join(format!("{name}.jsonl")), posts)?;
        }
    }
    Ok(())
}

fn year_of(path: &Path) -> Option<i32> {
    path.file_stem()?.to_str()?.parse().ok()
}

/// Reads every slice and every labelled year present under `dir`.
pub fn read_corpus_dir(dir: &Path) -> Result<(Vec<TemporalSlice>, LabelledDataset), CorpusError> {
    let mut slices = BTreeMap::new();
    for entry in fs::read_dir(dir.join("slices"))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            let year = year_of(&path).ok_or_else(|| parse_error(&path, 0, "file name is not a year"))?;
            slices.insert(year, read_slice(&path, year)?);
        }
    }
    let mut years = BTreeMap::new();
    let labelled = dir.join("labelled");
    if labelled.is_dir() {
        for entry in fs::read_dir(&labelled)? {
            let path = entry?.path();
            if !path.is_dir() {
                continue;
            }
            let year: i32 = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| parse_error(&path, 0, "directory name is not a year"))?;
            let splits = YearSplits {
                train: read_posts(&path.join("train.jsonl"))?,
                eval: read_posts(&path.join("eval.jsonl"))?,
                test: read_posts(&path.join("test.jsonl"))?,
            };
            years.insert(year, splits);
        }
    }
    Ok((slices.into_values().collect(), LabelledDataset { years }))
}
