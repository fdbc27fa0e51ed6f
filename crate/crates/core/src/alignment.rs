//! Compass-based diachronic alignment and the five embedding strategies.
//!
//! A compass is the context matrix of a CBOW model trained on the
//! concatenation of several slices. Each slice is then trained against that
//! matrix with the context side frozen, so every slice's word vectors live
//! in the coordinate system the compass defines.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{TemporalSlice, Vocabulary};
use crate::embedding::{
    encode_docs, init_input, train_cbow, train_epochs, update_incremental, write_vectors, ContextMatrix,
    EmbeddingConfig, EmbeddingError, EmbeddingLookup, NoiseTable, STREAM_TRAIN,
};
use crate::matrix::Matrix;
use crate::rng::seeded_rng;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("no slice for year {0}")]
    MissingSlice(i32),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Frozen context matrix shared by every slice aligned against it.
#[derive(Debug)]
pub struct CompassModel {
    vocab: Vocabulary,
    context: Matrix,
    noise: NoiseTable,
    config: EmbeddingConfig,
    years: Vec<i32>,
}

impl CompassModel {
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn context(&self) -> &Matrix {
        &self.context
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.config
    }

    /// Years whose slices the compass was trained on.
    pub fn years(&self) -> &[i32] {
        &self.years
    }
}

/// Trains CBOW over the concatenation of `slices` and keeps its vocabulary
/// and context matrix.
pub fn train_compass(slices: &[&TemporalSlice], cfg: &EmbeddingConfig) -> Result<CompassModel, AlignmentError> {
    let corpus: Vec<Vec<String>> = slices.iter().flat_map(|s| s.documents.iter().cloned()).collect();
    let (vocab, _, context, noise) = train_cbow(&corpus, cfg)?.into_parts();
    Ok(CompassModel {
        vocab,
        context,
        noise,
        config: cfg.clone(),
        years: slices.iter().map(|s| s.year).collect(),
    })
}

/// Word vectors of one year, trained against a compass.
#[derive(Clone, Debug)]
pub struct AlignedSlice {
    pub year: i32,
    input: Matrix,
    compass: Arc<CompassModel>,
}

impl AlignedSlice {
    pub fn input(&self) -> &Matrix {
        &self.input
    }

    pub fn compass(&self) -> &Arc<CompassModel> {
        &self.compass
    }

    pub fn lookup(&self) -> EmbeddingLookup {
        EmbeddingLookup::new(self.compass.vocab.clone(), self.input.clone())
    }

    /// Writes the slice vectors to `path` and the compass context to
    /// `<path>.ctx`, both in the embedding text format.
    pub fn save(&self, path: &Path) -> Result<(), AlignmentError> {
        let words = self.compass.vocab.words();
        write_vectors(path, words, &self.input)?;
        let mut ctx = path.as_os_str().to_owned();
        ctx.push(".ctx");
        write_vectors(Path::new(&ctx), words, &self.compass.context)?;
        Ok(())
    }
}

/// Trains fresh word vectors for `slice` with the compass context frozen.
/// Words missing from the compass vocabulary are skipped.
pub fn align_slice(
    compass: &Arc<CompassModel>,
    slice: &TemporalSlice,
    cfg: &EmbeddingConfig,
) -> Result<AlignedSlice, AlignmentError> {
    cfg.validate()?;
    if slice.token_count() == 0 {
        return Err(EmbeddingError::EmptySlice(slice.year).into());
    }
    if cfg.dim != compass.context.cols() {
        return Err(EmbeddingError::ConfigInvalid(format!(
            "config dim {} does not match compass dim {}",
            cfg.dim,
            compass.context.cols()
        ))
        .into());
    }
    let mut input = init_input(compass.vocab.len(), cfg.dim, cfg.seed, 0);
    let docs = encode_docs(&compass.vocab, &slice.documents);
    let mut rng = seeded_rng(cfg.seed, &[STREAM_TRAIN]);
    train_epochs(
        &mut input,
        ContextMatrix::Frozen(&compass.context),
        &docs,
        &compass.noise,
        cfg,
        &mut rng,
    );
    Ok(AlignedSlice { year: slice.year, input, compass: Arc::clone(compass) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    /// Source-year embedding only.
    #[serde(rename = "DTE")]
    Dte,
    /// Model updated year by year through the target year.
    #[serde(rename = "ITE")]
    Ite,
    /// Model trained on the source year, updated once with the target year.
    #[serde(rename = "2TE")]
    TwoTe,
    /// Compass over all years through the target; target slice aligned.
    #[serde(rename = "ITA")]
    Ita,
    /// Compass over source and target; target slice aligned.
    #[serde(rename = "2TA")]
    TwoTa,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] =
        [StrategyKind::Dte, StrategyKind::Ite, StrategyKind::TwoTe, StrategyKind::Ita, StrategyKind::TwoTa];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Dte => "DTE",
            StrategyKind::Ite => "ITE",
            StrategyKind::TwoTe => "2TE",
            StrategyKind::Ita => "ITA",
            StrategyKind::TwoTa => "2TA",
        }
    }

    pub fn is_alignment(self) -> bool {
        matches!(self, StrategyKind::Ita | StrategyKind::TwoTa)
    }

    /// Parses a comma-separated list; `all` expands to every strategy.
    pub fn parse_list(s: &str) -> Result<Vec<StrategyKind>, AlignmentError> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(Self::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = AlignmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| AlignmentError::UnknownStrategy(s.to_string()))
    }
}

/// Which years feed the embedding for one (source, target) pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrategyPlan {
    pub kind: StrategyKind,
    pub source_year: i32,
    pub target_year: i32,
    pub data_years: Vec<i32>,
}

impl StrategyPlan {
    /// `first_year` is the earliest year of unlabelled data; the incremental
    /// strategies start there.
    pub fn new(kind: StrategyKind, source_year: i32, target_year: i32, first_year: i32) -> Result<Self, AlignmentError> {
        if source_year > target_year {
            return Err(AlignmentError::InvalidPlan(format!(
                "source {source_year} is after target {target_year}"
            )));
        }
        if first_year > source_year {
            return Err(AlignmentError::InvalidPlan(format!(
                "first year {first_year} is after source {source_year}"
            )));
        }
        let data_years = match kind {
            StrategyKind::Dte => vec![source_year],
            StrategyKind::Ite | StrategyKind::Ita => (first_year..=target_year).collect(),
            StrategyKind::TwoTe | StrategyKind::TwoTa if source_year == target_year => vec![source_year],
            StrategyKind::TwoTe | StrategyKind::TwoTa => vec![source_year, target_year],
        };
        Ok(StrategyPlan { kind, source_year, target_year, data_years })
    }

    pub fn gap(&self) -> i32 {
        self.target_year - self.source_year
    }
}

/// Provides slices by year.
pub trait SliceProvider {
    fn slice(&self, year: i32) -> Option<&TemporalSlice>;
}

impl SliceProvider for BTreeMap<i32, TemporalSlice> {
    fn slice(&self, year: i32) -> Option<&TemporalSlice> {
        self.get(&year)
    }
}

impl SliceProvider for [TemporalSlice] {
    fn slice(&self, year: i32) -> Option<&TemporalSlice> {
        self.iter().find(|s| s.year == year)
    }
}

impl SliceProvider for Vec<TemporalSlice> {
    fn slice(&self, year: i32) -> Option<&TemporalSlice> {
        self.as_slice().slice(year)
    }
}

/// How the model-update strategies consume their years.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IteMode {
    /// Train on the first year, then update year by year.
    #[default]
    Incremental,
    /// Train once on the concatenation of all plan years.
    Retrain,
}

impl FromStr for IteMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "incremental" => Ok(IteMode::Incremental),
            "retrain" => Ok(IteMode::Retrain),
            _ => Err(format!("unknown ITE mode {s:?} (expected incremental or retrain)")),
        }
    }
}

fn slices_for<'a, P: SliceProvider + ?Sized>(
    provider: &'a P,
    years: &[i32],
) -> Result<Vec<&'a TemporalSlice>, AlignmentError> {
    years
        .iter()
        .map(|&y| provider.slice(y).ok_or(AlignmentError::MissingSlice(y)))
        .collect()
}

fn compass_for<P: SliceProvider + ?Sized>(
    plan: &StrategyPlan,
    provider: &P,
    cfg: &EmbeddingConfig,
) -> Result<Arc<CompassModel>, AlignmentError> {
    let slices = slices_for(provider, &plan.data_years)?;
    Ok(Arc::new(train_compass(&slices, cfg)?))
}

/// Builds the single lookup used to encode both training and test text.
pub fn build_embedding<P: SliceProvider + ?Sized>(
    plan: &StrategyPlan,
    provider: &P,
    cfg: &EmbeddingConfig,
    ite_mode: IteMode,
) -> Result<EmbeddingLookup, AlignmentError> {
    let slices = slices_for(provider, &plan.data_years)?;
    match plan.kind {
        StrategyKind::Dte => Ok(train_cbow(&slices[0].documents, cfg)?.lookup()),
        StrategyKind::Ite | StrategyKind::TwoTe => match ite_mode {
            IteMode::Incremental => {
                let mut model = train_cbow(&slices[0].documents, cfg)?;
                for slice in &slices[1..] {
                    model = update_incremental(model, slice, cfg)?;
                }
                Ok(model.lookup())
            }
            IteMode::Retrain => {
                let corpus: Vec<Vec<String>> = slices.iter().flat_map(|s| s.documents.iter().cloned()).collect();
                Ok(train_cbow(&corpus, cfg)?.lookup())
            }
        },
        StrategyKind::Ita | StrategyKind::TwoTa => {
            let compass = Arc::new(train_compass(&slices, cfg)?);
            let target = provider.slice(plan.target_year).ok_or(AlignmentError::MissingSlice(plan.target_year))?;
            Ok(align_slice(&compass, target, cfg)?.lookup())
        }
    }
}

/// Source text through the source-year aligned slice and test text through
/// the target-year slice, both against one compass. Non-alignment
/// strategies return the same lookup twice.
pub fn build_dual_embedding<P: SliceProvider + ?Sized>(
    plan: &StrategyPlan,
    provider: &P,
    cfg: &EmbeddingConfig,
    ite_mode: IteMode,
) -> Result<(EmbeddingLookup, EmbeddingLookup), AlignmentError> {
    if !plan.kind.is_alignment() {
        let lookup = build_embedding(plan, provider, cfg, ite_mode)?;
        return Ok((lookup.clone(), lookup));
    }
    let compass = compass_for(plan, provider, cfg)?;
    let source = provider.slice(plan.source_year).ok_or(AlignmentError::MissingSlice(plan.source_year))?;
    let target = provider.slice(plan.target_year).ok_or(AlignmentError::MissingSlice(plan.target_year))?;
    Ok((align_slice(&compass, source, cfg)?.lookup(), align_slice(&compass, target, cfg)?.lookup()))
}

/// Provenance written next to persisted strategy embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingManifest {
    pub strategy: StrategyKind,
    pub source_year: i32,
    pub target_year: i32,
    pub data_years: Vec<i32>,
    pub seed: u64,
}

impl EmbeddingManifest {
    pub fn new(plan: &StrategyPlan, seed: u64) -> Self {
        EmbeddingManifest {
            strategy: plan.kind,
            source_year: plan.source_year,
            target_year: plan.target_year,
            data_years: plan.data_years.clone(),
            seed,
        }
    }
}

/// Writes `vectors.txt` and `manifest.json` into `dir`.
pub fn save_lookup(dir: &Path, lookup: &EmbeddingLookup, manifest: &EmbeddingManifest) -> Result<(), AlignmentError> {
    std::fs::create_dir_all(dir)?;
    write_vectors(&dir.join("vectors.txt"), lookup.vocab().words(), lookup.vectors())?;
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocabulary;
    use std::cell::RefCell;
    use std::collections::BTreeSet;

    struct Tracking {
        slices: BTreeMap<i32, TemporalSlice>,
        reads: RefCell<BTreeSet<i32>>,
    }

    impl SliceProvider for Tracking {
        fn slice(&self, year: i32) -> Option<&TemporalSlice> {
            self.reads.borrow_mut().insert(year);
            self.slices.get(&year)
        }
    }

    fn slice(year: i32, text: &str, copies: usize) -> TemporalSlice {
        let doc: Vec<String> = text.split_whitespace().map(String::from).collect();
        TemporalSlice { year, documents: vec![doc; copies] }
    }

    fn toy_slices() -> BTreeMap<i32, TemporalSlice> {
        (2014..=2019)
            .map(|y| (y, slice(y, &format!("a b c y{y} d e a"), 20)))
            .collect()
    }

    fn cfg(seed: u64) -> EmbeddingConfig {
        EmbeddingConfig { dim: 8, window: 2, epochs: 2, min_count: 1, seed, ..Default::default() }
    }

    #[test]
    fn plans_follow_data_columns() {
        let p = |k, s, t| StrategyPlan::new(k, s, t, 2014).unwrap().data_years;
        assert_eq!(p(StrategyKind::Ite, 2014, 2017), [2014, 2015, 2016, 2017]);
        assert_eq!(p(StrategyKind::TwoTe, 2014, 2017), [2014, 2017]);
        assert_eq!(p(StrategyKind::Dte, 2015, 2017), [2015]);
        assert_eq!(p(StrategyKind::Ita, 2016, 2017), [2014, 2015, 2016, 2017]);
        assert_eq!(p(StrategyKind::TwoTa, 2016, 2016), [2016]);
        assert!(StrategyPlan::new(StrategyKind::Dte, 2017, 2016, 2014).is_err());
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!(StrategyKind::parse_list("all").unwrap(), StrategyKind::ALL);
        assert_eq!(
            StrategyKind::parse_list("dte, ita").unwrap(),
            [StrategyKind::Dte, StrategyKind::Ita]
        );
        assert_eq!("2ta".parse::<StrategyKind>().unwrap(), StrategyKind::TwoTa);
        assert!("foo".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn every_strategy_reads_exactly_its_years() {
        for kind in StrategyKind::ALL {
            for (s, t) in [(2014, 2014), (2014, 2017), (2016, 2019), (2015, 2015)] {
                let plan = StrategyPlan::new(kind, s, t, 2014).unwrap();
                let provider = Tracking { slices: toy_slices(), reads: RefCell::new(BTreeSet::new()) };
                build_embedding(&plan, &provider, &cfg(1), IteMode::Incremental).unwrap();
                let reads: Vec<i32> = provider.reads.into_inner().into_iter().collect();
                assert_eq!(reads, plan.data_years, "{kind} {s}->{t}");
            }
        }
    }

    #[test]
    fn gap_zero_from_first_year_reads_one_slice() {
        for kind in [StrategyKind::Ita, StrategyKind::Ite, StrategyKind::Dte] {
            let plan = StrategyPlan::new(kind, 2014, 2014, 2014).unwrap();
            assert_eq!(plan.data_years, [2014]);
        }
    }

    #[test]
    fn missing_slice() {
        let mut slices = toy_slices();
        slices.remove(&2016);
        let plan = StrategyPlan::new(StrategyKind::Ite, 2014, 2017, 2014).unwrap();
        assert!(matches!(
            build_embedding(&plan, &slices, &cfg(1), IteMode::Incremental),
            Err(AlignmentError::MissingSlice(2016))
        ));
    }

    #[test]
    fn compass_vocab_matches_union_counts() {
        let slices = toy_slices();
        let one = train_compass(&[&slices[&2014]], &cfg(2)).unwrap();
        assert_eq!(one.vocab(), &build_vocabulary(&[slices[&2014].clone()], 1).unwrap());
        let s1 = slice(2014, "a a b", 1);
        let s2 = slice(2015, "b c", 1);
        let c = EmbeddingConfig { min_count: 2, ..cfg(2) };
        let two = train_compass(&[&s1, &s2], &c).unwrap();
        assert_eq!(two.vocab().words(), &["a", "b"]);
    }

    #[test]
    fn align_never_touches_compass() {
        let slices = toy_slices();
        let compass = Arc::new(train_compass(&[&slices[&2014], &slices[&2015]], &cfg(3)).unwrap());
        let before: Vec<u64> = compass.context().as_slice().iter().map(|v| v.to_bits()).collect();
        let aligned = align_slice(&compass, &slices[&2015], &cfg(3)).unwrap();
        let after: Vec<u64> = compass.context().as_slice().iter().map(|v| v.to_bits()).collect();
        assert_eq!(before, after);
        assert_eq!(aligned.input().rows(), compass.vocab().len());
    }

    #[test]
    fn identical_text_aligns_identically() {
        let slices = toy_slices();
        let compass = Arc::new(train_compass(&[&slices[&2014], &slices[&2015]], &cfg(4)).unwrap());
        let mut copy = slices[&2015].clone();
        copy.year = 2099;
        let a = align_slice(&compass, &slices[&2015], &cfg(4)).unwrap();
        let b = align_slice(&compass, &copy, &cfg(4)).unwrap();
        assert_eq!(a.input(), b.input());
    }

    #[test]
    fn degenerate_regimes_share_vocabulary() {
        let slices = toy_slices();
        let dte = StrategyPlan::new(StrategyKind::Dte, 2014, 2014, 2014).unwrap();
        let ita = StrategyPlan::new(StrategyKind::Ita, 2014, 2014, 2014).unwrap();
        let a = build_embedding(&dte, &slices, &cfg(5), IteMode::Incremental).unwrap();
        let b = build_embedding(&ita, &slices, &cfg(5), IteMode::Incremental).unwrap();
        assert_eq!(a.vocab(), b.vocab());
        let two_ta = StrategyPlan::new(StrategyKind::TwoTa, 2016, 2016, 2014).unwrap();
        assert_eq!(two_ta.data_years, StrategyPlan::new(StrategyKind::Dte, 2016, 2016, 2014).unwrap().data_years);
    }

    #[test]
    fn retrain_mode_covers_all_years() {
        let slices = toy_slices();
        let plan = StrategyPlan::new(StrategyKind::Ite, 2014, 2016, 2014).unwrap();
        let l = build_embedding(&plan, &slices, &cfg(6), IteMode::Retrain).unwrap();
        for y in 2014..=2016 {
            assert!(l.get(&format!("y{y}")).is_some());
        }
        assert!(l.get("y2017").is_none());
    }

    #[test]
    fn dual_lookups_differ_for_alignment() {
        let slices = toy_slices();
        let plan = StrategyPlan::new(StrategyKind::TwoTa, 2014, 2016, 2014).unwrap();
        let (train, test) = build_dual_embedding(&plan, &slices, &cfg(7), IteMode::Incremental).unwrap();
        assert_eq!(train.vocab(), test.vocab());
        assert_ne!(train.vectors(), test.vectors());
    }

    #[test]
    fn manifest_written() {
        let dir = tempfile::tempdir().unwrap();
        let slices = toy_slices();
        let plan = StrategyPlan::new(StrategyKind::Ita, 2014, 2015, 2014).unwrap();
        let l = build_embedding(&plan, &slices, &cfg(8), IteMode::Incremental).unwrap();
        save_lookup(dir.path(), &l, &EmbeddingManifest::new(&plan, 8)).unwrap();
        let m: EmbeddingManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m.data_years, [2014, 2015]);
        assert_eq!(m.strategy, StrategyKind::Ita);
        assert!(dir.path().join("vectors.txt").exists());
    }
}
