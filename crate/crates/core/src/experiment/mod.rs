//! Temporal persistence protocol: every (source, target) pair with
//! source <= target, per strategy and seed, then aggregation by gap.

mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{build_dual_embedding, build_embedding, AlignmentError, IteMode, StrategyKind, StrategyPlan};
use crate::classifier::{encode_posts, train_classifier, ClassifierConfig, ClassifierError};
use crate::corpus::{LabelledDataset, TemporalSlice};
use crate::embedding::{EmbeddingConfig, EmbeddingLookup};

pub use report::{
    emit_report, format_pct, format_sig6, read_gaps_csv, read_pairs_csv, render_svg, render_table, write_gaps_csv,
    write_pairs_csv, ChartKind,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("year {year} has no {what}")]
    MissingYear { year: i32, what: &'static str },
    #[error("strategy {0} has no gap-0 results")]
    MissingBaseline(StrategyKind),
    #[error("baseline score is not positive")]
    ZeroBaseline,
    #[error("no results")]
    EmptyResults,
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which vectors represent the classifier's text for alignment strategies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignRepr {
    /// Train and test text both through the target-year aligned slice.
    #[default]
    Target,
    /// Train text through the source-year slice, test text through the
    /// target-year slice, both against one compass.
    Dual,
}

impl std::str::FromStr for AlignRepr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "target" => Ok(AlignRepr::Target),
            "dual" => Ok(AlignRepr::Dual),
            _ => Err(format!("unknown representation {s:?} (expected target or dual)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Strictly increasing years; the first one is where the incremental
    /// strategies start.
    pub years: Vec<i32>,
    pub strategies: Vec<StrategyKind>,
    pub seeds: Vec<u64>,
    pub embedding: EmbeddingConfig,
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub ite_mode: IteMode,
    #[serde(default)]
    pub align_repr: AlignRepr,
    /// Worker threads; results do not depend on it.
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_threads() -> usize {
    1
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |m: &str| Err(ExperimentError::InvalidSpec(m.to_string()));
        if self.years.len() < 2 {
            return invalid("at least two years are required");
        }
        if self.years.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("years must be strictly increasing");
        }
        if self.seeds.is_empty() {
            return invalid("at least one seed is required");
        }
        if self.strategies.is_empty() {
            return invalid("at least one strategy is required");
        }
        let distinct: BTreeSet<_> = self.strategies.iter().collect();
        if distinct.len() != self.strategies.len() {
            return invalid("strategies must be distinct");
        }
        let distinct: BTreeSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return invalid("seeds must be distinct");
        }
        if self.threads == 0 {
            return invalid("threads must be positive");
        }
        self.embedding.validate().map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
        self.classifier.validate()?;
        Ok(())
    }

    pub fn first_year(&self) -> i32 {
        self.years[0]
    }
}

/// Unlabelled slices and labelled splits, keyed by year.
#[derive(Clone, Debug, Default)]
pub struct ExperimentData {
    pub slices: BTreeMap<i32, TemporalSlice>,
    pub dataset: LabelledDataset,
}

impl ExperimentData {
    pub fn new(slices: impl IntoIterator<Item = TemporalSlice>, dataset: LabelledDataset) -> Self {
        ExperimentData { slices: slices.into_iter().map(|s| (s.year, s)).collect(), dataset }
    }

    fn check_years(&self, years: &[i32]) -> Result<(), ExperimentError> {
        for &year in years {
            if !self.slices.contains_key(&year) {
                return Err(ExperimentError::MissingYear { year, what: "unlabelled slice" });
            }
            if !self.dataset.years.contains_key(&year) {
                return Err(ExperimentError::MissingYear { year, what: "labelled data" });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedScore {
    pub seed: u64,
    pub macro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub strategy: StrategyKind,
    pub source_year: i32,
    pub target_year: i32,
    pub gap: i32,
    /// Sorted by seed.
    pub scores: Vec<SeedScore>,
    pub mean_f1: f64,
}

impl PairResult {
    fn from_scores(strategy: StrategyKind, source_year: i32, target_year: i32, mut scores: Vec<SeedScore>) -> Self {
        scores.sort_by_key(|s| s.seed);
        let mean_f1 = scores.iter().map(|s| s.macro_f1).sum::<f64>() / scores.len() as f64;
        PairResult { strategy, source_year, target_year, gap: target_year - source_year, scores, mean_f1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapAggregate {
    pub strategy: StrategyKind,
    pub gap: i32,
    pub mean_f1: f64,
    pub rpd: f64,
    pub pair_count: usize,
}

/// Every (source, target) with source <= target, ordered by source then target.
pub fn year_pairs(years: &[i32]) -> Vec<(i32, i32)> {
    years
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| years[i..].iter().map(move |&t| (s, t)))
        .collect()
}

/// The runs a grid would execute, in result order, without training anything.
pub fn enumerate_runs(spec: &ExperimentSpec) -> Vec<(StrategyKind, i32, i32, u64)> {
    let mut strategies = spec.strategies.clone();
    strategies.sort();
    let mut seeds = spec.seeds.clone();
    seeds.sort();
    let pairs = year_pairs(&spec.years);
    let mut runs = Vec::new();
    for &kind in &strategies {
        for &(s, t) in &pairs {
            for &seed in &seeds {
                runs.push((kind, s, t, seed));
            }
        }
    }
    runs
}

/// Number of pairs per gap for one strategy and seed.
pub fn gap_histogram(years: &[i32]) -> BTreeMap<i32, usize> {
    let mut hist = BTreeMap::new();
    for (s, t) in year_pairs(years) {
        *hist.entry(t - s).or_insert(0) += 1;
    }
    hist
}

/// Signed relative change of `f_tj` against the baseline `f_t0`.
pub fn rpd(f_t0: f64, f_tj: f64) -> Result<f64, ExperimentError> {
    if !(f_t0 > 0.0) {
        return Err(ExperimentError::ZeroBaseline);
    }
    Ok((f_tj - f_t0) / f_t0)
}

/// Mean of pair means per (strategy, gap), with RPD against the strategy's
/// own gap-0 mean.
pub fn aggregate_by_gap(results: &[PairResult]) -> Result<Vec<GapAggregate>, ExperimentError> {
    if results.is_empty() {
        return Err(ExperimentError::EmptyResults);
    }
    let mut groups: BTreeMap<(StrategyKind, i32), Vec<f64>> = BTreeMap::new();
    for r in results {
        groups.entry((r.strategy, r.gap)).or_default().push(r.mean_f1);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (&(strategy, gap), values) in &groups {
        let baseline = groups.get(&(strategy, 0)).ok_or(ExperimentError::MissingBaseline(strategy))?;
        let base = baseline.iter().sum::<f64>() / baseline.len() as f64;
        let mean_f1 = values.iter().sum::<f64>() / values.len() as f64;
        let rpd = if gap == 0 { 0.0 } else { rpd(base, mean_f1)? };
        out.push(GapAggregate { strategy, gap, mean_f1, rpd, pair_count: values.len() });
    }
    Ok(out)
}

/// Identifies an embedding independently of which strategy asked for it,
/// so equal data regimes are trained once.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum EmbeddingKey {
    /// Train on the first year, then fold in the rest (DTE, ITE, 2TE).
    Updated { years: Vec<i32>, seed: u64 },
    /// Compass over `years`, then `target` aligned against it (ITA, 2TA).
    Aligned { years: Vec<i32>, target: i32, source: Option<i32>, seed: u64 },
}

/// Lookups for the source (train/eval) text and the target (test) text.
type LookupPair = Arc<(EmbeddingLookup, EmbeddingLookup)>;

fn embedding_key(plan: &StrategyPlan, repr: AlignRepr, seed: u64) -> EmbeddingKey {
    if plan.kind.is_alignment() {
        let source = (repr == AlignRepr::Dual).then_some(plan.source_year);
        EmbeddingKey::Aligned { years: plan.data_years.clone(), target: plan.target_year, source, seed }
    } else {
        EmbeddingKey::Updated { years: plan.data_years.clone(), seed }
    }
}

fn build_for_key(key: &EmbeddingKey, data: &ExperimentData, spec: &ExperimentSpec) -> Result<LookupPair, ExperimentError> {
    let (plan, seed, dual) = match key {
        EmbeddingKey::Updated { years, seed } => {
            let kind = if years.len() == 1 { StrategyKind::Dte } else { StrategyKind::Ite };
            let plan = StrategyPlan { kind, source_year: years[0], target_year: years[years.len() - 1], data_years: years.clone() };
            (plan, *seed, false)
        }
        EmbeddingKey::Aligned { years, target, source, seed } => {
            let plan = StrategyPlan {
                kind: StrategyKind::Ita,
                source_year: source.unwrap_or(*target),
                target_year: *target,
                data_years: years.clone(),
            };
            (plan, *seed, source.is_some())
        }
    };
    let cfg = spec.embedding.with_seed(seed);
    let pair = if dual {
        build_dual_embedding(&plan, &data.slices, &cfg, spec.ite_mode)?
    } else {
        let lookup = build_embedding(&plan, &data.slices, &cfg, spec.ite_mode)?;
        (lookup.clone(), lookup)
    };
    Ok(Arc::new(pair))
}

fn score_pair(
    source: i32,
    target: i32,
    lookups: &(EmbeddingLookup, EmbeddingLookup),
    data: &ExperimentData,
    classifier: &ClassifierConfig,
    seed: u64,
) -> Result<f64, ExperimentError> {
    let missing = |year| ExperimentError::MissingYear { year, what: "labelled data" };
    let src = data.dataset.year(source).ok_or_else(|| missing(source))?;
    let tgt = data.dataset.year(target).ok_or_else(|| missing(target))?;
    let max_len = classifier.max_len;
    let (train, train_stats) = encode_posts(&src.train, &lookups.0, max_len);
    let (eval, _) = encode_posts(&src.eval, &lookups.0, max_len);
    let (test, test_stats) = encode_posts(&tgt.test, &lookups.1, max_len);
    log::debug!("{source}->{target}: train lookups {train_stats:?}, test lookups {test_stats:?}");
    let cfg = ClassifierConfig { seed, ..classifier.clone() };
    let trained = train_classifier(&train, &eval, &cfg)?;
    let report = trained.model.evaluate(&test)?;
    if !report.absent.is_empty() {
        log::warn!("{source}->{target} seed {seed}: {:?} absent from test predictions and labels", report.absent);
    }
    Ok(report.macro_f1)
}

/// Trains one classifier for `strategy` on `source` and scores it on the
/// test split of `target`.
pub fn run_pair(
    strategy: StrategyKind,
    source: i32,
    target: i32,
    data: &ExperimentData,
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<PairResult, ExperimentError> {
    data.check_years(&[source, target])?;
    let plan = StrategyPlan::new(strategy, source, target, spec.first_year())?;
    let lookups = build_for_key(&embedding_key(&plan, spec.align_repr, seed), data, spec)?;
    let f1 = score_pair(source, target, &lookups, data, &spec.classifier, seed)?;
    Ok(PairResult::from_scores(strategy, source, target, vec![SeedScore { seed, macro_f1: f1 }]))
}

/// Runs every strategy, pair and seed. Each distinct embedding is trained
/// once and shared; results are sorted by strategy, source and target.
pub fn run_grid(spec: &ExperimentSpec, data: &ExperimentData) -> Result<Vec<PairResult>, ExperimentError> {
    spec.validate()?;
    data.check_years(&spec.years)?;
    let runs = enumerate_runs(spec);
    let keyed: Vec<(StrategyKind, i32, i32, u64, EmbeddingKey)> = runs
        .into_iter()
        .map(|(kind, s, t, seed)| {
            let plan = StrategyPlan::new(kind, s, t, spec.first_year())?;
            Ok((kind, s, t, seed, embedding_key(&plan, spec.align_repr, seed)))
        })
        .collect::<Result<_, AlignmentError>>()?;
    let keys: BTreeSet<&EmbeddingKey> = keyed.iter().map(|r| &r.4).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
    pool.install(|| {
        log::info!("training {} embeddings for {} runs", keys.len(), keyed.len());
        let built: Vec<(EmbeddingKey, LookupPair)> = keys
            .into_par_iter()
            .map(|k| Ok((k.clone(), build_for_key(k, data, spec)?)))
            .collect::<Result<_, ExperimentError>>()?;
        let cache: HashMap<EmbeddingKey, LookupPair> = built.into_iter().collect();
        let scores: Vec<f64> = keyed
            .par_iter()
            .map(|(kind, s, t, seed, key)| {
                let f1 = score_pair(*s, *t, &cache[key], data, &spec.classifier, *seed)?;
                log::info!("{kind} {s}->{t} seed {seed}: macro-F1 {f1:.4}");
                Ok(f1)
            })
            .collect::<Result<_, ExperimentError>>()?;
        let mut grouped: BTreeMap<(StrategyKind, i32, i32), Vec<SeedScore>> = BTreeMap::new();
        for ((kind, s, t, seed, _), macro_f1) in keyed.iter().zip(scores) {
            grouped.entry((*kind, *s, *t)).or_default().push(SeedScore { seed: *seed, macro_f1 });
        }
        Ok(grouped.into_iter().map(|((kind, s, t), sc)| PairResult::from_scores(kind, s, t, sc)).collect())
    })
}
