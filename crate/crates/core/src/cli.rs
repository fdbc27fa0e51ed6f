//! Command-line front end: `build-corpus`, `run`, `drift` and `report`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::alignment::{IteMode, StrategyKind};
use crate::classifier::ClassifierConfig;
use crate::corpus::{
    balance_and_split, generate_synthetic_corpus, ingest, jaccard_matrix, read_corpus_dir, read_posts_jsonl,
    write_corpus_dir, HashtagLexicon, IngestStats, LabelledDataset, SplitFractions, SyntheticDriftConfig,
    TemporalSlice,
};
use crate::embedding::EmbeddingConfig;
use crate::experiment::{
    aggregate_by_gap, emit_report, enumerate_runs, gap_histogram, read_pairs_csv, run_grid, AlignRepr, ExperimentData,
    ExperimentSpec,
};

pub const THREADS_ENV: &str = "TEMPSTANCE_THREADS";

/// Exit status for missing inputs and unusable arguments.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn failure(err: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_FAILURE, message: err.to_string() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what} file not found: {}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "tempstance", version, about = "Temporally persistent stance classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build per-year slices and labelled splits from posts or a synthetic generator.
    BuildCorpus(BuildCorpusArgs),
    /// Run the strategy x year-pair grid and write the report.
    Run(RunArgs),
    /// Write the year x year Jaccard similarity matrix of vocabularies.
    Drift(DriftArgs),
    /// Re-render gaps.csv, table3.md and the charts from pairs.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct BuildCorpusArgs {
    /// JSON Lines posts with `text`, `year` and optional `label`.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// JSON object with `support` and `oppose` hashtag lists.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Generate a synthetic drifting corpus instead of reading posts.
    #[arg(long)]
    pub synthetic: bool,
    /// With --input: year range `start..end` (inclusive) to keep.
    /// With --synthetic: number of years to generate.
    #[arg(long)]
    pub years: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of word roles given a new surface form each year.
    #[arg(long, default_value_t = 0.1)]
    pub drift: f64,
    /// Share of stance markers switching stance each year.
    #[arg(long, default_value_t = 0.1)]
    pub assoc_drift: f64,
    #[arg(long, default_value_t = SyntheticDriftConfig::default().docs_per_year)]
    pub docs_per_year: usize,
    #[arg(long, default_value_t = SyntheticDriftConfig::default().base_vocab_size)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = SyntheticDriftConfig::default().stance_marker_count)]
    pub markers: usize,
    #[arg(long, default_value_t = 2014)]
    pub start_year: i32,
    #[arg(long, default_value_t = SplitFractions::default().train)]
    pub train_frac: f64,
    #[arg(long, default_value_t = SplitFractions::default().eval)]
    pub eval_frac: f64,
    /// Keep the natural label shares instead of downsampling to balance.
    #[arg(long)]
    pub no_balance: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Corpus directory written by build-corpus.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated strategies (DTE, ITE, 2TE, ITA, 2TA) or `all`.
    #[arg(long)]
    pub strategies: Option<String>,
    /// Inclusive range `start..end` or comma-separated years.
    #[arg(long)]
    pub years: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub ite_mode: Option<IteMode>,
    #[arg(long)]
    pub align_repr: Option<AlignRepr>,
    /// Embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Embedding training epochs.
    #[arg(long)]
    pub embedding_epochs: Option<usize>,
    /// Classifier training epochs.
    #[arg(long)]
    pub classifier_epochs: Option<usize>,
    /// Print the runs the grid would execute and exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct DriftArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Vocabularies to compare: test-set posts or unlabelled slices.
    #[arg(long, default_value = "test", value_parser = ["test", "slices"])]
    pub source: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A pairs.csv file or a directory containing one.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; defaults to the directory of the input.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `2014..2019` (inclusive) or `2014,2015,2017`.
pub fn parse_years(s: &str) -> Result<Vec<i32>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: i32 = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
        let b: i32 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end in {s:?}"))?;
        if a > b {
            return Err(format!("empty year range {s:?}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|y| y.trim().parse().map_err(|_| format!("bad year {y:?}"))).collect()
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    s.split(',').map(|v| v.trim().parse().map_err(|_| format!("bad seed {v:?}"))).collect()
}

/// Years given in a config file, as a range string or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum YearsSpec {
    Range(String),
    List(Vec<i32>),
}

/// Run configuration as read from a TOML file; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub years: Option<YearsSpec>,
    pub strategies: Option<Vec<StrategyKind>>,
    pub seeds: Option<Vec<u64>>,
    pub ite_mode: Option<IteMode>,
    pub align_repr: Option<AlignRepr>,
    pub threads: Option<usize>,
    pub embedding: Option<EmbeddingConfig>,
    pub classifier: Option<ClassifierConfig>,
}

/// Fully resolved configuration of one run, echoed to `run_config.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub years: Vec<i32>,
    pub strategies: Vec<StrategyKind>,
    pub seeds: Vec<u64>,
    pub ite_mode: IteMode,
    pub align_repr: AlignRepr,
    pub threads: usize,
    pub embedding: EmbeddingConfig,
    pub classifier: ClassifierConfig,
}

impl RunConfig {
    pub fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            years: self.years.clone(),
            strategies: self.strategies.clone(),
            seeds: self.seeds.clone(),
            embedding: self.embedding.clone(),
            classifier: self.classifier.clone(),
            ite_mode: self.ite_mode,
            align_repr: self.align_repr,
            threads: self.threads,
        }
    }
}

/// Worker cap from the environment; 1 when unset.
pub fn thread_cap() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(1),
    }
}

/// Layers flags over the config file over defaults. Years default to the
/// slice years found in the data directory.
pub fn resolve_run_config(args: &RunArgs, file: RunConfigFile, cap: usize) -> Result<RunConfig, CliError> {
    let data = args.data.clone().or(file.data);
    let out = args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("results"));
    let years = match (&args.years, file.years) {
        (Some(s), _) => parse_years(s).map_err(CliError::usage)?,
        (None, Some(YearsSpec::Range(s))) => parse_years(&s).map_err(CliError::usage)?,
        (None, Some(YearsSpec::List(list))) => list,
        (None, None) => match &data {
            Some(dir) => slice_years(dir)?,
            None => return Err(CliError::usage("no years given and no --data to take them from")),
        },
    };
    let strategies = match &args.strategies {
        Some(s) => StrategyKind::parse_list(s).map_err(CliError::usage_from)?,
        None => file.strategies.unwrap_or_else(|| StrategyKind::ALL.to_vec()),
    };
    let seeds = match &args.seeds {
        Some(s) => parse_seeds(s).map_err(CliError::usage)?,
        None => file.seeds.unwrap_or_else(|| vec![1]),
    };
    let mut embedding = file.embedding.unwrap_or_default();
    if let Some(dim) = args.dim {
        embedding.dim = dim;
    }
    if let Some(epochs) = args.embedding_epochs {
        embedding.epochs = epochs;
    }
    let mut classifier = file.classifier.unwrap_or_default();
    if let Some(epochs) = args.classifier_epochs {
        classifier.epochs = epochs;
    }
    Ok(RunConfig {
        data,
        out,
        years,
        strategies,
        seeds,
        ite_mode: args.ite_mode.or(file.ite_mode).unwrap_or_default(),
        align_repr: args.align_repr.or(file.align_repr).unwrap_or_default(),
        threads: file.threads.unwrap_or(cap).min(cap),
        embedding,
        classifier,
    })
}

impl CliError {
    fn usage_from(err: impl std::fmt::Display) -> Self {
        CliError::usage(err.to_string())
    }
}

fn slice_years(dir: &Path) -> Result<Vec<i32>, CliError> {
    let slices = dir.join("slices");
    let entries = std::fs::read_dir(&slices)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", slices.display())))?;
    let mut years: Vec<i32> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.path().file_stem()?.to_str()?.parse().ok())
        .collect();
    years.sort();
    Ok(years)
}

#[derive(Serialize)]
struct YearSummary {
    documents: usize,
    tokens: usize,
    word_types: usize,
    train: usize,
    eval: usize,
    test: usize,
}

#[derive(Serialize)]
struct CorpusStats<'a> {
    years: BTreeMap<i32, YearSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ingest: Option<&'a IngestStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    synthetic: Option<&'a SyntheticDriftConfig>,
}

fn summarize(slices: &[TemporalSlice], dataset: &LabelledDataset) -> BTreeMap<i32, YearSummary> {
    let mut out = BTreeMap::new();
    for slice in slices {
        let splits = dataset.year(slice.year);
        out.insert(
            slice.year,
            YearSummary {
                documents: slice.documents.len(),
                tokens: slice.token_count(),
                word_types: slice.word_set().len(),
                train: splits.map_or(0, |s| s.train.len()),
                eval: splits.map_or(0, |s| s.eval.len()),
                test: splits.map_or(0, |s| s.test.len()),
            },
        );
    }
    out
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).map_err(CliError::failure)?;
    std::fs::write(path, json + "\n").map_err(CliError::failure)
}

fn write_toml(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = toml::to_string(value).map_err(CliError::failure)?;
    std::fs::write(path, text).map_err(CliError::failure)
}

pub fn cmd_build_corpus(args: &BuildCorpusArgs) -> Result<(), CliError> {
    let fractions = SplitFractions { train: args.train_frac, eval: args.eval_frac, test: None };
    let balance = !args.no_balance;
    if args.synthetic {
        let num_years = match &args.years {
            Some(s) => s.trim().parse().map_err(|_| CliError::usage(format!("--years must be a count with --synthetic, got {s:?}")))?,
            None => SyntheticDriftConfig::default().num_years,
        };
        let cfg = SyntheticDriftConfig {
            num_years,
            docs_per_year: args.docs_per_year,
            base_vocab_size: args.vocab_size,
            lexical_drift_rate: args.drift,
            association_drift_rate: args.assoc_drift,
            stance_marker_count: args.markers,
            seed: args.seed,
            start_year: args.start_year,
        };
        cfg.validate().map_err(CliError::usage_from)?;
        let corpus = generate_synthetic_corpus(&cfg).map_err(CliError::failure)?;
        let dataset = if fractions == SplitFractions::default() && balance {
            corpus.dataset
        } else {
            balance_and_split(&corpus.labelled, fractions, balance, cfg.seed).map_err(CliError::failure)?
        };
        write_corpus_dir(&args.out, &corpus.slices, &dataset).map_err(CliError::failure)?;
        let stats = CorpusStats { years: summarize(&corpus.slices, &dataset), ingest: None, synthetic: Some(&cfg) };
        write_json(&args.out.join("stats.json"), &stats)?;
        return Ok(());
    }
    let input = args.input.as_deref().expect("clap requires --input");
    let lexicon_path = args.lexicon.as_deref().expect("clap requires --lexicon");
    require_file(lexicon_path, "lexicon")?;
    require_file(input, "input")?;
    let range = match &args.years {
        Some(s) => {
            let years = parse_years(s).map_err(CliError::usage)?;
            Some((years[0], years[years.len() - 1]))
        }
        None => None,
    };
    let lexicon = HashtagLexicon::load(lexicon_path).map_err(CliError::usage_from)?;
    let posts = read_posts_jsonl(input).map_err(CliError::failure)?;
    let output = ingest(posts, &lexicon, range);
    let dataset = balance_and_split(&output.labelled, fractions, balance, args.seed).map_err(CliError::failure)?;
    write_corpus_dir(&args.out, &output.slices, &dataset).map_err(CliError::failure)?;
    let stats = CorpusStats { years: summarize(&output.slices, &dataset), ingest: Some(&output.stats), synthetic: None };
    write_json(&args.out.join("stats.json"), &stats)
}

fn load_data(dir: &Path) -> Result<ExperimentData, CliError> {
    if !dir.join("slices").is_dir() {
        return Err(CliError::usage(format!("no corpus found under {}", dir.display())));
    }
    let (slices, dataset) = read_corpus_dir(dir).map_err(CliError::failure)?;
    Ok(ExperimentData::new(slices, dataset))
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => {
            require_file(path, "config")?;
            let text = std::fs::read_to_string(path).map_err(CliError::failure)?;
            toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfigFile::default(),
    };
    let config = resolve_run_config(args, file, thread_cap()?)?;
    let spec = config.spec();
    spec.validate().map_err(CliError::usage_from)?;
    if args.dry_run {
        let runs = enumerate_runs(&spec);
        for (kind, s, t, seed) in &runs {
            println!("{kind}\t{s}\t{t}\t{}\t{seed}", t - s);
        }
        let hist: Vec<String> = gap_histogram(&spec.years).iter().map(|(g, c)| format!("{g}:{c}")).collect();
        println!("# {} runs; pairs per gap per strategy and seed: {}", runs.len(), hist.join(" "));
        return Ok(());
    }
    let data_dir = config.data.as_deref().ok_or_else(|| CliError::usage("--data is required"))?;
    let data = load_data(data_dir)?;
    std::fs::create_dir_all(&config.out).map_err(CliError::failure)?;
    write_toml(&config.out.join("run_config.toml"), &config)?;
    let results = run_grid(&spec, &data).map_err(CliError::failure)?;
    let aggregates = aggregate_by_gap(&results).map_err(CliError::failure)?;
    emit_report(&aggregates, &results, &config.out).map_err(CliError::failure)?;
    Ok(())
}

pub fn cmd_drift(args: &DriftArgs) -> Result<(), CliError> {
    let data = load_data(&args.data)?;
    let (years, sets): (Vec<i32>, Vec<_>) = if args.source == "slices" {
        data.slices.values().map(|s| (s.year, s.word_set())).unzip()
    } else {
        data.dataset
            .years
            .iter()
            .map(|(&y, splits)| (y, splits.test.iter().flat_map(|p| p.tokens.iter().cloned()).collect()))
            .unzip()
    };
    let matrix = jaccard_matrix(&sets).map_err(CliError::failure)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(CliError::failure)?;
    }
    let mut w = csv::Writer::from_path(&args.out).map_err(CliError::failure)?;
    let mut header = vec!["year".to_string()];
    header.extend(years.iter().map(i32::to_string));
    w.write_record(&header).map_err(CliError::failure)?;
    for (year, row) in years.iter().zip(&matrix) {
        let mut record = vec![year.to_string()];
        record.extend(row.iter().map(|v| crate::experiment::format_sig6(*v)));
        w.write_record(&record).map_err(CliError::failure)?;
    }
    w.flush().map_err(CliError::failure)
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let pairs = if args.input.is_dir() { args.input.join("pairs.csv") } else { args.input.clone() };
    require_file(&pairs, "pairs")?;
    let out = match &args.out {
        Some(o) => o.clone(),
        None => pairs.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let results = read_pairs_csv(&pairs).map_err(CliError::failure)?;
    let aggregates = aggregate_by_gap(&results).map_err(CliError::failure)?;
    emit_report(&aggregates, &results, &out).map_err(CliError::failure)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::BuildCorpus(a) => cmd_build_corpus(a),
        Command::Run(a) => cmd_run(a),
        Command::Drift(a) => cmd_drift(a),
        Command::Report(a) => cmd_report(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_parsing() {
        assert_eq!(parse_years("2014..2019").unwrap(), (2014..=2019).collect::<Vec<_>>());
        assert_eq!(parse_years("2014..=2015").unwrap(), vec![2014, 2015]);
        assert_eq!(parse_years("2014,2016").unwrap(), vec![2014, 2016]);
        assert!(parse_years("2019..2014").is_err());
        assert!(parse_years("x").is_err());
        assert_eq!(parse_seeds("1, 2,3").unwrap(), vec![1, 2, 3]);
    }

    fn run_args(argv: &[&str]) -> RunArgs {
        let mut full = vec!["tempstance", "run"];
        full.extend_from_slice(argv);
        match Cli::parse_from(full).command {
            Command::Run(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_config_file() {
        let file: RunConfigFile = toml::from_str(
            r#"
            years = "2014..2016"
            strategies = ["DTE", "2TA"]
            seeds = [4]
            threads = 8
            [embedding]
            dim = 12
            [classifier]
            epochs = 3
            "#,
        )
        .unwrap();
        let args = run_args(&["--seeds", "1,2", "--dim", "7", "--strategies", "all"]);
        let cfg = resolve_run_config(&args, file.clone(), 2).unwrap();
        assert_eq!(cfg.years, vec![2014, 2015, 2016]);
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.strategies, StrategyKind::ALL.to_vec());
        assert_eq!(cfg.embedding.dim, 7);
        assert_eq!(cfg.embedding.window, EmbeddingConfig::default().window);
        assert_eq!(cfg.classifier.epochs, 3);
        assert_eq!(cfg.threads, 2);

        let cfg = resolve_run_config(&run_args(&[]), file, 16).unwrap();
        assert_eq!(cfg.strategies, vec![StrategyKind::Dte, StrategyKind::TwoTa]);
        assert_eq!(cfg.threads, 8);

        // The echoed config is itself a valid config file.
        let text = toml::to_string(&cfg).unwrap();
        let echoed: RunConfigFile = toml::from_str(&text).unwrap();
        assert_eq!(resolve_run_config(&run_args(&[]), echoed, 16).unwrap(), cfg);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(toml::from_str::<RunConfigFile>("yeras = [2014]").is_err());
    }

    #[test]
    fn missing_lexicon_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("posts.jsonl");
        std::fs::write(&input, "").unwrap();
        let cli = Cli::parse_from([
            "tempstance",
            "build-corpus",
            "--input",
            input.to_str().unwrap(),
            "--lexicon",
            "/nonexistent/lex.json",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        let err = run(&cli).unwrap_err();
        assert_eq!(err.code, EXIT_USAGE);
        assert!(err.message.contains("/nonexistent/lex.json"));
    }
}
