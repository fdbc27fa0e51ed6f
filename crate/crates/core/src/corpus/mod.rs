//! Corpus ingestion: tokenization, hashtag-based distant labeling, balanced
//! stratified splits, vocabularies, vocabulary drift statistics and a
//! synthetic drifting corpus generator.

mod store;
mod synthetic;
mod tokenize;
mod vocab;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::seeded_rng;

pub use store::{read_corpus_dir, read_posts, read_slice, write_corpus_dir, write_posts, write_slice};
pub use synthetic::{generate_synthetic_corpus, SyntheticCorpus, SyntheticDriftConfig};
pub use tokenize::{tokenize, URL_TOKEN, USER_TOKEN};
pub use vocab::{build_vocabulary, count_tokens, Vocabulary};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("vocabulary is empty after applying min_count")]
    EmptyVocabulary,
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("year {year} has no {label} posts after filtering")]
    YearEmpty { year: i32, label: StanceLabel },
    #[error("year {year}: {split} split is empty")]
    SplitEmpty { year: i32, split: &'static str },
    #[error("both vocabularies are empty")]
    BothEmpty,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("invalid lexicon: {0}")]
    LexiconInvalid(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceLabel {
    Support,
    Oppose,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 2] = [StanceLabel::Support, StanceLabel::Oppose];

    /// Class index used by the classifier (Support = 0, Oppose = 1).
    pub fn index(self) -> usize {
        match self {
            StanceLabel::Support => 0,
            StanceLabel::Oppose => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn opposite(self) -> Self {
        match self {
            StanceLabel::Support => StanceLabel::Oppose,
            StanceLabel::Oppose => StanceLabel::Support,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Support => "support",
            StanceLabel::Oppose => "oppose",
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StanceLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "support" => Ok(StanceLabel::Support),
            "oppose" => Ok(StanceLabel::Oppose),
            other => Err(format!("unknown stance label {other:?}")),
        }
    }
}

/// One line of the JSON Lines post input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPost {
    pub text: String,
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<StanceLabel>,
}

/// One year's unlabelled documents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalSlice {
    pub year: i32,
    pub documents: Vec<Vec<String>>,
}

impl TemporalSlice {
    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }

    pub fn word_set(&self) -> HashSet<String> {
        self.documents.iter().flatten().cloned().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelledPost {
    pub tokens: Vec<String>,
    pub year: i32,
    pub label: StanceLabel,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearSplits {
    pub train: Vec<LabelledPost>,
    pub eval: Vec<LabelledPost>,
    pub test: Vec<LabelledPost>,
}

impl YearSplits {
    pub fn split(&self, name: &str) -> Option<&[LabelledPost]> {
        match name {
            "train" => Some(&self.train),
            "eval" => Some(&self.eval),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Per-year train/eval/test splits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelledDataset {
    pub years: BTreeMap<i32, YearSplits>,
}

impl LabelledDataset {
    pub fn year(&self, year: i32) -> Option<&YearSplits> {
        self.years.get(&year)
    }
}

/// Disjoint sets of support and oppose hashtags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashtagLexicon {
    support: BTreeSet<String>,
    oppose: BTreeSet<String>,
}

#[derive(Deserialize)]
struct LexiconFile {
    support: Vec<String>,
    oppose: Vec<String>,
}

fn normalize_hashtag(tag: &str) -> Result<String, CorpusError> {
    let tag = tag.trim().to_lowercase();
    let tag = if tag.starts_with('#') { tag } else { format!("#{tag}") };
    if tag.len() < 2 || tag.chars().any(char::is_whitespace) {
        return Err(CorpusError::LexiconInvalid(format!("bad hashtag {tag:?}")));
    }
    Ok(tag)
}

impl HashtagLexicon {
    /// Entries are lowercased and given a `#` prefix when missing.
    pub fn new<I, J, S, T>(support: I, oppose: J) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let support = support
            .into_iter()
            .map(|t| normalize_hashtag(t.as_ref()))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let oppose = oppose
            .into_iter()
            .map(|t| normalize_hashtag(t.as_ref()))
            .collect::<Result<BTreeSet<_>, _>>()?;
        if let Some(tag) = support.intersection(&oppose).next() {
            return Err(CorpusError::LexiconInvalid(format!("{tag} is listed under both stances")));
        }
        if support.is_empty() && oppose.is_empty() {
            return Err(CorpusError::LexiconInvalid("lexicon has no hashtags".into()));
        }
        Ok(HashtagLexicon { support, oppose })
    }

    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let file: LexiconFile =
            serde_json::from_str(json).map_err(|e| CorpusError::LexiconInvalid(e.to_string()))?;
        Self::new(file.support, file.oppose)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn polarity(&self, token: &str) -> Option<StanceLabel> {
        if self.support.contains(token) {
            Some(StanceLabel::Support)
        } else if self.oppose.contains(token) {
            Some(StanceLabel::Oppose)
        } else {
            None
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.polarity(token).is_some()
    }

    pub fn support(&self) -> &BTreeSet<String> {
        &self.support
    }

    pub fn oppose(&self) -> &BTreeSet<String> {
        &self.oppose
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelOutcome {
    Labelled(LabelledPost),
    /// Hashtags of both polarities present.
    Ambiguous,
    /// No lexicon hashtag present.
    Unmatched,
}

/// Labels a post from its lexicon hashtags and strips them from the tokens.
pub fn classify_post(post: &RawPost, lexicon: &HashtagLexicon) -> LabelOutcome {
    let tokens = tokenize(&post.text);
    let (mut support, mut oppose) = (false, false);
    for t in &tokens {
        match lexicon.polarity(t) {
            Some(StanceLabel::Support) => support = true,
            Some(StanceLabel::Oppose) => oppose = true,
            None => {}
        }
    }
    let label = match (support, oppose) {
        (true, true) => return LabelOutcome::Ambiguous,
        (false, false) => return LabelOutcome::Unmatched,
        (true, false) => StanceLabel::Support,
        (false, true) => StanceLabel::Oppose,
    };
    LabelOutcome::Labelled(LabelledPost {
        tokens: strip_lexicon(tokens, lexicon),
        year: post.year,
        label,
    })
}

pub fn distant_label(post: &RawPost, lexicon: &HashtagLexicon) -> Option<LabelledPost> {
    match classify_post(post, lexicon) {
        LabelOutcome::Labelled(p) => Some(p),
        _ => None,
    }
}

fn strip_lexicon(tokens: Vec<String>, lexicon: &HashtagLexicon) -> Vec<String> {
    tokens.into_iter().filter(|t| !lexicon.contains(t)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct YearIngestStats {
    pub posts: usize,
    pub matched_support: usize,
    pub matched_oppose: usize,
    pub ambiguous: usize,
    pub unmatched: usize,
    /// Posts whose label came from the input file rather than hashtags.
    pub preset_labels: usize,
    /// Support share among labelled posts, before any balancing.
    pub support_share: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub years: BTreeMap<i32, YearIngestStats>,
    pub out_of_range: usize,
    pub empty_text: usize,
}

#[derive(Clone, Debug, Default)]
pub struct IngestOutput {
    pub slices: Vec<TemporalSlice>,
    pub labelled: BTreeMap<i32, Vec<LabelledPost>>,
    pub stats: IngestStats,
}

/// Turns raw posts into per-year slices and labelled posts.
///
/// Every in-range post feeds its year's unlabelled slice. Posts carrying an
/// explicit label keep it (lexicon hashtags are still stripped); others go
/// through [`classify_post`].
pub fn ingest<I>(posts: I, lexicon: &HashtagLexicon, years: Option<(i32, i32)>) -> IngestOutput
where
    I: IntoIterator<Item = RawPost>,
{
    let mut out = IngestOutput::default();
    let mut slices: BTreeMap<i32, Vec<Vec<String>>> = BTreeMap::new();
    for post in posts {
        if post.text.trim().is_empty() {
            out.stats.empty_text += 1;
            continue;
        }
        if let Some((lo, hi)) = years {
            if post.year < lo || post.year > hi {
                out.stats.out_of_range += 1;
                continue;
            }
        }
        let stats = out.stats.years.entry(post.year).or_default();
        stats.posts += 1;
        slices.entry(post.year).or_default().push(tokenize(&post.text));
        let labelled = match post.label {
            Some(label) => {
                stats.preset_labels += 1;
                Some(LabelledPost {
                    tokens: strip_lexicon(tokenize(&post.text), lexicon),
                    year: post.year,
                    label,
                })
            }
            None => match classify_post(&post, lexicon) {
                LabelOutcome::Labelled(p) => {
                    match p.label {
                        StanceLabel::Support => stats.matched_support += 1,
                        StanceLabel::Oppose => stats.matched_oppose += 1,
                    }
                    Some(p)
                }
                LabelOutcome::Ambiguous => {
                    stats.ambiguous += 1;
                    None
                }
                LabelOutcome::Unmatched => {
                    stats.unmatched += 1;
                    None
                }
            },
        };
        if let Some(p) = labelled {
            out.labelled.entry(p.year).or_default().push(p);
        }
    }
    for (year, posts) in &out.labelled {
        let support = posts.iter().filter(|p| p.label == StanceLabel::Support).count();
        if let Some(s) = out.stats.years.get_mut(year) {
            s.support_share = support as f64 / posts.len() as f64;
        }
    }
    out.slices = slices
        .into_iter()
        .map(|(year, documents)| TemporalSlice { year, documents })
        .collect();
    out
}

/// Reads JSON Lines posts; blank lines are skipped.
pub fn read_posts_jsonl(path: &Path) -> Result<Vec<RawPost>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut posts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let post = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        posts.push(post);
    }
    Ok(posts)
}

/// Fractions of each year's (balanced) pool assigned to train and eval.
/// `test` of `None` takes the remainder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub eval: f64,
    #[serde(default)]
    pub test: Option<f64>,
}

impl Default for SplitFractions {
    /// 35100 : 3900 : 9000 over six years, i.e. 5850 / 650 / 1500 per year.
    fn default() -> Self {
        SplitFractions { train: 0.73125, eval: 0.08125, test: None }
    }
}

impl SplitFractions {
    fn validate(&self) -> Result<(), CorpusError> {
        let test = self.test.unwrap_or(0.0);
        let ok = [self.train, self.eval, test].iter().all(|f| (0.0..=1.0).contains(f))
            && self.train > 0.0
            && self.train + self.eval < 1.0
            && self.train + self.eval + test <= 1.0 + 1e-12;
        if ok {
            Ok(())
        } else {
            Err(CorpusError::ConfigInvalid(format!("bad split fractions {self:?}")))
        }
    }
}

/// Downsamples each year to equal label counts (when `balance`) and splits
/// each label's posts into train/eval/test with the given fractions.
pub fn balance_and_split(
    posts: &BTreeMap<i32, Vec<LabelledPost>>,
    fractions: SplitFractions,
    balance: bool,
    seed: u64,
) -> Result<LabelledDataset, CorpusError> {
    fractions.validate()?;
    let mut dataset = LabelledDataset::default();
    for (&year, year_posts) in posts {
        let mut rng = seeded_rng(seed, &[0x5b17, year as u64]);
        let mut by_label: Vec<Vec<&LabelledPost>> = StanceLabel::ALL
            .iter()
            .map(|&l| year_posts.iter().filter(|p| p.label == l).collect())
            .collect();
        for (label, group) in StanceLabel::ALL.iter().zip(&by_label) {
            if group.is_empty() {
                return Err(CorpusError::YearEmpty { year, label: *label });
            }
        }
        let keep = by_label.iter().map(Vec::len).min().unwrap_or(0);
        let mut splits = YearSplits::default();
        for group in &mut by_label {
            group.shuffle(&mut rng);
            if balance {
                group.truncate(keep);
            }
            let n = group.len() as f64;
            let n_train = (n * fractions.train).round() as usize;
            let n_eval = ((n * fractions.eval).round() as usize).min(group.len() - n_train);
            let n_test = match fractions.test {
                Some(f) => ((n * f).round() as usize).min(group.len() - n_train - n_eval),
                None => group.len() - n_train - n_eval,
            };
            let mut it = group.iter().map(|p| (*p).clone());
            splits.train.extend(it.by_ref().take(n_train));
            splits.eval.extend(it.by_ref().take(n_eval));
            splits.test.extend(it.take(n_test));
        }
        for (name, split, frac) in [
            ("train", &mut splits.train, fractions.train),
            ("eval", &mut splits.eval, fractions.eval),
            ("test", &mut splits.test, fractions.test.unwrap_or(1.0)),
        ] {
            if split.is_empty() && frac > 0.0 {
                return Err(CorpusError::SplitEmpty { year, split: name });
            }
            split.shuffle(&mut rng);
        }
        dataset.years.insert(year, splits);
    }
    Ok(dataset)
}

/// |A ∩ B| / |A ∪ B|.
pub fn jaccard_similarity<S: std::hash::Hash + Eq>(a: &HashSet<S>, b: &HashSet<S>) -> Result<f64, CorpusError> {
    if a.is_empty() && b.is_empty() {
        return Err(CorpusError::BothEmpty);
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|w| large.contains(*w)).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Pairwise Jaccard similarities, row/column order following `sets`.
pub fn jaccard_matrix(sets: &[HashSet<String>]) -> Result<Vec<Vec<f64>>, CorpusError> {
    let n = sets.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = jaccard_similarity(&sets[i], &sets[j])?;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lexicon() -> HashtagLexicon {
        HashtagLexicon::new(["#equalpay", "#heforshe"], ["#meninism"]).unwrap()
    }

    fn raw(text: &str) -> RawPost {
        RawPost { text: text.into(), year: 2015, label: None }
    }

    #[test]
    fn support_label_strips_tags() {
        let p = distant_label(&raw("pay gap #equalpay"), &lexicon()).unwrap();
        assert_eq!(p.tokens, ["pay", "gap"]);
        assert_eq!(p.label, StanceLabel::Support);
        assert_eq!(p.year, 2015);
    }

    #[test]
    fn unmatched_and_ambiguous() {
        assert_eq!(classify_post(&raw("pay gap #other"), &lexicon()), LabelOutcome::Unmatched);
        assert_eq!(
            classify_post(&raw("#EqualPay vs #Meninism"), &lexicon()),
            LabelOutcome::Ambiguous
        );
        let p = distant_label(&raw("#meninism #meninism ok"), &lexicon()).unwrap();
        assert_eq!(p.label, StanceLabel::Oppose);
        assert_eq!(p.tokens, ["ok"]);
    }

    #[test]
    fn lexicon_validation() {
        let l = HashtagLexicon::new(["EqualPay"], Vec::<&str>::new()).unwrap();
        assert!(l.support().contains("#equalpay"));
        assert!(HashtagLexicon::new(["#a"], ["#A"]).is_err());
        assert!(HashtagLexicon::from_json(r##"{"support":["#x"],"oppose":["#y"]}"##).is_ok());
        assert!(HashtagLexicon::from_json(r##"{"support":["#x"]}"##).is_err());
    }

    #[test]
    fn ingest_counts() {
        let posts = vec![
            raw("a #equalpay"),
            raw("b #meninism"),
            raw("c #equalpay #meninism"),
            raw("d"),
            RawPost { text: "e #meninism".into(), year: 2015, label: Some(StanceLabel::Support) },
            RawPost { text: "f".into(), year: 2030, label: None },
            RawPost { text: "  ".into(), year: 2015, label: None },
        ];
        let out = ingest(posts, &lexicon(), Some((2014, 2019)));
        let s = &out.stats.years[&2015];
        assert_eq!((s.posts, s.matched_support, s.matched_oppose, s.ambiguous, s.unmatched, s.preset_labels), (5, 1, 1, 1, 1, 1));
        assert_eq!(out.stats.out_of_range, 1);
        assert_eq!(out.stats.empty_text, 1);
        assert_eq!(out.slices.len(), 1);
        assert_eq!(out.slices[0].documents.len(), 5);
        let labelled = &out.labelled[&2015];
        assert_eq!(labelled.len(), 3);
        assert_eq!(labelled[2].tokens, ["e"]);
        assert!((s.support_share - 2.0 / 3.0).abs() < 1e-12);
    }

    fn posts(year: i32, support: usize, oppose: usize) -> Vec<LabelledPost> {
        (0..support + oppose)
            .map(|i| LabelledPost {
                tokens: vec![format!("t{i}")],
                year,
                label: if i < support { StanceLabel::Support } else { StanceLabel::Oppose },
            })
            .collect()
    }

    fn count(split: &[LabelledPost], label: StanceLabel) -> usize {
        split.iter().filter(|p| p.label == label).count()
    }

    #[test]
    fn balance_and_split_example() {
        let mut m = BTreeMap::new();
        m.insert(2014, posts(2014, 120, 80));
        let fr = SplitFractions { train: 0.75, eval: 0.083, test: None };
        let ds = balance_and_split(&m, fr, true, 3).unwrap();
        let y = &ds.years[&2014];
        assert_eq!(y.train.len() + y.eval.len() + y.test.len(), 160);
        assert!((y.train.len() as i64 - 120).abs() <= 1);
        assert!((y.eval.len() as i64 - 13).abs() <= 1);
        assert!((y.test.len() as i64 - 27).abs() <= 1);
        for split in [&y.train, &y.eval, &y.test] {
            assert_eq!(count(split, StanceLabel::Support), count(split, StanceLabel::Oppose));
        }
    }

    #[test]
    fn table_one_shape() {
        let mut m = BTreeMap::new();
        m.insert(2016, posts(2016, 4000, 4000));
        let ds = balance_and_split(&m, SplitFractions::default(), true, 1).unwrap();
        let y = &ds.years[&2016];
        assert_eq!((y.train.len(), y.eval.len(), y.test.len()), (5850, 650, 1500));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let mut m = BTreeMap::new();
        m.insert(2014, posts(2014, 50, 70));
        let fr = SplitFractions::default();
        let a = balance_and_split(&m, fr, true, 9).unwrap();
        assert_eq!(a, balance_and_split(&m, fr, true, 9).unwrap());
        assert_ne!(a, balance_and_split(&m, fr, true, 10).unwrap());
        let y = &a.years[&2014];
        let mut seen = HashSet::new();
        for p in y.train.iter().chain(&y.eval).chain(&y.test) {
            assert!(seen.insert(p.tokens[0].clone()));
        }
    }

    #[test]
    fn unbalanced_keeps_everything() {
        let mut m = BTreeMap::new();
        m.insert(2014, posts(2014, 90, 30));
        let ds = balance_and_split(&m, SplitFractions::default(), false, 0).unwrap();
        let y = &ds.years[&2014];
        assert_eq!(y.train.len() + y.eval.len() + y.test.len(), 120);
    }

    #[test]
    fn missing_label_is_an_error() {
        let mut m = BTreeMap::new();
        m.insert(2017, posts(2017, 10, 0));
        assert!(matches!(
            balance_and_split(&m, SplitFractions::default(), true, 0),
            Err(CorpusError::YearEmpty { year: 2017, label: StanceLabel::Oppose })
        ));
    }

    fn set(words: &[&str]) -> HashSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn jaccard_fixtures() {
        let a = set(&["a", "b", "c"]);
        assert_eq!(jaccard_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard_similarity(&a, &set(&["x"])).unwrap(), 0.0);
        assert_eq!(jaccard_similarity(&a, &set(&["b", "c", "d"])).unwrap(), 0.5);
        assert!(matches!(
            jaccard_similarity(&set(&[]), &set(&[])),
            Err(CorpusError::BothEmpty)
        ));
    }

    proptest! {
        #[test]
        fn distant_labels_never_keep_lexicon_tags(words in proptest::collection::vec("[a-z]{1,4}|#equalpay|#meninism|#heforshe", 0..12)) {
            let lex = lexicon();
            if let Some(p) = distant_label(&raw(&words.join(" ")), &lex) {
                prop_assert!(p.tokens.iter().all(|t| !lex.contains(t)));
            }
        }

        #[test]
        fn jaccard_symmetric_and_identity(
            a in proptest::collection::hash_set("[a-e]", 1..5),
            b in proptest::collection::hash_set("[a-e]", 1..5),
        ) {
            let ab = jaccard_similarity(&a, &b).unwrap();
            prop_assert_eq!(ab, jaccard_similarity(&b, &a).unwrap());
            prop_assert_eq!(ab == 1.0, a == b);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn balanced_split_sizes(support in 1usize..60, oppose in 1usize..60, seed in any::<u64>()) {
            let mut m = BTreeMap::new();
            m.insert(2014, posts(2014, support, oppose));
            let fr = SplitFractions { train: 0.6, eval: 0.2, test: None };
            match balance_and_split(&m, fr, true, seed) {
                Ok(ds) => {
                    let y = &ds.years[&2014];
                    let pool = 2 * support.min(oppose);
                    prop_assert_eq!(y.train.len() + y.eval.len() + y.test.len(), pool);
                    prop_assert!((y.train.len() as f64 - 0.6 * pool as f64).abs() <= 1.0);
                    prop_assert!((y.eval.len() as f64 - 0.2 * pool as f64).abs() <= 1.0);
                    for split in [&y.train, &y.eval, &y.test] {
                        prop_assert_eq!(count(split, StanceLabel::Support), count(split, StanceLabel::Oppose));
                    }
                }
                Err(CorpusError::SplitEmpty { .. }) => prop_assert!(support.min(oppose) < 5),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }
}
