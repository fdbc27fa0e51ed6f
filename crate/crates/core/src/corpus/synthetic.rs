//! Deterministic generator for small drifting stance corpora.
//!
//! The world has `base_vocab_size` word roles. The first
//! `stance_marker_count` roles are stance markers, each currently attached
//! to one stance. Half of the remaining roles are topic words, split evenly
//! among the markers; the rest are background filler drawn from a
//! Zipf-like distribution. Every year after the first, a
//! `lexical_drift_rate` share of roles receives a brand-new surface form,
//! and an `association_drift_rate` share of markers switches stance, taking
//! their topic words along.
//!
//! A post of stance `s` starts from a generating marker attached to `s`.
//! Every further token is another marker with probability `MARKER_SHARE`
//! (from the opposite stance with probability `MARKER_NOISE`), a topic word
//! of the generating marker with probability `TOPIC_SHARE`, and background
//! filler otherwise. Tokens are shuffled.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{balance_and_split, CorpusError, LabelledDataset, LabelledPost, SplitFractions, StanceLabel, TemporalSlice};
use crate::rng::seeded_rng;

const MARKER_SHARE: f64 = 0.25;
const TOPIC_SHARE: f64 = 0.4;
/// Probability that an additional marker comes from the opposite stance.
const MARKER_NOISE: f64 = 0.2;
const MIN_TOKENS: usize = 8;
const MAX_TOKENS: usize = 14;

const STREAM_DRIFT: u64 = 0xd71f;
const STREAM_SLICE: u64 = 0x511c;
const STREAM_LABELLED: u64 = 0x1abe;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDriftConfig {
    pub num_years: usize,
    pub docs_per_year: usize,
    pub base_vocab_size: usize,
    pub lexical_drift_rate: f64,
    pub association_drift_rate: f64,
    pub stance_marker_count: usize,
    pub seed: u64,
    /// Calendar year of the first slice.
    #[serde(default = "default_start_year")]
    pub start_year: i32,
}

fn default_start_year() -> i32 {
    2014
}

impl Default for SyntheticDriftConfig {
    fn default() -> Self {
        SyntheticDriftConfig {
            num_years: 6,
            docs_per_year: 8000,
            base_vocab_size: 1000,
            lexical_drift_rate: 0.1,
            association_drift_rate: 0.1,
            stance_marker_count: 100,
            seed: 0,
            start_year: default_start_year(),
        }
    }
}

impl SyntheticDriftConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |msg: &str| Err(CorpusError::ConfigInvalid(msg.to_string()));
        if self.num_years == 0 || self.docs_per_year == 0 {
            return fail("num_years and docs_per_year must be positive");
        }
        if self.stance_marker_count < 2 {
            return fail("stance_marker_count must be at least 2");
        }
        if self.base_vocab_size <= self.stance_marker_count {
            return fail("base_vocab_size must exceed stance_marker_count");
        }
        for rate in [self.lexical_drift_rate, self.association_drift_rate] {
            if !(0.0..=1.0).contains(&rate) {
                return fail("drift rates must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn years(&self) -> Vec<i32> {
        (0..self.num_years as i32).map(|i| self.start_year + i).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub slices: Vec<TemporalSlice>,
    pub labelled: BTreeMap<i32, Vec<LabelledPost>>,
    pub dataset: LabelledDataset,
}

/// State of the simulated world in one year.
struct World {
    forms: Vec<usize>,
    stance: Vec<StanceLabel>,
    next_form: usize,
}

impl World {
    fn new(cfg: &SyntheticDriftConfig) -> Self {
        World {
            forms: (0..cfg.base_vocab_size).collect(),
            stance: (0..cfg.stance_marker_count)
                .map(|i| if i % 2 == 0 { StanceLabel::Support } else { StanceLabel::Oppose })
                .collect(),
            next_form: cfg.base_vocab_size,
        }
    }

    fn drift(&mut self, cfg: &SyntheticDriftConfig, rng: &mut ChaCha8Rng) {
        let roles = self.forms.len();
        let replace = (cfg.lexical_drift_rate * roles as f64).round() as usize;
        for role in index::sample(rng, roles, replace.min(roles)) {
            self.forms[role] = self.next_form;
            self.next_form += 1;
        }
        let markers = self.stance.len();
        let flips = (cfg.association_drift_rate * markers as f64).round() as usize;
        for m in index::sample(rng, markers, flips.min(markers)) {
            let current = self.stance[m];
            let remaining = self.stance.iter().filter(|&&s| s == current).count();
            if remaining > 1 {
                self.stance[m] = current.opposite();
            }
        }
    }

    fn surface(&self, role: usize) -> String {
        format!("w{:05}", self.forms[role])
    }

    fn markers_of(&self, label: StanceLabel) -> Vec<usize> {
        (0..self.stance.len()).filter(|&m| self.stance[m] == label).collect()
    }
}

struct PostSampler {
    support: Vec<usize>,
    oppose: Vec<usize>,
    /// Topic roles of each marker.
    topics: Vec<Vec<usize>>,
    filler: WeightedIndex<f64>,
    filler_offset: usize,
}

impl PostSampler {
    fn new(world: &World, cfg: &SyntheticDriftConfig) -> Self {
        let markers = cfg.stance_marker_count;
        let neutral = cfg.base_vocab_size - markers;
        let per_marker = neutral / (2 * markers);
        let topics = (0..markers)
            .map(|m| (0..per_marker).map(|k| markers + m * per_marker + k).collect())
            .collect();
        let filler_offset = markers + markers * per_marker;
        let background = cfg.base_vocab_size - filler_offset;
        PostSampler {
            support: world.markers_of(StanceLabel::Support),
            oppose: world.markers_of(StanceLabel::Oppose),
            topics,
            filler: WeightedIndex::new((0..background).map(|r| 1.0 / (r + 1) as f64))
                .expect("background roles are nonempty"),
            filler_offset,
        }
    }

    fn markers(&self, label: StanceLabel) -> &[usize] {
        match label {
            StanceLabel::Support => &self.support,
            StanceLabel::Oppose => &self.oppose,
        }
    }

    fn sample(&self, world: &World, rng: &mut ChaCha8Rng) -> (Vec<String>, StanceLabel) {
        let label = if rng.gen_bool(0.5) { StanceLabel::Support } else { StanceLabel::Oppose };
        let len = rng.gen_range(MIN_TOKENS..=MAX_TOKENS);
        let mut roles = Vec::with_capacity(len);
        let generating = *self.markers(label).choose(rng).expect("each stance keeps a marker");
        let topic = &self.topics[generating];
        roles.push(generating);
        while roles.len() < len {
            let u: f64 = rng.gen();
            let role = if u < MARKER_SHARE {
                let side = if rng.gen_bool(MARKER_NOISE) { label.opposite() } else { label };
                *self.markers(side).choose(rng).expect("each stance keeps a marker")
            } else if u < MARKER_SHARE + TOPIC_SHARE && !topic.is_empty() {
                *topic.choose(rng).expect("topic is nonempty")
            } else {
                self.filler_offset + self.filler.sample(rng)
            };
            roles.push(role);
        }
        roles.shuffle(rng);
        (roles.into_iter().map(|r| world.surface(r)).collect(), label)
    }
}

/// Generates one unlabelled slice and one labelled post pool per year, then
/// balances and splits the pools with the default fractions.
pub fn generate_synthetic_corpus(cfg: &SyntheticDriftConfig) -> Result<SyntheticCorpus, CorpusError> {
    cfg.validate()?;
    let mut world = World::new(cfg);
    let mut drift_rng = seeded_rng(cfg.seed, &[STREAM_DRIFT]);
    let mut slices = Vec::with_capacity(cfg.num_years);
    let mut labelled = BTreeMap::new();
    for (i, year) in cfg.years().into_iter().enumerate() {
        if i > 0 {
            world.drift(cfg, &mut drift_rng);
        }
        let sampler = PostSampler::new(&world, cfg);
        let mut rng = seeded_rng(cfg.seed, &[STREAM_SLICE, i as u64]);
        let documents = (0..cfg.docs_per_year)
            .map(|_| sampler.sample(&world, &mut rng).0)
            .collect();
        slices.push(TemporalSlice { year, documents });

        let mut rng = seeded_rng(cfg.seed, &[STREAM_LABELLED, i as u64]);
        let posts = (0..cfg.docs_per_year)
            .map(|_| {
                let (tokens, label) = sampler.sample(&world, &mut rng);
                LabelledPost { tokens, year, label }
            })
            .collect();
        labelled.insert(year, posts);
    }
    let dataset = balance_and_split(&labelled, SplitFractions::default(), true, cfg.seed)?;
    Ok(SyntheticCorpus { slices, labelled, dataset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::jaccard_matrix;

    fn small(lex: f64, seed: u64) -> SyntheticDriftConfig {
        SyntheticDriftConfig {
            num_years: 6,
            docs_per_year: 400,
            base_vocab_size: 120,
            lexical_drift_rate: lex,
            association_drift_rate: 0.1,
            stance_marker_count: 20,
            seed,
            start_year: 2014,
        }
    }

    fn matrix(cfg: &SyntheticDriftConfig) -> Vec<Vec<f64>> {
        let c = generate_synthetic_corpus(cfg).unwrap();
        jaccard_matrix(&c.slices.iter().map(|s| s.word_set()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn no_lexical_drift_keeps_vocabulary() {
        let mut cfg = small(0.0, 4);
        cfg.docs_per_year = 3000;
        for row in matrix(&cfg) {
            for v in row {
                assert_eq!(v, 1.0);
            }
        }
    }

    #[test]
    fn jaccard_shrinks_with_gap() {
        let m = matrix(&small(0.1, 11));
        for i in 0..6 {
            for j in i + 1..6 {
                if j + 1 < 6 {
                    assert!(m[i][j] > m[i][j + 1], "row {i}: {:?}", m[i]);
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic_corpus(&small(0.1, 5)).unwrap();
        let b = generate_synthetic_corpus(&small(0.1, 5)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_corpus(&small(0.1, 6)).unwrap();
        assert_ne!(a.slices, c.slices);
    }

    #[test]
    fn labelled_pools_are_balanced_and_split() {
        let c = generate_synthetic_corpus(&small(0.1, 2)).unwrap();
        assert_eq!(c.dataset.years.len(), 6);
        for y in c.dataset.years.values() {
            assert!(!y.train.is_empty() && !y.eval.is_empty() && !y.test.is_empty());
            let s = y.train.iter().filter(|p| p.label == StanceLabel::Support).count();
            assert_eq!(2 * s, y.train.len());
        }
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small(1.5, 0);
        assert!(generate_synthetic_corpus(&cfg).is_err());
        cfg.lexical_drift_rate = 0.1;
        cfg.stance_marker_count = 200;
        assert!(generate_synthetic_corpus(&cfg).is_err());
        cfg.stance_marker_count = 20;
        cfg.num_years = 0;
        assert!(generate_synthetic_corpus(&cfg).is_err());
    }
}
