//! Sentence-boundary prediction for unpunctuated utterances.
//!
//! Training data comes from punctuated text: sentence-final punctuation is
//! turned into boundary positions and every other mark is dropped. The model
//! scores each gap between adjacent tokens with a logistic classifier over
//! windowed n-gram features.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math::sigmoid;
use crate::text::{self, BOUNDARY_TOKEN};

pub const SEGMENTER_FORMAT_VERSION: u32 = 1;

/// Tokens plus the gaps after which a new unit starts. Gap `i` sits between
/// token `i` and token `i + 1`; the end of the utterance is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryExample {
    pub tokens: Vec<String>,
    pub boundaries: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SegmentError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("boundary position {position} out of range for {len} tokens")]
    BadBoundary { position: usize, len: usize },
    #[error("no training examples")]
    NoExamples,
    #[error("training data contains no boundaries")]
    NoBoundaries,
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl BoundaryExample {
    pub fn new(tokens: Vec<String>, boundaries: BTreeSet<usize>) -> Result<Self, SegmentError> {
        if tokens.is_empty() {
            return Err(SegmentError::EmptyText);
        }
        if let Some(&p) = boundaries.iter().find(|&&p| p + 1 >= tokens.len()) {
            return Err(SegmentError::BadBoundary { position: p, len: tokens.len() });
        }
        Ok(BoundaryExample { tokens, boundaries })
    }

    /// Unit texts obtained by cutting at every boundary.
    pub fn units(&self) -> Vec<String> {
        split_at(&self.tokens, &self.boundaries)
    }

    /// Text with `[SEG]` markers at the boundaries.
    pub fn marked(&self) -> String {
        self.units().join(&format!(" {BOUNDARY_TOKEN} "))
    }
}

fn split_at(tokens: &[String], boundaries: &BTreeSet<usize>) -> Vec<String> {
    let mut units = Vec::new();
    let mut start = 0;
    for &b in boundaries {
        units.push(tokens[start..=b].join(" "));
        start = b + 1;
    }
    units.push(tokens[start..].join(" "));
    units
}

/// Converts punctuated text into a boundary example. `.`, `!`, `?` and the
/// literal `[SEG]` mark boundaries; other punctuation except apostrophes is
/// dropped.
pub fn reformat(punctuated: &str) -> Result<BoundaryExample, SegmentError> {
    let source = punctuated.replace(BOUNDARY_TOKEN, " . ");
    let mut tokens: Vec<String> = Vec::new();
    let mut boundaries = BTreeSet::new();
    let mut pending = false;
    let mut flush = |word: &str, pending: &mut bool, tokens: &mut Vec<String>| {
        // Sentence-final marks inside a word ("3.5", "e.g") still split it;
        // the word pieces are normalized independently.
        for t in text::tokens(word) {
            if *pending && !tokens.is_empty() {
                boundaries.insert(tokens.len() - 1);
            }
            *pending = false;
            tokens.push(t);
        }
    };
    let mut word = String::new();
    for c in source.chars() {
        if matches!(c, '.' | '!' | '?') {
            flush(&word, &mut pending, &mut tokens);
            word.clear();
            pending = true;
        } else if c.is_whitespace() {
            flush(&word, &mut pending, &mut tokens);
            word.clear();
        } else {
            word.push(c);
        }
    }
    flush(&word, &mut pending, &mut tokens);
    BoundaryExample::new(tokens, boundaries)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Tokens considered on each side of a gap.
    pub radius: usize,
    /// N-gram orders drawn from the window.
    pub orders: Vec<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { radius: 2, orders: vec![1, 2] }
    }
}

impl FeatureConfig {
    /// Feature names active at gap `gap` of `tokens`.
    pub fn features(&self, tokens: &[String], gap: usize) -> Vec<String> {
        let r = self.radius as isize;
        let at = |off: isize| -> &str {
            let i = gap as isize + off;
            if i < 0 {
                "<s>"
            } else if i as usize >= tokens.len() {
                "</s>"
            } else {
                &tokens[i as usize]
            }
        };
        let mut out = vec![String::from("bias")];
        // window offsets -r+1 ..= r, the gap lies between 0 and 1
        let lo = 1 - r;
        for &n in &self.orders {
            let n = n as isize;
            let mut start = lo;
            while start + n - 1 <= r {
                let gram: Vec<&str> = (start..start + n).map(at).collect();
                out.push(format!("{n}@{start}={}", gram.join("|")));
                start += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub features: FeatureConfig,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            features: FeatureConfig::default(),
            learning_rate: 0.5,
            epochs: 10,
            l2: 1e-5,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl SegmenterConfig {
    fn check(&self) -> Result<(), SegmentError> {
        if self.features.radius == 0 || self.features.orders.is_empty() {
            return Err(SegmentError::Config("radius and orders must be non-empty".into()));
        }
        if self.features.orders.iter().any(|&n| n == 0 || n > 2 * self.features.radius) {
            return Err(SegmentError::Config("n-gram order must lie in 1..=2*radius".into()));
        }
        if !(self.learning_rate > 0.0) || self.epochs == 0 || !(self.l2 >= 0.0) {
            return Err(SegmentError::Config("learning rate and epochs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(SegmentError::Config("threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Precision, recall and F1 over boundary positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Pools boundary counts over all pairs. An empty side scores 0, except that
/// no gold and no predicted boundaries at all counts as perfect agreement.
pub fn boundary_prf<'a>(pairs: impl IntoIterator<Item = (&'a BTreeSet<usize>, &'a BTreeSet<usize>)>) -> BoundaryScore {
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (gold, pred) in pairs {
        let hit = gold.intersection(pred).count();
        tp += hit;
        fp += pred.len() - hit;
        fnn += gold.len() - hit;
    }
    let (precision, recall, f1) = if tp + fp + fnn == 0 {
        (1.0, 1.0, 1.0)
    } else {
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fnn == 0 { 0.0 } else { tp as f64 / (tp + fnn) as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    };
    BoundaryScore { precision, recall, f1, true_positives: tp, false_positives: fp, false_negatives: fnn }
}

/// A trained boundary classifier. Immutable; inference is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterModel {
    pub format_version: u32,
    pub config: SegmenterConfig,
    pub weights: BTreeMap<String, f64>,
    pub training_score: BoundaryScore,
}

impl SegmenterModel {
    pub fn probability(&self, tokens: &[String], gap: usize) -> f64 {
        let z: f64 = self
            .config
            .features
            .features(tokens, gap)
            .iter()
            .filter_map(|f| self.weights.get(f))
            .sum();
        sigmoid(z)
    }

    pub fn predict_boundaries(&self, tokens: &[String]) -> BTreeSet<usize> {
        (0..tokens.len().saturating_sub(1))
            .filter(|&g| self.probability(tokens, g) >= self.config.threshold)
            .collect()
    }

    /// Splits an utterance into unit texts. Always returns at least one
    /// unit; empty input yields a single empty unit.
    pub fn segment(&self, utterance: &str) -> Vec<String> {
        let tokens = text::tokens(&utterance.replace(BOUNDARY_TOKEN, " "));
        if tokens.is_empty() {
            return vec![String::new()];
        }
        split_at(&tokens, &self.predict_boundaries(&tokens))
    }

    pub fn evaluate(&self, gold: &[BoundaryExample]) -> Result<BoundaryScore, SegmentError> {
        if gold.is_empty() {
            return Err(SegmentError::NoExamples);
        }
        let preds: Vec<BTreeSet<usize>> = gold.iter().map(|g| self.predict_boundaries(&g.tokens)).collect();
        Ok(boundary_prf(gold.iter().map(|g| &g.boundaries).zip(preds.iter())))
    }
}

/// Trains by stochastic gradient descent on the logistic loss. The visiting
/// order is shuffled with a generator seeded from `config.seed`.
pub fn train_segmenter(examples: &[BoundaryExample], config: &SegmenterConfig) -> Result<SegmenterModel, SegmentError> {
    config.check()?;
    if examples.is_empty() {
        return Err(SegmentError::NoExamples);
    }
    if examples.iter().all(|e| e.boundaries.is_empty()) {
        return Err(SegmentError::NoBoundaries);
    }

    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut samples: Vec<(Vec<usize>, f64)> = Vec::new();
    for ex in examples {
        for gap in 0..ex.tokens.len().saturating_sub(1) {
            let feats = config
                .features
                .features(&ex.tokens, gap)
                .into_iter()
                .map(|f| {
                    let next = index.len();
                    *index.entry(f).or_insert(next)
                })
                .collect();
            samples.push((feats, if ex.boundaries.contains(&gap) { 1.0 } else { 0.0 }));
        }
    }

    let mut w = vec![0.0f64; index.len()];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &s in &order {
            let (feats, y) = &samples[s];
            let z: f64 = feats.iter().map(|&f| w[f]).sum();
            let g = sigmoid(z) - y;
            for &f in feats {
                w[f] -= config.learning_rate * (g + config.l2 * w[f]);
            }
        }
    }

    let weights = index.into_iter().map(|(name, i)| (name, w[i])).collect();
    let mut model = SegmenterModel {
        format_version: SEGMENTER_FORMAT_VERSION,
        config: config.clone(),
        weights,
        training_score: BoundaryScore {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            true_positives: 0,
            false_positives: 0,
            false_negatives: 0,
        },
    };
    model.training_score = model.evaluate(examples)?;
    Ok(model)
}
