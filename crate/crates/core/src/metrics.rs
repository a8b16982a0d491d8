//! Sample-averaged precision/recall/F1 over label sets and Cohen's kappa.
//!
//! Scores are computed per sample and then averaged with equal weight per
//! sample. This is often reported as "micro F1" in dialog-act work, but it is
//! the per-sample average, not a pooled count.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::taxonomy::LabelSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn sample_prf(gold: &LabelSet, pred: &LabelSet) -> SampleScore {
    let hit = gold.iter().filter(|t| pred.contains(t)).count() as f64;
    let precision = hit / pred.len() as f64;
    let recall = hit / gold.len() as f64;
    SampleScore { precision, recall, f1: f1(precision, recall) }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no samples to score")]
    Empty,
    #[error("annotators cover different segments ({only_a} only in the first, {only_b} only in the second)")]
    CoverageMismatch { only_a: usize, only_b: usize },
    #[error("kappa needs at least 2 segments, got {0}")]
    TooFewSegments(usize),
}

/// Unweighted means of the per-sample scores.
pub fn corpus_prf<'a>(pairs: impl IntoIterator<Item = (&'a LabelSet, &'a LabelSet)>) -> Result<SampleScore, MetricsError> {
    let (mut p, mut r, mut f, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (gold, pred) in pairs {
        let s = sample_prf(gold, pred);
        p += s.precision;
        r += s.recall;
        f += s.f1;
        n += 1;
    }
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let n = n as f64;
    Ok(SampleScore { precision: p / n, recall: r / n, f1: f / n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMode {
    /// Each distinct label set is one category.
    #[default]
    ExactSet,
    /// Binary present/absent kappa per tag, averaged over tags where it is
    /// defined.
    PerTagMean,
}

/// Cohen's kappa over paired categorical judgements. `None` when chance
/// agreement is 1 (both raters constant on the same category).
pub fn kappa<T: Ord>(pairs: &[(T, T)]) -> Option<f64> {
    let n = pairs.len() as f64;
    let mut a_counts: BTreeMap<&T, f64> = BTreeMap::new();
    let mut b_counts: BTreeMap<&T, f64> = BTreeMap::new();
    let mut agree = 0.0;
    for (a, b) in pairs {
        *a_counts.entry(a).or_default() += 1.0;
        *b_counts.entry(b).or_default() += 1.0;
        if a == b {
            agree += 1.0;
        }
    }
    let observed = agree / n;
    let expected: f64 = a_counts.iter().map(|(k, ca)| (ca / n) * (b_counts.get(k).copied().unwrap_or(0.0) / n)).sum();
    if expected >= 1.0 {
        return None;
    }
    Some((observed - expected) / (1.0 - expected))
}

/// Agreement between two annotators over the same segments. A fully
/// degenerate case where kappa is undefined because both annotators used one
/// identical category throughout scores 1.
pub fn cohen_kappa(
    a: &BTreeMap<String, LabelSet>,
    b: &BTreeMap<String, LabelSet>,
    mode: KappaMode,
) -> Result<f64, MetricsError> {
    let only_a = a.keys().filter(|k| !b.contains_key(*k)).count();
    let only_b = b.keys().filter(|k| !a.contains_key(*k)).count();
    if only_a + only_b > 0 {
        return Err(MetricsError::CoverageMismatch { only_a, only_b });
    }
    if a.len() < 2 {
        return Err(MetricsError::TooFewSegments(a.len()));
    }
    match mode {
        KappaMode::ExactSet => {
            let pairs: Vec<(&LabelSet, &LabelSet)> = a.iter().map(|(k, la)| (la, &b[k])).collect();
            Ok(kappa(&pairs).unwrap_or(1.0))
        }
        KappaMode::PerTagMean => {
            let tags: BTreeSet<&str> = a.values().chain(b.values()).flat_map(|l| l.iter()).collect();
            let per_tag: Vec<f64> = tags
                .iter()
                .filter_map(|tag| {
                    let pairs: Vec<(bool, bool)> = a.iter().map(|(k, la)| (la.contains(tag), b[k].contains(tag))).collect();
                    kappa(&pairs)
                })
                .collect();
            if per_tag.is_empty() {
                return Ok(1.0);
            }
            Ok(per_tag.iter().sum::<f64>() / per_tag.len() as f64)
        }
    }
}
