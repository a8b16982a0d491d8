//! Text encoders: rendered input string to a fixed-width feature vector.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Encoder output. Sparse entries are `(index, value)` with unique indices in
/// ascending order.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Sparse(Vec<(usize, f64)>),
    Dense(Vec<f64>),
}

impl Features {
    /// Visits every non-zero coordinate.
    pub fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            Features::Sparse(v) => v.iter().for_each(|&(i, x)| f(i, x)),
            Features::Dense(v) => v.iter().enumerate().filter(|(_, x)| **x != 0.0).for_each(|(i, &x)| f(i, x)),
        }
    }
}

pub trait Encoder {
    /// Width of every vector this encoder produces.
    fn width(&self) -> usize;
    fn encode(&self, input: &str) -> Features;
}

/// Bag of token n-grams. Separator tokens are ordinary tokens. N-grams
/// unseen when the vocabulary was built are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "NGramRepr", into = "NGramRepr")]
pub struct NGramEncoder {
    orders: Vec<usize>,
    vocab: Vec<String>,
    index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct NGramRepr {
    orders: Vec<usize>,
    vocab: Vec<String>,
}

impl From<NGramRepr> for NGramEncoder {
    fn from(r: NGramRepr) -> Self {
        let index = r.vocab.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        NGramEncoder { orders: r.orders, vocab: r.vocab, index }
    }
}

impl From<NGramEncoder> for NGramRepr {
    fn from(e: NGramEncoder) -> Self {
        NGramRepr { orders: e.orders, vocab: e.vocab }
    }
}

fn grams(input: &str, orders: &[usize]) -> Vec<String> {
    let toks: Vec<&str> = input.split_whitespace().collect();
    let mut out = Vec::new();
    for &n in orders {
        if n == 0 || n > toks.len() {
            continue;
        }
        out.extend(toks.windows(n).map(|w| w.join(" ")));
    }
    out
}

impl NGramEncoder {
    /// Vocabulary = every n-gram in `inputs`, sorted.
    pub fn fit<'a>(inputs: impl IntoIterator<Item = &'a str>, orders: &[usize]) -> Self {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for input in inputs {
            for g in grams(input, orders) {
                seen.entry(g).or_insert(0);
            }
        }
        let vocab: Vec<String> = seen.into_keys().collect();
        NGramRepr { orders: orders.to_vec(), vocab }.into()
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }
}

impl Encoder for NGramEncoder {
    fn width(&self) -> usize {
        self.vocab.len()
    }

    fn encode(&self, input: &str) -> Features {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for g in grams(input, &self.orders) {
            if let Some(&i) = self.index.get(&g) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        Features::Sparse(counts.into_iter().collect())
    }
}

/// Hex SHA-256 of a rendered input; the key for precomputed vectors.
pub fn input_key(input: &str) -> String {
    let digest = Sha256::digest(input.as_bytes());
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Vectors computed outside this crate (e.g. by a pretrained transformer),
/// looked up by [`input_key`]. Unknown inputs encode as the zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecomputedEncoder {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl PrecomputedEncoder {
    pub fn contains(&self, input: &str) -> bool {
        self.vectors.contains_key(&input_key(input))
    }
}

impl Encoder for PrecomputedEncoder {
    fn width(&self) -> usize {
        self.dim
    }

    fn encode(&self, input: &str) -> Features {
        match self.vectors.get(&input_key(input)) {
            Some(v) => Features::Dense(v.clone()),
            None => Features::Dense(vec![0.0; self.dim]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EncoderSpec {
    NGram(NGramEncoder),
    Precomputed(PrecomputedEncoder),
}

impl Encoder for EncoderSpec {
    fn width(&self) -> usize {
        match self {
            EncoderSpec::NGram(e) => e.width(),
            EncoderSpec::Precomputed(e) => e.width(),
        }
    }

    fn encode(&self, input: &str) -> Features {
        match self {
            EncoderSpec::NGram(e) => e.encode(input),
            EncoderSpec::Precomputed(e) => e.encode(input),
        }
    }
}
