//! Multi-label dialog-act classifier: encoder, MLP head, training and
//! top-2 threshold decoding.

pub mod encoder;
pub mod network;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use encoder::{Encoder, EncoderSpec, Features, NGramEncoder, PrecomputedEncoder, input_key};
pub use network::{Network, Objective, PreparedExample};

use crate::context::{ContextMode, Separators};
use crate::metrics::{SampleScore, corpus_prf};
use crate::taxonomy::{LabelError, LabelSet, Taxonomy};
use network::Adam;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Scores are kept strictly inside (0, 1).
const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    SingleLabel,
    #[default]
    MultiLabel,
}

impl TrainingMode {
    pub fn objective(self) -> Objective {
        match self {
            TrainingMode::SingleLabel => Objective::SingleLabel,
            TrainingMode::MultiLabel => Objective::MultiLabel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: TrainingMode,
    /// Hidden layer widths; empty gives a linear head.
    pub hidden: Vec<usize>,
    /// N-gram orders for the built-in encoder.
    pub ngram_orders: Vec<usize>,
    /// How the training inputs were rendered. Recorded in the bundle only.
    pub context_mode: ContextMode,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 8,
            seed: 0,
            mode: TrainingMode::MultiLabel,
            hidden: vec![64],
            ngram_orders: vec![1, 2],
            context_mode: ContextMode::Text,
        }
    }
}

impl TrainingConfig {
    pub fn check(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::Config(m.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return bad("ngram_orders must be non-empty and positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingConfig {
    pub second_label_threshold: f64,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig { second_label_threshold: 0.5 }
    }
}

impl DecodingConfig {
    pub fn new(second_label_threshold: f64) -> Result<Self, ClassifierError> {
        let c = DecodingConfig { second_label_threshold };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<(), ClassifierError> {
        if (0.0..=1.0).contains(&self.second_label_threshold) {
            Ok(())
        } else {
            Err(ClassifierError::Config(alloc::format!(
                "second_label_threshold must be in [0, 1], got {}",
                self.second_label_threshold
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no training examples")]
    NoExamples,
    #[error("example {index} has {count} labels; single-label training needs exactly one")]
    NotSingleLabel { index: usize, count: usize },
    #[error("example {index}: {source}")]
    Label { index: usize, source: LabelError },
    #[error("encoder width {got} does not match the network input width {expected}")]
    EncoderWidth { expected: usize, got: usize },
    #[error("model tag vocabulary does not match the taxonomy")]
    TagMismatch,
    #[error("unsupported bundle format version {0}")]
    FormatVersion(u32),
}

/// A rendered input with its gold label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub input: String,
    pub labels: LabelSet,
}

impl From<crate::swda::TransferExample> for Example {
    fn from(e: crate::swda::TransferExample) -> Self {
        let labels = LabelSet::try_from(vec![e.tag]).expect("one tag is a valid label set shape");
        Example { input: e.input, labels }
    }
}

/// Everything needed to predict: encoder, weights, tag order and decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    /// Tag ids in score order.
    pub tags: Vec<String>,
    pub network: Network,
    /// Squashing applied to the raw scores.
    pub output: Objective,
    pub decoding: DecodingConfig,
    pub separators: Separators,
    pub context_mode: ContextMode,
    pub training: TrainingConfig,
    /// Mean training loss after each epoch.
    pub epoch_losses: Vec<f64>,
}

impl ModelBundle {
    /// Rejects bundles this build cannot read or whose tags differ from
    /// `taxonomy`.
    pub fn check(&self, taxonomy: &Taxonomy) -> Result<(), ClassifierError> {
        if self.format_version != BUNDLE_FORMAT_VERSION {
            return Err(ClassifierError::FormatVersion(self.format_version));
        }
        if self.tags != taxonomy.tag_ids() || self.network.tag_count() != self.tags.len() {
            return Err(ClassifierError::TagMismatch);
        }
        let width = self.network.encoder.width();
        if width != self.network.dims[0] {
            return Err(ClassifierError::EncoderWidth { expected: self.network.dims[0], got: width });
        }
        self.decoding.check()
    }

    /// Per-tag scores in (0, 1), in [`tags`](Self::tags) order.
    pub fn predict_scores(&self, input: &str) -> Vec<f64> {
        let z = self.network.logits(input);
        let p: Vec<f64> = match self.output {
            Objective::MultiLabel => z.iter().map(|&v| crate::math::sigmoid(v)).collect(),
            Objective::SingleLabel => {
                let lse = crate::math::log_sum_exp(&z);
                z.iter().map(|&v| libm::exp(v - lse)).collect()
            }
        };
        p.into_iter().map(|v| v.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)).collect()
    }

    pub fn predict(&self, input: &str, taxonomy: &Taxonomy) -> LabelSet {
        decode(&self.predict_scores(input), &self.decoding, taxonomy)
    }

    pub fn evaluate(&self, examples: &[Example], taxonomy: &Taxonomy) -> Option<SampleScore> {
        let preds: Vec<LabelSet> = examples.iter().map(|e| self.predict(&e.input, taxonomy)).collect();
        corpus_prf(examples.iter().map(|e| &e.labels).zip(&preds)).ok()
    }
}

/// Indices of the two highest scores; equal scores rank by lower index.
fn top2(scores: &[f64]) -> (usize, Option<usize>) {
    let mut first = 0;
    let mut second: Option<usize> = None;
    for i in 1..scores.len() {
        if scores[i] > scores[first] {
            second = Some(first);
            first = i;
        } else if second.is_none_or(|s| scores[i] > scores[s]) {
            second = Some(i);
        }
    }
    (first, second)
}

/// Keeps the top tag, and the runner-up too when its score reaches the
/// threshold and the pair is allowed together.
///
/// # Panics
/// If `scores` is not one score per taxonomy tag.
pub fn decode(scores: &[f64], config: &DecodingConfig, taxonomy: &Taxonomy) -> LabelSet {
    assert_eq!(scores.len(), taxonomy.tag_count(), "one score per tag");
    let tags = taxonomy.tags();
    let (t1, t2) = top2(scores);
    let mut out = vec![tags[t1].id.clone()];
    if let Some(t2) = t2 {
        let keep = scores[t2] >= config.second_label_threshold
            && taxonomy.compatible(&tags[t1].id, &tags[t2].id).expect("taxonomy tags");
        if keep {
            out.push(tags[t2].id.clone());
        }
    }
    LabelSet::try_from(out).expect("one or two distinct tags")
}

fn prepare(
    network: &Network,
    examples: &[Example],
    taxonomy: &Taxonomy,
    mode: TrainingMode,
) -> Result<Vec<PreparedExample>, ClassifierError> {
    examples
        .iter()
        .enumerate()
        .map(|(index, e)| {
            taxonomy.check(&e.labels).map_err(|source| ClassifierError::Label { index, source })?;
            if mode == TrainingMode::SingleLabel && e.labels.len() != 1 {
                return Err(ClassifierError::NotSingleLabel { index, count: e.labels.len() });
            }
            let tags = e.labels.iter().map(|t| taxonomy.tag_index(t).expect("checked")).collect();
            Ok(PreparedExample { features: network.encoder.encode(&e.input), tags })
        })
        .collect()
}

/// Minibatch Adam over shuffled data; returns the mean loss of each epoch.
fn fit(network: &mut Network, mut data: Vec<PreparedExample>, config: &TrainingConfig, objective: Objective) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(config.learning_rate, network.params.len());
    let mut losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        data.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in data.chunks(config.batch_size) {
            let (loss, grad) = network.loss_and_gradient(batch, objective);
            total += loss * batch.len() as f64;
            adam.update(&mut network.params, &grad);
        }
        losses.push(total / data.len() as f64);
    }
    losses
}

/// Trains with the built-in n-gram encoder fitted to the training inputs.
pub fn train(examples: &[Example], config: &TrainingConfig, taxonomy: &Taxonomy) -> Result<ModelBundle, ClassifierError> {
    config.check()?;
    let encoder = NGramEncoder::fit(examples.iter().map(|e| e.input.as_str()), &config.ngram_orders);
    train_with_encoder(examples, EncoderSpec::NGram(encoder), config, taxonomy)
}

pub fn train_with_encoder(
    examples: &[Example],
    encoder: EncoderSpec,
    config: &TrainingConfig,
    taxonomy: &Taxonomy,
) -> Result<ModelBundle, ClassifierError> {
    config.check()?;
    if examples.is_empty() {
        return Err(ClassifierError::NoExamples);
    }
    let mut network = Network::init(encoder, &config.hidden, taxonomy.tag_count(), config.seed);
    let data = prepare(&network, examples, taxonomy, config.mode)?;
    let epoch_losses = fit(&mut network, data, config, config.mode.objective());
    Ok(bundle(network, config.mode.objective(), config, taxonomy, epoch_losses))
}

fn bundle(
    network: Network,
    output: Objective,
    config: &TrainingConfig,
    taxonomy: &Taxonomy,
    epoch_losses: Vec<f64>,
) -> ModelBundle {
    ModelBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        tags: taxonomy.tag_ids(),
        network,
        output,
        decoding: DecodingConfig::default(),
        separators: Separators::default(),
        context_mode: config.context_mode,
        training: config.clone(),
        epoch_losses,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub examples: usize,
    pub final_loss: f64,
    /// Sample-averaged scores on the stage's own training data.
    pub train_score: SampleScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferOutcome {
    pub bundle: ModelBundle,
    pub stages: Vec<StageReport>,
}

fn report(stage: &str, bundle: &ModelBundle, examples: &[Example], taxonomy: &Taxonomy) -> StageReport {
    StageReport {
        stage: stage.into(),
        examples: examples.len(),
        final_loss: bundle.epoch_losses.last().copied().unwrap_or(f64::NAN),
        train_score: bundle.evaluate(examples, taxonomy).expect("non-empty"),
    }
}

/// Single-label pretraining on `source`, then multi-label fine-tuning of the
/// same weights on `target`. The score layer switches from softmax to
/// per-tag logistics between stages and the optimizer state starts fresh.
/// `config.mode` is ignored. An empty `source` is plain multi-label training.
pub fn transfer_pipeline(
    source: &[Example],
    target: &[Example],
    config: &TrainingConfig,
    taxonomy: &Taxonomy,
) -> Result<TransferOutcome, ClassifierError> {
    let multi = TrainingConfig { mode: TrainingMode::MultiLabel, ..config.clone() };
    if source.is_empty() {
        let b = train(target, &multi, taxonomy)?;
        let stages = vec![report("fine_tune", &b, target, taxonomy)];
        return Ok(TransferOutcome { bundle: b, stages });
    }
    config.check()?;
    if target.is_empty() {
        return Err(ClassifierError::NoExamples);
    }
    let inputs = source.iter().chain(target).map(|e| e.input.as_str());
    let encoder = EncoderSpec::NGram(NGramEncoder::fit(inputs, &config.ngram_orders));
    let mut network = Network::init(encoder, &config.hidden, taxonomy.tag_count(), config.seed);

    let single = TrainingConfig { mode: TrainingMode::SingleLabel, ..config.clone() };
    let data = prepare(&network, source, taxonomy, TrainingMode::SingleLabel)?;
    let fine_data = prepare(&network, target, taxonomy, TrainingMode::MultiLabel)?;
    let losses = fit(&mut network, data, &single, Objective::SingleLabel);
    let pre = bundle(network, Objective::SingleLabel, &single, taxonomy, losses);
    let mut stages = vec![report("pretrain", &pre, source, taxonomy)];

    let mut network = pre.network;
    let losses = fit(&mut network, fine_data, &multi, Objective::MultiLabel);
    let b = bundle(network, Objective::MultiLabel, &multi, taxonomy, losses);
    stages.push(report("fine_tune", &b, target, taxonomy));
    Ok(TransferOutcome { bundle: b, stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::toy_examples;
    use alloc::string::ToString;

    fn toy(n: usize, seed: u64) -> Vec<Example> {
        let tax = Taxonomy::builtin();
        toy_examples(n, seed)
            .into_iter()
            .map(|(input, tags)| Example { input, labels: tax.label_set(tags).unwrap() })
            .collect()
    }

    /// Sort-based restatement of the decoding rule.
    fn oracle(scores: &[f64], threshold: f64, tax: &Taxonomy) -> Vec<String> {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        let ids = tax.tag_ids();
        let (a, b) = (&ids[order[0]], &ids[order[1]]);
        let pair_ok = tax.validate(&[a, b]).unwrap().is_ok();
        let mut out = if scores[order[1]] >= threshold && pair_ok { vec![a.clone(), b.clone()] } else { vec![a.clone()] };
        out.sort();
        out
    }

    #[test]
    fn decode_worked_cases() {
        let tax = Taxonomy::builtin();
        let cfg = DecodingConfig::default();
        let idx = |t: &str| tax.tag_index(t).unwrap();
        let mut s = vec![0.01; 23];
        s[idx("negative_answer")] = 0.9;
        s[idx("statement_non_opinion")] = 0.6;
        assert_eq!(decode(&s, &cfg, &tax).tags(), ["negative_answer", "statement_non_opinion"]);
        s[idx("statement_non_opinion")] = 0.3;
        assert_eq!(decode(&s, &cfg, &tax).tags(), ["negative_answer"]);
        let mut s = vec![0.01; 23];
        s[idx("opening")] = 0.4;
        s[idx("closing")] = 0.2;
        assert_eq!(decode(&s, &cfg, &tax).tags(), ["opening"]);
        // exclusive pair degrades to the top tag
        let mut s = vec![0.01; 23];
        s[idx("comment")] = 0.95;
        s[idx("statement_non_opinion")] = 0.9;
        assert_eq!(decode(&s, &cfg, &tax).tags(), ["comment"]);
        // ties go to vocabulary order
        let s = vec![0.7; 23];
        assert_eq!(decode(&s, &cfg, &tax).tags(), ["factual_question", "opinion_question"]);
    }

    #[test]
    fn decode_matches_oracle() {
        use rand::Rng;
        let tax = Taxonomy::builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let coarse = rng.random_bool(0.3);
            let scores: Vec<f64> =
                (0..23).map(|_| if coarse { rng.random_range(0..4) as f64 / 4.0 } else { rng.random::<f64>() }).collect();
            let t = rng.random_range(0..=4) as f64 / 4.0;
            let got = decode(&scores, &DecodingConfig { second_label_threshold: t }, &tax);
            assert_eq!(got.tags(), oracle(&scores, t, &tax).as_slice());
        }
    }

    #[test]
    fn threshold_validation() {
        assert!(DecodingConfig::new(0.0).is_ok());
        assert!(DecodingConfig::new(1.0).is_ok());
        assert!(DecodingConfig::new(1.5).is_err());
        assert!(DecodingConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let tax = Taxonomy::builtin();
        let ex = toy(5, 3);
        for (objective, hidden) in [(Objective::MultiLabel, vec![4]), (Objective::MultiLabel, vec![3, 2]), (Objective::SingleLabel, vec![4])]
        {
            let ex: Vec<Example> = if objective == Objective::SingleLabel {
                ex.iter().filter(|e| e.labels.len() == 1).cloned().collect()
            } else {
                ex.clone()
            };
            let enc = NGramEncoder::fit(ex.iter().map(|e| e.input.as_str()), &[1, 2]);
            let mut net = Network::init(EncoderSpec::NGram(enc), &hidden, 23, 11);
            let mode = if objective == Objective::SingleLabel { TrainingMode::SingleLabel } else { TrainingMode::MultiLabel };
            let data = prepare(&net, &ex, &tax, mode).unwrap();
            let (_, analytic) = net.loss_and_gradient(&data, objective);
            let h = 1e-5;
            let mut numeric = vec![0.0; net.params.len()];
            for i in 0..net.params.len() {
                let keep = net.params[i];
                net.params[i] = keep + h;
                let up = net.loss(&data, objective);
                net.params[i] = keep - h;
                let down = net.loss(&data, objective);
                net.params[i] = keep;
                numeric[i] = (up - down) / (2.0 * h);
            }
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n) * (a - n)).sum::<f64>();
            let norm = |v: &[f64]| libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            let rel = libm::sqrt(diff) / (norm(&analytic) + norm(&numeric));
            assert!(rel <= 1e-4, "relative error {rel}");
        }
    }

    #[test]
    fn toy_set_is_learned() {
        let tax = Taxonomy::builtin();
        let ex = toy(50, 1);
        let b = train(&ex, &TrainingConfig::default(), &tax).unwrap();
        let s = b.evaluate(&ex, &tax).unwrap();
        assert!(s.f1 >= 0.95, "f1 {}", s.f1);
        let scores = b.predict_scores(&ex[0].input);
        assert_eq!(scores.len(), 23);
        assert!(scores.iter().all(|&p| p > 0.0 && p < 1.0));
        let gold = tax.tag_index(ex[0].labels.tags()[0].as_str()).unwrap();
        assert_eq!(top2(&scores).0, gold);
        b.check(&tax).unwrap();
    }

    #[test]
    fn training_is_deterministic() {
        let tax = Taxonomy::builtin();
        let ex = toy(20, 2);
        let cfg = TrainingConfig { epochs: 3, ..TrainingConfig::default() };
        assert_eq!(train(&ex, &cfg, &tax).unwrap(), train(&ex, &cfg, &tax).unwrap());
        let other = TrainingConfig { seed: 1, ..cfg.clone() };
        assert_ne!(train(&ex, &cfg, &tax).unwrap().network.params, train(&ex, &other, &tax).unwrap().network.params);
    }

    #[test]
    fn training_errors() {
        let tax = Taxonomy::builtin();
        let two = Example {
            input: "a <u_p> b <u_c> c".to_string(),
            labels: tax.label_set(&["positive_answer", "statement_non_opinion"]).unwrap(),
        };
        let single = TrainingConfig { mode: TrainingMode::SingleLabel, ..TrainingConfig::default() };
        assert_eq!(
            train(core::slice::from_ref(&two), &single, &tax).unwrap_err(),
            ClassifierError::NotSingleLabel { index: 0, count: 2 }
        );
        assert_eq!(train(&[], &TrainingConfig::default(), &tax).unwrap_err(), ClassifierError::NoExamples);
        let bad = TrainingConfig { epochs: 0, ..TrainingConfig::default() };
        assert!(matches!(train(&[two.clone()], &bad, &tax), Err(ClassifierError::Config(_))));
        let illegal = Example { input: "x".into(), labels: LabelSet::try_from(vec!["comment".to_string(), "statement_non_opinion".to_string()]).unwrap() };
        assert!(matches!(train(&[illegal], &TrainingConfig::default(), &tax), Err(ClassifierError::Label { index: 0, .. })));
        assert!(matches!(
            transfer_pipeline(&[two.clone()], &[two], &TrainingConfig::default(), &tax),
            Err(ClassifierError::NotSingleLabel { index: 0, count: 2 })
        ));
    }

    #[test]
    fn transfer_without_source_is_plain_training() {
        let tax = Taxonomy::builtin();
        let ex = toy(16, 4);
        let cfg = TrainingConfig { epochs: 5, mode: TrainingMode::SingleLabel, ..TrainingConfig::default() };
        let out = transfer_pipeline(&[], &ex, &cfg, &tax).unwrap();
        let plain = train(&ex, &TrainingConfig { mode: TrainingMode::MultiLabel, ..cfg }, &tax).unwrap();
        assert_eq!(out.bundle, plain);
        assert_eq!(out.stages.len(), 1);
    }

    #[test]
    fn transfer_runs_both_stages() {
        let tax = Taxonomy::builtin();
        let target = toy(40, 5);
        let source: Vec<Example> = toy(80, 6)
            .into_iter()
            .map(|e| Example { labels: LabelSet::try_from(vec![e.labels.tags()[0].clone()]).unwrap(), input: e.input })
            .collect();
        let cfg = TrainingConfig::default();
        let out = transfer_pipeline(&source, &target, &cfg, &tax).unwrap();
        assert_eq!(out.stages.len(), 2);
        assert_eq!(out.bundle.output, Objective::MultiLabel);
        let scratch = train(&target, &cfg, &tax).unwrap().evaluate(&target, &tax).unwrap();
        assert!(out.stages[1].train_score.f1 >= scratch.f1 - 0.05);
    }
}
