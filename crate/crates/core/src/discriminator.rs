//! Plausibility classifiers over patterned sentences and the valid/invalid
//! partition of a generation beam.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contrast::LabeledSample;
use crate::error::{Error, Result};
use crate::generator::Candidate;
use crate::kg::{render_parts, Event, RelationType};

pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const FEATURE_BITS: u32 = 18;
pub const DEFAULT_HASH_SEED: u64 = 0x5eed_a110;
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A binary classifier returning P(valid) for rendered tuples.
pub trait DiscriminatorModel {
    fn score_batch(&self, sentences: &[String]) -> Result<Vec<f64>>;

    fn score(&self, sentence: &str) -> Result<f64> {
        let mut v = self.score_batch(&[sentence.to_string()])?;
        v.pop()
            .ok_or_else(|| Error::External("scorer returned no probability".to_string()))
    }

    /// What the model was trained on, for reports.
    fn descriptor(&self) -> String;
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Numerically stable binary cross-entropy of logit `z` against label `y`.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + libm::log1p(libm::exp(-z.abs()))
}

/// Sparse feature vector: sorted unique indices with values.
pub type Features = Vec<(u32, f64)>;

fn words(s: &str) -> Vec<String> {
    s.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Hashed feature map: unigrams and bigrams of the whole sentence plus
/// (head token, inference token) pairs across the first ". " boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureHasher {
    pub bits: u32,
    pub seed: u64,
}

impl Default for FeatureHasher {
    fn default() -> Self {
        FeatureHasher {
            bits: FEATURE_BITS,
            seed: DEFAULT_HASH_SEED,
        }
    }
}

impl FeatureHasher {
    pub fn dimension(&self) -> usize {
        1usize << self.bits
    }

    fn slot(&self, kind: u8, parts: &[&str]) -> u32 {
        let mut h = FnvHasher::with_key(0xcbf2_9ce4_8422_2325 ^ self.seed);
        h.write_u8(kind);
        for p in parts {
            h.write(p.as_bytes());
            h.write_u8(0xff);
        }
        (h.finish() & ((1u64 << self.bits) - 1)) as u32
    }

    /// L2-normalized feature vector of a sentence.
    pub fn features(&self, sentence: &str) -> Features {
        let (head, inference) = match sentence.find(". ") {
            Some(i) => (&sentence[..i], &sentence[i + 2..]),
            None => (sentence, ""),
        };
        let hw = words(head);
        let iw = words(inference);
        let all: Vec<&str> = hw.iter().chain(iw.iter()).map(String::as_str).collect();
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        let mut add = |i: u32| *counts.entry(i).or_insert(0.0) += 1.0;
        for w in &all {
            add(self.slot(b'u', &[w]));
        }
        for pair in all.windows(2) {
            add(self.slot(b'b', pair));
        }
        for h in &hw {
            for t in &iw {
                add(self.slot(b'x', &[h, t]));
            }
        }
        let norm = libm::sqrt(counts.values().map(|v| v * v).sum::<f64>());
        counts
            .into_iter()
            .map(|(i, v)| (i, if norm > 0.0 { v / norm } else { v }))
            .collect()
    }
}

/// Logistic regression over hashed features.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLinearModel {
    pub hasher: FeatureHasher,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub descriptor: String,
}

impl ReferenceLinearModel {
    pub fn zeros(hasher: FeatureHasher) -> Self {
        ReferenceLinearModel {
            hasher,
            weights: vec![0.0; hasher.dimension()],
            bias: 0.0,
            threshold: DEFAULT_THRESHOLD,
            descriptor: String::new(),
        }
    }

    pub fn logit_of(&self, x: &Features) -> f64 {
        self.bias + x.iter().map(|&(i, v)| self.weights[i as usize] * v).sum::<f64>()
    }

    pub fn logit(&self, sentence: &str) -> f64 {
        self.logit_of(&self.hasher.features(sentence))
    }

    pub fn probability(&self, sentence: &str) -> f64 {
        sigmoid(self.logit(sentence))
    }

    /// Gradient of the per-sample loss: (d/dbias, [(index, d/dw_index)]).
    pub fn gradient(&self, x: &Features, y: f64) -> (f64, Features) {
        let g = sigmoid(self.logit_of(x)) - y;
        (g, x.iter().map(|&(i, v)| (i, g * v)).collect())
    }

    pub fn loss(&self, x: &Features, y: f64) -> f64 {
        bce_with_logit(self.logit_of(x), y)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            dimension: self.hasher.dimension(),
            bits: self.hasher.bits,
            hash_seed: self.hasher.seed,
            bias: self.bias,
            threshold: self.threshold,
            descriptor: self.descriptor.clone(),
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i as u32, *w))
                .collect(),
        }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        if file.bits > 28 || file.dimension != 1usize << file.bits {
            return Err(Error::InvalidArgument("model dimension does not match its bit width".into()));
        }
        let hasher = FeatureHasher {
            bits: file.bits,
            seed: file.hash_seed,
        };
        let mut m = ReferenceLinearModel::zeros(hasher);
        for &(i, w) in &file.weights {
            let slot = m
                .weights
                .get_mut(i as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("weight index {i} out of range")))?;
            *slot = w;
        }
        m.bias = file.bias;
        m.threshold = file.threshold;
        m.descriptor = file.descriptor.clone();
        Ok(m)
    }
}

impl DiscriminatorModel for ReferenceLinearModel {
    fn score_batch(&self, sentences: &[String]) -> Result<Vec<f64>> {
        Ok(sentences.iter().map(|s| self.probability(s)).collect())
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }
}

/// Serialized model: sparse non-zero weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub dimension: usize,
    pub bits: u32,
    pub hash_seed: u64,
    pub bias: f64,
    pub threshold: f64,
    pub descriptor: String,
    pub weights: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub hasher: FeatureHasher,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 2.0,
            seed: 0,
            hasher: FeatureHasher::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub samples: usize,
    pub epochs: usize,
    /// Mean BCE over the training set after the last epoch.
    pub final_loss: f64,
    pub accuracy: f64,
}

/// Fits the reference model by plain SGD on binary cross-entropy.
/// Each epoch visits the samples in an order drawn from `seed`.
pub fn train_reference(
    samples: &[LabeledSample],
    config: &TrainConfig,
) -> Result<(ReferenceLinearModel, TrainReport)> {
    let pairs: Vec<(&str, u8)> = samples.iter().map(|s| (s.sentence.as_str(), s.label)).collect();
    train_on_sentences(&pairs, config)
}

/// [`train_reference`] over bare (sentence, label) pairs.
pub fn train_on_sentences(
    samples: &[(&str, u8)],
    config: &TrainConfig,
) -> Result<(ReferenceLinearModel, TrainReport)> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if let Some((_, bad)) = samples.iter().find(|(_, l)| *l > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not 0 or 1")));
    }
    let positives = samples.iter().filter(|s| s.1 == 1).count();
    if positives == 0 {
        return Err(Error::SingleClass(0));
    }
    if positives == samples.len() {
        return Err(Error::SingleClass(1));
    }
    let data: Vec<(Features, f64)> = samples
        .iter()
        .map(|(s, l)| (config.hasher.features(s), f64::from(*l)))
        .collect();
    let mut model = ReferenceLinearModel::zeros(config.hasher);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &data[i];
            let (gb, gw) = model.gradient(x, *y);
            model.bias -= config.learning_rate * gb;
            for (j, g) in gw {
                model.weights[j as usize] -= config.learning_rate * g;
            }
        }
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, y) in &data {
        let z = model.logit_of(x);
        loss += bce_with_logit(z, *y);
        if (z >= 0.0) == (*y == 1.0) {
            correct += 1;
        }
    }
    let report = TrainReport {
        samples: data.len(),
        epochs: config.epochs,
        final_loss: loss / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
    };
    model.descriptor = format!(
        "reference-linear samples={} positives={} epochs={} lr={} seed={}",
        data.len(),
        positives,
        config.epochs,
        config.learning_rate,
        config.seed
    );
    Ok((model, report))
}

/// Fraction of samples whose probability falls on the side of 0.5 given by
/// their label.
pub fn accuracy(model: &dyn DiscriminatorModel, samples: &[LabeledSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let sentences: Vec<String> = samples.iter().map(|s| s.sentence.clone()).collect();
    let probs = model.score_batch(&sentences)?;
    let ok = probs
        .iter()
        .zip(samples)
        .filter(|(p, s)| (**p >= 0.5) == (s.label == 1))
        .count();
    Ok(ok as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub tail: String,
    pub logp: f64,
    pub ppl: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub event: Event,
    pub relation: RelationType,
    /// Candidates in beam order.
    pub all: Vec<ScoredCandidate>,
    /// Indices into `all`, in beam order.
    pub valid: Vec<usize>,
    pub invalid: Vec<usize>,
    pub threshold: f64,
}

impl PartitionResult {
    pub fn valid_candidates(&self) -> impl Iterator<Item = &ScoredCandidate> {
        self.valid.iter().map(|&i| &self.all[i])
    }

    pub fn invalid_candidates(&self) -> impl Iterator<Item = &ScoredCandidate> {
        self.invalid.iter().map(|&i| &self.all[i])
    }
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("threshold {threshold} is outside [0, 1]")))
    }
}

/// Scores every candidate as a patterned sentence; probability ≥ threshold
/// is valid.
pub fn partition(
    model: &dyn DiscriminatorModel,
    event: &Event,
    relation: RelationType,
    candidates: &[Candidate],
    threshold: f64,
) -> Result<PartitionResult> {
    check_threshold(threshold)?;
    let sentences: Vec<String> = candidates
        .iter()
        .map(|c| render_parts(&event.text, relation, &c.tail))
        .collect();
    let probs = model.score_batch(&sentences)?;
    if probs.len() != candidates.len() {
        return Err(Error::External(format!(
            "scorer returned {} probabilities for {} sentences",
            probs.len(),
            candidates.len()
        )));
    }
    partition_scored(event, relation, candidates, &probs, threshold)
}

/// Partition from probabilities that were computed elsewhere.
pub fn partition_scored(
    event: &Event,
    relation: RelationType,
    candidates: &[Candidate],
    probabilities: &[f64],
    threshold: f64,
) -> Result<PartitionResult> {
    check_threshold(threshold)?;
    let mut out = PartitionResult {
        event: event.clone(),
        relation,
        all: Vec::with_capacity(candidates.len()),
        valid: Vec::new(),
        invalid: Vec::new(),
        threshold,
    };
    for (i, (c, &p)) in candidates.iter().zip(probabilities).enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::External(format!("probability {p} is outside [0, 1]")));
        }
        out.all.push(ScoredCandidate {
            tail: c.tail.clone(),
            logp: c.logp,
            ppl: c.ppl,
            probability: p,
        });
        if p >= threshold {
            out.valid.push(i);
        } else {
            out.invalid.push(i);
        }
    }
    Ok(out)
}
