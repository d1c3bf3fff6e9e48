//! Conditional tail generation: a model interface, beam search, perplexity,
//! and an interpolated n-gram reference model.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Event, KnowledgeGraph, RelationType};
use crate::text::normalize_text;

pub const DEFAULT_BEAM: usize = 10;
pub const MAX_TAIL_TOKENS: usize = 20;
pub const DEFAULT_SMOOTHING: f64 = 0.1;
pub const END: &str = "</s>";
pub const UNK: &str = "<unk>";
const CONTEXT_BUCKETS: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tail: String,
    pub logp: f64,
    pub ppl: f64,
}

pub trait GeneratorModel {
    /// At most `beam` candidates, best first.
    fn generate(&self, head: &Event, relation: RelationType, beam: usize) -> Result<Vec<Candidate>>;

    fn perplexity(&self, head: &Event, relation: RelationType, tail: &str) -> Result<f64>;
}

/// Token-level view used by beam search: a fixed vocabulary and next-token
/// log-probabilities given a prompt and a prefix.
pub trait TokenModel {
    type Prompt;

    fn vocab(&self) -> &[String];
    fn end_id(&self) -> usize;
    /// Tokens beam search never emits (e.g. the unknown-word slot).
    fn is_blocked(&self, _id: usize) -> bool {
        false
    }
    fn prompt(&self, head: &str, relation: RelationType) -> Self::Prompt;
    fn next_log_probs(&self, prompt: &Self::Prompt, prefix: &[usize]) -> Vec<f64>;
}

#[derive(Clone)]
struct Hyp {
    tokens: Vec<usize>,
    logp: f64,
}

fn by_score(a: &Hyp, b: &Hyp) -> Ordering {
    b.logp.partial_cmp(&a.logp).unwrap_or(Ordering::Equal)
}

/// Perplexity from a sum of log-probabilities over `n` predicted tokens.
pub fn perplexity_of(logp: f64, n: usize) -> f64 {
    libm::exp(-logp / n.max(1) as f64)
}

/// Length-bounded beam search over raw summed log-probabilities.
///
/// Each step expands the live hypotheses and sorts the expansions. Those
/// ending in the end marker join the finished pool when they rank within the
/// top `beam`; the best `beam` others stay live, so finished hypotheses never
/// take live slots and `beam = 1` is greedy decoding. Tails are
/// never empty, and hypotheses reaching `max_tokens` may only end. Search
/// stops once no live hypothesis can beat the `beam`-th finished one.
/// Finished tails are deduplicated after normalization, keeping the better
/// score.
pub fn beam_search<M: TokenModel>(
    model: &M,
    head: &str,
    relation: RelationType,
    beam: usize,
    max_tokens: usize,
) -> Vec<Candidate> {
    if beam == 0 {
        return Vec::new();
    }
    let prompt = model.prompt(head, relation);
    let end = model.end_id();
    let vocab = model.vocab();
    let render = |h: &Hyp| {
        let body = &h.tokens[..h.tokens.len() - 1];
        body.iter().map(|&i| vocab[i].as_str()).collect::<Vec<_>>().join(" ")
    };
    let mut live = vec![Hyp {
        tokens: Vec::new(),
        logp: 0.0,
    }];
    // normalized tail -> (tail, hypothesis)
    let mut finished: BTreeMap<String, (String, Hyp)> = BTreeMap::new();
    while !live.is_empty() {
        let mut expansions: Vec<Hyp> = Vec::new();
        for h in &live {
            let lp = model.next_log_probs(&prompt, &h.tokens);
            for (id, &l) in lp.iter().enumerate() {
                if model.is_blocked(id) || l == f64::NEG_INFINITY {
                    continue;
                }
                if (h.tokens.len() >= max_tokens && id != end) || (h.tokens.is_empty() && id == end) {
                    continue;
                }
                let mut tokens = h.tokens.clone();
                tokens.push(id);
                expansions.push(Hyp {
                    tokens,
                    logp: h.logp + l,
                });
            }
        }
        expansions.sort_by(by_score);
        live.clear();
        for (rank, h) in expansions.into_iter().enumerate() {
            if h.tokens.last() == Some(&end) {
                if rank >= beam {
                    continue;
                }
                let tail = render(&h);
                if tail.is_empty() {
                    continue;
                }
                let key = normalize_text(&tail);
                match finished.get(&key) {
                    Some((_, old)) if old.logp >= h.logp => {}
                    _ => {
                        finished.insert(key, (tail, h));
                    }
                }
            } else if live.len() < beam {
                live.push(h);
            }
        }
        if finished.len() >= beam {
            let mut scores: Vec<f64> = finished.values().map(|(_, h)| h.logp).collect();
            scores.sort_by(|a, b| b.total_cmp(a));
            let worst = scores[beam - 1];
            if live.iter().all(|h| h.logp <= worst) {
                break;
            }
        }
    }
    let mut out: Vec<(String, Hyp)> = finished.into_values().collect();
    // stable on ties: BTreeMap order, then score
    out.sort_by(|a, b| by_score(&a.1, &b.1));
    out.truncate(beam);
    out.into_iter()
        .map(|(tail, h)| Candidate {
            tail,
            logp: h.logp,
            ppl: perplexity_of(h.logp, h.tokens.len()),
        })
        .collect()
}

/// Mixture weights of the reference model's three components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interpolation {
    pub bigram: f64,
    pub unigram: f64,
    pub context: f64,
}

impl Default for Interpolation {
    fn default() -> Self {
        Interpolation {
            bigram: 0.5,
            unigram: 0.2,
            context: 0.3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Counts {
    by_token: BTreeMap<u32, f64>,
    total: f64,
}

impl Counts {
    fn add(&mut self, tok: u32) {
        *self.by_token.entry(tok).or_insert(0.0) += 1.0;
        self.total += 1.0;
    }

    /// Add-λ smoothed distribution over `v` tokens; uniform when empty.
    fn fill(&self, lambda: f64, v: usize, out: &mut [f64], weight: f64) {
        let denom = self.total + lambda * v as f64;
        if denom <= 0.0 {
            let u = weight / v as f64;
            out.iter_mut().for_each(|o| *o += u);
            return;
        }
        let base = weight * lambda / denom;
        if base != 0.0 {
            out.iter_mut().for_each(|o| *o += base);
        }
        for (&t, &c) in &self.by_token {
            out[t as usize] += weight * c / denom;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RelationCounts {
    unigram: Counts,
    /// Keyed by previous token; `u32::MAX` is the start of the tail.
    bigram: BTreeMap<u32, Counts>,
    /// Keyed by hashed head token.
    context: BTreeMap<u32, Counts>,
}

/// Per-relation interpolation of an add-λ bigram, unigram and head-token
/// context model over tail tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceNGramModel {
    vocab: Vec<String>,
    index: BTreeMap<String, u32>,
    smoothing: f64,
    weights: Interpolation,
    hash_seed: u64,
    relations: BTreeMap<RelationType, RelationCounts>,
}

const START: u32 = u32::MAX;

pub fn tail_tokens(tail: &str) -> Vec<String> {
    normalize_text(tail).split(' ').filter(|s| !s.is_empty()).map(ToString::to_string).collect()
}

impl ReferenceNGramModel {
    /// A model with no counts: every distribution is uniform over `words`
    /// plus the end and unknown markers.
    pub fn uniform<I: IntoIterator<Item = S>, S: Into<String>>(words: I) -> Self {
        let mut m = ReferenceNGramModel {
            vocab: vec![END.to_string(), UNK.to_string()],
            index: BTreeMap::new(),
            smoothing: DEFAULT_SMOOTHING,
            weights: Interpolation::default(),
            hash_seed: 0,
            relations: BTreeMap::new(),
        };
        m.index.insert(END.to_string(), 0);
        m.index.insert(UNK.to_string(), 1);
        let mut sorted: BTreeSet<String> = BTreeSet::new();
        for w in words {
            sorted.insert(w.into());
        }
        for w in sorted {
            m.intern(w);
        }
        m
    }

    fn intern(&mut self, w: String) -> u32 {
        if let Some(&i) = self.index.get(&w) {
            return i;
        }
        let i = self.vocab.len() as u32;
        self.vocab.push(w.clone());
        self.index.insert(w, i);
        i
    }

    fn bucket(&self, tok: &str) -> u32 {
        let mut h = FnvHasher::with_key(0xcbf2_9ce4_8422_2325 ^ self.hash_seed);
        h.write(tok.as_bytes());
        (h.finish() % CONTEXT_BUCKETS) as u32
    }

    fn head_buckets(&self, head: &str) -> Vec<u32> {
        normalize_text(head)
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|t| self.bucket(t.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')))
            .collect()
    }

    /// Maximum-likelihood counts over every tuple of `graph`, smoothed add-λ.
    pub fn train(graph: &KnowledgeGraph, smoothing: f64, weights: Interpolation) -> Result<Self> {
        if graph.is_empty() {
            return Err(Error::EmptyGraph);
        }
        if !(smoothing >= 0.0) || !smoothing.is_finite() {
            return Err(Error::InvalidArgument("smoothing must be a finite value >= 0".into()));
        }
        let w = [weights.bigram, weights.unigram, weights.context];
        if w.iter().any(|x| *x < 0.0) || libm::fabs(w.iter().sum::<f64>() - 1.0) > 1e-12 {
            return Err(Error::InvalidArgument("interpolation weights must be >= 0 and sum to 1".into()));
        }
        let words: BTreeSet<String> = graph.tuples().iter().flat_map(|t| tail_tokens(&t.tail)).collect();
        let mut m = ReferenceNGramModel::uniform(words);
        m.smoothing = smoothing;
        m.weights = weights;
        for t in graph.tuples() {
            let ids: Vec<u32> = tail_tokens(&t.tail).iter().map(|w| m.index[w]).chain([0]).collect();
            let buckets = m.head_buckets(&t.head.text);
            let rc = m.relations.entry(t.relation).or_default();
            let mut prev = START;
            for &id in &ids {
                rc.unigram.add(id);
                rc.bigram.entry(prev).or_default().add(id);
                for &b in &buckets {
                    rc.context.entry(b).or_default().add(id);
                }
                prev = id;
            }
        }
        Ok(m)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    fn id_of(&self, w: &str) -> u32 {
        self.index.get(w).copied().unwrap_or(1)
    }

    /// Next-token distribution (probabilities, summing to 1).
    pub fn distribution(&self, prompt: &NGramPrompt, prev: Option<usize>) -> Vec<f64> {
        let v = self.vocab.len();
        let mut out = prompt.context.clone();
        let empty = RelationCounts::default();
        let rc = self.relations.get(&prompt.relation).unwrap_or(&empty);
        rc.unigram.fill(self.smoothing, v, &mut out, self.weights.unigram);
        let prev = prev.map(|p| p as u32).unwrap_or(START);
        let none = Counts::default();
        rc.bigram
            .get(&prev)
            .unwrap_or(&none)
            .fill(self.smoothing, v, &mut out, self.weights.bigram);
        out
    }

    /// Summed log-probability of `tail` followed by the end marker, and the
    /// number of predicted tokens.
    pub fn log_prob(&self, head: &str, relation: RelationType, tail: &str) -> (f64, usize) {
        let prompt = self.prompt(head, relation);
        let ids: Vec<usize> = tail_tokens(tail)
            .iter()
            .map(|w| self.id_of(w) as usize)
            .chain([0])
            .collect();
        let mut prev = None;
        let mut lp = 0.0;
        for &id in &ids {
            lp += libm::log(self.distribution(&prompt, prev)[id]);
            prev = Some(id);
        }
        (lp, ids.len())
    }

    /// The training objective: summed negative log-likelihood of `graph`.
    pub fn negative_log_likelihood(&self, graph: &KnowledgeGraph) -> f64 {
        graph
            .tuples()
            .iter()
            .map(|t| -self.log_prob(&t.head.text, t.relation, &t.tail).0)
            .sum()
    }
}

pub struct NGramPrompt {
    relation: RelationType,
    /// Context component, already weighted.
    context: Vec<f64>,
}

impl TokenModel for ReferenceNGramModel {
    type Prompt = NGramPrompt;

    fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn end_id(&self) -> usize {
        0
    }

    fn is_blocked(&self, id: usize) -> bool {
        id == 1
    }

    fn prompt(&self, head: &str, relation: RelationType) -> NGramPrompt {
        let v = self.vocab.len();
        let mut context = vec![0.0; v];
        let buckets = self.head_buckets(head);
        let empty = RelationCounts::default();
        let rc = self.relations.get(&relation).unwrap_or(&empty);
        let none = Counts::default();
        let share = self.weights.context / buckets.len().max(1) as f64;
        if buckets.is_empty() {
            none.fill(self.smoothing, v, &mut context, self.weights.context);
        }
        for b in &buckets {
            rc.context.get(b).unwrap_or(&none).fill(self.smoothing, v, &mut context, share);
        }
        NGramPrompt { relation, context }
    }

    fn next_log_probs(&self, prompt: &NGramPrompt, prefix: &[usize]) -> Vec<f64> {
        self.distribution(prompt, prefix.last().copied())
            .into_iter()
            .map(libm::log)
            .collect()
    }
}

impl GeneratorModel for ReferenceNGramModel {
    fn generate(&self, head: &Event, relation: RelationType, beam: usize) -> Result<Vec<Candidate>> {
        Ok(beam_search(self, &head.text, relation, beam, MAX_TAIL_TOKENS))
    }

    fn perplexity(&self, head: &Event, relation: RelationType, tail: &str) -> Result<f64> {
        let (lp, n) = self.log_prob(&head.text, relation, tail);
        Ok(perplexity_of(lp, n))
    }
}
