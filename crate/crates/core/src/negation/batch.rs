use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::{NegationEngine, NegationResult};
use super::lexicon::CueLexiconEntry;
use super::RejectionKind;
use crate::kg::{assign_split, KnowledgeGraph, Polarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchOptions {
    /// Keep at most this many results per cue, chosen uniformly by seed.
    pub sample_per_cue: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueCount {
    pub attempted: usize,
    pub produced: usize,
    pub rejected: usize,
    /// Produced but dropped by the per-cue sample cap.
    pub sampled_out: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub head: String,
    pub cue: String,
    pub reason: RejectionKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchReport {
    pub per_cue: BTreeMap<String, CueCount>,
    pub rejections: Vec<Rejection>,
    pub histogram: BTreeMap<RejectionKind, usize>,
    /// Outputs dropped because an earlier (event, cue) produced the same text.
    pub duplicates: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchOutput {
    pub results: Vec<NegationResult>,
    pub report: BatchReport,
}

/// Negates every affirmative event of `graph` with every cue.
///
/// Results come out event-major in graph order, then cue order. The output
/// depends only on the arguments; `seed` only matters when a sample cap is set.
pub fn batch_negate(
    engine: &NegationEngine,
    graph: &KnowledgeGraph,
    cues: &[CueLexiconEntry],
    seed: u64,
    options: BatchOptions,
) -> BatchOutput {
    let mut report = BatchReport::default();
    for c in cues {
        report.per_cue.entry(c.cue.clone()).or_default();
    }
    // (cue index, result) in emission order
    let mut produced: Vec<(usize, NegationResult)> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for event in graph.events().iter().filter(|e| e.polarity == Polarity::Affirmative) {
        for (ci, cue) in cues.iter().enumerate() {
            let count = report.per_cue.get_mut(&cue.cue).expect("cue registered");
            count.attempted += 1;
            let outcome = engine
                .negate(&event.text, cue)
                .map_err(|e| (e.kind(), e.to_string()));
            match outcome {
                Ok(mut r) => {
                    r.event = assign_split(&r.event, graph).expect("source head comes from the graph");
                    if !seen.insert(graph.key(&r.event.text)) {
                        report.duplicates += 1;
                        continue;
                    }
                    count.produced += 1;
                    produced.push((ci, r));
                }
                Err((kind, detail)) => {
                    count.rejected += 1;
                    *report.histogram.entry(kind).or_default() += 1;
                    report.rejections.push(Rejection {
                        head: event.text.clone(),
                        cue: cue.cue.clone(),
                        reason: kind,
                        detail,
                    });
                }
            }
        }
    }

    let mut keep = alloc::vec![true; produced.len()];
    if let Some(cap) = options.sample_per_cue {
        for (ci, cue) in cues.iter().enumerate() {
            let idx: Vec<usize> = (0..produced.len()).filter(|&i| produced[i].0 == ci).collect();
            if idx.len() <= cap {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci as u64);
            let chosen: BTreeSet<usize> = sample(&mut rng, idx.len(), cap).into_iter().collect();
            for (j, &i) in idx.iter().enumerate() {
                if !chosen.contains(&j) {
                    keep[i] = false;
                }
            }
            let count = report.per_cue.get_mut(&cue.cue).expect("cue registered");
            count.sampled_out = idx.len() - cap;
        }
    }
    let results = produced
        .into_iter()
        .zip(keep)
        .filter_map(|((_, r), k)| k.then_some(r))
        .collect();
    BatchOutput { results, report }
}
