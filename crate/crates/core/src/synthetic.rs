//! Planted-structure knowledge graphs with a known answer key.
//!
//! Each affirmative head has a negated twin. Tails shared by both come from
//! a common token pool; tails unique to the affirmative side come from pool
//! A and those unique to the negated side from pool B, so a tail is
//! plausible for a head exactly when it uses no token of the other side's
//! pool.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::generator::tail_tokens;
use crate::kg::{assign_split, Event, KnowledgeGraph, KnowledgeTuple, RelationType, Split};
use crate::negation::{CueLexicon, NegationEngine};
use crate::text::NormalizeOptions;

const VERBS: [&str; 8] = ["holds", "paints", "visits", "cleans", "moves", "checks", "fixes", "buys"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub pairs: usize,
    pub pool_size: usize,
    pub common_per_relation: usize,
    pub contrast_per_relation: usize,
    pub relations: Vec<RelationType>,
    /// Share of pairs (the last ones) placed in the test split.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            pairs: 200,
            pool_size: 25,
            common_per_relation: 1,
            contrast_per_relation: 4,
            relations: alloc::vec![RelationType::XAttr, RelationType::XWant],
            test_fraction: 0.2,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedKg {
    pub affirmative: KnowledgeGraph,
    pub opposed: KnowledgeGraph,
    pub pool_a: BTreeSet<String>,
    pub pool_b: BTreeSet<String>,
    pub pool_c: BTreeSet<String>,
}

fn pool(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn render_tail(relation: RelationType, word: &str) -> String {
    match relation {
        RelationType::XWant | RelationType::OWant | RelationType::XIntent | RelationType::XNeed => {
            format!("to {word}")
        }
        _ => String::from(word),
    }
}

impl PlantedKg {
    pub fn generate(config: &PlantedConfig) -> Result<Self> {
        let options = NormalizeOptions::default();
        let (a, b, c) = (
            pool("amber", config.pool_size),
            pool("basalt", config.pool_size),
            pool("cobalt", config.pool_size),
        );
        let engine = NegationEngine::new(CueLexicon::default());
        let never = CueLexicon::shipped().get("never").cloned().expect("shipped cue");
        let n_test = libm::round(config.pairs as f64 * config.test_fraction) as usize;
        let mut aff_tuples = Vec::new();
        let mut opp_tuples = Vec::new();
        let mut aff_graph = KnowledgeGraph::new(options);
        for i in 0..config.pairs {
            let split = if i >= config.pairs - n_test { Split::Test } else { Split::Train };
            let head = Event::affirmative(format!("PersonX {} item{i}", VERBS[i % VERBS.len()]), split)?;
            aff_graph.insert_event(head.clone())?;
            let negated = if i % 2 == 0 {
                engine.negate_logical(&head.text)?
            } else {
                engine.negate_semilogical(&head.text, &never)?
            };
            let opposed = assign_split(&negated.event, &aff_graph)?;
            for (ri, &r) in config.relations.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream((i * config.relations.len() + ri) as u64);
                let mut draw = |from: &[String], k: usize| -> Vec<String> {
                    sample(&mut rng, from.len(), k.min(from.len()))
                        .into_iter()
                        .map(|j| render_tail(r, &from[j]))
                        .collect()
                };
                let common = draw(&c, config.common_per_relation);
                let only_a = draw(&a, config.contrast_per_relation);
                let only_b = draw(&b, config.contrast_per_relation);
                for t in common.iter().chain(&only_a) {
                    aff_tuples.push(KnowledgeTuple::new(head.clone(), r, t.clone())?);
                }
                for t in common.iter().chain(&only_b) {
                    opp_tuples.push(KnowledgeTuple::new(opposed.clone(), r, t.clone())?);
                }
            }
        }
        Ok(PlantedKg {
            affirmative: KnowledgeGraph::from_tuples(aff_tuples, options)?,
            opposed: KnowledgeGraph::from_tuples(opp_tuples, options)?,
            pool_a: a.into_iter().collect(),
            pool_b: b.into_iter().collect(),
            pool_c: c.into_iter().collect(),
        })
    }

    /// Answer key: false when the tail uses a token of the pool belonging to
    /// the other side of the head's pair, or when the head is unknown.
    pub fn oracle(&self, head: &str, _relation: RelationType, tail: &str) -> bool {
        let wrong = if self.affirmative.event(head).is_some() {
            &self.pool_b
        } else if self.opposed.event(head).is_some() {
            &self.pool_a
        } else {
            return false;
        };
        !tail_tokens(tail).iter().any(|t| wrong.contains(t))
    }

    /// Tuples of both sides restricted to `split`.
    pub fn combined(&self, split: Split) -> Result<KnowledgeGraph> {
        let tuples = self
            .affirmative
            .tuples()
            .iter()
            .chain(self.opposed.tuples())
            .filter(|t| t.head.split == split)
            .cloned();
        KnowledgeGraph::from_tuples(tuples, self.affirmative.options())
    }

    /// One side restricted to `split`.
    pub fn side(graph: &KnowledgeGraph, split: Split) -> Result<KnowledgeGraph> {
        KnowledgeGraph::from_tuples(
            graph.tuples().iter().filter(|t| t.head.split == split).cloned(),
            graph.options(),
        )
    }

    /// (head, relation) prompts of `split`, affirmative heads first.
    pub fn prompts(&self, split: Split) -> Vec<(Event, RelationType)> {
        let mut out = Vec::new();
        for g in [&self.affirmative, &self.opposed] {
            for e in g.events().iter().filter(|e| e.split == split) {
                for r in g.relations_of(&e.text) {
                    out.push((e.clone(), r));
                }
            }
        }
        out
    }
}
