//! Common and contrast tail sets of paired events, and the balanced
//! valid/invalid dataset built by swapping contrast sets across a pair.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kg::{render_parts, Event, KnowledgeGraph, KnowledgeTuple, Polarity, RelationType, TailSet};

/// Set intersection of two normalized tail sets.
pub fn common_set(a: &BTreeSet<String>, b: &BTreeSet<String>) -> BTreeSet<String> {
    a.intersection(b).cloned().collect()
}

/// An affirmative event and an opposed event derived from it, with their
/// tails under one relation split into common and contrast sets.
///
/// Set members are normalized keys; `surface` maps every key to the form
/// used when rendering sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastPair {
    pub affirmative: Event,
    pub opposed: Event,
    pub relation: RelationType,
    pub common: BTreeSet<String>,
    pub contrast_a: BTreeSet<String>,
    pub contrast_b: BTreeSet<String>,
    pub surface: BTreeMap<String, String>,
}

impl ContrastPair {
    pub fn new(
        affirmative: Event,
        opposed: Event,
        relation: RelationType,
        tails_a: &TailSet,
        tails_b: &TailSet,
    ) -> Self {
        let a: BTreeSet<String> = tails_a.keys().cloned().collect();
        let b: BTreeSet<String> = tails_b.keys().cloned().collect();
        let common = common_set(&a, &b);
        let contrast_a = a.difference(&common).cloned().collect();
        let contrast_b = b.difference(&common).cloned().collect();
        let mut surface = tails_b.clone();
        // the affirmative side's spelling wins for shared keys
        surface.extend(tails_a.iter().map(|(k, v)| (k.clone(), v.clone())));
        ContrastPair {
            affirmative,
            opposed,
            relation,
            common,
            contrast_a,
            contrast_b,
            surface,
        }
    }

    pub fn tails_a(&self) -> BTreeSet<String> {
        self.common.union(&self.contrast_a).cloned().collect()
    }

    pub fn tails_b(&self) -> BTreeSet<String> {
        self.common.union(&self.contrast_b).cloned().collect()
    }

    fn surface_of<'a>(&'a self, key: &'a str) -> &'a str {
        self.surface.get(key).map(String::as_str).unwrap_or(key)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingReport {
    /// Opposed events whose source head is not in the affirmative graph.
    pub unresolved: Vec<String>,
    /// (opposed head, relation) combinations skipped because a side had no tails.
    pub missing_tails: usize,
}

/// Pairs every derived event of `graph_b` with its source in `graph_a` under
/// `relation`. Tails of `graph_b` are re-keyed with `graph_a`'s normalization.
pub fn pair_events(
    graph_a: &KnowledgeGraph,
    graph_b: &KnowledgeGraph,
    relation: RelationType,
) -> (Vec<ContrastPair>, PairingReport) {
    let mut pairs = Vec::new();
    let mut report = PairingReport::default();
    for opposed in graph_b.events() {
        if opposed.polarity == Polarity::Affirmative {
            continue;
        }
        let Some(src) = opposed.source_head.as_deref() else {
            continue;
        };
        let Some(affirmative) = graph_a.event(src) else {
            report.unresolved.push(opposed.text.clone());
            continue;
        };
        let tails_a = graph_a.tails(&affirmative.text, relation);
        let tails_b = graph_b.tails(&opposed.text, relation).map(|t| {
            t.values()
                .map(|s| (graph_a.key(s), s.clone()))
                .collect::<TailSet>()
        });
        match (tails_a, tails_b) {
            (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => {
                pairs.push(ContrastPair::new(affirmative.clone(), opposed.clone(), relation, a, &b));
            }
            _ => report.missing_tails += 1,
        }
    }
    (pairs, report)
}

/// Pairs under every relation, relation-major.
pub fn pair_all_relations(graph_a: &KnowledgeGraph, graph_b: &KnowledgeGraph) -> (Vec<ContrastPair>, PairingReport) {
    let mut pairs = Vec::new();
    let mut report = PairingReport::default();
    for r in RelationType::ALL {
        let (p, rep) = pair_events(graph_a, graph_b, r);
        pairs.extend(p);
        if r == RelationType::ALL[0] {
            report.unresolved = rep.unresolved;
        }
        report.missing_tails += rep.missing_tails;
    }
    (pairs, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    KgPositive,
    SwappedNegative,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::KgPositive => "kg_positive",
            Origin::SwappedNegative => "swapped_negative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sentence: String,
    /// 1 = valid, 0 = invalid.
    pub label: u8,
    pub origin: Origin,
    /// Polarity of the opposed event of the pair this sample came from.
    pub polarity: Polarity,
    pub source_tuple: KnowledgeTuple,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive_candidates: usize,
    pub negative_candidates: usize,
    pub kept_per_label: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub per_class: BTreeMap<Polarity, ClassCounts>,
    /// Pairs whose contrast sets were both empty.
    pub pairs_without_contrast: usize,
    /// Swapped negatives dropped because the same triple is a positive elsewhere.
    pub collisions_dropped: usize,
}

type TripleKey = (String, RelationType, String);

fn sample_of(head: &Event, relation: RelationType, tail: &str, label: u8, polarity: Polarity) -> LabeledSample {
    LabeledSample {
        sentence: render_parts(&head.text, relation, tail),
        label,
        origin: if label == 1 {
            Origin::KgPositive
        } else {
            Origin::SwappedNegative
        },
        polarity,
        source_tuple: KnowledgeTuple {
            head: head.clone(),
            relation,
            tail: String::from(tail),
        },
    }
}

/// Builds the balanced discriminator dataset.
///
/// Positives are the original tuples of paired heads; negatives pair each
/// head with the other side's contrast set. Within every polarity class the
/// larger pool is downsampled (seeded) to the size of the smaller one, and the
/// final list is shuffled by `seed`.
pub fn build_discriminator_dataset(
    pairs: &[ContrastPair],
    seed: u64,
) -> (Vec<LabeledSample>, DatasetReport) {
    let mut report = DatasetReport::default();
    let mut pos: BTreeMap<Polarity, (Vec<LabeledSample>, BTreeSet<TripleKey>)> = BTreeMap::new();
    let mut neg: BTreeMap<Polarity, (Vec<LabeledSample>, BTreeSet<TripleKey>)> = BTreeMap::new();
    let mut all_positive: BTreeSet<TripleKey> = BTreeSet::new();

    let key = |head: &Event, r: RelationType, tail: &str| -> TripleKey {
        (crate::text::normalize_text(&head.text), r, String::from(tail))
    };

    for p in pairs {
        for t in p.tails_a() {
            all_positive.insert(key(&p.affirmative, p.relation, &t));
        }
        for t in p.tails_b() {
            all_positive.insert(key(&p.opposed, p.relation, &t));
        }
    }

    for p in pairs {
        if p.contrast_a.is_empty() && p.contrast_b.is_empty() {
            report.pairs_without_contrast += 1;
            continue;
        }
        let class = p.opposed.polarity;
        let (pool, seen) = pos.entry(class).or_default();
        for (head, tails) in [(&p.affirmative, p.tails_a()), (&p.opposed, p.tails_b())] {
            for t in tails {
                if seen.insert(key(head, p.relation, &t)) {
                    pool.push(sample_of(head, p.relation, p.surface_of(&t), 1, class));
                }
            }
        }
        let (pool, seen) = neg.entry(class).or_default();
        for (head, tails) in [(&p.affirmative, &p.contrast_b), (&p.opposed, &p.contrast_a)] {
            for t in tails {
                let k = key(head, p.relation, t);
                if all_positive.contains(&k) {
                    report.collisions_dropped += 1;
                    continue;
                }
                if seen.insert(k) {
                    pool.push(sample_of(head, p.relation, p.surface_of(t), 0, class));
                }
            }
        }
    }

    let mut out = Vec::new();
    for (ci, class) in Polarity::ALL.iter().enumerate() {
        let (Some((p, _)), Some((n, _))) = (pos.remove(class), neg.remove(class)) else {
            continue;
        };
        let keep = p.len().min(n.len());
        report.per_class.insert(
            *class,
            ClassCounts {
                positive_candidates: p.len(),
                negative_candidates: n.len(),
                kept_per_label: keep,
            },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ci as u64 + 1);
        out.extend(downsample(p, keep, &mut rng));
        out.extend(downsample(n, keep, &mut rng));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.shuffle(&mut rng);
    (out, report)
}

fn downsample<T>(items: Vec<T>, keep: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    if items.len() <= keep {
        return items;
    }
    let mut chosen = sample(rng, items.len(), keep).into_vec();
    chosen.sort_unstable();
    let mut chosen = chosen.into_iter().peekable();
    items
        .into_iter()
        .enumerate()
        .filter_map(|(i, x)| {
            if chosen.peek() == Some(&i) {
                chosen.next();
                Some(x)
            } else {
                None
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Split;
    use crate::text::NormalizeOptions;
    use alloc::string::ToString;
    use alloc::vec;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn graphs(a_tails: &[&str], b_tails: &[&str]) -> (KnowledgeGraph, KnowledgeGraph) {
        let aff = Event::affirmative("X eats a cheeseburger", Split::Train).unwrap();
        let opp = Event::derived(
            "X eats a salad",
            Polarity::Contradiction,
            "X eats a cheeseburger",
            Split::Train,
            None,
        )
        .unwrap();
        let ga = KnowledgeGraph::from_tuples(
            a_tails
                .iter()
                .map(|t| KnowledgeTuple::new(aff.clone(), RelationType::XAttr, *t).unwrap()),
            NormalizeOptions::default(),
        )
        .unwrap();
        let gb = KnowledgeGraph::from_tuples(
            b_tails
                .iter()
                .map(|t| KnowledgeTuple::new(opp.clone(), RelationType::XAttr, *t).unwrap()),
            NormalizeOptions::default(),
        )
        .unwrap();
        (ga, gb)
    }

    #[test]
    fn common_set_examples() {
        let a = set(&["x is hungry", "x is unhealthy"]);
        let b = set(&["x is hungry", "x is healthy"]);
        assert_eq!(common_set(&a, &b), set(&["x is hungry"]));
        assert_eq!(common_set(&a, &a), a);
    }

    #[test]
    fn cheeseburger_salad_negative() {
        let (ga, gb) = graphs(&["X is hungry", "X is unhealthy"], &["X is hungry", "X is healthy"]);
        let (pairs, report) = pair_events(&ga, &gb, RelationType::XAttr);
        assert_eq!(pairs.len(), 1);
        assert!(report.unresolved.is_empty());
        let (data, _) = build_discriminator_dataset(&pairs, 3);
        let neg: Vec<_> = data.iter().filter(|s| s.label == 0).collect();
        assert!(neg
            .iter()
            .any(|s| s.source_tuple.head.text == "PersonX eats a cheeseburger"
                && s.source_tuple.tail == "PersonX is healthy"));
        assert_eq!(data.iter().filter(|s| s.label == 1).count(), neg.len());
    }

    #[test]
    fn counting_and_missing_tails() {
        let (ga, gb) = graphs(&["a", "b", "c"], &["a", "d", "e"]);
        let (pairs, _) = pair_events(&ga, &gb, RelationType::XAttr);
        assert_eq!(pairs[0].common.len(), 1);
        assert_eq!(pairs[0].contrast_a.len(), 2);
        assert_eq!(pairs[0].contrast_b.len(), 2);
        let (pairs, report) = pair_events(&ga, &gb, RelationType::XWant);
        assert!(pairs.is_empty());
        assert_eq!(report.missing_tails, 1);
    }

    #[test]
    fn no_contrast_gives_empty_dataset() {
        let (ga, gb) = graphs(&["a", "b"], &["a", "b"]);
        let (pairs, _) = pair_events(&ga, &gb, RelationType::XAttr);
        let (data, report) = build_discriminator_dataset(&pairs, 0);
        assert!(data.is_empty());
        assert_eq!(report.pairs_without_contrast, 1);
    }

    #[test]
    fn unresolved_source_is_reported() {
        let (ga, _) = graphs(&["a"], &["b"]);
        let orphan = Event::derived("X never runs", Polarity::SemiLogical, "X runs", Split::Dev, None).unwrap();
        let gb = KnowledgeGraph::from_tuples(
            vec![KnowledgeTuple::new(orphan, RelationType::XAttr, "b").unwrap()],
            NormalizeOptions::default(),
        )
        .unwrap();
        let (pairs, report) = pair_events(&ga, &gb, RelationType::XAttr);
        assert!(pairs.is_empty());
        assert_eq!(report.unresolved, vec!["PersonX never runs".to_string()]);
    }
}
