use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use anion_forge_core::contrast::{build_discriminator_dataset, pair_all_relations};
use anion_forge_core::discriminator::{
    accuracy, partition, partition_scored, train_reference, DiscriminatorModel, FeatureHasher, ReferenceLinearModel,
    TrainConfig,
};
use anion_forge_core::generator::{
    beam_search, Candidate, GeneratorModel, Interpolation, ReferenceNGramModel, TokenModel,
};
use anion_forge_core::kg::{KnowledgeGraph, KnowledgeTuple};
use anion_forge_core::synthetic::{PlantedConfig, PlantedKg};
use anion_forge_core::{Event, RelationType, Split};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scores a sentence by a hash of its text, so order cannot matter.
struct HashScorer;

impl DiscriminatorModel for HashScorer {
    fn score_batch(&self, sentences: &[String]) -> anion_forge_core::Result<Vec<f64>> {
        Ok(sentences
            .iter()
            .map(|s| {
                let h = s.bytes().fold(1469598103934665603u64, |h, b| (h ^ b as u64).wrapping_mul(1099511628211));
                (h % 1000) as f64 / 999.0
            })
            .collect())
    }

    fn descriptor(&self) -> String {
        "hash".into()
    }
}

fn candidates(tails: &[String]) -> Vec<Candidate> {
    tails
        .iter()
        .enumerate()
        .map(|(i, t)| Candidate {
            tail: t.clone(),
            logp: -(i as f64),
            ppl: 1.0 + i as f64,
        })
        .collect()
}

fn xattr_graph(rows: &[(String, String)]) -> KnowledgeGraph {
    KnowledgeGraph::from_tuples(
        rows.iter().map(|(h, t)| {
            KnowledgeTuple::new(Event::affirmative(h.clone(), Split::Train).unwrap(), RelationType::XAttr, t.clone())
                .unwrap()
        }),
        Default::default(),
    )
    .unwrap()
}

fn corpus(words: &'static [&'static str], max_len: usize) -> impl Strategy<Value = Vec<(String, String)>> {
    prop::collection::vec(
        (0..3usize, prop::collection::vec(prop::sample::select(words), 1..=max_len)),
        1..6,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .map(|(h, t)| (format!("PersonX runs {h}"), t.join(" ")))
            .collect()
    })
}

#[derive(PartialEq)]
struct Node(f64, Vec<usize>);
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Exact k best complete tails by best-first search. Log-probabilities are
/// never positive, so complete sequences pop in descending score order.
fn exhaustive_top_k<M: TokenModel>(m: &M, head: &str, r: RelationType, k: usize, max: usize) -> Vec<(String, f64)> {
    let prompt = m.prompt(head, r);
    let end = m.end_id();
    let mut heap = BinaryHeap::from([Node(0.0, Vec::new())]);
    let mut out = Vec::new();
    while let Some(Node(s, seq)) = heap.pop() {
        if seq.last() == Some(&end) {
            let words: Vec<&str> = seq[..seq.len() - 1].iter().map(|&i| m.vocab()[i].as_str()).collect();
            out.push((words.join(" "), s));
            if out.len() == k {
                break;
            }
            continue;
        }
        for (id, l) in m.next_log_probs(&prompt, &seq).into_iter().enumerate() {
            if m.is_blocked(id) || (seq.is_empty() && id == end) || (seq.len() >= max && id != end) {
                continue;
            }
            let mut next = seq.clone();
            next.push(id);
            heap.push(Node(s + l, next));
        }
    }
    out
}

proptest! {
    #[test]
    fn partition_is_order_independent(
        tails in prop::collection::btree_set("[a-e]{1,3}( [a-e]{1,3})?", 1..10),
        perm_seed in any::<u64>(),
        threshold in 0.0..=1.0f64,
    ) {
        let tails: Vec<String> = tails.into_iter().collect();
        let ev = Event::affirmative("PersonX runs", Split::Test).unwrap();
        let a = partition(&HashScorer, &ev, RelationType::XAttr, &candidates(&tails), threshold).unwrap();
        let mut shuffled = tails.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        let b = partition(&HashScorer, &ev, RelationType::XAttr, &candidates(&shuffled), threshold).unwrap();
        let valid = |p: &anion_forge_core::discriminator::PartitionResult| -> BTreeSet<(String, u64)> {
            p.valid_candidates().map(|c| (c.tail.clone(), c.probability.to_bits())).collect()
        };
        let invalid = |p: &anion_forge_core::discriminator::PartitionResult| -> BTreeSet<String> {
            p.invalid_candidates().map(|c| c.tail.clone()).collect()
        };
        prop_assert_eq!(valid(&a), valid(&b));
        prop_assert_eq!(invalid(&a), invalid(&b));
        prop_assert_eq!(a.valid.len() + a.invalid.len(), tails.len());
    }

    #[test]
    fn raising_the_threshold_never_adds_valid(
        probs in prop::collection::vec(0.0..=1.0f64, 1..15),
        t1 in 0.0..=1.0f64,
        t2 in 0.0..=1.0f64,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let tails: Vec<String> = (0..probs.len()).map(|i| format!("t{i}")).collect();
        let ev = Event::affirmative("PersonX runs", Split::Test).unwrap();
        let c = candidates(&tails);
        let a = partition_scored(&ev, RelationType::XAttr, &c, &probs, lo).unwrap();
        let b = partition_scored(&ev, RelationType::XAttr, &c, &probs, hi).unwrap();
        let va: BTreeSet<usize> = a.valid.iter().copied().collect();
        prop_assert!(b.valid.iter().all(|i| va.contains(i)));
    }

    #[test]
    fn token_distributions_sum_to_one(rows in corpus(&["a", "b", "c", "to", "be"], 3), head in 0..4usize) {
        let m = ReferenceNGramModel::train(&xattr_graph(&rows), 0.1, Interpolation::default()).unwrap();
        for r in [RelationType::XAttr, RelationType::OReact] {
            let prompt = m.prompt(&format!("PersonX runs {head}"), r);
            for prev in std::iter::once(None).chain((0..m.vocab_size()).map(Some)) {
                let s: f64 = m.distribution(&prompt, prev).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9, "{s}");
            }
        }
    }

    #[test]
    fn beams_are_sorted_bounded_and_perplexity_at_least_one(
        rows in corpus(&["a", "b", "c", "to", "be"], 3),
        beam in 1..12usize,
    ) {
        let g = xattr_graph(&rows);
        let m = ReferenceNGramModel::train(&g, 0.1, Interpolation::default()).unwrap();
        let out = m.generate(&g.events()[0], RelationType::XAttr, beam).unwrap();
        prop_assert!(!out.is_empty() && out.len() <= beam);
        prop_assert!(out.windows(2).all(|w| w[0].logp >= w[1].logp));
        let distinct: BTreeSet<_> = out.iter().map(|c| c.tail.clone()).collect();
        prop_assert_eq!(distinct.len(), out.len());
        for c in &out {
            prop_assert!(c.ppl >= 1.0);
            let p = m.perplexity(&g.events()[0], RelationType::XAttr, &c.tail).unwrap();
            prop_assert!((p - c.ppl).abs() <= 1e-9 * p);
        }
    }

    /// With a beam as wide as the whole hypothesis space nothing is pruned,
    /// so the beam equals exhaustive enumeration (and so contains the best
    /// tail of every narrower beam).
    #[test]
    fn unpruned_beam_equals_exhaustive_search(rows in corpus(&["a", "b", "c"], 2)) {
        let g = xattr_graph(&rows);
        let m = ReferenceNGramModel::train(&g, 0.1, Interpolation::default()).unwrap();
        let head = &g.events()[0].text;
        // every one- and two-word tail over the observed words
        let w = m.vocab_size() - 2;
        let space = w + w * w;
        let wide = beam_search(&m, head, RelationType::XAttr, space, 2);
        let exact = exhaustive_top_k(&m, head, RelationType::XAttr, space, 2);
        prop_assert_eq!(wide.len(), space);
        // tied scores may order differently, so compare as maps
        let exact: std::collections::BTreeMap<&str, f64> = exact.iter().map(|(t, s)| (t.as_str(), *s)).collect();
        prop_assert_eq!(exact.len(), space);
        for c in &wide {
            prop_assert!((c.logp - exact[c.tail.as_str()]).abs() < 1e-12, "{}", c.tail);
        }
        for b in 1..space {
            let narrow = beam_search(&m, head, RelationType::XAttr, b, 2);
            prop_assert!(wide.iter().any(|c| c.tail == narrow[0].tail));
        }
    }
}

#[test]
fn three_tail_toy_corpus_matches_exhaustive_search() {
    // distinct tail frequencies, one word each
    let rows: Vec<(String, String)> = [
        ("PersonX runs", "tired"),
        ("PersonX runs", "sweaty"),
        ("PersonX runs", "breathless"),
        ("PersonX jogs", "tired"),
        ("PersonX jogs", "sweaty"),
        ("PersonX walks", "tired"),
    ]
    .iter()
    .map(|(h, t)| (h.to_string(), t.to_string()))
    .collect();
    let m = ReferenceNGramModel::train(&xattr_graph(&rows), 0.1, Interpolation::default()).unwrap();
    let beam = beam_search(&m, "PersonX runs", RelationType::XAttr, 3, 20);
    let exact = exhaustive_top_k(&m, "PersonX runs", RelationType::XAttr, 3, 20);
    let want: Vec<&str> = exact.iter().map(|(t, _)| t.as_str()).collect();
    assert_eq!(want, ["tired", "sweaty", "breathless"]);
    let got: Vec<&str> = beam.iter().map(|c| c.tail.as_str()).collect();
    assert_eq!(got, want);
    for (c, (_, s)) in beam.iter().zip(&exact) {
        assert!((c.logp - s).abs() < 1e-12);
    }
    assert!(beam.windows(2).all(|w| w[0].logp > w[1].logp));
}

/// Beam search is not an anytime refinement in general: here greedy decoding
/// (beam 1) finds a tail that a width-2 beam ranks below two others.
#[test]
fn wider_beam_can_drop_the_greedy_tail() {
    let m = ReferenceNGramModel::train(
        &xattr_graph(&[("PersonX runs".into(), "c c".into())]),
        0.1,
        Interpolation::default(),
    )
    .unwrap();
    let greedy = beam_search(&m, "PersonX runs", RelationType::XAttr, 1, 20);
    let wider = beam_search(&m, "PersonX runs", RelationType::XAttr, 2, 20);
    assert!(wider.iter().all(|c| c.logp > greedy[0].logp));
    assert!(!wider.iter().any(|c| c.tail == greedy[0].tail));
}

#[test]
fn bce_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let hasher = FeatureHasher { bits: 12, seed: 3 };
    let words = ["PersonX", "eats", "a", "salad.", "healthy", "hungry", "never", "is", "X", "wants", "to", "rest"];
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let sentence: Vec<&str> = (0..rng.gen_range(3..9)).map(|_| words[rng.gen_range(0..words.len())]).collect();
        let x = hasher.features(&sentence.join(" "));
        let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        let mut model = ReferenceLinearModel::zeros(hasher);
        model.bias = rng.gen_range(-1.0..1.0);
        for &(i, _) in &x {
            model.weights[i as usize] = rng.gen_range(-2.0..2.0);
        }
        let (gb, gw) = model.gradient(&x, y);
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        let mut m = model.clone();
        m.bias += h;
        let up = m.loss(&x, y);
        m.bias -= 2.0 * h;
        let down = m.loss(&x, y);
        worst = worst.max(rel(gb, (up - down) / (2.0 * h)));
        for &(i, g) in &gw {
            let mut m = model.clone();
            m.weights[i as usize] += h;
            let up = m.loss(&x, y);
            m.weights[i as usize] -= 2.0 * h;
            let down = m.loss(&x, y);
            worst = worst.max(rel(g, (up - down) / (2.0 * h)));
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn reference_model_separates_held_out_planted_negatives() {
    let kg = PlantedKg::generate(&PlantedConfig::default()).unwrap();
    let side = |g, s| PlantedKg::side(g, s).unwrap();
    let (pairs, _) = pair_all_relations(&side(&kg.affirmative, Split::Train), &side(&kg.opposed, Split::Train));
    let (train, _) = build_discriminator_dataset(&pairs, 1);
    let (model, _) = train_reference(&train, &TrainConfig::default()).unwrap();
    let (pairs, _) = pair_all_relations(&side(&kg.affirmative, Split::Test), &side(&kg.opposed, Split::Test));
    let (held, _) = build_discriminator_dataset(&pairs, 1);
    assert!(!held.is_empty());
    assert!(accuracy(&model, &held).unwrap() >= 0.95);
}
