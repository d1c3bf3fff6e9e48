use std::collections::{BTreeMap, BTreeSet};

use anion_forge_core::contrast::{build_discriminator_dataset, common_set, pair_events, ContrastPair, Origin};
use anion_forge_core::kg::{KnowledgeGraph, KnowledgeTuple, TailSet};
use anion_forge_core::text::normalize_text;
use anion_forge_core::{Event, Polarity, RelationType, Split};
use proptest::prelude::*;

const TAILS: &[&str] = &["is hungry", "is full", "to rest", "to eat", "is healthy", "is sad", "gets fat", "to run"];

fn tail_set() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((0..TAILS.len(), any::<bool>()), 0..6).prop_map(|v| {
        v.into_iter()
            .map(|(i, upper)| if upper { TAILS[i].to_uppercase() } else { TAILS[i].to_string() })
            .collect()
    })
}

fn keyed(tails: &[String]) -> TailSet {
    tails.iter().map(|t| (normalize_text(t), t.clone())).collect()
}

/// Quadratic scan: x is common when some y on the other side equals it.
fn scan_common(a: &[String], b: &[String]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for x in a {
        for y in b {
            if normalize_text(x) == normalize_text(y) {
                out.insert(normalize_text(x));
            }
        }
    }
    out
}

fn norm_set(v: &[String]) -> BTreeSet<String> {
    v.iter().map(|t| normalize_text(t)).collect()
}

fn pair(a: &[String], b: &[String], polarity: Polarity, i: usize) -> ContrastPair {
    let aff = Event::affirmative(format!("PersonX eats meal{i}"), Split::Train).unwrap();
    let opp = Event::derived(format!("PersonX never eats meal{i}"), polarity, &aff.text, Split::Train, None).unwrap();
    ContrastPair::new(aff, opp, RelationType::XAttr, &keyed(a), &keyed(b))
}

proptest! {
    #[test]
    fn common_set_is_a_symmetric_intersection(a in tail_set(), b in tail_set()) {
        let (sa, sb) = (norm_set(&a), norm_set(&b));
        prop_assert_eq!(common_set(&sa, &sb), common_set(&sb, &sa));
        prop_assert_eq!(common_set(&sa, &sb), scan_common(&a, &b));
        prop_assert_eq!(common_set(&sa, &sa), sa);
    }

    #[test]
    fn contrast_pair_partition_laws(a in tail_set(), b in tail_set()) {
        let p = pair(&a, &b, Polarity::Logical, 0);
        let (sa, sb) = (norm_set(&a), norm_set(&b));
        prop_assert_eq!(&p.common, &scan_common(&a, &b));
        prop_assert!(p.contrast_a.is_disjoint(&p.common));
        prop_assert!(p.contrast_b.is_disjoint(&p.common));
        prop_assert_eq!(p.tails_a(), sa);
        prop_assert_eq!(p.tails_b(), sb);
    }

    #[test]
    fn datasets_are_balanced_and_collision_free(
        sides in prop::collection::vec((tail_set(), tail_set(), 1..4usize), 1..8),
        seed in any::<u64>(),
    ) {
        let pairs: Vec<ContrastPair> = sides
            .iter()
            .enumerate()
            .map(|(i, (a, b, pol))| pair(a, b, Polarity::ALL[*pol], i))
            .collect();
        let (samples, report) = build_discriminator_dataset(&pairs, seed);
        let mut positives = BTreeSet::new();
        for p in &pairs {
            for t in p.tails_a() {
                positives.insert((p.affirmative.text.clone(), t));
            }
            for t in p.tails_b() {
                positives.insert((p.opposed.text.clone(), t));
            }
        }
        let mut per_class: BTreeMap<Polarity, [usize; 2]> = BTreeMap::new();
        for s in &samples {
            prop_assert_eq!(s.label == 1, s.origin == Origin::KgPositive);
            per_class.entry(s.polarity).or_default()[s.label as usize] += 1;
            if s.label == 0 {
                let k = (s.source_tuple.head.text.clone(), normalize_text(&s.source_tuple.tail));
                prop_assert!(!positives.contains(&k), "negative {:?} collides", k);
            }
        }
        for (class, [neg, pos]) in &per_class {
            prop_assert_eq!(neg, pos, "class {:?}", class);
            prop_assert_eq!(*pos, report.per_class[class].kept_per_label);
        }
        let (again, _) = build_discriminator_dataset(&pairs, seed);
        prop_assert_eq!(samples, again);
    }
}

#[test]
fn toy_pairing_keeps_twice_the_smaller_pool() {
    // one pair: 3 affirmative tails, 2 opposed tails, 1 shared
    let a: Vec<String> = ["is hungry", "is unhealthy", "gets fat"].map(String::from).to_vec();
    let b: Vec<String> = ["is hungry", "is healthy"].map(String::from).to_vec();
    let p = pair(&a, &b, Polarity::Logical, 0);
    let (samples, report) = build_discriminator_dataset(&[p], 1);
    let c = &report.per_class[&Polarity::Logical];
    // positives: 3 + 2 original tuples; negatives: 1 + 2 swapped contrast tails
    assert_eq!((c.positive_candidates, c.negative_candidates), (5, 3));
    assert_eq!(samples.len(), 2 * 3);
}

#[test]
fn pairing_counts_and_skips() {
    let aff = Event::affirmative("PersonX eats a cheeseburger", Split::Train).unwrap();
    let neg = Event::derived(
        "PersonX eats a salad",
        Polarity::Contradiction,
        &aff.text,
        Split::Train,
        None,
    )
    .unwrap();
    let t = |e: &Event, r, tail: &str| KnowledgeTuple::new(e.clone(), r, tail).unwrap();
    let ga = KnowledgeGraph::from_tuples(
        [
            t(&aff, RelationType::XAttr, "is hungry"),
            t(&aff, RelationType::XAttr, "is unhealthy"),
            t(&aff, RelationType::XAttr, "gets fat"),
            t(&aff, RelationType::XWant, "to sleep"),
        ],
        Default::default(),
    )
    .unwrap();
    let gb = KnowledgeGraph::from_tuples(
        [
            t(&neg, RelationType::XAttr, "is hungry"),
            t(&neg, RelationType::XAttr, "is healthy"),
            t(&neg, RelationType::XAttr, "Is  Healthy"),
            t(&neg, RelationType::XAttr, "is slim"),
        ],
        Default::default(),
    )
    .unwrap();
    let (pairs, _) = pair_events(&ga, &gb, RelationType::XAttr);
    assert_eq!(pairs.len(), 1);
    assert_eq!((pairs[0].common.len(), pairs[0].contrast_a.len(), pairs[0].contrast_b.len()), (1, 2, 2));
    let (none, report) = pair_events(&ga, &gb, RelationType::XWant);
    assert!(none.is_empty());
    assert_eq!(report.missing_tails, 1);
    let (samples, _) = build_discriminator_dataset(&pairs, 0);
    assert!(samples.iter().any(|s| s.label == 0
        && s.source_tuple.head.text == "PersonX eats a cheeseburger"
        && s.source_tuple.tail == "is healthy"));
}
