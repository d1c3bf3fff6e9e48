use anion_forge_core::discriminator::{partition_scored, PartitionResult};
use anion_forge_core::eval::{
    bleu2, bonferroni, evaluate_run, p_at_k, p_at_num_valid, permutation_test, permutation_test_detailed,
    EvalConfig, LabelSource, Provenance,
};
use anion_forge_core::generator::Candidate;
use anion_forge_core::text::NormalizeOptions;
use anion_forge_core::{Event, RelationType, Split};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn prompt(i: usize, ppls: &[f64], probs: &[f64], threshold: f64) -> PartitionResult {
    let ev = Event::affirmative(format!("PersonX cooks dish{i}"), Split::Test).unwrap();
    let c: Vec<Candidate> = ppls
        .iter()
        .enumerate()
        .map(|(j, &ppl)| Candidate {
            tail: format!("tail{j}"),
            logp: -ppl.ln(),
            ppl,
        })
        .collect();
    partition_scored(&ev, RelationType::XAttr, &c, probs, threshold).unwrap()
}

fn label(parts: &[PartitionResult], l: &[Vec<bool>]) -> LabelSource {
    let mut src = LabelSource::new(Provenance::File, NormalizeOptions::default());
    for (p, ls) in parts.iter().zip(l) {
        for (c, &x) in p.all.iter().zip(ls) {
            src.insert(&p.event.text, p.relation, &c.tail, x);
        }
    }
    src
}

/// (ppl, probability, label) rows for a handful of prompts.
fn run() -> impl Strategy<Value = Vec<Vec<(f64, f64, bool)>>> {
    prop::collection::vec(
        prop::collection::vec((1.0..50.0f64, 0.0..=1.0f64, any::<bool>()), 1..11),
        1..6,
    )
}

fn build(rows: &[Vec<(f64, f64, bool)>], threshold: f64) -> (Vec<PartitionResult>, LabelSource) {
    let parts: Vec<PartitionResult> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let ppls: Vec<f64> = r.iter().map(|x| x.0).collect();
            let probs: Vec<f64> = r.iter().map(|x| x.1).collect();
            prompt(i, &ppls, &probs, threshold)
        })
        .collect();
    let labels: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|x| x.2).collect()).collect();
    let src = label(&parts, &labels);
    (parts, src)
}

/// Sign-flip p-value by brute force over all 2^n patterns.
fn enumerate_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed: f64 = d.iter().sum();
    let n = d.len();
    let mut hits = 0;
    for mask in 0..1u32 << n {
        let mut s = 0.0;
        for (i, x) in d.iter().enumerate() {
            s += if mask & (1 << i) != 0 { -x } else { *x };
        }
        if s >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u32 << n) as f64
}

proptest! {
    #[test]
    fn correct_counts_are_conserved_per_prompt(rows in run(), threshold in 0.0..=1.0f64) {
        let (parts, src) = build(&rows, threshold);
        let rep = evaluate_run(&parts, &src, &EvalConfig { permutations: 64, ..Default::default() }, None).unwrap();
        for (pp, p) in rep.per_prompt.iter().zip(&parts) {
            prop_assert_eq!(pp.all.correct, pp.valid.correct + pp.invalid.correct);
            prop_assert_eq!(pp.all.total, pp.valid.total + pp.invalid.total);
            prop_assert_eq!(pp.all.total, p.all.len());
            // the same identity in precision form
            let w = |s: &anion_forge_core::eval::SetStats| s.precision.unwrap_or(0.0) * s.total as f64;
            prop_assert!((w(&pp.all) - w(&pp.valid) - w(&pp.invalid)).abs() < 1e-9);
        }
        prop_assert_eq!(rep.all.correct, rep.valid.correct + rep.invalid.correct);
        for s in [rep.all, rep.valid, rep.invalid] {
            if let Some(x) = s.precision {
                prop_assert!((0.0..=100.0).contains(&x));
            }
        }
        if let (Some(a), Some(v), Some(i)) = (rep.pruned_all_at_num_valid, rep.valid_at_num_valid, rep.improvement_pct) {
            prop_assert!((i - 100.0 * (v - a) / a).abs() < 1e-9);
        }
    }

    #[test]
    fn p_at_num_valid_matches_a_stable_sort(rows in run(), threshold in 0.0..=1.0f64) {
        let (parts, src) = build(&rows, threshold);
        for (p, r) in parts.iter().zip(&rows) {
            let got = p_at_num_valid(p, &src).unwrap();
            let n = p.valid.len();
            if n == 0 {
                prop_assert!(got.is_none());
                continue;
            }
            // insertion sort on ppl keeps beam order among ties
            let mut order: Vec<usize> = Vec::new();
            for i in 0..r.len() {
                let at = order.iter().position(|&j| r[j].0 > r[i].0).unwrap_or(order.len());
                order.insert(at, i);
            }
            let pruned = order[..n].iter().filter(|&&i| r[i].2).count();
            let valid = p.valid.iter().filter(|&&i| r[i].2).count();
            let (a, v) = got.unwrap();
            prop_assert_eq!(a, 100.0 * pruned as f64 / n as f64);
            prop_assert_eq!(v, 100.0 * valid as f64 / n as f64);
            if n == r.len() {
                prop_assert_eq!(a, 100.0 * r.iter().filter(|x| x.2).count() as f64 / n as f64);
            }
        }
    }

    #[test]
    fn permutation_p_is_a_probability(
        pairs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..40),
        perms in 1..300usize,
        seed in any::<u64>(),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let p = permutation_test(&a, &b, perms, seed).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert_eq!(p, permutation_test(&a, &b, perms, seed).unwrap());
    }

    /// Raising one difference can only shrink the set of permuted statistics
    /// at or above the observed one.
    #[test]
    fn permutation_p_is_monotone_in_the_statistic(
        pairs in prop::collection::vec((-10i32..10, -10i32..10), 1..40),
        bump in 1i32..10,
        at in any::<prop::sample::Index>(),
        perms in 1..300usize,
        seed in any::<u64>(),
    ) {
        let a: Vec<f64> = pairs.iter().map(|x| x.0 as f64 * 0.5).collect();
        let b: Vec<f64> = pairs.iter().map(|x| x.1 as f64 * 0.5).collect();
        let mut raised = a.clone();
        raised[at.index(a.len())] += bump as f64 * 0.5;
        let p0 = permutation_test(&a, &b, perms, seed).unwrap();
        let p1 = permutation_test(&raised, &b, perms, seed).unwrap();
        prop_assert!(p1 <= p0, "{p1} > {p0}");
    }

    #[test]
    fn small_samples_match_full_enumeration(
        pairs in prop::collection::vec((0..20i32, 0..20i32), 1..9),
    ) {
        let a: Vec<f64> = pairs.iter().map(|x| x.0 as f64 / 4.0).collect();
        let b: Vec<f64> = pairs.iter().map(|x| x.1 as f64 / 4.0).collect();
        let out = permutation_test_detailed(&a, &b, 1 << a.len(), 3).unwrap();
        prop_assert!(out.exact);
        prop_assert_eq!(out.p_value, enumerate_p(&a, &b));
    }

    #[test]
    fn bleu_ignores_reference_order(
        hyp in "(to|be|happy|sad|eat|a|cake)( (to|be|happy|sad|eat|a|cake)){0,4}",
        refs in prop::collection::vec("(to|be|happy|sad|eat|a|cake)( (to|be|happy|sad|eat|a|cake)){0,4}", 1..5),
        seed in any::<u64>(),
    ) {
        let base = bleu2(&hyp, &refs).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        let mut shuffled = refs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        prop_assert_eq!(base, bleu2(&hyp, &shuffled).unwrap());
    }

    #[test]
    fn more_tests_never_add_flags(
        ps in prop::collection::vec(0.0..=0.2f64, 1..20),
        extra in prop::collection::vec(0.0..=1.0f64, 0..20),
        alpha in 0.001..0.999f64,
    ) {
        let few = bonferroni(&ps, alpha).unwrap();
        let all: Vec<f64> = ps.iter().chain(&extra).copied().collect();
        let many = bonferroni(&all, alpha).unwrap();
        for (f, m) in few.iter().zip(&many) {
            prop_assert!(*f || !*m);
        }
    }
}

#[test]
fn bleu_brevity_penalty_case() {
    // p1 = 3/3, p2 = 1/2, BP = exp(1 - 4/3)
    let v = bleu2("to be happy", &["to be very happy".to_string()]).unwrap();
    assert!((v - 0.5066641486392106).abs() < 1e-12, "{v}");
}

#[test]
fn bonferroni_hand_cases() {
    assert_eq!(bonferroni(&[0.01, 0.04], 0.05).unwrap(), [true, false]);
    assert_eq!(bonferroni(&[0.049], 0.05).unwrap(), [true]);
    assert_eq!(bonferroni(&[0.051], 0.05).unwrap(), [false]);
    assert_eq!(bonferroni(&[0.002; 20], 0.05).unwrap(), [true; 20]);
    assert_eq!(bonferroni(&[0.003, 0.0024, 0.0026], 0.0075).unwrap(), [false, true, false]);
    assert!(bonferroni(&[0.01], 0.0).is_err());
}

#[test]
fn p_at_k_matches_a_recount_over_random_prompts() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for _ in 0..200 {
        let len = rng.gen_range(1..=25);
        let labels: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.4)).collect();
        let k = rng.gen_range(1..=len);
        let mut hits = 0;
        for (i, l) in labels.iter().enumerate() {
            if i < k && *l {
                hits += 1;
            }
        }
        assert_eq!(p_at_k(&labels, k).unwrap(), hits as f64 * 100.0 / k as f64);
    }
}

#[test]
fn five_pairs_enumerate_exactly() {
    let a = [0.9, 0.4, 0.7, 0.8, 0.3];
    let b = [0.5, 0.6, 0.2, 0.1, 0.35];
    let out = permutation_test_detailed(&a, &b, 32, 9).unwrap();
    assert!(out.exact);
    assert_eq!(out.evaluated, 32);
    assert_eq!(out.p_value, enumerate_p(&a, &b));
}

#[test]
fn report_is_a_function_of_its_inputs() {
    let rows = vec![
        vec![(3.0, 0.9, true), (2.0, 0.1, false), (5.0, 0.8, true)],
        vec![(1.5, 0.75, false), (4.0, 0.2, true)],
    ];
    let (parts, src) = build(&rows, 0.7);
    let cfg = EvalConfig { permutations: 500, seed: 4, ..Default::default() };
    let a = evaluate_run(&parts, &src, &cfg, None).unwrap();
    let b = evaluate_run(&parts.clone(), &src.clone(), &cfg, None).unwrap();
    assert_eq!(a, b);
}
