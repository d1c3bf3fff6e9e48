//! Precision metrics, BLEU-2, paired permutation tests and run-level reports.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discriminator::PartitionResult;
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, RelationType};
use crate::text::NormalizeOptions;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;
pub const DEFAULT_ALPHA: f64 = 0.05;
const BLEU_EPSILON: f64 = 1e-9;
/// Sign-flip enumeration is used instead of sampling up to this many pairs.
const MAX_EXACT_PAIRS: usize = 24;

/// 100 × (correct among the first `k`) / `k`.
pub fn p_at_k(labels: &[bool], k: usize) -> Result<f64> {
    if k == 0 || k > labels.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..={}",
            labels.len()
        )));
    }
    Ok(100.0 * labels[..k].iter().filter(|l| **l).count() as f64 / k as f64)
}

fn precision(correct: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| 100.0 * correct as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    File,
    Oracle,
}

/// Plausibility labels keyed by normalized (head, relation, tail).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSource {
    labels: BTreeMap<(String, RelationType, String), bool>,
    pub provenance: Provenance,
    options: NormalizeOptions,
}

impl LabelSource {
    pub fn new(provenance: Provenance, options: NormalizeOptions) -> Self {
        LabelSource {
            labels: BTreeMap::new(),
            provenance,
            options,
        }
    }

    /// Records a label; a later entry for the same key overwrites.
    pub fn insert(&mut self, head: &str, relation: RelationType, tail: &str, label: bool) {
        self.labels
            .insert((self.options.key(head), relation, self.options.key(tail)), label);
    }

    /// Labels every candidate of `partitions` with `oracle`.
    pub fn from_oracle<F>(partitions: &[PartitionResult], options: NormalizeOptions, mut oracle: F) -> Self
    where
        F: FnMut(&str, RelationType, &str) -> bool,
    {
        let mut src = LabelSource::new(Provenance::Oracle, options);
        for p in partitions {
            for c in &p.all {
                let l = oracle(&p.event.text, p.relation, &c.tail);
                src.insert(&p.event.text, p.relation, &c.tail, l);
            }
        }
        src
    }

    pub fn get(&self, head: &str, relation: RelationType, tail: &str) -> Result<bool> {
        self.labels
            .get(&(self.options.key(head), relation, self.options.key(tail)))
            .copied()
            .ok_or_else(|| Error::MissingLabel {
                head: head.to_string(),
                relation: relation.as_str(),
                tail: tail.to_string(),
            })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Labels of a partition's candidates in beam order.
pub fn partition_labels(p: &PartitionResult, labels: &LabelSource) -> Result<Vec<bool>> {
    p.all
        .iter()
        .map(|c| labels.get(&p.event.text, p.relation, &c.tail))
        .collect()
}

/// (pruned all, valid) precisions: the all set is cut to its `|valid|`
/// lowest-perplexity members (ties keep beam order). `None` when the valid
/// set is empty.
pub fn p_at_num_valid(p: &PartitionResult, labels: &LabelSource) -> Result<Option<(f64, f64)>> {
    let l = partition_labels(p, labels)?;
    Ok(num_valid_from_labels(p, &l))
}

fn num_valid_from_labels(p: &PartitionResult, l: &[bool]) -> Option<(f64, f64)> {
    let n = p.valid.len();
    if n == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..p.all.len()).collect();
    order.sort_by(|&a, &b| p.all[a].ppl.total_cmp(&p.all[b].ppl));
    let pruned = order[..n].iter().filter(|&&i| l[i]).count();
    let valid = p.valid.iter().filter(|&&i| l[i]).count();
    Some((100.0 * pruned as f64 / n as f64, 100.0 * valid as f64 / n as f64))
}

fn bleu_tokens(s: &str) -> Vec<String> {
    crate::text::normalize_text(s)
        .split(' ')
        .filter(|w| !w.is_empty())
        .map(ToString::to_string)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut m = BTreeMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *m.entry(g).or_insert(0) += 1;
        }
    }
    m
}

/// Sentence BLEU with uniform weights over 1- and 2-grams, clipped counts,
/// a brevity penalty against the closest reference length, and zero
/// precisions replaced by 1e-9.
pub fn bleu2(hypothesis: &str, references: &[String]) -> Result<f64> {
    let hyp = bleu_tokens(hypothesis);
    if hyp.is_empty() {
        return Err(Error::EmptyText { field: "hypothesis" });
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| bleu_tokens(r)).collect();
    if refs.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=2 {
        let h = ngram_counts(&hyp, n);
        let total: usize = h.values().sum();
        let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
        let clipped: usize = h
            .iter()
            .map(|(g, &c)| {
                let max_ref = ref_counts.iter().map(|rc| rc.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
                c.min(max_ref)
            })
            .sum();
        let p = if total == 0 || clipped == 0 {
            BLEU_EPSILON
        } else {
            clipped as f64 / total as f64
        };
        log_sum += libm::log(p) / 2.0;
    }
    let c = hyp.len() as i64;
    // closest reference length, shorter wins ties
    let r = refs
        .iter()
        .map(|r| r.len() as i64)
        .min_by_key(|&len| ((len - c).abs(), len))
        .unwrap_or(c);
    let bp = if c > r { 1.0 } else { libm::exp(1.0 - r as f64 / c as f64) };
    Ok(bp * libm::exp(log_sum))
}

/// Mean sentence BLEU-2 over (hypothesis, references) pairs.
pub fn corpus_bleu2(items: &[(String, Vec<String>)]) -> Result<Option<f64>> {
    if items.is_empty() {
        return Ok(None);
    }
    let mut s = 0.0;
    for (h, r) in items {
        s += bleu2(h, r)?;
    }
    Ok(Some(s / items.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationOutcome {
    pub p_value: f64,
    /// Mean of a − b.
    pub observed: f64,
    /// True when every sign pattern was enumerated.
    pub exact: bool,
    /// Sign patterns evaluated.
    pub evaluated: u64,
}

/// Paired sign-flip permutation test of mean(a − b) > 0.
///
/// When `2^n ≤ permutations` every sign pattern is enumerated and
/// p = #{stat ≥ observed} / 2^n. Otherwise `permutations` random patterns are
/// drawn, pattern `t` from its own ChaCha8 stream of `seed`, and
/// p = (1 + #{stat ≥ observed}) / (permutations + 1).
pub fn permutation_test_detailed(a: &[f64], b: &[f64], permutations: usize, seed: u64) -> Result<PermutationOutcome> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "permutation test needs equal non-empty samples (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    if permutations == 0 {
        return Err(Error::InvalidArgument("permutations must be at least 1".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let observed_sum: f64 = d.iter().sum();
    let scale: f64 = d.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
    let tol = 1e-12 * scale;
    let at_least = |s: f64| s >= observed_sum - tol;
    let observed = observed_sum / n as f64;
    if n <= MAX_EXACT_PAIRS && (1u64 << n) <= permutations as u64 {
        let total = 1u64 << n;
        let mut count = 0u64;
        for mask in 0..total {
            let s: f64 = d
                .iter()
                .enumerate()
                .map(|(i, x)| if mask >> i & 1 == 1 { -x } else { *x })
                .sum();
            if at_least(s) {
                count += 1;
            }
        }
        return Ok(PermutationOutcome {
            p_value: count as f64 / total as f64,
            observed,
            exact: true,
            evaluated: total,
        });
    }
    let mut count = 0u64;
    for t in 0..permutations {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let mut bits = 0u64;
        let mut s = 0.0;
        for (i, x) in d.iter().enumerate() {
            if i % 64 == 0 {
                bits = rng.next_u64();
            }
            s += if bits >> (i % 64) & 1 == 1 { -x } else { *x };
        }
        if at_least(s) {
            count += 1;
        }
    }
    Ok(PermutationOutcome {
        p_value: (1 + count) as f64 / (permutations as f64 + 1.0),
        observed,
        exact: false,
        evaluated: permutations as u64,
    })
}

pub fn permutation_test(a: &[f64], b: &[f64], permutations: usize, seed: u64) -> Result<f64> {
    Ok(permutation_test_detailed(a, b, permutations, seed)?.p_value)
}

/// flag_i = p_i < alpha / m.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} is outside (0, 1)")));
    }
    let cut = alpha / p_values.len().max(1) as f64;
    Ok(p_values.iter().map(|p| *p < cut).collect())
}

/// "**" below 0.01, "*" below 0.05.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub permutations: usize,
    pub seed: u64,
    pub alpha: f64,
    /// k of the all-set P@k; defaults to the largest beam seen.
    pub k: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
            alpha: DEFAULT_ALPHA,
            k: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetStats {
    /// 100 × correct / total, pooled over prompts.
    pub precision: Option<f64>,
    pub correct: usize,
    pub total: usize,
    /// Mean sentence BLEU-2 of the set's members against reference tails.
    pub bleu2: Option<f64>,
}

impl SetStats {
    fn new(correct: usize, total: usize) -> Self {
        SetStats {
            precision: precision(correct, total),
            correct,
            total,
            bleu2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptStats {
    pub head: String,
    pub relation: RelationType,
    pub all: SetStats,
    pub valid: SetStats,
    pub invalid: SetStats,
    pub pruned_all_at_num_valid: Option<f64>,
    pub valid_at_num_valid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceTest {
    pub name: String,
    pub pairs: usize,
    pub observed_mean_difference: Option<f64>,
    pub p_value: Option<f64>,
    pub exact: bool,
    pub stars: String,
    pub bonferroni_significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub prompts: usize,
    pub all: SetStats,
    pub valid: SetStats,
    pub invalid: SetStats,
    pub k: usize,
    /// Mean P@k of the all set over prompts with at least k candidates.
    pub p_at_k: Option<f64>,
    pub prompts_below_k: usize,
    /// Mean P@{#valid} of the perplexity-pruned all set.
    pub pruned_all_at_num_valid: Option<f64>,
    pub valid_at_num_valid: Option<f64>,
    /// 100 × (valid − all) / all on the P@{#valid} means.
    pub improvement_pct: Option<f64>,
    pub prompts_with_valid: usize,
    pub prompts_without_valid: usize,
    /// BLEU-2 of the all set.
    pub bleu2: Option<f64>,
    pub tests: Vec<SignificanceTest>,
    pub permutations: usize,
    pub alpha: f64,
    pub per_prompt: Vec<PromptStats>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Aggregates partitions into a report. `references`, when given, supplies
/// reference tails for BLEU-2 (candidates of prompts without references are
/// skipped).
pub fn evaluate_run(
    partitions: &[PartitionResult],
    labels: &LabelSource,
    config: &EvalConfig,
    references: Option<&KnowledgeGraph>,
) -> Result<MetricReport> {
    if partitions.is_empty() {
        return Err(Error::InvalidArgument("no partitions to evaluate".into()));
    }
    let k = config
        .k
        .unwrap_or_else(|| partitions.iter().map(|p| p.all.len()).max().unwrap_or(0));
    let mut per_prompt = Vec::with_capacity(partitions.len());
    let (mut all_c, mut all_t, mut val_c, mut val_t, mut inv_c, mut inv_t) = (0, 0, 0, 0, 0, 0);
    let mut pk = Vec::new();
    let mut below_k = 0;
    let (mut pruned, mut valid_nv) = (Vec::new(), Vec::new());
    let (mut vi_valid, mut vi_invalid) = (Vec::new(), Vec::new());
    let mut bleu_items: [Vec<(String, Vec<String>)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for p in partitions {
        let l = partition_labels(p, labels)?;
        let count = |idx: &[usize]| idx.iter().filter(|&&i| l[i]).count();
        let ac = l.iter().filter(|x| **x).count();
        let vc = count(&p.valid);
        let ic = count(&p.invalid);
        all_c += ac;
        all_t += l.len();
        val_c += vc;
        val_t += p.valid.len();
        inv_c += ic;
        inv_t += p.invalid.len();
        if k > 0 && l.len() >= k {
            pk.push(p_at_k(&l, k)?);
        } else {
            below_k += 1;
        }
        let nv = num_valid_from_labels(p, &l);
        if let Some((a, v)) = nv {
            pruned.push(a);
            valid_nv.push(v);
        }
        let vs = SetStats::new(vc, p.valid.len());
        let is = SetStats::new(ic, p.invalid.len());
        if let (Some(v), Some(i)) = (vs.precision, is.precision) {
            vi_valid.push(v);
            vi_invalid.push(i);
        }
        if let Some(g) = references {
            if let Some(refs) = g.tails(&p.event.text, p.relation) {
                let refs: Vec<String> = refs.values().cloned().collect();
                for (i, c) in p.all.iter().enumerate() {
                    bleu_items[0].push((c.tail.clone(), refs.clone()));
                    let side = if p.valid.contains(&i) { 1 } else { 2 };
                    bleu_items[side].push((c.tail.clone(), refs.clone()));
                }
            }
        }
        per_prompt.push(PromptStats {
            head: p.event.text.clone(),
            relation: p.relation,
            all: SetStats::new(ac, l.len()),
            valid: vs,
            invalid: is,
            pruned_all_at_num_valid: nv.map(|x| x.0),
            valid_at_num_valid: nv.map(|x| x.1),
        });
    }

    let mut tests = Vec::new();
    for (name, a, b) in [
        ("valid_vs_all_at_num_valid", &valid_nv, &pruned),
        ("valid_vs_invalid", &vi_valid, &vi_invalid),
    ] {
        let outcome = if a.is_empty() {
            None
        } else {
            Some(permutation_test_detailed(a, b, config.permutations, config.seed)?)
        };
        tests.push(SignificanceTest {
            name: name.to_string(),
            pairs: a.len(),
            observed_mean_difference: outcome.map(|o| o.observed),
            p_value: outcome.map(|o| o.p_value),
            exact: outcome.map(|o| o.exact).unwrap_or(false),
            stars: outcome.map(|o| stars(o.p_value)).unwrap_or("").to_string(),
            bonferroni_significant: false,
        });
    }
    let ps: Vec<f64> = tests.iter().filter_map(|t| t.p_value).collect();
    let flags = bonferroni(&ps, config.alpha)?;
    let mut flags = flags.into_iter();
    for t in tests.iter_mut().filter(|t| t.p_value.is_some()) {
        t.bonferroni_significant = flags.next().unwrap_or(false);
    }

    let pruned_mean = mean(&pruned);
    let valid_mean = mean(&valid_nv);
    let improvement_pct = match (pruned_mean, valid_mean) {
        (Some(a), Some(v)) if a > 0.0 => Some(100.0 * (v - a) / a),
        _ => None,
    };
    let mut sets = [
        SetStats::new(all_c, all_t),
        SetStats::new(val_c, val_t),
        SetStats::new(inv_c, inv_t),
    ];
    for (set, items) in sets.iter_mut().zip(&bleu_items) {
        set.bleu2 = corpus_bleu2(items)?;
    }
    let [all, valid, invalid] = sets;
    Ok(MetricReport {
        prompts: partitions.len(),
        all,
        valid,
        invalid,
        k,
        p_at_k: mean(&pk),
        prompts_below_k: below_k,
        pruned_all_at_num_valid: pruned_mean,
        valid_at_num_valid: valid_mean,
        improvement_pct,
        prompts_with_valid: valid_nv.len(),
        prompts_without_valid: partitions.len() - valid_nv.len(),
        bleu2: all.bleu2,
        tests,
        permutations: config.permutations,
        alpha: config.alpha,
        per_prompt,
    })
}
