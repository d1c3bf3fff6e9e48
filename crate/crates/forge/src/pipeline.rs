//! Stages shared by the subcommands and the end-to-end `pipeline` run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anion_forge_core::contrast::{build_discriminator_dataset, pair_all_relations, DatasetReport, PairingReport};
use anion_forge_core::discriminator::{
    partition_scored, train_on_sentences, DiscriminatorModel, ModelFile, PartitionResult, ReferenceLinearModel,
    TrainConfig, TrainReport,
};
use anion_forge_core::eval::{evaluate_run, EvalConfig, LabelSource, MetricReport};
use anion_forge_core::generator::{Candidate, GeneratorModel, Interpolation, ReferenceNGramModel};
use anion_forge_core::kg::render_parts;
use anion_forge_core::negation::{batch_negate, BatchOptions, CueCount, CueLexicon, NegationEngine, RejectionKind};
use anion_forge_core::text::NormalizeOptions;
use anion_forge_core::{Event, KnowledgeGraph, RelationType, Split};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{ForgeError, Result};
use crate::external::{ExternalGenerator, ExternalScorer};
use crate::io::{self, CandidateRecord, DatasetRecord, Format, Stamped};

/// `dir/stem.suffix` next to `path`, e.g. `neg.jsonl` → `neg.report.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let (g, report) = io::load_kg(path, Format::from_path(path), NormalizeOptions::default())?;
    log::info!(
        "{}: {} rows, {} tuples, {} duplicates",
        path.display(),
        report.rows,
        g.len(),
        report.duplicates
    );
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegateReport {
    pub produced: usize,
    pub rejected: usize,
    pub duplicates: usize,
    pub per_cue: BTreeMap<String, CueCount>,
    pub histogram: BTreeMap<RejectionKind, usize>,
}

/// Writes negated events to `out`, rejections to `<stem>.rejections.jsonl`
/// and counts to `<stem>.report.json`.
pub fn negate(cfg: &PipelineConfig, kg: &KnowledgeGraph, cues: Option<&Path>, out: &Path) -> Result<NegateReport> {
    let seed = cfg.seed("negate")?;
    let hash = cfg.hash();
    let lexicon = match cues {
        Some(p) => {
            let src = std::fs::read_to_string(p).map_err(|e| ForgeError::io(p, e))?;
            CueLexicon::parse_tsv(&src).map_err(|e| ForgeError::Parse {
                path: p.to_path_buf(),
                line: 0,
                message: e.to_string(),
            })?
        }
        None => CueLexicon::shipped(),
    };
    let engine = NegationEngine::new(lexicon.clone()).with_contractions(cfg.params.contractions);
    let options = BatchOptions {
        sample_per_cue: cfg.params.sample_per_cue,
    };
    let output = batch_negate(&engine, kg, lexicon.entries(), seed, options);
    io::write_negations(out, &output.results, cfg.params.format, &hash)?;
    let r = output.report;
    io::write_jsonl(
        &sibling(out, "rejections.jsonl"),
        r.rejections.iter().map(|x| Stamped::new(&hash, x)),
    )?;
    let report = NegateReport {
        produced: output.results.len(),
        rejected: r.rejections.len(),
        duplicates: r.duplicates,
        per_cue: r.per_cue,
        histogram: r.histogram,
    };
    io::write_json(&sibling(out, "report.json"), &Stamped::new(&hash, &report))?;
    log::info!("negate: {} produced, {} rejected", report.produced, report.rejected);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub pairs: usize,
    pub train_pairs: usize,
    pub pairing: PairingReport,
    pub dataset: DatasetReport,
    pub samples: usize,
}

/// Builds the discriminator dataset from train-split pairs of `kg` × `anion`.
pub fn contrast(
    cfg: &PipelineConfig,
    kg: &KnowledgeGraph,
    anion: &KnowledgeGraph,
    out: &Path,
) -> Result<(Vec<DatasetRecord>, ContrastReport)> {
    let seed = cfg.seed("contrast")?;
    let hash = cfg.hash();
    let (pairs, pairing) = pair_all_relations(kg, anion);
    let total = pairs.len();
    let train: Vec<_> = pairs.into_iter().filter(|p| p.affirmative.split == Split::Train).collect();
    let (samples, dataset) = build_discriminator_dataset(&train, seed);
    let records: Vec<DatasetRecord> = samples.iter().map(DatasetRecord::from).collect();
    io::write_jsonl(out, records.iter().map(|r| Stamped::new(&hash, r)))?;
    let report = ContrastReport {
        pairs: total,
        train_pairs: train.len(),
        pairing,
        dataset,
        samples: records.len(),
    };
    io::write_json(&sibling(out, "report.json"), &Stamped::new(&hash, &report))?;
    log::info!("contrast: {} train pairs, {} samples", report.train_pairs, report.samples);
    Ok((records, report))
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    Ok(io::read_jsonl::<Stamped<DatasetRecord>>(path)?
        .into_iter()
        .map(|s| s.inner)
        .collect())
}

pub fn disc_train(
    cfg: &PipelineConfig,
    data: &[DatasetRecord],
    out: &Path,
) -> Result<(ReferenceLinearModel, TrainReport)> {
    let seed = cfg.seed("disc-train")?;
    let hash = cfg.hash();
    let train = TrainConfig {
        epochs: cfg.params.epochs,
        learning_rate: cfg.params.learning_rate,
        seed,
        ..TrainConfig::default()
    };
    let pairs: Vec<(&str, u8)> = data.iter().map(|r| (r.sentence.as_str(), r.label)).collect();
    let (mut model, report) = train_on_sentences(&pairs, &train)?;
    model.threshold = cfg.params.threshold;
    io::write_json(out, &Stamped::new(&hash, model.to_file()))?;
    io::write_json(&sibling(out, "report.json"), &Stamped::new(&hash, &report))?;
    log::info!(
        "disc-train: {} samples, loss {:.4}, accuracy {:.4}",
        report.samples,
        report.final_loss,
        report.accuracy
    );
    Ok((model, report))
}

pub fn load_model(path: &Path) -> Result<ReferenceLinearModel> {
    let file: Stamped<ModelFile> = io::read_json(path)?;
    Ok(ReferenceLinearModel::from_file(&file.inner)?)
}

/// The reference model from `model`, or the external scorer when configured.
pub fn scorer(cfg: &PipelineConfig, model: Option<&Path>) -> Result<Box<dyn DiscriminatorModel>> {
    match (&cfg.params.external_scorer, model) {
        (Some(cmd), _) => Ok(Box::new(ExternalScorer { command: cmd.clone() })),
        (None, Some(p)) => Ok(Box::new(load_model(p)?)),
        (None, None) => Err(ForgeError::Usage("missing --model (or --external-scorer)".into())),
    }
}

#[derive(Deserialize)]
struct SentenceLine {
    sentence: String,
}

#[derive(Serialize)]
struct ScoredLine<'a> {
    sentence: &'a str,
    probability: f64,
    valid: bool,
    config_hash: &'a str,
}

const APPLY_CHUNK: usize = 4096;

/// Scores a JSONL stream of `{"sentence": ...}` records in fixed-size chunks.
pub fn disc_apply(cfg: &PipelineConfig, model: &dyn DiscriminatorModel, input: &Path, out: &Path) -> Result<usize> {
    let hash = cfg.hash();
    let reader = io::open(input)?;
    let mut w = io::create(out)?;
    let mut chunk: Vec<String> = Vec::with_capacity(APPLY_CHUNK);
    let mut total = 0;
    let flush = |chunk: &mut Vec<String>, w: &mut std::io::BufWriter<std::fs::File>| -> Result<()> {
        let probs = model.score_batch(chunk)?;
        for (s, p) in chunk.iter().zip(probs) {
            let line = ScoredLine {
                sentence: s,
                probability: p,
                valid: p >= cfg.params.threshold,
                config_hash: &hash,
            };
            serde_json::to_writer(&mut *w, &line).map_err(|e| ForgeError::Data(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| ForgeError::io(out, e))?;
        }
        chunk.clear();
        Ok(())
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ForgeError::io(input, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SentenceLine = serde_json::from_str(&line).map_err(|e| ForgeError::Parse {
            path: input.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        chunk.push(rec.sentence);
        total += 1;
        if chunk.len() == APPLY_CHUNK {
            flush(&mut chunk, &mut w)?;
        }
    }
    if !chunk.is_empty() {
        flush(&mut chunk, &mut w)?;
    }
    w.flush().map_err(|e| ForgeError::io(out, e))?;
    log::info!("disc-apply: scored {total} sentences");
    Ok(total)
}

/// Both graphs merged; `anion` events keep their metadata.
pub fn union(kg: &KnowledgeGraph, anion: Option<&KnowledgeGraph>) -> Result<KnowledgeGraph> {
    let tuples = kg.tuples().iter().chain(anion.map(|a| a.tuples()).unwrap_or(&[])).cloned();
    Ok(KnowledgeGraph::from_tuples(tuples, kg.options())?)
}

/// Heads of `split` crossed with the relations they carry, graph order.
pub fn prompts(graph: &KnowledgeGraph, split: Split) -> Vec<(Event, RelationType)> {
    graph
        .events()
        .iter()
        .filter(|e| e.split == split)
        .flat_map(|e| graph.relations_of(&e.text).into_iter().map(move |r| (e.clone(), r)))
        .collect()
}

/// Trains the reference generator on the train split of `kg` ∪ `anion` (or
/// uses the external generator) and decodes every evaluation prompt.
pub fn generate(
    cfg: &PipelineConfig,
    kg: &KnowledgeGraph,
    anion: Option<&KnowledgeGraph>,
    out: &Path,
) -> Result<Vec<CandidateRecord>> {
    let hash = cfg.hash();
    let all = union(kg, anion)?;
    let prompts = prompts(&all, cfg.params.eval_split);
    if prompts.is_empty() {
        return Err(ForgeError::Data(format!("no {} heads to generate for", cfg.params.eval_split)));
    }
    let beam = cfg.params.beam;
    let outputs: Vec<Vec<Candidate>> = match &cfg.params.external_generator {
        Some(cmd) => ExternalGenerator { command: cmd.clone() }.generate_all(&prompts, beam)?,
        None => {
            let train = KnowledgeGraph::from_tuples(
                all.tuples().iter().filter(|t| t.head.split == Split::Train).cloned(),
                all.options(),
            )?;
            let model = ReferenceNGramModel::train(&train, cfg.params.smoothing, Interpolation::default())?;
            log::info!("generate: vocabulary of {} tokens", model.vocab_size());
            prompts
                .iter()
                .map(|(e, r)| model.generate(e, *r, beam))
                .collect::<anion_forge_core::Result<_>>()?
        }
    };
    let records: Vec<CandidateRecord> = prompts
        .iter()
        .zip(outputs)
        .map(|((e, r), c)| CandidateRecord::new(e, *r, c))
        .collect();
    io::write_jsonl(out, records.iter().map(|r| Stamped::new(&hash, r)))?;
    log::info!("generate: {} prompts, beam {beam}", records.len());
    Ok(records)
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateRecord>> {
    Ok(io::read_jsonl::<Stamped<CandidateRecord>>(path)?
        .into_iter()
        .map(|s| s.inner)
        .collect())
}

/// Scores all candidate sentences in one batch and splits them at the
/// configured threshold.
pub fn partition(
    cfg: &PipelineConfig,
    model: &dyn DiscriminatorModel,
    candidates: &[CandidateRecord],
    out: &Path,
) -> Result<Vec<PartitionResult>> {
    let hash = cfg.hash();
    let sentences: Vec<String> = candidates
        .iter()
        .flat_map(|r| r.candidates.iter().map(move |c| render_parts(&r.head, r.relation, &c.tail)))
        .collect();
    let probs = model.score_batch(&sentences)?;
    if probs.len() != sentences.len() {
        return Err(ForgeError::Data(format!(
            "scorer returned {} probabilities for {} sentences",
            probs.len(),
            sentences.len()
        )));
    }
    let mut offset = 0;
    let mut results = Vec::with_capacity(candidates.len());
    for r in candidates {
        let n = r.candidates.len();
        let p = partition_scored(&r.event(), r.relation, &r.candidates, &probs[offset..offset + n], cfg.params.threshold)?;
        offset += n;
        results.push(p);
    }
    io::write_jsonl(out, results.iter().map(|r| Stamped::new(&hash, r)))?;
    let valid: usize = results.iter().map(|p| p.valid.len()).sum();
    log::info!("partition: {valid} of {} candidates valid", sentences.len());
    Ok(results)
}

/// Reads partitions, refusing records stamped by another config unless
/// `force` is set.
pub fn read_partitions(path: &Path, expected_hash: &str, force: bool) -> Result<Vec<PartitionResult>> {
    let records: Vec<Stamped<PartitionResult>> = io::read_jsonl(path)?;
    let mut out = Vec::with_capacity(records.len());
    for (i, r) in records.into_iter().enumerate() {
        let name = format!("{} record {}", path.display(), i + 1);
        crate::config::check_hash(&name, r.config_hash.as_deref(), expected_hash, force)?;
        out.push(r.inner);
    }
    Ok(out)
}

pub fn eval(
    cfg: &PipelineConfig,
    partitions: &[PartitionResult],
    labels: &LabelSource,
    references: Option<&KnowledgeGraph>,
    out: &Path,
) -> Result<MetricReport> {
    let config = EvalConfig {
        permutations: cfg.params.permutations,
        seed: cfg.seed("eval")?,
        alpha: cfg.params.alpha,
        k: None,
    };
    let report = evaluate_run(partitions, labels, &config, references)?;
    let hash = cfg.hash();
    io::write_json(out, &Stamped::new(&hash, &report))?;
    io::write_text(&sibling(out, "txt"), &render_table(&report))?;
    Ok(report)
}

fn fmt_opt(v: Option<f64>, width: usize) -> String {
    match v {
        Some(x) => format!("{x:>width$.2}"),
        None => format!("{:>width$}", "-"),
    }
}

/// Human-readable summary: per-set mean size, BLEU-2 (×100) and precision.
pub fn render_table(r: &MetricReport) -> String {
    let mut s = String::new();
    let n = r.prompts.max(1) as f64;
    let _ = writeln!(s, "prompts: {}  k: {}  permutations: {}", r.prompts, r.k, r.permutations);
    let _ = writeln!(s, "{:<8} {:>7} {:>7} {:>7}", "set", "#", "BL2", "P@k");
    for (name, set) in [("all", &r.all), ("valid", &r.valid), ("invalid", &r.invalid)] {
        let _ = writeln!(
            s,
            "{:<8} {:>7.2} {} {}",
            name,
            set.total as f64 / n,
            fmt_opt(set.bleu2.map(|b| b * 100.0), 7),
            fmt_opt(set.precision, 7)
        );
    }
    let _ = writeln!(
        s,
        "P@{{#valid}}: all {}  valid {}  improvement {}%  ({} prompts without valid candidates)",
        fmt_opt(r.pruned_all_at_num_valid, 0),
        fmt_opt(r.valid_at_num_valid, 0),
        fmt_opt(r.improvement_pct, 0),
        r.prompts_without_valid
    );
    for t in &r.tests {
        let _ = writeln!(
            s,
            "{}: p = {} {}{}",
            t.name,
            t.p_value.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into()),
            t.stars,
            if t.bonferroni_significant { " (Bonferroni significant)" } else { "" }
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub negate: NegateReport,
    pub contrast: ContrastReport,
    pub train: TrainReport,
    pub prompts: usize,
    pub evaluated: bool,
}

/// negate → contrast → disc-train → generate → partition → eval (when
/// labels are configured), all inside `cfg.out`.
pub fn run(cfg: &PipelineConfig) -> Result<(RunSummary, Option<MetricReport>)> {
    cfg.seed("pipeline")?;
    let out = cfg.require(&cfg.out, "out")?;
    let kg = load_graph(cfg.require(&cfg.kg, "kg")?)?;
    let anion = load_graph(cfg.require(&cfg.anion, "anion")?)?;
    let ext = match cfg.params.format {
        Format::Jsonl => "jsonl",
        Format::Tsv => "tsv",
    };
    let neg = negate(cfg, &kg, cfg.cues.as_deref(), &out.join(format!("negations.{ext}")))?;
    let (data, contrast_report) = contrast(cfg, &kg, &anion, &out.join("dataset.jsonl"))?;
    let (model, train) = disc_train(cfg, &data, &out.join("model.json"))?;
    let candidates = generate(cfg, &kg, Some(&anion), &out.join("candidates.jsonl"))?;
    let scorer: Box<dyn DiscriminatorModel> = match &cfg.params.external_scorer {
        Some(cmd) => Box::new(ExternalScorer { command: cmd.clone() }),
        None => Box::new(model),
    };
    let parts = partition(cfg, scorer.as_ref(), &candidates, &out.join("partitions.jsonl"))?;
    let report = match &cfg.labels {
        Some(p) => {
            let labels = io::read_labels(p, kg.options())?;
            let refs = union(&kg, Some(&anion))?;
            Some(eval(cfg, &parts, &labels, Some(&refs), &out.join("report.json"))?)
        }
        None => {
            log::info!("pipeline: no labels configured, skipping eval");
            None
        }
    };
    let summary = RunSummary {
        config_hash: cfg.hash(),
        negate: neg,
        contrast: contrast_report,
        train,
        prompts: candidates.len(),
        evaluated: report.is_some(),
    };
    io::write_json(&out.join("run.json"), &summary)?;
    Ok((summary, report))
}
