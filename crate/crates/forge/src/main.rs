use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anion_forge::config::{ConfigFile, PipelineConfig};
use anion_forge::error::{ForgeError, Result};
use anion_forge::io::{self, Format};
use anion_forge::pipeline;
use anion_forge_core::synthetic::{PlantedConfig, PlantedKg};
use anion_forge_core::Split;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "anion-forge", version, about = "Negated-event knowledge construction and filtering")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Parameters shared by every subcommand. Flags override the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// JSON config file; relative paths inside resolve against its directory
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beam: Option<usize>,
    /// Discriminator probability at or above which a candidate is valid
    #[arg(long, value_parser = parse_threshold)]
    threshold: Option<f64>,
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Write "doesn't" style contractions in logical negations
    #[arg(long)]
    contractions: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Add-lambda smoothing of the reference generator
    #[arg(long)]
    smoothing: Option<f64>,
    /// Cap on negations kept per cue (seeded sample)
    #[arg(long)]
    sample_per_cue: Option<usize>,
    /// Split whose heads are used as generation prompts
    #[arg(long)]
    eval_split: Option<Split>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Shell command scoring sentences (one per line in, one probability per line out)
    #[arg(long)]
    external_scorer: Option<String>,
    /// Shell command generating candidates (JSON lines in and out)
    #[arg(long)]
    external_generator: Option<String>,
}

fn parse_threshold(s: &str) -> std::result::Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(format!("{t} is outside [0, 1]"))
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Negate every affirmative head with every cue
    Negate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kg: Option<PathBuf>,
        /// Cue lexicon TSV (cue, category, insertion_rule); defaults to the shipped one
        #[arg(long)]
        cues: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the balanced discriminator dataset from paired events
    Contrast {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kg: Option<PathBuf>,
        #[arg(long)]
        anion: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the reference discriminator
    DiscTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score `{"sentence": ...}` JSON lines
    DiscApply {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Beam-decode inferences for every evaluation head
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kg: Option<PathBuf>,
        #[arg(long)]
        anion: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split candidates into valid and invalid sets
    Partition {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Precision, BLEU-2 and significance tests over partitions
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        partitions: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Reference tails for BLEU-2
        #[arg(long)]
        kg: Option<PathBuf>,
        #[arg(long)]
        anion: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Accept partitions stamped by a different config
        #[arg(long)]
        force: bool,
    },
    /// Run every stage into one output directory
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kg: Option<PathBuf>,
        #[arg(long)]
        anion: Option<PathBuf>,
        #[arg(long)]
        cues: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a planted-structure graph pair, or oracle labels for candidates
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Number of affirmative/negated head pairs
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        /// Label these candidates with the planted oracle instead
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
}

#[derive(Default)]
struct Paths {
    kg: Option<PathBuf>,
    anion: Option<PathBuf>,
    cues: Option<PathBuf>,
    labels: Option<PathBuf>,
    out: Option<PathBuf>,
}

fn resolve(common: Common, paths: Paths) -> Result<PipelineConfig> {
    let file = match &common.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let flags = ConfigFile {
        kg: paths.kg,
        anion: paths.anion,
        cues: paths.cues,
        labels: paths.labels,
        out: paths.out,
        seed: common.seed,
        beam: common.beam,
        threshold: common.threshold,
        permutations: common.permutations,
        alpha: common.alpha,
        contractions: common.contractions.then_some(true),
        epochs: common.epochs,
        learning_rate: common.learning_rate,
        smoothing: common.smoothing,
        sample_per_cue: common.sample_per_cue,
        eval_split: common.eval_split,
        format: common.format,
        external_scorer: common.external_scorer,
        external_generator: common.external_generator,
    };
    PipelineConfig::resolve(file.overlay(flags))
}

fn planted(cfg: &PipelineConfig, pairs: usize) -> Result<PlantedKg> {
    let d = PlantedConfig::default();
    let pc = PlantedConfig {
        pairs,
        seed: cfg.params.seed.unwrap_or(d.seed),
        ..d
    };
    if pc.pairs < 2 {
        return Err(ForgeError::Usage("--pairs must be at least 2".into()));
    }
    Ok(PlantedKg::generate(&pc)?)
}

fn synth(cfg: &PipelineConfig, out: &Path, pairs: usize, candidates: Option<&Path>) -> Result<()> {
    let kg = planted(cfg, pairs)?;
    if let Some(c) = candidates {
        let records = pipeline::read_candidates(c)?;
        let rows: Vec<_> = records
            .iter()
            .flat_map(|r| {
                r.candidates
                    .iter()
                    .map(|c| (r.head.as_str(), r.relation, c.tail.as_str(), kg.oracle(&r.head, r.relation, &c.tail)))
            })
            .collect();
        let path = out.join("labels.tsv");
        io::write_labels(&path, rows)?;
        log::info!("synth: wrote {}", path.display());
        return Ok(());
    }
    io::write_kg(&out.join("kg.jsonl"), kg.affirmative.tuples(), Format::Jsonl)?;
    io::write_kg(&out.join("anion.jsonl"), kg.opposed.tuples(), Format::Jsonl)?;
    let config = ConfigFile {
        kg: Some("kg.jsonl".into()),
        anion: Some("anion.jsonl".into()),
        out: Some("run".into()),
        seed: Some(cfg.params.seed.unwrap_or(PlantedConfig::default().seed)),
        ..ConfigFile::default()
    };
    io::write_json(&out.join("config.json"), &config)?;
    log::info!("synth: wrote {} pairs to {}", pairs, out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Negate { common, kg, cues, out } => {
            let cfg = resolve(common, Paths { kg, cues, ..Paths::default() })?;
            let graph = pipeline::load_graph(cfg.require(&cfg.kg, "kg")?)?;
            pipeline::negate(&cfg, &graph, cfg.cues.as_deref(), &out)?;
        }
        Cmd::Contrast { common, kg, anion, out } => {
            let cfg = resolve(common, Paths { kg, anion, ..Paths::default() })?;
            let a = pipeline::load_graph(cfg.require(&cfg.kg, "kg")?)?;
            let b = pipeline::load_graph(cfg.require(&cfg.anion, "anion")?)?;
            pipeline::contrast(&cfg, &a, &b, &out)?;
        }
        Cmd::DiscTrain { common, dataset, out } => {
            let cfg = resolve(common, Paths::default())?;
            let data = pipeline::read_dataset(&dataset)?;
            pipeline::disc_train(&cfg, &data, &out)?;
        }
        Cmd::DiscApply { common, model, input, out } => {
            let cfg = resolve(common, Paths::default())?;
            let scorer = pipeline::scorer(&cfg, model.as_deref())?;
            pipeline::disc_apply(&cfg, scorer.as_ref(), &input, &out)?;
        }
        Cmd::Generate { common, kg, anion, out } => {
            let cfg = resolve(common, Paths { kg, anion, ..Paths::default() })?;
            let a = pipeline::load_graph(cfg.require(&cfg.kg, "kg")?)?;
            let b = cfg.anion.as_deref().map(pipeline::load_graph).transpose()?;
            pipeline::generate(&cfg, &a, b.as_ref(), &out)?;
        }
        Cmd::Partition { common, candidates, model, out } => {
            let cfg = resolve(common, Paths::default())?;
            let scorer = pipeline::scorer(&cfg, model.as_deref())?;
            let records = pipeline::read_candidates(&candidates)?;
            pipeline::partition(&cfg, scorer.as_ref(), &records, &out)?;
        }
        Cmd::Eval { common, partitions, labels, kg, anion, out, force } => {
            let cfg = resolve(common, Paths { kg, anion, labels, ..Paths::default() })?;
            let parts = pipeline::read_partitions(&partitions, &cfg.hash(), force)?;
            let labels = io::read_labels(cfg.require(&cfg.labels, "labels")?, Default::default())?;
            let refs = match (&cfg.kg, &cfg.anion) {
                (None, None) => None,
                (a, b) => {
                    let a = a.as_deref().map(pipeline::load_graph).transpose()?;
                    let b = b.as_deref().map(pipeline::load_graph).transpose()?;
                    match (a, b) {
                        (Some(a), b) => Some(pipeline::union(&a, b.as_ref())?),
                        (None, b) => b,
                    }
                }
            };
            let report = pipeline::eval(&cfg, &parts, &labels, refs.as_ref(), &out)?;
            print!("{}", pipeline::render_table(&report));
        }
        Cmd::Pipeline { common, kg, anion, cues, labels, out } => {
            let cfg = resolve(common, Paths { kg, anion, cues, labels, out })?;
            let (_, report) = pipeline::run(&cfg)?;
            if let Some(r) = report {
                print!("{}", pipeline::render_table(&r));
            }
        }
        Cmd::Synth { common, out, pairs, candidates } => {
            let cfg = resolve(common, Paths::default())?;
            synth(&cfg, &out, pairs, candidates.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ANION_FORGE_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
