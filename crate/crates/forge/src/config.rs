//! Pipeline configuration: a JSON file overridable by flags, plus the hash
//! stamped into every artifact.

use std::path::{Path, PathBuf};

use anion_forge_core::discriminator::{check_threshold, DEFAULT_THRESHOLD};
use anion_forge_core::eval::{DEFAULT_ALPHA, DEFAULT_PERMUTATIONS};
use anion_forge_core::generator::{DEFAULT_BEAM, DEFAULT_SMOOTHING};
use anion_forge_core::Split;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ForgeError, Result};
use crate::io::{self, Format};

/// Config file contents. Every field is optional; relative paths resolve
/// against the directory holding the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kg: Option<PathBuf>,
    pub anion: Option<PathBuf>,
    pub cues: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub beam: Option<usize>,
    pub threshold: Option<f64>,
    pub permutations: Option<usize>,
    pub alpha: Option<f64>,
    pub contractions: Option<bool>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub smoothing: Option<f64>,
    pub sample_per_cue: Option<usize>,
    pub eval_split: Option<Split>,
    pub format: Option<Format>,
    pub external_scorer: Option<String>,
    pub external_generator: Option<String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ConfigFile = io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.kg, &mut cfg.anion, &mut cfg.cues, &mut cfg.labels, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fields set in `other` win.
    pub fn overlay(mut self, other: ConfigFile) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            kg, anion, cues, labels, out, seed, beam, threshold, permutations, alpha, contractions, epochs,
            learning_rate, smoothing, sample_per_cue, eval_split, format, external_scorer, external_generator
        );
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub kg: Option<PathBuf>,
    pub anion: Option<PathBuf>,
    pub cues: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub params: Params,
}

/// Everything except paths. The artifact hash covers these minus the
/// evaluation-only fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub seed: Option<u64>,
    pub beam: usize,
    pub threshold: f64,
    pub permutations: usize,
    pub alpha: f64,
    pub contractions: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    pub smoothing: f64,
    pub sample_per_cue: Option<usize>,
    pub eval_split: Split,
    pub format: Format,
    pub external_scorer: Option<String>,
    pub external_generator: Option<String>,
}

#[derive(Serialize)]
struct Hashed<'a> {
    seed: Option<u64>,
    beam: usize,
    threshold: f64,
    contractions: bool,
    epochs: usize,
    learning_rate: f64,
    smoothing: f64,
    sample_per_cue: Option<usize>,
    eval_split: Split,
    external_scorer: Option<&'a str>,
    external_generator: Option<&'a str>,
}

impl Default for Params {
    fn default() -> Self {
        let train = anion_forge_core::discriminator::TrainConfig::default();
        Params {
            seed: None,
            beam: DEFAULT_BEAM,
            threshold: DEFAULT_THRESHOLD,
            permutations: DEFAULT_PERMUTATIONS,
            alpha: DEFAULT_ALPHA,
            contractions: false,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            smoothing: DEFAULT_SMOOTHING,
            sample_per_cue: None,
            eval_split: Split::Test,
            format: Format::Jsonl,
            external_scorer: None,
            external_generator: None,
        }
    }
}

impl PipelineConfig {
    /// Applies defaults and validates ranges.
    pub fn resolve(file: ConfigFile) -> Result<Self> {
        let d = Params::default();
        let params = Params {
            seed: file.seed,
            beam: file.beam.unwrap_or(d.beam),
            threshold: file.threshold.unwrap_or(d.threshold),
            permutations: file.permutations.unwrap_or(d.permutations),
            alpha: file.alpha.unwrap_or(d.alpha),
            contractions: file.contractions.unwrap_or(d.contractions),
            epochs: file.epochs.unwrap_or(d.epochs),
            learning_rate: file.learning_rate.unwrap_or(d.learning_rate),
            smoothing: file.smoothing.unwrap_or(d.smoothing),
            sample_per_cue: file.sample_per_cue,
            eval_split: file.eval_split.unwrap_or(d.eval_split),
            format: file.format.unwrap_or(d.format),
            external_scorer: file.external_scorer,
            external_generator: file.external_generator,
        };
        check_threshold(params.threshold).map_err(|e| ForgeError::Usage(e.to_string()))?;
        if !(params.alpha > 0.0 && params.alpha < 1.0) {
            return Err(ForgeError::Usage(format!("alpha {} is outside (0, 1)", params.alpha)));
        }
        if params.beam == 0 {
            return Err(ForgeError::Usage("beam must be at least 1".into()));
        }
        if params.permutations == 0 {
            return Err(ForgeError::Usage("permutations must be at least 1".into()));
        }
        if params.epochs == 0 || !(params.learning_rate > 0.0) {
            return Err(ForgeError::Usage("epochs and learning rate must be positive".into()));
        }
        if !(params.smoothing > 0.0) {
            return Err(ForgeError::Usage("smoothing must be positive".into()));
        }
        Ok(PipelineConfig {
            kg: file.kg,
            anion: file.anion,
            cues: file.cues,
            labels: file.labels,
            out: file.out,
            params,
        })
    }

    pub fn seed(&self, step: &str) -> Result<u64> {
        self.params
            .seed
            .ok_or_else(|| ForgeError::Usage(format!("{step} needs --seed (or `seed` in the config file)")))
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| ForgeError::Usage(format!("missing --{flag} (or `{flag}` in the config file)")))
    }

    /// sha256 of the canonical JSON of the hashed parameters, hex encoded.
    pub fn hash(&self) -> String {
        let p = &self.params;
        let h = Hashed {
            seed: p.seed,
            beam: p.beam,
            threshold: p.threshold,
            contractions: p.contractions,
            epochs: p.epochs,
            learning_rate: p.learning_rate,
            smoothing: p.smoothing,
            sample_per_cue: p.sample_per_cue,
            eval_split: p.eval_split,
            external_scorer: p.external_scorer.as_deref(),
            external_generator: p.external_generator.as_deref(),
        };
        let json = serde_json::to_vec(&h).expect("plain struct serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Errors unless `found` equals `expected` or `force` is set.
pub fn check_hash(artifact: &str, found: Option<&str>, expected: &str, force: bool) -> Result<()> {
    match found {
        Some(f) if f == expected => Ok(()),
        _ if force => {
            log::warn!("{artifact}: config hash differs from the current config, continuing (--force)");
            Ok(())
        }
        found => Err(ForgeError::HashMismatch {
            artifact: artifact.to_string(),
            found: found.unwrap_or("<none>").to_string(),
            expected: expected.to_string(),
        }),
    }
}
