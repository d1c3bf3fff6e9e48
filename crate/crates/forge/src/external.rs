//! Subprocess models. A command runs under `sh -c`, reads requests from
//! stdin and answers on stdout, one line per request.
//!
//! Scorer: each input line is a sentence, each output line a probability.
//! Generator: each input line is `{"head", "relation", "beam"}`, each output
//! line `{"candidates": [{"tail", "logp", "ppl"?}]}`.

use std::io::Write;
use std::process::{Command, Stdio};
use std::thread;

use anion_forge_core::discriminator::DiscriminatorModel;
use anion_forge_core::generator::{perplexity_of, tail_tokens, Candidate, GeneratorModel};
use anion_forge_core::{Error as CoreError, Event, RelationType};
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

/// Feeds `input` to the command and returns its stdout lines. Fails on a
/// non-zero exit or when the line count differs from `expected`.
pub fn run_lines(command: &str, input: String, expected: usize) -> Result<Vec<String>> {
    let fail = |message: String| ForgeError::External {
        command: command.to_string(),
        message,
    };
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| fail(format!("spawn failed: {e}")))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    // written from a thread so a chatty child cannot deadlock on a full pipe
    let writer = thread::spawn(move || stdin.write_all(input.as_bytes()));
    let out = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
    match writer.join() {
        Ok(Ok(())) => {}
        Ok(Err(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
        Ok(Err(e)) => return Err(fail(format!("writing stdin: {e}"))),
        Err(_) => return Err(fail("stdin writer panicked".into())),
    }
    if !out.status.success() {
        return Err(fail(format!("exited with {}", out.status)));
    }
    let text = String::from_utf8(out.stdout).map_err(|_| fail("output is not UTF-8".into()))?;
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    if lines.len() != expected {
        return Err(fail(format!("expected {expected} output lines, got {}", lines.len())));
    }
    Ok(lines)
}

fn to_core(e: ForgeError) -> CoreError {
    CoreError::External(e.to_string())
}

#[derive(Debug, Clone)]
pub struct ExternalScorer {
    pub command: String,
}

impl ExternalScorer {
    pub fn scores(&self, sentences: &[String]) -> Result<Vec<f64>> {
        if sentences.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(s) = sentences.iter().find(|s| s.contains('\n') || s.contains('\r')) {
            return Err(ForgeError::Data(format!("sentence contains a line break: {s:?}")));
        }
        let mut input = sentences.join("\n");
        input.push('\n');
        let lines = run_lines(&self.command, input, sentences.len())?;
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| match l.trim().parse::<f64>() {
                Ok(p) if (0.0..=1.0).contains(&p) => Ok(p),
                _ => Err(ForgeError::External {
                    command: self.command.clone(),
                    message: format!("line {}: `{l}` is not a probability in [0, 1]", i + 1),
                }),
            })
            .collect()
    }
}

impl DiscriminatorModel for ExternalScorer {
    fn score_batch(&self, sentences: &[String]) -> anion_forge_core::Result<Vec<f64>> {
        self.scores(sentences).map_err(to_core)
    }

    fn descriptor(&self) -> String {
        format!("external scorer `{}`", self.command)
    }
}

#[derive(Serialize)]
struct GenRequest<'a> {
    head: &'a str,
    relation: RelationType,
    beam: usize,
}

#[derive(Deserialize)]
struct GenCandidate {
    tail: String,
    logp: f64,
    ppl: Option<f64>,
}

#[derive(Deserialize)]
struct GenResponse {
    candidates: Vec<GenCandidate>,
}

#[derive(Debug, Clone)]
pub struct ExternalGenerator {
    pub command: String,
}

impl ExternalGenerator {
    /// One subprocess call for all prompts. Missing perplexities are derived
    /// from `logp` over the tail tokens plus the end marker.
    pub fn generate_all(&self, prompts: &[(Event, RelationType)], beam: usize) -> Result<Vec<Vec<Candidate>>> {
        if prompts.is_empty() {
            return Ok(Vec::new());
        }
        let mut input = String::new();
        for (e, r) in prompts {
            let req = GenRequest {
                head: &e.text,
                relation: *r,
                beam,
            };
            input.push_str(&serde_json::to_string(&req).expect("request serializes"));
            input.push('\n');
        }
        let lines = run_lines(&self.command, input, prompts.len())?;
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let resp: GenResponse = serde_json::from_str(l).map_err(|e| ForgeError::External {
                    command: self.command.clone(),
                    message: format!("line {}: {e}", i + 1),
                })?;
                Ok(resp
                    .candidates
                    .into_iter()
                    .take(beam)
                    .map(|c| Candidate {
                        ppl: c.ppl.unwrap_or_else(|| perplexity_of(c.logp, tail_tokens(&c.tail).len() + 1)),
                        tail: c.tail,
                        logp: c.logp,
                    })
                    .collect())
            })
            .collect()
    }
}

impl GeneratorModel for ExternalGenerator {
    fn generate(&self, head: &Event, relation: RelationType, beam: usize) -> anion_forge_core::Result<Vec<Candidate>> {
        let mut v = self
            .generate_all(&[(head.clone(), relation)], beam)
            .map_err(to_core)?;
        Ok(v.pop().unwrap_or_default())
    }

    fn perplexity(&self, _head: &Event, _relation: RelationType, _tail: &str) -> anion_forge_core::Result<f64> {
        Err(CoreError::External(format!(
            "external generator `{}` does not score given tails",
            self.command
        )))
    }
}
