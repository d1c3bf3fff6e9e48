//! File formats: knowledge graphs (JSONL/TSV), negation output, datasets,
//! candidates, partitions, labels and stamped artifacts.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use anion_forge_core::contrast::{LabeledSample, Origin};
use anion_forge_core::discriminator::PartitionResult;
use anion_forge_core::eval::{LabelSource, Provenance};
use anion_forge_core::generator::Candidate;
use anion_forge_core::negation::{NegationResult, RewriteStep};
use anion_forge_core::text::NormalizeOptions;
use anion_forge_core::{Event, KnowledgeGraph, KnowledgeTuple, Polarity, RelationType, Split};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Tsv,
}

impl Format {
    /// `.tsv` files are TSV, everything else JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("tsv") => Format::Tsv,
            _ => Format::Jsonl,
        }
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| ForgeError::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| ForgeError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| ForgeError::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> ForgeError {
    ForgeError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-blank lines with their 1-based numbers.
fn lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>> + '_> {
    let reader = open(path)?;
    Ok(reader.lines().enumerate().filter_map(move |(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(ForgeError::io(path, e))),
    }))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for item in lines(path)? {
        let (n, line) = item?;
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(path, n, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| ForgeError::Data(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| ForgeError::io(path, e))?;
    }
    w.flush().map_err(|e| ForgeError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| ForgeError::Data(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| ForgeError::io(path, e))?;
    w.flush().map_err(|e| ForgeError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| ForgeError::io(path, e))?;
    w.flush().map_err(|e| ForgeError::io(path, e))
}

pub fn escape_tsv(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_tsv(field: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(o) => return Err(format!("unknown escape `\\{o}`")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

/// A wrapper adding the producing configuration's hash to a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_hash: Option<String>,
    #[serde(flatten)]
    pub inner: T,
}

impl<T> Stamped<T> {
    pub fn new(hash: &str, inner: T) -> Self {
        Stamped {
            config_hash: Some(hash.to_string()),
            inner,
        }
    }
}

/// One knowledge tuple as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgRecord {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub split: String,
    pub polarity: String,
    pub source_head: Option<String>,
    pub cue: Option<String>,
}

pub const KG_COLUMNS: [&str; 7] = ["head", "relation", "tail", "split", "polarity", "source_head", "cue"];

impl KgRecord {
    pub fn from_tuple(t: &KnowledgeTuple) -> Self {
        KgRecord {
            head: t.head.text.clone(),
            relation: t.relation.as_str().to_string(),
            tail: t.tail.clone(),
            split: t.head.split.as_str().to_string(),
            polarity: t.head.polarity.as_str().to_string(),
            source_head: t.head.source_head.clone(),
            cue: t.head.cue.clone(),
        }
    }

    pub fn to_tuple(&self) -> anion_forge_core::Result<KnowledgeTuple> {
        let head = Event {
            text: self.head.clone(),
            polarity: Polarity::from_str(&self.polarity)?,
            source_head: self.source_head.clone(),
            split: Split::from_str(&self.split)?,
            cue: self.cue.clone(),
        };
        KnowledgeTuple::new(head, RelationType::from_str(&self.relation)?, self.tail.clone())
    }

    fn from_tsv(fields: &[&str]) -> std::result::Result<Self, String> {
        if fields.len() != KG_COLUMNS.len() {
            return Err(format!("expected {} columns, found {}", KG_COLUMNS.len(), fields.len()));
        }
        let f: Vec<String> = fields.iter().map(|s| unescape_tsv(s)).collect::<std::result::Result<_, _>>()?;
        let opt = |s: &String| (!s.is_empty()).then(|| s.clone());
        Ok(KgRecord {
            head: f[0].clone(),
            relation: f[1].clone(),
            tail: f[2].clone(),
            split: f[3].clone(),
            polarity: f[4].clone(),
            source_head: opt(&f[5]),
            cue: opt(&f[6]),
        })
    }

    fn to_tsv(&self) -> String {
        let fields = [
            self.head.as_str(),
            &self.relation,
            &self.tail,
            &self.split,
            &self.polarity,
            self.source_head.as_deref().unwrap_or(""),
            self.cue.as_deref().unwrap_or(""),
        ];
        fields.iter().map(|f| escape_tsv(f)).collect::<Vec<_>>().join("\t")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows: usize,
    pub duplicates: usize,
}

/// Reads a knowledge graph. Malformed rows, unknown relations and
/// conflicting event metadata are errors carrying the line number.
pub fn load_kg(path: &Path, format: Format, options: NormalizeOptions) -> Result<(KnowledgeGraph, LoadReport)> {
    let mut graph = KnowledgeGraph::new(options);
    let mut report = LoadReport::default();
    let mut header_seen = false;
    for item in lines(path)? {
        let (n, line) = item?;
        let record = match format {
            Format::Jsonl => serde_json::from_str::<KgRecord>(&line).map_err(|e| parse_err(path, n, e.to_string()))?,
            Format::Tsv => {
                let fields: Vec<&str> = line.split('\t').collect();
                if !header_seen {
                    if fields != KG_COLUMNS {
                        return Err(parse_err(
                            path,
                            n,
                            format!("TSV header must be `{}`", KG_COLUMNS.join("\\t")),
                        ));
                    }
                    header_seen = true;
                    continue;
                }
                KgRecord::from_tsv(&fields).map_err(|m| parse_err(path, n, m))?
            }
        };
        let tuple = record.to_tuple().map_err(|e| parse_err(path, n, e.to_string()))?;
        report.rows += 1;
        if !graph.insert(tuple).map_err(|e| parse_err(path, n, e.to_string()))? {
            report.duplicates += 1;
        }
    }
    Ok((graph, report))
}

pub fn write_kg<'a>(path: &Path, tuples: impl IntoIterator<Item = &'a KnowledgeTuple>, format: Format) -> Result<()> {
    match format {
        Format::Jsonl => write_jsonl(path, tuples.into_iter().map(KgRecord::from_tuple)),
        Format::Tsv => {
            let mut text = KG_COLUMNS.join("\t");
            text.push('\n');
            for t in tuples {
                text.push_str(&KgRecord::from_tuple(t).to_tsv());
                text.push('\n');
            }
            write_text(path, &text)
        }
    }
}

/// A negated event as written by `negate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegationRecord {
    pub head: String,
    pub polarity: Polarity,
    pub source_head: Option<String>,
    pub split: Split,
    pub cue: Option<String>,
    pub rule_trace: Vec<RewriteStep>,
}

impl From<&NegationResult> for NegationRecord {
    fn from(r: &NegationResult) -> Self {
        NegationRecord {
            head: r.event.text.clone(),
            polarity: r.event.polarity,
            source_head: r.event.source_head.clone(),
            split: r.event.split,
            cue: r.event.cue.clone(),
            rule_trace: r.rule_trace.clone(),
        }
    }
}

pub const NEGATION_COLUMNS: [&str; 5] = ["head", "polarity", "source_head", "split", "cue"];

pub fn write_negations(path: &Path, results: &[NegationResult], format: Format, hash: &str) -> Result<()> {
    match format {
        Format::Jsonl => write_jsonl(path, results.iter().map(|r| Stamped::new(hash, NegationRecord::from(r)))),
        Format::Tsv => {
            let mut text = NEGATION_COLUMNS.join("\t");
            text.push('\n');
            for r in results {
                let e = &r.event;
                let row = [
                    e.text.as_str(),
                    e.polarity.as_str(),
                    e.source_head.as_deref().unwrap_or(""),
                    e.split.as_str(),
                    e.cue.as_deref().unwrap_or(""),
                ];
                text.push_str(&row.iter().map(|f| escape_tsv(f)).collect::<Vec<_>>().join("\t"));
                text.push('\n');
            }
            write_text(path, &text)
        }
    }
}

/// One discriminator training example. `head`, `relation` and `tail` are
/// optional on input; only `sentence` and `label` are needed for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub sentence: String,
    pub label: u8,
    #[serde(default)]
    pub origin: Option<Origin>,
    #[serde(default)]
    pub polarity: Option<Polarity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<RelationType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<String>,
}

impl From<&LabeledSample> for DatasetRecord {
    fn from(s: &LabeledSample) -> Self {
        DatasetRecord {
            sentence: s.sentence.clone(),
            label: s.label,
            origin: Some(s.origin),
            polarity: Some(s.polarity),
            head: Some(s.source_tuple.head.text.clone()),
            relation: Some(s.source_tuple.relation),
            tail: Some(s.source_tuple.tail.clone()),
        }
    }
}

/// Beam output for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub head: String,
    pub relation: RelationType,
    #[serde(default = "default_polarity")]
    pub polarity: Polarity,
    #[serde(default = "default_split")]
    pub split: Split,
    #[serde(default)]
    pub source_head: Option<String>,
    pub candidates: Vec<Candidate>,
}

fn default_polarity() -> Polarity {
    Polarity::Affirmative
}

fn default_split() -> Split {
    Split::Test
}

impl CandidateRecord {
    pub fn new(event: &Event, relation: RelationType, candidates: Vec<Candidate>) -> Self {
        CandidateRecord {
            head: event.text.clone(),
            relation,
            polarity: event.polarity,
            split: event.split,
            source_head: event.source_head.clone(),
            candidates,
        }
    }

    pub fn event(&self) -> Event {
        Event {
            text: self.head.clone(),
            polarity: self.polarity,
            source_head: self.source_head.clone(),
            split: self.split,
            cue: None,
        }
    }
}

pub type PartitionRecord = Stamped<PartitionResult>;

pub const LABEL_COLUMNS: [&str; 4] = ["head", "relation", "tail", "label"];

/// Reads `head<TAB>relation<TAB>tail<TAB>label` rows; a leading header row is
/// optional.
pub fn read_labels(path: &Path, options: NormalizeOptions) -> Result<LabelSource> {
    let mut src = LabelSource::new(Provenance::File, options);
    let mut first = true;
    for item in lines(path)? {
        let (n, line) = item?;
        let fields: Vec<&str> = line.split('\t').collect();
        if std::mem::take(&mut first) && fields == LABEL_COLUMNS {
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_err(path, n, format!("expected 4 columns, found {}", fields.len())));
        }
        let f: Vec<String> = fields
            .iter()
            .map(|s| unescape_tsv(s))
            .collect::<std::result::Result<_, _>>()
            .map_err(|m| parse_err(path, n, m))?;
        let relation = RelationType::from_str(&f[1]).map_err(|e| parse_err(path, n, e.to_string()))?;
        let label = match f[3].trim() {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(path, n, format!("label `{other}` is not 0 or 1"))),
        };
        src.insert(&f[0], relation, &f[2], label);
    }
    Ok(src)
}

pub fn write_labels<'a>(path: &Path, rows: impl IntoIterator<Item = (&'a str, RelationType, &'a str, bool)>) -> Result<()> {
    let mut text = LABEL_COLUMNS.join("\t");
    text.push('\n');
    for (h, r, t, l) in rows {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            escape_tsv(h),
            r.as_str(),
            escape_tsv(t),
            u8::from(l)
        ));
    }
    write_text(path, &text)
}
