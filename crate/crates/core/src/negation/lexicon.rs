//! Negation cues, their insertion rules, the affix whitelist and the
//! complement frames of verb-replacing cues.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_CUES: &str = include_str!("../../resources/cues.tsv");
const AFFIXES: &str = include_str!("../../resources/affixes.tsv");
const FRAMES: &str = include_str!("../../resources/frames.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueCategory {
    Affix,
    SingleWord,
    MultiWord,
    NegativeVerb,
}

impl CueCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            CueCategory::Affix => "affix",
            CueCategory::SingleWord => "single_word",
            CueCategory::MultiWord => "multi_word",
            CueCategory::NegativeVerb => "negative_verb",
        }
    }
}

impl FromStr for CueCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "affix" => CueCategory::Affix,
            "single_word" => CueCategory::SingleWord,
            "multi_word" => CueCategory::MultiWord,
            "negative_verb" => CueCategory::NegativeVerb,
            _ => return Err(Error::InvalidArgument(format!("unknown cue category `{s}`"))),
        })
    }
}

impl fmt::Display for CueCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionRule {
    /// Directly after the subject, or after the auxiliary when the event has one.
    AfterSubject,
    /// Directly before the lexical main verb, or after the auxiliary.
    BeforeMainVerb,
    /// The cue becomes the finite verb; the old verb becomes its complement.
    ReplaceVerbWithGerundComplement,
    /// Swap a whitelisted word for its negated form.
    PrefixOrSuffixOnContentWord,
}

impl InsertionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            InsertionRule::AfterSubject => "after_subject",
            InsertionRule::BeforeMainVerb => "before_main_verb",
            InsertionRule::ReplaceVerbWithGerundComplement => "replace_verb_with_gerund_complement",
            InsertionRule::PrefixOrSuffixOnContentWord => "prefix_or_suffix_on_content_word",
        }
    }

    /// Whether a category may be combined with this rule.
    pub fn admits(self, category: CueCategory) -> bool {
        use CueCategory::*;
        match self {
            InsertionRule::AfterSubject | InsertionRule::BeforeMainVerb => {
                matches!(category, SingleWord | MultiWord)
            }
            InsertionRule::ReplaceVerbWithGerundComplement => matches!(category, NegativeVerb | MultiWord),
            InsertionRule::PrefixOrSuffixOnContentWord => matches!(category, Affix | SingleWord),
        }
    }
}

impl FromStr for InsertionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "after_subject" => InsertionRule::AfterSubject,
            "before_main_verb" => InsertionRule::BeforeMainVerb,
            "replace_verb_with_gerund_complement" => InsertionRule::ReplaceVerbWithGerundComplement,
            "prefix_or_suffix_on_content_word" => InsertionRule::PrefixOrSuffixOnContentWord,
            _ => return Err(Error::InvalidArgument(format!("unknown insertion rule `{s}`"))),
        })
    }
}

impl fmt::Display for InsertionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CueLexiconEntry {
    pub cue: String,
    pub category: CueCategory,
    pub insertion_rule: InsertionRule,
}

impl CueLexiconEntry {
    pub fn new(cue: &str, category: CueCategory, insertion_rule: InsertionRule) -> Result<Self> {
        let cue = cue.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        if cue.is_empty() {
            return Err(Error::EmptyText { field: "cue" });
        }
        if !insertion_rule.admits(category) {
            return Err(Error::InvalidArgument(format!(
                "cue `{cue}`: category {category} cannot use rule {insertion_rule}"
            )));
        }
        Ok(CueLexiconEntry {
            cue,
            category,
            insertion_rule,
        })
    }

    pub fn tokens(&self) -> Vec<&str> {
        self.cue.split(' ').collect()
    }

    /// The plain "not" cue of logical negation.
    pub fn is_logical(&self) -> bool {
        self.cue == "not"
    }
}

/// An ordered, duplicate-free list of cues.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CueLexicon {
    entries: Vec<CueLexiconEntry>,
}

impl CueLexicon {
    pub fn shipped() -> Self {
        Self::parse_tsv(DEFAULT_CUES).expect("bundled cue lexicon is well formed")
    }

    /// Parses `cue<TAB>category<TAB>insertion_rule` rows. A header row whose
    /// first column is `cue` is skipped, as are blank lines and `#` comments.
    pub fn parse_tsv(src: &str) -> Result<Self> {
        let mut lex = CueLexicon::default();
        for (lineno, line) in src.lines().enumerate() {
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.first().map(|c| c.trim()) == Some("cue") {
                continue;
            }
            if cols.len() != 3 {
                return Err(Error::InvalidArgument(format!(
                    "cue lexicon line {}: expected 3 columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let entry = CueLexiconEntry::new(cols[0], cols[1].trim().parse()?, cols[2].trim().parse()?)
                .map_err(|e| Error::InvalidArgument(format!("cue lexicon line {}: {e}", lineno + 1)))?;
            lex.push(entry);
        }
        Ok(lex)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("cue\tcategory\tinsertion_rule\n");
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.cue, e.category, e.insertion_rule));
        }
        out
    }

    pub fn push(&mut self, entry: CueLexiconEntry) {
        if !self.entries.iter().any(|e| e.cue == entry.cue) {
            self.entries.push(entry);
        }
    }

    pub fn extend(&mut self, other: &CueLexicon) {
        for e in &other.entries {
            self.push(e.clone());
        }
    }

    pub fn entries(&self) -> &[CueLexiconEntry] {
        &self.entries
    }

    pub fn get(&self, cue: &str) -> Option<&CueLexiconEntry> {
        self.entries.iter().find(|e| e.cue == cue)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffixKind {
    Adjective,
    Verb,
    Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffixEntry {
    pub word: String,
    pub negated: String,
    pub cue: String,
    pub kind: AffixKind,
}

pub fn shipped_affixes() -> Vec<AffixEntry> {
    AFFIXES
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            let kind = match *c.get(3)? {
                "adj" => AffixKind::Adjective,
                "verb" => AffixKind::Verb,
                _ => AffixKind::Word,
            };
            Some(AffixEntry {
                word: c[0].to_string(),
                negated: c[1].to_string(),
                cue: c[2].to_string(),
                kind,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Complement {
    Gerund,
    Infinitive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplementFrame {
    pub complement: Complement,
    /// Main verbs the cue substitutes directly instead of taking them as a complement.
    pub replaces: Vec<String>,
}

pub fn shipped_frames() -> BTreeMap<String, ComplementFrame> {
    FRAMES
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            let complement = match *c.get(1)? {
                "gerund" => Complement::Gerund,
                "infinitive" => Complement::Infinitive,
                _ => return None,
            };
            let replaces = c
                .get(2)
                .map(|r| {
                    r.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(ToString::to_string)
                        .collect()
                })
                .unwrap_or_default();
            Some((c[0].to_string(), ComplementFrame { complement, replaces }))
        })
        .collect()
}
