//! Knowledge tuples, events and the indexed graph they form.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::NormalizeOptions;

/// The nine if-then inference dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationType {
    #[serde(rename = "xIntent")]
    XIntent,
    #[serde(rename = "xNeed")]
    XNeed,
    #[serde(rename = "xAttr")]
    XAttr,
    #[serde(rename = "xWant")]
    XWant,
    #[serde(rename = "oWant")]
    OWant,
    #[serde(rename = "xEffect")]
    XEffect,
    #[serde(rename = "oEffect")]
    OEffect,
    #[serde(rename = "xReact")]
    XReact,
    #[serde(rename = "oReact")]
    OReact,
}

impl RelationType {
    pub const ALL: [RelationType; 9] = [
        RelationType::XIntent,
        RelationType::XNeed,
        RelationType::XAttr,
        RelationType::XWant,
        RelationType::OWant,
        RelationType::XEffect,
        RelationType::OEffect,
        RelationType::XReact,
        RelationType::OReact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::XIntent => "xIntent",
            RelationType::XNeed => "xNeed",
            RelationType::XAttr => "xAttr",
            RelationType::XWant => "xWant",
            RelationType::OWant => "oWant",
            RelationType::XEffect => "xEffect",
            RelationType::OEffect => "oEffect",
            RelationType::XReact => "xReact",
            RelationType::OReact => "oReact",
        }
    }

    /// Connective placed between the head sentence and the tail.
    pub fn pattern(self) -> &'static str {
        match self {
            RelationType::XIntent => "Because PersonX wanted",
            RelationType::XNeed => "Before, PersonX needed",
            RelationType::XAttr => "PersonX is seen as",
            RelationType::XWant => "As a result, PersonX wants",
            RelationType::OWant => "As a result, others want",
            RelationType::XEffect => "As a result, PersonX then",
            RelationType::OEffect => "As a result, others then",
            RelationType::XReact => "As a result, PersonX feels",
            RelationType::OReact => "As a result, others feel",
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RelationType::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::UnknownRelation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Affirmative,
    Logical,
    SemiLogical,
    Contradiction,
}

impl Polarity {
    pub const ALL: [Polarity; 4] = [
        Polarity::Affirmative,
        Polarity::Logical,
        Polarity::SemiLogical,
        Polarity::Contradiction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Affirmative => "affirmative",
            Polarity::Logical => "logical",
            Polarity::SemiLogical => "semi_logical",
            Polarity::Contradiction => "contradiction",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Polarity::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPolarity(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(Error::UnknownSplit(s.to_string())),
        }
    }
}

/// A head event together with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub text: String,
    pub polarity: Polarity,
    /// The affirmative event this one was derived from.
    pub source_head: Option<String>,
    pub split: Split,
    /// Negation cue used to build the event, if any.
    pub cue: Option<String>,
}

impl Event {
    pub fn affirmative(text: impl Into<String>, split: Split) -> Result<Self> {
        let ev = Event {
            text: text.into(),
            polarity: Polarity::Affirmative,
            source_head: None,
            split,
            cue: None,
        };
        ev.validate()?;
        Ok(ev)
    }

    pub fn derived(
        text: impl Into<String>,
        polarity: Polarity,
        source_head: impl Into<String>,
        split: Split,
        cue: Option<String>,
    ) -> Result<Self> {
        let ev = Event {
            text: text.into(),
            polarity,
            source_head: Some(source_head.into()),
            split,
            cue,
        };
        ev.validate()?;
        Ok(ev)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::EmptyText { field: "head" });
        }
        if self.polarity != Polarity::Affirmative {
            match &self.source_head {
                Some(s) if !s.trim().is_empty() => {}
                _ => {
                    return Err(Error::MissingSourceHead {
                        head: self.text.clone(),
                        polarity: self.polarity.as_str(),
                    })
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeTuple {
    pub head: Event,
    pub relation: RelationType,
    pub tail: String,
}

impl KnowledgeTuple {
    pub fn new(head: Event, relation: RelationType, tail: impl Into<String>) -> Result<Self> {
        head.validate()?;
        let tail = tail.into();
        if tail.trim().is_empty() {
            return Err(Error::EmptyText { field: "tail" });
        }
        Ok(KnowledgeTuple {
            head,
            relation,
            tail,
        })
    }
}

fn strip_final_periods(s: &str) -> &str {
    s.trim().trim_end_matches('.').trim_end()
}

/// Renders `{h}. <pattern> {t}.` for a relation.
pub fn render_parts(head: &str, relation: RelationType, tail: &str) -> String {
    format!(
        "{}. {} {}.",
        strip_final_periods(head),
        relation.pattern(),
        strip_final_periods(tail)
    )
}

pub fn render_patterned_sentence(tuple: &KnowledgeTuple) -> String {
    render_parts(&tuple.head.text, tuple.relation, &tuple.tail)
}

/// Like [`render_parts`] but with the relation given by name.
pub fn render_named(head: &str, relation: &str, tail: &str) -> Result<String> {
    let relation: RelationType = relation.parse()?;
    Ok(render_parts(head, relation, tail))
}

/// Copies the split of the affirmative source event onto a derived event.
pub fn assign_split(derived: &Event, graph: &KnowledgeGraph) -> Result<Event> {
    let source = derived.source_head.as_deref().ok_or_else(|| Error::MissingSourceHead {
        head: derived.text.clone(),
        polarity: derived.polarity.as_str(),
    })?;
    let src = graph
        .event(source)
        .ok_or_else(|| Error::UnresolvedSourceHead(source.to_string()))?;
    let mut out = derived.clone();
    out.split = src.split;
    Ok(out)
}

/// A derived event whose split disagrees with its source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitViolation {
    pub head: String,
    pub source_head: String,
    pub split: Split,
    pub source_split: Split,
}

/// Tails known for one (head, relation), keyed by normalized form.
pub type TailSet = BTreeMap<String, String>;

/// Deduplicated, indexed set of knowledge tuples.
///
/// Tuples are kept in first-seen order. Index keys are normalized with the
/// graph's [`NormalizeOptions`]; values map normalized tail keys to the first
/// surface form seen. A built graph is immutable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeGraph {
    tuples: Vec<KnowledgeTuple>,
    events: Vec<Event>,
    event_index: BTreeMap<String, usize>,
    index: BTreeMap<(String, RelationType), TailSet>,
    options: NormalizeOptions,
    duplicates: usize,
}

impl KnowledgeGraph {
    pub fn new(options: NormalizeOptions) -> Self {
        KnowledgeGraph {
            options,
            ..Default::default()
        }
    }

    pub fn from_tuples(
        tuples: impl IntoIterator<Item = KnowledgeTuple>,
        options: NormalizeOptions,
    ) -> Result<Self> {
        let mut g = KnowledgeGraph::new(options);
        for t in tuples {
            g.insert(t)?;
        }
        Ok(g)
    }

    /// Adds an event without tails. Returns false if it was already known.
    pub fn insert_event(&mut self, event: Event) -> Result<bool> {
        event.validate()?;
        let event = self.surface_event(event);
        let key = self.options.key(&event.text);
        match self.event_index.get(&key) {
            Some(&i) => {
                if self.events[i] != event {
                    return Err(Error::ConflictingEvent { head: event.text });
                }
                Ok(false)
            }
            None => {
                self.event_index.insert(key, self.events.len());
                self.events.push(event);
                Ok(true)
            }
        }
    }

    /// Adds a tuple. Returns false when it duplicates an existing triple
    /// (the duplicate is counted and dropped).
    pub fn insert(&mut self, tuple: KnowledgeTuple) -> Result<bool> {
        let KnowledgeTuple {
            head,
            relation,
            tail,
        } = tuple;
        if tail.trim().is_empty() {
            return Err(Error::EmptyText { field: "tail" });
        }
        self.insert_event(head.clone())?;
        let head = self.surface_event(head);
        let tail = self.options.surface(&tail);
        let head_key = self.options.key(&head.text);
        let tail_key = self.options.key(&tail);
        let tails = self.index.entry((head_key, relation)).or_default();
        if tails.contains_key(&tail_key) {
            self.duplicates += 1;
            return Ok(false);
        }
        tails.insert(tail_key, tail.clone());
        self.tuples.push(KnowledgeTuple {
            head,
            relation,
            tail,
        });
        Ok(true)
    }

    fn surface_event(&self, mut event: Event) -> Event {
        event.text = self.options.surface(&event.text);
        event.source_head = event.source_head.map(|s| self.options.surface(&s));
        event
    }

    pub fn options(&self) -> NormalizeOptions {
        self.options
    }

    pub fn tuples(&self) -> &[KnowledgeTuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Number of duplicate triples dropped while building.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    /// Distinct head events in first-seen order.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, head: &str) -> Option<&Event> {
        self.event_index
            .get(&self.options.key(head))
            .map(|&i| &self.events[i])
    }

    pub fn key(&self, s: &str) -> String {
        self.options.key(s)
    }

    pub fn tails(&self, head: &str, relation: RelationType) -> Option<&TailSet> {
        self.index.get(&(self.options.key(head), relation))
    }

    pub fn contains(&self, head: &str, relation: RelationType, tail: &str) -> bool {
        self.tails(head, relation)
            .map(|t| t.contains_key(&self.options.key(tail)))
            .unwrap_or(false)
    }

    /// Relations that have at least one tail for `head`.
    pub fn relations_of(&self, head: &str) -> Vec<RelationType> {
        let key = self.options.key(head);
        RelationType::ALL
            .iter()
            .copied()
            .filter(|r| self.index.contains_key(&(key.clone(), *r)))
            .collect()
    }

    pub fn index(&self) -> &BTreeMap<(String, RelationType), TailSet> {
        &self.index
    }

    /// Derived events whose split differs from their source's split.
    /// Sources are looked up in `sources` first, then in `self`.
    pub fn split_violations(&self, sources: Option<&KnowledgeGraph>) -> Vec<SplitViolation> {
        let mut out = Vec::new();
        for ev in &self.events {
            let Some(src_head) = ev.source_head.as_deref() else {
                continue;
            };
            let src = sources
                .and_then(|g| g.event(src_head))
                .or_else(|| self.event(src_head));
            if let Some(src) = src {
                if src.split != ev.split {
                    out.push(SplitViolation {
                        head: ev.text.clone(),
                        source_head: src_head.to_string(),
                        split: ev.split,
                        source_split: src.split,
                    });
                }
            }
        }
        out
    }
}
