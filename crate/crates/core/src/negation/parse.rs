//! Shallow parse of `PersonX <verb phrase>` events: subject span, main verb,
//! tense and whether a second clause is present.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::verbs::{FormKind, VerbLexicon};
use super::NegationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Tag {
    Subj,
    Verb,
    Modal,
    Det,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tense {
    Present3sg,
    PresentPlain,
    Past,
    Modal,
    CopulaPresent,
    CopulaPast,
    Future,
    /// has/have/had followed by a participle.
    Perfect,
}

impl Tense {
    /// Tenses carried by an auxiliary (copula, modal, will, perfect have).
    pub fn has_auxiliary(self) -> bool {
        matches!(
            self,
            Tense::Modal | Tense::CopulaPresent | Tense::CopulaPast | Tense::Future | Tense::Perfect
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Lowercased word with trailing punctuation removed.
    pub key: String,
    pub tag: Tag,
}

impl Token {
    fn new(text: &str) -> Token {
        let trimmed = text.trim_end_matches(|c: char| !(c.is_alphanumeric() || c == '\''));
        Token {
            text: text.to_string(),
            key: trimmed.to_lowercase(),
            tag: Tag::Other,
        }
    }

    /// Trailing punctuation that is kept when the word is rewritten.
    pub fn trailing(&self) -> &str {
        let trimmed = self
            .text
            .trim_end_matches(|c: char| !(c.is_alphanumeric() || c == '\''));
        &self.text[trimmed.len()..]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseSketch {
    pub tokens: Vec<Token>,
    pub subject: Range<usize>,
    pub subject_plural: bool,
    pub main_verb: usize,
    /// Lemma of the main verb ("be" for copulas, the modal itself for modals).
    pub lemma: String,
    pub tense: Tense,
    pub has_clause_marker: bool,
}

const PERSONS: &[&str] = &["personx", "persony", "personz", "x", "y", "z"];
const PRONOUNS: &[&str] = &["he", "she", "they", "we", "i", "you", "it"];
const MODALS: &[&str] = &["can", "could", "would", "should", "may", "might", "must", "shall"];
const DETERMINERS: &[&str] = &[
    "a", "an", "the", "some", "any", "this", "that", "these", "those", "his", "her", "their", "my",
    "your", "its", "our", "every", "each", "another",
];
const ALWAYS_CLAUSE: &[&str] = &[
    "because", "while", "when", "who", "which", "whom", "whose", "where", "although", "though",
    "unless", "whereas", "if",
];
const PREDICATE_CLAUSE: &[&str] = &["that", "and", "but", "before", "after"];

fn is_person(key: &str) -> bool {
    PERSONS.contains(&key)
}

fn possessive_person(key: &str) -> bool {
    key.strip_suffix("'s").map(is_person).unwrap_or(false)
}

fn copula_tense(key: &str) -> Option<(Tense, bool)> {
    match key {
        "is" => Some((Tense::CopulaPresent, false)),
        "am" | "are" => Some((Tense::CopulaPresent, true)),
        "was" => Some((Tense::CopulaPast, false)),
        "were" => Some((Tense::CopulaPast, true)),
        _ => None,
    }
}

pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace().map(Token::new).collect()
}

fn is_verbal(lex: &VerbLexicon, key: &str) -> bool {
    copula_tense(key).is_some()
        || MODALS.contains(&key)
        || key == "will"
        || lex.finite_readings(key).next().is_some()
}

/// Finite verb, copula or modal: evidence that a marker opens a new predicate.
fn is_finite(lex: &VerbLexicon, key: &str) -> bool {
    copula_tense(key).is_some()
        || MODALS.contains(&key)
        || key == "will"
        || lex
            .finite_readings(key)
            .any(|a| matches!(a.kind, FormKind::Third | FormKind::Past))
}

pub fn parse_sketch(lex: &VerbLexicon, text: &str) -> Result<ParseSketch, NegationError> {
    let mut tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(NegationError::UnparsableEvent("empty event".to_string()));
    }

    let first = tokens[0].key.clone();
    let (subject, plural) = if possessive_person(&first) {
        // "PersonX's <noun ...>": at least one noun token, then up to the verb.
        let mut end = 2;
        while end < tokens.len() && !is_verbal(lex, &tokens[end].key) {
            end += 1;
        }
        if end >= tokens.len() {
            return Err(NegationError::UnparsableEvent("no verb found".to_string()));
        }
        (0..end, false)
    } else if is_person(&first) {
        if tokens.len() > 2 && tokens[1].key == "and" && is_person(&tokens[2].key) {
            (0..3, true)
        } else {
            (0..1, false)
        }
    } else {
        return Err(NegationError::UnparsableEvent("no subject found".to_string()));
    };

    let main_verb = (subject.end..tokens.len())
        .find(|&i| is_verbal(lex, &tokens[i].key))
        .ok_or_else(|| NegationError::UnparsableEvent("no verb found".to_string()))?;
    let key = tokens[main_verb].key.clone();

    let (tense, lemma) = if let Some((t, _)) = copula_tense(&key) {
        (t, "be".to_string())
    } else if MODALS.contains(&key.as_str()) {
        (Tense::Modal, key.clone())
    } else if key == "will" {
        (Tense::Future, key.clone())
    } else {
        let readings: Vec<_> = lex.finite_readings(&key).collect();
        let lemma = readings[0].lemma.clone();
        let has = |k: FormKind| readings.iter().any(|a| a.kind == k);
        let perfect = lemma == "have"
            && tokens
                .get(main_verb + 1)
                .map(|t| lex.is_participle(&t.key) && t.key != "had")
                .unwrap_or(false);
        let tense = if perfect {
            Tense::Perfect
        } else if has(FormKind::Third) {
            Tense::Present3sg
        } else if has(FormKind::Past) && (!plural || !has(FormKind::Base)) {
            Tense::Past
        } else {
            Tense::PresentPlain
        };
        let lemma = readings
            .iter()
            .find(|a| match tense {
                Tense::Present3sg => a.kind == FormKind::Third,
                Tense::Past => a.kind == FormKind::Past,
                _ => true,
            })
            .map(|a| a.lemma.clone())
            .unwrap_or(lemma);
        (tense, lemma)
    };

    for (i, t) in tokens.iter_mut().enumerate() {
        t.tag = if subject.contains(&i) {
            Tag::Subj
        } else if MODALS.contains(&t.key.as_str()) || t.key == "will" {
            Tag::Modal
        } else if i == main_verb || (i > main_verb && is_verbal(lex, &t.key)) {
            Tag::Verb
        } else if DETERMINERS.contains(&t.key.as_str()) {
            Tag::Det
        } else {
            Tag::Other
        };
    }
    if tense == Tense::Perfect {
        tokens[main_verb].tag = Tag::Modal;
    }

    let has_clause_marker = clause_marker(lex, &tokens, main_verb);

    Ok(ParseSketch {
        tokens,
        subject,
        subject_plural: plural,
        main_verb,
        lemma,
        tense,
        has_clause_marker,
    })
}

fn clause_marker(lex: &VerbLexicon, tokens: &[Token], main_verb: usize) -> bool {
    for i in main_verb + 1..tokens.len() {
        let key = tokens[i].key.as_str();
        if ALWAYS_CLAUSE.contains(&key) {
            if key == "because" && tokens.get(i + 1).map(|t| t.key == "of").unwrap_or(false) {
                continue;
            }
            return true;
        }
        if PREDICATE_CLAUSE.contains(&key) && opens_predicate(lex, tokens, i + 1) {
            return true;
        }
    }
    false
}

/// A second subject, or a finite verb within two tokens, follows `start`.
fn opens_predicate(lex: &VerbLexicon, tokens: &[Token], start: usize) -> bool {
    let Some(next) = tokens.get(start) else {
        return false;
    };
    let k = next.key.as_str();
    if is_person(k) || PRONOUNS.contains(&k) {
        return true;
    }
    tokens[start..]
        .iter()
        .take(2)
        .any(|t| is_finite(lex, &t.key))
}
