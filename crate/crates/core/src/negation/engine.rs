use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::lexicon::{
    shipped_affixes, shipped_frames, AffixEntry, AffixKind, Complement, ComplementFrame, CueCategory,
    CueLexicon, CueLexiconEntry, InsertionRule,
};
use super::parse::{parse_sketch, tokenize, ParseSketch, Tense, Token};
use super::verbs::{FormKind, VerbLexicon};
use super::NegationError;
use crate::kg::{Event, Polarity, Split};

/// Auxiliaries that may carry a logical "not".
pub const AUXILIARIES: &[&str] = &[
    "do", "does", "did", "is", "are", "am", "was", "were", "can", "could", "will", "would", "shall",
    "should", "may", "might", "must", "has", "have", "had",
];

/// Words that mark an event as negated regardless of the lexicon.
const BARE_NEGATORS: &[&str] = &[
    "not", "no", "never", "nothing", "nobody", "none", "neither", "nor", "cannot",
];

/// One edit against the input token sequence. Indices refer to input tokens;
/// `Insert` places tokens before index `at` (which may equal the length).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RewriteStep {
    Insert { at: usize, tokens: Vec<String> },
    Replace { at: usize, from: String, to: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegationResult {
    /// The negated event. Its split is a placeholder until
    /// [`crate::kg::assign_split`] copies the source's split.
    pub event: Event,
    pub applied_cue: String,
    pub rule_trace: Vec<RewriteStep>,
}

#[derive(Debug, Clone)]
pub struct NegationEngine {
    verbs: VerbLexicon,
    lexicon: CueLexicon,
    affixes: Vec<AffixEntry>,
    negated_forms: BTreeMap<String, String>,
    frames: BTreeMap<String, ComplementFrame>,
    contractions: bool,
}

impl Default for NegationEngine {
    fn default() -> Self {
        Self::new(CueLexicon::shipped())
    }
}

fn contract(aux: &str) -> Option<&'static str> {
    Some(match aux {
        "do" => "don't",
        "does" => "doesn't",
        "did" => "didn't",
        "is" => "isn't",
        "are" => "aren't",
        "was" => "wasn't",
        "were" => "weren't",
        "can" => "can't",
        "could" => "couldn't",
        "will" => "won't",
        "would" => "wouldn't",
        "shall" => "shan't",
        "should" => "shouldn't",
        "must" => "mustn't",
        "has" => "hasn't",
        "have" => "haven't",
        "had" => "hadn't",
        _ => return None,
    })
}

fn starts_with_vowel_sound(word: &str) -> bool {
    const CONSONANT_SOUND: &[&str] = &["uni", "use", "usu", "uti", "eu", "one", "once"];
    const VOWEL_SOUND: &[&str] = &["hour", "honest", "honor", "heir"];
    if VOWEL_SOUND.iter().any(|p| word.starts_with(p)) {
        return true;
    }
    if CONSONANT_SOUND.iter().any(|p| word.starts_with(p)) {
        return false;
    }
    word.chars()
        .next()
        .map(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u'))
        .unwrap_or(false)
}

fn with_trailing(word: &str, token: &Token) -> String {
    let mut s = word.to_string();
    s.push_str(token.trailing());
    s
}

/// Case of `like` applied to `word` (only the leading capital is carried).
fn match_case(word: &str, like: &str) -> String {
    if like.chars().next().map(char::is_uppercase).unwrap_or(false) {
        let mut c = word.chars();
        match c.next() {
            Some(f) => f.to_uppercase().chain(c).collect(),
            None => String::new(),
        }
    } else {
        word.to_string()
    }
}

/// Applies a trace to the input tokens.
pub(crate) fn apply_trace(tokens: &[String], trace: &[RewriteStep]) -> Vec<String> {
    let mut before: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut replaced: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for step in trace {
        match step {
            RewriteStep::Insert { at, tokens } => before.entry(*at).or_default().extend(tokens.iter().cloned()),
            RewriteStep::Replace { at, to, .. } => {
                replaced.insert(*at, to.clone());
            }
        }
    }
    let mut out = Vec::with_capacity(tokens.len() + 4);
    for i in 0..=tokens.len() {
        if let Some(ins) = before.get(&i) {
            out.extend(ins.iter().cloned());
        }
        if i < tokens.len() {
            match replaced.get(&i) {
                Some(r) => out.extend(r.iter().cloned()),
                None => out.push(tokens[i].clone()),
            }
        }
    }
    out
}

impl NegationEngine {
    /// Engine whose cue detection covers `cues` plus the shipped lexicon.
    pub fn new(cues: CueLexicon) -> Self {
        let mut lexicon = cues;
        lexicon.extend(&CueLexicon::shipped());
        let verbs = VerbLexicon::shipped();
        let affixes = shipped_affixes();
        let mut negated_forms = BTreeMap::new();
        for a in &affixes {
            match a.kind {
                AffixKind::Verb => {
                    for f in verbs.all_forms(&a.negated) {
                        negated_forms.insert(f, a.cue.clone());
                    }
                }
                _ => {
                    negated_forms.insert(a.negated.clone(), a.cue.clone());
                }
            }
        }
        NegationEngine {
            verbs,
            lexicon,
            affixes,
            negated_forms,
            frames: shipped_frames(),
            contractions: false,
        }
    }

    /// Emit contracted auxiliaries ("does not" becomes "doesn't").
    pub fn with_contractions(mut self, on: bool) -> Self {
        self.contractions = on;
        self
    }

    pub fn contractions(&self) -> bool {
        self.contractions
    }

    pub fn lexicon(&self) -> &CueLexicon {
        &self.lexicon
    }

    pub fn verbs(&self) -> &VerbLexicon {
        &self.verbs
    }

    pub fn parse(&self, text: &str) -> Result<ParseSketch, NegationError> {
        parse_sketch(&self.verbs, text)
    }

    /// First negation cue found in `text`, if any.
    pub fn detect_cue(&self, text: &str) -> Option<String> {
        self.find_cue(&tokenize(text), None)
    }

    fn find_cue(&self, tokens: &[Token], extra: Option<&CueLexiconEntry>) -> Option<String> {
        for t in tokens {
            if BARE_NEGATORS.contains(&t.key.as_str()) || t.key.ends_with("n't") {
                return Some(t.key.clone());
            }
            if let Some(cue) = self.negated_forms.get(&t.key) {
                return Some(cue.clone());
            }
        }
        let keys: Vec<&str> = tokens.iter().map(|t| t.key.as_str()).collect();
        for entry in self.lexicon.entries().iter().chain(extra) {
            if entry.category == CueCategory::Affix {
                continue;
            }
            let cue_tokens = entry.tokens();
            let verbal = entry.insertion_rule == InsertionRule::ReplaceVerbWithGerundComplement;
            let head_forms = if verbal {
                self.verbs.all_forms(cue_tokens[0])
            } else {
                vec![cue_tokens[0].to_string()]
            };
            let n = cue_tokens.len();
            if keys.len() < n {
                continue;
            }
            for start in 0..=keys.len() - n {
                if head_forms.iter().any(|f| f == keys[start])
                    && keys[start + 1..start + n] == cue_tokens[1..]
                {
                    return Some(entry.cue.clone());
                }
            }
        }
        None
    }

    fn prepare(
        &self,
        text: &str,
        extra: Option<&CueLexiconEntry>,
    ) -> Result<ParseSketch, NegationError> {
        if let Some(cue) = self.find_cue(&tokenize(text), extra) {
            return Err(NegationError::AlreadyNegated(cue));
        }
        let sketch = self.parse(text)?;
        if sketch.has_clause_marker {
            return Err(NegationError::CompoundEventRejected);
        }
        Ok(sketch)
    }

    /// Inserts "not" (with do-support where needed) directly after the subject
    /// and turns "some" into "any".
    pub fn negate_logical(&self, text: &str) -> Result<NegationResult, NegationError> {
        let sketch = self.prepare(text, None)?;
        if sketch.tense.has_auxiliary() && sketch.main_verb != sketch.subject.end {
            return Err(NegationError::UnparsableEvent(
                "auxiliary is separated from the subject".to_string(),
            ));
        }
        let trace = self.not_family(&sketch, &["not"]);
        self.finish(text, &sketch, trace, "not", Polarity::Logical)
    }

    /// Applies a cue other than plain "not" according to its insertion rule.
    pub fn negate_semilogical(
        &self,
        text: &str,
        entry: &CueLexiconEntry,
    ) -> Result<NegationResult, NegationError> {
        let sketch = self.prepare(text, Some(entry))?;
        let cue_tokens = entry.tokens();
        let trace = match entry.insertion_rule {
            InsertionRule::AfterSubject | InsertionRule::BeforeMainVerb if cue_tokens[0] == "not" => {
                self.not_family(&sketch, &cue_tokens)
            }
            InsertionRule::AfterSubject => {
                let at = if sketch.tense.has_auxiliary() {
                    sketch.main_verb + 1
                } else {
                    sketch.subject.end
                };
                vec![RewriteStep::Insert {
                    at,
                    tokens: cue_tokens.iter().map(|s| s.to_string()).collect(),
                }]
            }
            InsertionRule::BeforeMainVerb => {
                let at = if sketch.tense.has_auxiliary() {
                    sketch.main_verb + 1
                } else {
                    sketch.main_verb
                };
                vec![RewriteStep::Insert {
                    at,
                    tokens: cue_tokens.iter().map(|s| s.to_string()).collect(),
                }]
            }
            InsertionRule::ReplaceVerbWithGerundComplement => self.verb_frame(&sketch, entry)?,
            InsertionRule::PrefixOrSuffixOnContentWord => self.affix(&sketch, entry)?,
        };
        self.finish(text, &sketch, trace, &entry.cue, Polarity::SemiLogical)
    }

    /// Dispatches on the cue: "not" goes through [`Self::negate_logical`].
    pub fn negate(&self, text: &str, entry: &CueLexiconEntry) -> Result<NegationResult, NegationError> {
        if entry.is_logical() {
            self.negate_logical(text)
        } else {
            self.negate_semilogical(text, entry)
        }
    }

    fn not_family(&self, sketch: &ParseSketch, cue: &[&str]) -> Vec<RewriteStep> {
        let tokens = &sketch.tokens;
        let mut trace = Vec::new();
        if sketch.tense.has_auxiliary() {
            let aux = &tokens[sketch.main_verb];
            let contracted = if self.contractions && cue[0] == "not" {
                contract(&aux.key)
            } else {
                None
            };
            match contracted {
                Some(c) => {
                    trace.push(RewriteStep::Replace {
                        at: sketch.main_verb,
                        from: aux.text.clone(),
                        to: vec![match_case(c, &aux.text)],
                    });
                    if cue.len() > 1 {
                        trace.push(RewriteStep::Insert {
                            at: sketch.main_verb + 1,
                            tokens: cue[1..].iter().map(|s| s.to_string()).collect(),
                        });
                    }
                }
                None => trace.push(RewriteStep::Insert {
                    at: sketch.main_verb + 1,
                    tokens: cue.iter().map(|s| s.to_string()).collect(),
                }),
            }
        } else {
            let aux = if sketch.tense == Tense::Past {
                "did"
            } else if sketch.subject_plural {
                "do"
            } else {
                "does"
            };
            let mut inserted: Vec<String> = Vec::new();
            match contract(aux).filter(|_| self.contractions && cue[0] == "not") {
                Some(c) => {
                    inserted.push(c.to_string());
                    inserted.extend(cue[1..].iter().map(|s| s.to_string()));
                }
                None => {
                    inserted.push(aux.to_string());
                    inserted.extend(cue.iter().map(|s| s.to_string()));
                }
            }
            trace.push(RewriteStep::Insert {
                at: sketch.subject.end,
                tokens: inserted,
            });
            let verb = &tokens[sketch.main_verb];
            let base = with_trailing(&sketch.lemma, verb);
            if base != verb.text {
                trace.push(RewriteStep::Replace {
                    at: sketch.main_verb,
                    from: verb.text.clone(),
                    to: vec![base],
                });
            }
        }
        for (i, t) in tokens.iter().enumerate().skip(sketch.subject.end) {
            if t.key == "some" {
                trace.push(RewriteStep::Replace {
                    at: i,
                    from: t.text.clone(),
                    to: vec![with_trailing(&match_case("any", &t.text), t)],
                });
            }
        }
        trace
    }

    fn verb_frame(
        &self,
        sketch: &ParseSketch,
        entry: &CueLexiconEntry,
    ) -> Result<Vec<RewriteStep>, NegationError> {
        let incompatible = |reason: &str| NegationError::CueIncompatible {
            cue: entry.cue.clone(),
            reason: reason.to_string(),
        };
        let frame = self
            .frames
            .get(&entry.cue)
            .ok_or_else(|| incompatible("no complement frame for this cue"))?;
        let plural = sketch.subject_plural;
        let kind = match sketch.tense {
            Tense::Present3sg | Tense::PresentPlain | Tense::CopulaPresent => {
                if plural {
                    FormKind::Base
                } else {
                    FormKind::Third
                }
            }
            Tense::Past | Tense::CopulaPast => FormKind::Past,
            Tense::Modal | Tense::Future | Tense::Perfect => {
                return Err(incompatible("auxiliary verb cannot become a complement"))
            }
        };
        let cue_tokens = entry.tokens();
        let mut to: Vec<String> = Vec::with_capacity(cue_tokens.len() + 2);
        to.push(self.verbs.inflect(cue_tokens[0], kind));
        to.extend(cue_tokens[1..].iter().map(|s| s.to_string()));

        let verb = &sketch.tokens[sketch.main_verb];
        if !frame.replaces.contains(&sketch.lemma) {
            match frame.complement {
                Complement::Gerund => to.push(self.verbs.inflect(&sketch.lemma, FormKind::Gerund)),
                Complement::Infinitive => {
                    if cue_tokens.last() != Some(&"to") {
                        to.push("to".to_string());
                    }
                    to.push(sketch.lemma.clone());
                }
            }
        }
        if let Some(last) = to.last_mut() {
            last.push_str(verb.trailing());
        }
        Ok(vec![RewriteStep::Replace {
            at: sketch.main_verb,
            from: verb.text.clone(),
            to,
        }])
    }

    fn affix(&self, sketch: &ParseSketch, entry: &CueLexiconEntry) -> Result<Vec<RewriteStep>, NegationError> {
        const KINDS: [FormKind; 5] = [
            FormKind::Base,
            FormKind::Third,
            FormKind::Past,
            FormKind::Participle,
            FormKind::Gerund,
        ];
        let tokens = &sketch.tokens;
        let candidates: Vec<&AffixEntry> = self.affixes.iter().filter(|a| a.cue == entry.cue).collect();
        for i in sketch.subject.end..tokens.len() {
            let key = tokens[i].key.as_str();
            let hit = candidates.iter().find_map(|a| match a.kind {
                AffixKind::Verb if i == sketch.main_verb => KINDS
                    .iter()
                    .find(|k| self.verbs.inflect(&a.word, **k) == key)
                    .map(|k| self.verbs.inflect(&a.negated, *k)),
                AffixKind::Verb => None,
                _ if a.word == key => Some(a.negated.clone()),
                _ => None,
            });
            let Some(negated) = hit else { continue };
            let mut trace = Vec::new();
            if i > 0 && matches!(tokens[i - 1].key.as_str(), "a" | "an") {
                let want = if starts_with_vowel_sound(&negated) { "an" } else { "a" };
                if tokens[i - 1].key != want {
                    let art = &tokens[i - 1];
                    trace.push(RewriteStep::Replace {
                        at: i - 1,
                        from: art.text.clone(),
                        to: vec![with_trailing(&match_case(want, &art.text), art)],
                    });
                }
            }
            trace.push(RewriteStep::Replace {
                at: i,
                from: tokens[i].text.clone(),
                to: vec![with_trailing(&match_case(&negated, &tokens[i].text), &tokens[i])],
            });
            return Ok(trace);
        }
        Err(NegationError::CueIncompatible {
            cue: entry.cue.clone(),
            reason: format!("no whitelisted word for `{}`", entry.cue),
        })
    }

    fn finish(
        &self,
        text: &str,
        sketch: &ParseSketch,
        trace: Vec<RewriteStep>,
        cue: &str,
        polarity: Polarity,
    ) -> Result<NegationResult, NegationError> {
        let input: Vec<String> = sketch.tokens.iter().map(|t| t.text.clone()).collect();
        let out = apply_trace(&input, &trace).join(" ");
        let event = Event {
            text: out,
            polarity,
            source_head: Some(text.to_string()),
            split: Split::Train,
            cue: Some(cue.to_string()),
        };
        Ok(NegationResult {
            event,
            applied_cue: cue.to_string(),
            rule_trace: trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine() -> NegationEngine {
        NegationEngine::default()
    }

    fn cue(c: &str) -> CueLexiconEntry {
        CueLexicon::shipped().get(c).unwrap().clone()
    }

    fn neg(text: &str, c: &str) -> String {
        engine().negate(text, &cue(c)).unwrap().event.text
    }

    #[test]
    fn logical_examples() {
        let e = engine();
        assert_eq!(e.negate_logical("X plays the piano").unwrap().event.text, "X does not play the piano");
        assert_eq!(
            e.negate_logical("PersonX buys some shoes").unwrap().event.text,
            "PersonX does not buy any shoes"
        );
        assert_eq!(
            e.negate_logical("X went to a movie because Y asked"),
            Err(NegationError::CompoundEventRejected)
        );
        assert_eq!(e.negate_logical("PersonX went home").unwrap().event.text, "PersonX did not go home");
        assert_eq!(e.negate_logical("PersonX is happy").unwrap().event.text, "PersonX is not happy");
        assert_eq!(e.negate_logical("PersonX can swim").unwrap().event.text, "PersonX can not swim");
        assert_eq!(e.negate_logical("PersonX will go home").unwrap().event.text, "PersonX will not go home");
        assert_eq!(e.negate_logical("PersonX has gone home").unwrap().event.text, "PersonX has not gone home");
        assert_eq!(
            e.negate_logical("PersonX has a nightmare").unwrap().event.text,
            "PersonX does not have a nightmare"
        );
        assert_eq!(
            e.negate_logical("PersonX and PersonY play tennis").unwrap().event.text,
            "PersonX and PersonY do not play tennis"
        );
        assert_eq!(
            e.negate_logical("PersonX's dog barks at PersonY.").unwrap().event.text,
            "PersonX's dog does not bark at PersonY."
        );
    }

    #[test]
    fn contractions() {
        let e = engine().with_contractions(true);
        assert_eq!(
            e.negate_logical("PersonX buys some shoes").unwrap().event.text,
            "PersonX doesn't buy any shoes"
        );
        assert_eq!(e.negate_logical("PersonX was late").unwrap().event.text, "PersonX wasn't late");
        assert_eq!(e.negate_logical("PersonX may leave").unwrap().event.text, "PersonX may not leave");
    }

    #[test]
    fn logical_errors() {
        let e = engine();
        assert!(matches!(e.negate_logical("X does not play"), Err(NegationError::AlreadyNegated(_))));
        assert!(matches!(e.negate_logical("X never eats"), Err(NegationError::AlreadyNegated(_))));
        assert!(matches!(e.negate_logical("the piano plays"), Err(NegationError::UnparsableEvent(_))));
    }

    #[test]
    fn semilogical_examples() {
        assert_eq!(neg("X eats ice cream", "never"), "X never eats ice cream");
        assert_eq!(neg("X wants to buy a car", "no longer"), "X no longer wants to buy a car");
        assert_eq!(neg("X skates around", "avoid"), "X avoids skating around");
        assert_eq!(neg("X is in a relationship", "refuse"), "X refuses to be in a relationship");
        assert_eq!(neg("X eats with Y", "restrain himself from"), "X restrains himself from eating with Y");
        assert_eq!(neg("X acknowledges the existence of god", "deny"), "X denies the existence of god");
        assert_eq!(neg("X addresses a relevant point", "ir-"), "X addresses an irrelevant point");
        assert_eq!(neg("X is likely to be a spy", "un-"), "X is unlikely to be a spy");
        assert_eq!(neg("X saddles the horse", "un-"), "X unsaddles the horse");
        assert_eq!(neg("X went to a movie with his friends", "without"), "X went to a movie without his friends");
        assert_eq!(neg("X is impressed by Y's ideas", "not at all"), "X is not at all impressed by Y's ideas");
        assert_eq!(neg("X smokes", "under no circumstances"), "X under no circumstances smokes");
        assert_eq!(neg("X is cheating on Y", "by no means"), "X is by no means cheating on Y");
        assert_eq!(neg("X likes Y", "not at all"), "X does not at all like Y");
        assert_eq!(neg("X went home", "avoid"), "X avoided going home");
        assert_eq!(neg("X can swim", "never"), "X can never swim");
        assert_eq!(neg("X buys a car", "make no attempt to"), "X makes no attempt to buy a car");
    }

    #[test]
    fn semilogical_errors() {
        let e = engine();
        assert!(matches!(
            e.negate_semilogical("X can swim", &cue("avoid")),
            Err(NegationError::CueIncompatible { .. })
        ));
        assert!(matches!(
            e.negate_semilogical("X eats bread", &cue("ir-")),
            Err(NegationError::CueIncompatible { .. })
        ));
        assert!(matches!(
            e.negate_semilogical("X eats while Y sleeps", &cue("never")),
            Err(NegationError::CompoundEventRejected)
        ));
        let custom = CueLexiconEntry::new("shun", CueCategory::NegativeVerb, InsertionRule::ReplaceVerbWithGerundComplement)
            .unwrap();
        assert!(matches!(
            e.negate_semilogical("X eats bread", &custom),
            Err(NegationError::CueIncompatible { .. })
        ));
    }

    #[test]
    fn detects_cues() {
        let e = engine();
        assert_eq!(e.detect_cue("X refuses to eat").as_deref(), Some("refuse"));
        assert_eq!(e.detect_cue("X is unhappy").as_deref(), Some("un-"));
        assert_eq!(e.detect_cue("X doesn't eat").as_deref(), Some("doesn't"));
        assert_eq!(e.detect_cue("X restrained himself from eating").as_deref(), Some("restrain himself from"));
        assert_eq!(e.detect_cue("X eats a salad"), None);
    }

    #[test]
    fn trace_reproduces_output() {
        let e = engine();
        let r = e.negate_logical("PersonX buys some shoes").unwrap();
        let input: Vec<String> = "PersonX buys some shoes".split(' ').map(String::from).collect();
        assert_eq!(apply_trace(&input, &r.rule_trace).join(" "), r.event.text);
        assert_eq!(r.event.source_head.as_deref(), Some("PersonX buys some shoes"));
        assert_eq!(r.event.polarity, Polarity::Logical);
    }
}
