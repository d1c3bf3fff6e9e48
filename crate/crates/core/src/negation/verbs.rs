//! Closed verb-form lexicon.
//!
//! Every surface form is generated from a shipped list of base forms using
//! regular English inflection rules, plus an irregular table and a small map of
//! dual-use words whose verb reading is fixed by hand.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

const BASE_FORMS: &str = include_str!("../../resources/verbs.txt");
const IRREGULARS: &str = include_str!("../../resources/irregular.tsv");
const DUAL_USE: &str = include_str!("../../resources/dual_use.tsv");

/// Which inflection a surface token is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FormKind {
    Base,
    Third,
    Past,
    Participle,
    Gerund,
}

impl FormKind {
    fn parse(s: &str) -> Option<FormKind> {
        Some(match s {
            "base" => FormKind::Base,
            "third" => FormKind::Third,
            "past" => FormKind::Past,
            "participle" => FormKind::Participle,
            "gerund" => FormKind::Gerund,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Analysis {
    pub lemma: String,
    pub kind: FormKind,
}

#[derive(Debug, Clone)]
struct Paradigm {
    third: String,
    past: String,
    participle: String,
    gerund: String,
}

#[derive(Debug, Clone)]
pub struct VerbLexicon {
    paradigms: BTreeMap<String, Paradigm>,
    forms: BTreeMap<String, BTreeSet<Analysis>>,
}

/// Stress-final verbs of more than one syllable that double their final consonant.
const DOUBLING: &[&str] = &[
    "abhor", "acquit", "admit", "allot", "commit", "compel", "confer", "control", "deter",
    "embed", "equip", "excel", "expel", "forbid", "incur", "occur", "omit", "outwit", "patrol",
    "permit", "prefer", "propel", "rebel", "recur", "refer", "regret", "submit", "transfer",
    "transmit", "unplug", "unwrap", "upset",
];

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn vowel_groups(w: &[u8]) -> usize {
    let mut n = 0;
    let mut prev = false;
    for (i, &c) in w.iter().enumerate() {
        // the u of "qu" is consonantal
        let v = is_vowel(c) && !(c == b'u' && i > 0 && w[i - 1] == b'q');
        if v && !prev {
            n += 1;
        }
        prev = v;
    }
    n
}

fn doubles_final(base: &str) -> bool {
    let w = base.as_bytes();
    if w.len() < 3 {
        return false;
    }
    let (a, b, c) = (w[w.len() - 3], w[w.len() - 2], w[w.len() - 1]);
    let qu = a == b'u' && w.len() >= 4 && w[w.len() - 4] == b'q';
    let cvc = (!is_vowel(a) || qu) && is_vowel(b) && !is_vowel(c) && !matches!(c, b'w' | b'x' | b'y');
    cvc && (vowel_groups(w) == 1 || DOUBLING.contains(&base))
}

fn ends_consonant_y(w: &str) -> bool {
    let b = w.as_bytes();
    b.len() >= 2 && b[b.len() - 1] == b'y' && !is_vowel(b[b.len() - 2])
}

/// Regular third person singular.
pub fn regular_third(base: &str) -> String {
    if ends_consonant_y(base) {
        let mut s = base[..base.len() - 1].to_string();
        s.push_str("ies");
        s
    } else if ["s", "x", "z", "ch", "sh", "o"].iter().any(|e| base.ends_with(e)) {
        let mut s = base.to_string();
        s.push_str("es");
        s
    } else {
        let mut s = base.to_string();
        s.push('s');
        s
    }
}

/// Regular past tense (also the participle).
pub fn regular_past(base: &str) -> String {
    let mut s;
    if base.ends_with('e') {
        s = base.to_string();
        s.push('d');
    } else if ends_consonant_y(base) {
        s = base[..base.len() - 1].to_string();
        s.push_str("ied");
    } else if doubles_final(base) {
        s = base.to_string();
        s.push(base.as_bytes()[base.len() - 1] as char);
        s.push_str("ed");
    } else {
        s = base.to_string();
        s.push_str("ed");
    }
    s
}

pub fn regular_gerund(base: &str) -> String {
    let mut s;
    if base == "be" {
        return "being".to_string();
    }
    if let Some(stem) = base.strip_suffix("ie") {
        s = stem.to_string();
        s.push_str("ying");
    } else if base.ends_with('e')
        && !base.ends_with("ee")
        && !base.ends_with("oe")
        && !base.ends_with("ye")
        && base.len() > 2
    {
        s = base[..base.len() - 1].to_string();
        s.push_str("ing");
    } else if doubles_final(base) {
        s = base.to_string();
        s.push(base.as_bytes()[base.len() - 1] as char);
        s.push_str("ing");
    } else {
        s = base.to_string();
        s.push_str("ing");
    }
    s
}

fn data_lines(src: &str) -> impl Iterator<Item = &str> {
    src.lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
}

impl Default for VerbLexicon {
    fn default() -> Self {
        Self::shipped()
    }
}

impl VerbLexicon {
    /// The lexicon built from the bundled resource files.
    pub fn shipped() -> Self {
        let mut lex = VerbLexicon {
            paradigms: BTreeMap::new(),
            forms: BTreeMap::new(),
        };
        for line in data_lines(BASE_FORMS) {
            for base in line.split_whitespace() {
                lex.add_regular(base);
            }
        }
        for line in data_lines(IRREGULARS) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                continue;
            }
            let third = cols
                .get(3)
                .map(|s| s.to_string())
                .unwrap_or_else(|| regular_third(cols[0]));
            lex.add(cols[0], third, cols[1].to_string(), cols[2].to_string());
        }
        let dual: Vec<(&str, &str, FormKind)> = data_lines(DUAL_USE)
            .filter_map(|line| {
                let cols: Vec<&str> = line.split('\t').collect();
                let kind = FormKind::parse(cols.get(2)?)?;
                Some((cols[0], cols[1], kind))
            })
            .collect();
        for (_, lemma, _) in &dual {
            lex.add_regular(lemma);
        }
        lex.rebuild_forms();
        for (form, lemma, kind) in dual {
            let cols = [form, lemma];
            let mut only = BTreeSet::new();
            only.insert(Analysis {
                lemma: cols[1].to_string(),
                kind,
            });
            lex.forms.insert(cols[0].to_string(), only);
        }
        lex
    }

    fn add_regular(&mut self, base: &str) {
        if self.paradigms.contains_key(base) {
            return;
        }
        let past = regular_past(base);
        self.add(base, regular_third(base), past.clone(), past);
    }

    fn add(&mut self, base: &str, third: String, past: String, participle: String) {
        self.paradigms.insert(
            base.to_string(),
            Paradigm {
                third,
                past,
                participle,
                gerund: regular_gerund(base),
            },
        );
    }

    fn rebuild_forms(&mut self) {
        let mut forms: BTreeMap<String, BTreeSet<Analysis>> = BTreeMap::new();
        for (base, p) in &self.paradigms {
            let entries = [
                (base.as_str(), FormKind::Base),
                (p.third.as_str(), FormKind::Third),
                (p.past.as_str(), FormKind::Past),
                (p.participle.as_str(), FormKind::Participle),
                (p.gerund.as_str(), FormKind::Gerund),
            ];
            for (form, kind) in entries {
                forms.entry(form.to_string()).or_default().insert(Analysis {
                    lemma: base.clone(),
                    kind,
                });
            }
        }
        self.forms = forms;
    }

    pub fn len(&self) -> usize {
        self.paradigms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paradigms.is_empty()
    }

    pub fn contains_lemma(&self, lemma: &str) -> bool {
        self.paradigms.contains_key(lemma)
    }

    /// All readings of a lowercase surface form.
    pub fn analyze(&self, form: &str) -> Option<&BTreeSet<Analysis>> {
        self.forms.get(form)
    }

    /// Finite readings only (base, third person, past).
    pub fn finite_readings<'a>(&'a self, form: &str) -> impl Iterator<Item = &'a Analysis> + 'a {
        self.forms
            .get(form)
            .into_iter()
            .flatten()
            .filter(|a| matches!(a.kind, FormKind::Base | FormKind::Third | FormKind::Past))
    }

    pub fn is_participle(&self, form: &str) -> bool {
        self.forms
            .get(form)
            .map(|s| s.iter().any(|a| a.kind == FormKind::Participle))
            .unwrap_or(false)
    }

    pub fn lemmas_of(&self, form: &str) -> impl Iterator<Item = &str> + '_ {
        self.forms.get(form).into_iter().flatten().map(|a| a.lemma.as_str())
    }

    /// Inflects a lemma. Unknown lemmas use the regular rules.
    pub fn inflect(&self, lemma: &str, kind: FormKind) -> String {
        match self.paradigms.get(lemma) {
            Some(p) => match kind {
                FormKind::Base => lemma.to_string(),
                FormKind::Third => p.third.clone(),
                FormKind::Past => p.past.clone(),
                FormKind::Participle => p.participle.clone(),
                FormKind::Gerund => p.gerund.clone(),
            },
            None => match kind {
                FormKind::Base => lemma.to_string(),
                FormKind::Third => regular_third(lemma),
                FormKind::Past | FormKind::Participle => regular_past(lemma),
                FormKind::Gerund => regular_gerund(lemma),
            },
        }
    }

    /// Every surface form of a lemma.
    pub fn all_forms(&self, lemma: &str) -> Vec<String> {
        let mut v: Vec<String> = [
            FormKind::Base,
            FormKind::Third,
            FormKind::Past,
            FormKind::Participle,
            FormKind::Gerund,
        ]
        .iter()
        .map(|k| self.inflect(lemma, *k))
        .collect();
        v.sort();
        v.dedup();
        v
    }
}
