//! String normalization used for matching heads and tails.

use alloc::string::String;
use alloc::vec::Vec;

/// Collapses whitespace runs, trims and lowercases.
pub fn normalize_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for (i, word) in s.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&word.to_lowercase());
    }
    out
}

/// Whitespace collapse only, case preserved.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Rewrites standalone `X`/`Y`/`Z` (and their possessives) to
/// `PersonX`/`PersonY`/`PersonZ`. Other tokens are untouched.
pub fn unify_person_tokens(s: &str) -> String {
    let words: Vec<String> = s
        .split_whitespace()
        .map(|w| {
            let (core, possessive) = match w.strip_suffix("'s") {
                Some(c) => (c, true),
                None => (w, false),
            };
            let (core, trail) = split_trailing_punct(core);
            match core {
                "X" | "Y" | "Z" => {
                    let mut r = String::from("Person");
                    r.push_str(core);
                    if possessive {
                        r.push_str("'s");
                    }
                    r.push_str(trail);
                    r
                }
                _ => String::from(w),
            }
        })
        .collect();
    words.join(" ")
}

fn split_trailing_punct(w: &str) -> (&str, &str) {
    let end = w
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_alphanumeric() || *c == '\'')
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    (&w[..end], &w[end..])
}

/// How strongly surface strings are folded before exact matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizeOptions {
    pub lowercase: bool,
    pub unify_person_tokens: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions {
            lowercase: true,
            unify_person_tokens: true,
        }
    }
}

impl NormalizeOptions {
    pub const EXACT: NormalizeOptions = NormalizeOptions {
        lowercase: false,
        unify_person_tokens: false,
    };

    /// Surface form stored in the graph: whitespace collapsed and, if enabled,
    /// person tokens unified. Case is kept.
    pub fn surface(&self, s: &str) -> String {
        if self.unify_person_tokens {
            unify_person_tokens(s)
        } else {
            collapse_whitespace(s)
        }
    }

    /// Key used for exact-match comparisons.
    pub fn key(&self, s: &str) -> String {
        let surface = self.surface(s);
        if self.lowercase {
            normalize_text(&surface)
        } else {
            surface
        }
    }
}
