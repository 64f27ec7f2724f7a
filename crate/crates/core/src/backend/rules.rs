//! Offline backends: identity and a small deterministic rule rewriter.
//!
//! These exist so the pipeline runs end to end without a neural model.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{RawOutcome, Simplifier};
use crate::error::BackendError;

#[derive(Debug, Clone, Copy, Default)]
pub struct EchoBackend;

impl Simplifier for EchoBackend {
    fn id(&self) -> String {
        "echo".into()
    }

    fn simplify(&mut self, texts: &[String]) -> Result<Vec<RawOutcome>, BackendError> {
        Ok(texts.iter().cloned().map(Ok).collect())
    }
}

/// Word substitutions keyed by lower-cased source word.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: HashMap<String, String>,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `source -> replacement`. Returns false if `source` is not a
    /// single word.
    pub fn insert(&mut self, source: &str, replacement: &str) -> bool {
        if source.is_empty() || !source.chars().all(is_word_char) {
            return false;
        }
        self.entries
            .insert(source.to_lowercase(), replacement.to_string());
        true
    }

    /// Parses `source<TAB>replacement` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, (usize, String)> {
        let mut lexicon = Self::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((source, replacement)) = line.split_once('\t') else {
                return Err((i + 1, "expected source<TAB>replacement".into()));
            };
            if !lexicon.insert(source.trim(), replacement.trim()) {
                return Err((i + 1, "source must be a single word".into()));
            }
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path).map_err(|e| BackendError::Lexicon {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|(line, message)| BackendError::Lexicon {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        })
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.entries.get(&word.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<'a> FromIterator<(&'a str, &'a str)> for Lexicon {
    fn from_iter<I: IntoIterator<Item = (&'a str, &'a str)>>(iter: I) -> Self {
        let mut lexicon = Lexicon::new();
        for (s, r) in iter {
            lexicon.insert(s, r);
        }
        lexicon
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn match_case(source: &str, replacement: &str) -> String {
    let letters: Vec<char> = source.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        replacement.to_uppercase()
    } else if source.chars().next().is_some_and(char::is_uppercase) {
        capitalize(replacement)
    } else {
        replacement.to_string()
    }
}

fn substitute_words(lexicon: &Lexicon, text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if !word.is_empty() {
            match lexicon.get(word) {
                Some(r) => out.push_str(&match_case(word, r)),
                None => out.push_str(word),
            }
            word.clear();
        }
    };
    for c in text.chars() {
        if is_word_char(c) {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}

/// Removes innermost `( ... )` groups until none remain.
fn drop_parentheticals(text: &str) -> String {
    let mut text = text.to_string();
    loop {
        let mut open = None;
        let mut found = None;
        for (i, c) in text.char_indices() {
            match c {
                '(' => open = Some(i),
                ')' => {
                    if let Some(o) = open {
                        found = Some((o, i));
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some((o, c)) = found else {
            return text;
        };
        let before = text[..o].trim_end();
        let after = &text[c + 1..];
        let glue = if after.starts_with(['.', ',', ';', ':', '!', '?']) {
            ""
        } else {
            " "
        };
        text = format!("{before}{glue}{after}");
    }
}

const WHICH: &str = ", which ";

fn split_relative_clause(text: &str) -> String {
    let Some(pos) = text.find(WHICH) else {
        return text.to_string();
    };
    let before = &text[..pos];
    let after = &text[pos + WHICH.len()..];
    let head = before
        .split_whitespace()
        .next_back()
        .map(|w| w.trim_matches(|c: char| !is_word_char(c)))
        .filter(|w| !w.is_empty());
    match head {
        Some(head) => format!("{before}. {} {after}", capitalize(head)),
        None => text.to_string(),
    }
}

/// Deterministic rule simplification: lexicon substitution that keeps the
/// source word's casing, removal of parenthesized asides, then a split at
/// the first ", which " with the pronoun replaced by the preceding word.
/// Whitespace is collapsed in the result.
pub fn rules_simplify(lexicon: &Lexicon, text: &str) -> String {
    let text = substitute_words(lexicon, text);
    let text = drop_parentheticals(&text);
    let text = split_relative_clause(&text);
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone)]
pub struct RulesBackend {
    lexicon: Lexicon,
    name: String,
}

impl RulesBackend {
    pub fn new(lexicon: Lexicon, name: impl Into<String>) -> Self {
        Self {
            lexicon,
            name: name.into(),
        }
    }
}

impl Simplifier for RulesBackend {
    fn id(&self) -> String {
        if self.name.is_empty() {
            "rules".into()
        } else {
            format!("rules:{}", self.name)
        }
    }

    fn simplify(&mut self, texts: &[String]) -> Result<Vec<RawOutcome>, BackendError> {
        Ok(texts
            .iter()
            .map(|t| Ok(rules_simplify(&self.lexicon, t)))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn substitution_examples() {
        let lex: Lexicon = [("purchase", "buy")].into_iter().collect();
        assert_eq!(rules_simplify(&lex, "They purchase food"), "They buy food");
        assert_eq!(rules_simplify(&lex, "Purchase it"), "Buy it");
        assert_eq!(rules_simplify(&lex, "PURCHASE NOW"), "BUY NOW");
        assert_eq!(
            rules_simplify(&lex, "purchases, purchase."),
            "purchases, buy."
        );
    }

    #[test]
    fn parenthetical_examples() {
        let lex = Lexicon::new();
        assert_eq!(
            rules_simplify(&lex, "The plan (announced Tuesday) failed"),
            "The plan failed"
        );
        assert_eq!(rules_simplify(&lex, "a (b (c) d) e"), "a e");
        assert_eq!(rules_simplify(&lex, "a ) b ( c"), "a ) b ( c");
        assert_eq!(rules_simplify(&lex, "We agreed (mostly)."), "We agreed.");
        assert_eq!(
            rules_simplify(&lex, "We agreed ( mostly ) ."),
            "We agreed ."
        );
    }

    #[test]
    fn relative_clause_split() {
        let lex = Lexicon::new();
        assert_eq!(
            rules_simplify(&lex, "She adopted a dog, which barked all night."),
            "She adopted a dog. Dog barked all night."
        );
        assert_eq!(
            rules_simplify(&lex, "One, which two, which three"),
            "One. One two, which three"
        );
        assert_eq!(rules_simplify(&lex, ", which is odd"), ", which is odd");
    }

    #[test]
    fn lexicon_file() {
        let lex = Lexicon::parse("# comment\npurchase\tbuy\n\nutilize\tuse\nremove\t\n").unwrap();
        assert_eq!(lex.len(), 3);
        assert_eq!(lex.get("Utilize"), Some("use"));
        assert_eq!(rules_simplify(&lex, "remove this"), "this");
        assert_eq!(Lexicon::parse("a\tb\nno tab here").unwrap_err().0, 2);
        assert_eq!(Lexicon::parse("two words\tx").unwrap_err().0, 1);
    }

    proptest! {
        #[test]
        fn lexicon_only_is_deterministic_and_idempotent(
            words in prop::collection::vec(prop::sample::select(vec!["Big", "large", "huge", "dog", "ran", "FAST", "quick", "."]), 0..12)
        ) {
            let lex: Lexicon = [("large", "big"), ("huge", "big"), ("quick", "fast")].into_iter().collect();
            let text = words.join(" ");
            let once = rules_simplify(&lex, &text);
            prop_assert_eq!(&once, &rules_simplify(&lex, &text));
            prop_assert_eq!(&once, &rules_simplify(&lex, &once));
        }
    }
}
