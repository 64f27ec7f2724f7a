//! Entity preservation for relation examples.
//!
//! A simplification of a relation sentence is usable only if both the
//! subject and the object still occur in it. Matching is done on tokens
//! produced by the shared tokenizer: exact first, then case-insensitive.
//! When an entity occurs several times the earliest usable occurrence wins.

use serde::{Deserialize, Serialize};

use crate::backend::SimplifyOutcome;
use crate::dataset::{Dataset, Entity, Examples, RelationExample, Span};
use crate::metrics::{tokenize, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailReason {
    SubjectMissing,
    ObjectMissing,
    SpansOverlap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreservationVerdict {
    Pass {
        tokens: TokenSeq,
        subj_span: Span,
        obj_span: Span,
    },
    Fail(FailReason),
}

impl PreservationVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, PreservationVerdict::Pass { .. })
    }
}

fn eq_exact(a: &str, b: &str) -> bool {
    a == b
}

fn eq_folded(a: &str, b: &str) -> bool {
    a == b || a.to_lowercase() == b.to_lowercase()
}

fn occurrences<'a>(
    haystack: &'a [String],
    needle: &'a [String],
    eq: fn(&str, &str) -> bool,
) -> impl Iterator<Item = Span> + 'a {
    let last = (haystack.len() + 1).saturating_sub(needle.len());
    (0..last)
        .filter(move |&i| {
            !needle.is_empty()
                && haystack[i..i + needle.len()]
                    .iter()
                    .zip(needle)
                    .all(|(h, n)| eq(h, n))
        })
        .map(move |i| Span::new(i, i + needle.len() - 1))
}

/// All occurrences under exact matching, or, when there are none, under
/// case-insensitive matching.
fn candidates(haystack: &[String], needle: &[String]) -> Vec<Span> {
    let exact: Vec<Span> = occurrences(haystack, needle, eq_exact).collect();
    if !exact.is_empty() {
        return exact;
    }
    occurrences(haystack, needle, eq_folded).collect()
}

/// First contiguous occurrence of `needle` in `haystack`; exact match is
/// tried before a case-insensitive one. The end index is inclusive.
pub fn relocate_span(haystack: &[String], needle: &[String]) -> Option<Span> {
    assert!(!needle.is_empty(), "needle must not be empty");
    candidates(haystack, needle).into_iter().next()
}

/// Checks that `simplified` still contains both entities of `example` and
/// returns their new spans.
///
/// Subject occurrences are tried in order; for each, the first object
/// occurrence that does not overlap it is taken. If every object
/// occurrence overlaps every subject occurrence the verdict is
/// `SpansOverlap`.
pub fn check_preservation(example: &RelationExample, simplified: &str) -> PreservationVerdict {
    let tokens = tokenize(simplified);
    // Entity surfaces go through the same tokenizer as the sentence.
    let subject: TokenSeq = example.surface(Entity::Subject).iter().collect();
    let object: TokenSeq = example.surface(Entity::Object).iter().collect();

    let subjects = candidates(&tokens, &subject);
    if subjects.is_empty() {
        return PreservationVerdict::Fail(FailReason::SubjectMissing);
    }
    let objects = candidates(&tokens, &object);
    if objects.is_empty() {
        return PreservationVerdict::Fail(FailReason::ObjectMissing);
    }
    for s in &subjects {
        if let Some(o) = objects.iter().find(|o| !o.overlaps(s)) {
            return PreservationVerdict::Pass {
                subj_span: *s,
                obj_span: *o,
                tokens,
            };
        }
    }
    PreservationVerdict::Fail(FailReason::SpansOverlap)
}

/// The simplified counterpart of `example`, if preservation passes.
/// Per-token annotations are dropped because they no longer line up.
pub fn simplified_example(
    example: &RelationExample,
    simplified: &str,
    id: String,
) -> Option<RelationExample> {
    match check_preservation(example, simplified) {
        PreservationVerdict::Pass {
            tokens,
            subj_span,
            obj_span,
        } => Some(RelationExample {
            id,
            tokens,
            subj_span,
            obj_span,
            subj_type: example.subj_type.clone(),
            obj_type: example.obj_type.clone(),
            relation: example.relation.clone(),
            annotations: None,
        }),
        PreservationVerdict::Fail(_) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    pub attempted: usize,
    pub passed: usize,
    pub pass_rate: f64,
    /// Outcomes whose text actually changed, and how many of those passed.
    pub changed: usize,
    pub changed_passed: usize,
    pub changed_pass_rate: Option<f64>,
    /// Outcomes that came back with a backend error.
    pub errors: usize,
}

impl FilterStats {
    /// `attempted=N passed=M rate=P%`
    pub fn summary_line(&self) -> String {
        format!(
            "attempted={} passed={} rate={:.2}%",
            self.attempted,
            self.passed,
            self.pass_rate * 100.0
        )
    }

    pub fn changed_line(&self) -> String {
        let rate = self
            .changed_pass_rate
            .map_or("n/a".to_string(), |r| format!("{:.2}%", r * 100.0));
        format!(
            "changed={} changed_passed={} changed_rate={rate} errors={}",
            self.changed, self.changed_passed, self.errors
        )
    }
}

/// Counts how many outcomes preserve their example's entities.
/// Unchanged (identity) simplifications count as preserved.
pub fn filter_stats(
    dataset: &Dataset,
    outcomes: &[SimplifyOutcome],
) -> Result<FilterStats, String> {
    let Examples::Relation(examples) = &dataset.examples else {
        return Err(format!(
            "filter statistics need a relation dataset, got {}",
            dataset.task()
        ));
    };
    if examples.len() != outcomes.len() {
        return Err(format!(
            "{} outcomes for {} examples",
            outcomes.len(),
            examples.len()
        ));
    }
    let mut stats = FilterStats {
        attempted: examples.len(),
        passed: 0,
        pass_rate: 0.0,
        changed: 0,
        changed_passed: 0,
        changed_pass_rate: None,
        errors: 0,
    };
    for (example, outcome) in examples.iter().zip(outcomes) {
        let passed = check_preservation(example, &outcome.simplified).passed();
        stats.passed += passed as usize;
        stats.errors += outcome.error.is_some() as usize;
        if outcome.changed {
            stats.changed += 1;
            stats.changed_passed += passed as usize;
        }
    }
    if stats.attempted > 0 {
        stats.pass_rate = stats.passed as f64 / stats.attempted as f64;
    }
    if stats.changed > 0 {
        stats.changed_pass_rate = Some(stats.changed_passed as f64 / stats.changed as f64);
    }
    Ok(stats)
}
