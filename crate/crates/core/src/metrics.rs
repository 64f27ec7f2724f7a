//! Tokenization, clipped n-gram precision, sentence BLEU and the
//! original-vs-simplified divergence report.
//!
//! BLEU is used here as a distance between a simplification and its
//! source: the simplified text is the candidate, the original text the
//! reference. A score of 1.0 means the simplifier left the sentence alone.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

/// Characters split off the edges of a whitespace chunk.
const DETACHED: &[char] = &['.', ',', ';', ':', '!', '?', '"', '(', ')'];

/// An ordered token sequence. Tokens are never empty and never contain
/// whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    /// Builds a sequence from tokens that already satisfy the invariants.
    ///
    /// Returns `None` if any token is empty or contains whitespace.
    pub fn new(tokens: Vec<String>) -> Option<Self> {
        tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace))
            .then_some(Self(tokens))
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Tokens joined by single spaces.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }

    fn lowercased(&self) -> TokenSeq {
        TokenSeq(self.0.iter().map(|t| t.to_lowercase()).collect())
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl<S: AsRef<str>> FromIterator<S> for TokenSeq {
    /// Collects through [`tokenize`] so the invariants always hold.
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut out = Vec::new();
        for s in iter {
            out.extend(tokenize(s.as_ref()).0);
        }
        TokenSeq(out)
    }
}

/// Splits on unicode whitespace and detaches `. , ; : ! ? " ( )` when they
/// lead or trail a chunk.
pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut rest = chunk;
        while let Some(c) = rest.chars().next().filter(|c| DETACHED.contains(c)) {
            tokens.push(c.to_string());
            rest = &rest[c.len_utf8()..];
        }
        let mut trailing = Vec::new();
        while let Some(c) = rest.chars().next_back().filter(|c| DETACHED.contains(c)) {
            trailing.push(c.to_string());
            rest = &rest[..rest.len() - c.len_utf8()];
        }
        if !rest.is_empty() {
            tokens.push(rest.to_string());
        }
        tokens.extend(trailing.into_iter().rev());
    }
    TokenSeq(tokens)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches of `candidate` against `reference`, and the
/// number of candidate n-grams.
pub fn modified_precision(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    assert!(n >= 1, "n-gram order must be at least 1");
    let total = (candidate.len() + 1).saturating_sub(n);
    let reference_counts = ngram_counts(reference, n);
    let clipped = ngram_counts(candidate, n)
        .into_iter()
        .map(|(gram, count)| count.min(reference_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    (clipped, total)
}

pub fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len >= reference_len {
        1.0
    } else if candidate_len == 0 {
        0.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    }
}

/// What to do when the candidate is too short for the configured order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroPolicy {
    /// Any zero precision up to `max_order` yields 0.
    ScoreZero,
    /// Orders beyond the candidate length are dropped from the mean.
    CapOrder,
}

impl fmt::Display for ZeroPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZeroPolicy::ScoreZero => "score-zero",
            ZeroPolicy::CapOrder => "cap-order",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_order: usize,
    pub zero_policy: ZeroPolicy,
    pub lowercase: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            zero_policy: ZeroPolicy::CapOrder,
            lowercase: true,
        }
    }
}

/// Sentence-level BLEU in `[0, 1]`: uniform-weight geometric mean of the
/// modified precisions times the brevity penalty.
pub fn sentence_bleu(candidate: &[String], reference: &[String], cfg: &BleuConfig) -> f64 {
    assert!(cfg.max_order >= 1, "max_order must be at least 1");
    if candidate.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let (candidate, reference) = if cfg.lowercase {
        (
            TokenSeq(candidate.to_vec()).lowercased(),
            TokenSeq(reference.to_vec()).lowercased(),
        )
    } else {
        (TokenSeq(candidate.to_vec()), TokenSeq(reference.to_vec()))
    };
    let order = match cfg.zero_policy {
        ZeroPolicy::ScoreZero => cfg.max_order,
        ZeroPolicy::CapOrder => cfg.max_order.min(candidate.len()),
    };
    if order == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=order {
        let (clipped, total) = modified_precision(&candidate, &reference, n);
        if clipped == 0 || total == 0 {
            return 0.0;
        }
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let score = brevity_penalty(candidate.len(), reference.len()) * (log_sum / order as f64).exp();
    score.clamp(0.0, 1.0)
}

/// Mean and population standard deviation of the BLEU scores for one
/// text field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDivergence {
    pub field: String,
    pub count: usize,
    /// Absent when `count` is zero.
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub fields: Vec<FieldDivergence>,
    pub config: BleuConfig,
}

/// Scores every `(field, original, simplified)` triple and summarises per
/// field, in first-seen field order.
pub fn divergence_report<F, O, S>(pairs: &[(F, O, S)], cfg: &BleuConfig) -> DivergenceReport
where
    F: AsRef<str>,
    O: AsRef<str>,
    S: AsRef<str>,
{
    divergence_report_for::<&str, F, O, S>(&[], pairs, cfg)
}

/// Like [`divergence_report`], but `requested` fields are always listed
/// first, with count 0 when no pair mentions them.
pub fn divergence_report_for<R, F, O, S>(
    requested: &[R],
    pairs: &[(F, O, S)],
    cfg: &BleuConfig,
) -> DivergenceReport
where
    R: AsRef<str>,
    F: AsRef<str>,
    O: AsRef<str>,
    S: AsRef<str>,
{
    let mut order: Vec<String> = requested.iter().map(|r| r.as_ref().to_string()).collect();
    let mut scores: HashMap<String, Vec<f64>> = HashMap::new();
    for (field, original, simplified) in pairs {
        let field = field.as_ref();
        if !order.iter().any(|f| f == field) {
            order.push(field.to_string());
        }
        let score = sentence_bleu(
            &tokenize(simplified.as_ref()),
            &tokenize(original.as_ref()),
            cfg,
        );
        scores.entry(field.to_string()).or_default().push(score);
    }
    let fields = order
        .into_iter()
        .map(|field| {
            let values = scores.remove(&field).unwrap_or_default();
            let (mean, std) = mean_std(&values).map_or((None, None), |(m, s)| (Some(m), Some(s)));
            FieldDivergence {
                field,
                count: values.len(),
                mean,
                std,
            }
        })
        .collect();
    DivergenceReport {
        fields,
        config: *cfg,
    }
}

fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

impl DivergenceReport {
    /// Plain-text table, two decimals per value.
    pub fn render_text(&self) -> String {
        let width = self
            .fields
            .iter()
            .map(|f| f.field.chars().count())
            .max()
            .unwrap_or(0)
            .max("field".len());
        let mut out = format!("{:<width$}  {:>6}  bleu (mean ± std)\n", "field", "count");
        for f in &self.fields {
            let value = match (f.mean, f.std) {
                (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
                _ => "n/a".to_string(),
            };
            out.push_str(&format!("{:<width$}  {:>6}  {value}\n", f.field, f.count));
        }
        out.push_str(&format!(
            "sentence BLEU, simplified vs original; max_order={} zero_policy={} lowercase={}; std is population\n",
            self.config.max_order, self.config.zero_policy, self.config.lowercase
        ));
        out
    }

    /// Structured form: one record per field plus the configuration echo.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "fields": self.fields,
            "config": self.config,
            "std": "population",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(words: &[&str]) -> TokenSeq {
        TokenSeq(words.iter().map(|w| w.to_string()).collect())
    }

    fn words(t: &TokenSeq) -> Vec<&str> {
        t.iter().map(String::as_str).collect()
    }

    /// Brute-force clipped count: enumerate candidate positions and count
    /// occurrences by direct slice comparison.
    fn naive_precision(c: &[String], r: &[String], n: usize) -> (usize, usize) {
        if c.len() < n {
            return (0, 0);
        }
        let grams: Vec<&[String]> = (0..=c.len() - n).map(|i| &c[i..i + n]).collect();
        let mut seen: Vec<&[String]> = Vec::new();
        let mut clipped = 0;
        for g in &grams {
            if seen.contains(g) {
                continue;
            }
            seen.push(g);
            let in_c = grams.iter().filter(|h| *h == g).count();
            let in_r = if r.len() < n {
                0
            } else {
                (0..=r.len() - n).filter(|&i| &r[i..i + n] == *g).count()
            };
            clipped += in_c.min(in_r);
        }
        (clipped, grams.len())
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n").is_empty());
        assert_eq!(words(&tokenize("the cat sat.")), ["the", "cat", "sat", "."]);
        assert_eq!(
            words(&tokenize("Douglas Flint, chairman")),
            ["Douglas", "Flint", ",", "chairman"]
        );
        assert_eq!(
            words(&tokenize("(\"quoted!\") U.S. e.g.,")),
            ["(", "\"", "quoted", "!", "\"", ")", "U.S", ".", "e.g", ".", ","]
        );
        assert_eq!(words(&tokenize("...")), [".", ".", "."]);
    }

    #[test]
    fn modified_precision_examples() {
        assert_eq!(
            modified_precision(&seq(&["the", "the", "the"]), &seq(&["the", "cat"]), 1),
            (1, 3)
        );
        assert_eq!(
            modified_precision(&seq(&["a", "b"]), &seq(&["a", "b"]), 2),
            (1, 1)
        );
        assert_eq!(
            modified_precision(&seq(&["x", "y"]), &seq(&["a", "b"]), 1),
            (0, 2)
        );
        assert_eq!(modified_precision(&seq(&["a"]), &seq(&["a"]), 3), (0, 0));
        let sevens = seq(&["the"; 7]);
        assert_eq!(
            modified_precision(&sevens, &seq(&["the", "cat", "is", "on", "the", "mat"]), 1),
            (2, 7)
        );
    }

    #[test]
    fn brevity_penalty_examples() {
        assert_eq!(brevity_penalty(6, 6), 1.0);
        assert!((brevity_penalty(3, 6) - 0.367_879_441_171_442_33).abs() < 1e-9);
        assert_eq!(brevity_penalty(0, 5), 0.0);
        assert_eq!(brevity_penalty(0, 0), 1.0);
        assert_eq!(brevity_penalty(9, 2), 1.0);
    }

    #[test]
    fn sentence_bleu_examples() {
        let cfg = BleuConfig::default();
        let s = seq(&["the", "cat", "sat"]);
        assert_eq!(sentence_bleu(&s, &s, &cfg), 1.0);
        let two = BleuConfig {
            max_order: 2,
            ..cfg
        };
        let got = sentence_bleu(&seq(&["the", "cat"]), &s, &two);
        assert!((got - 0.606_530_659_712_633_4).abs() < 1e-6);
        assert_eq!(
            sentence_bleu(&seq(&["x", "y"]), &seq(&["a", "b"]), &cfg),
            0.0
        );
        assert_eq!(sentence_bleu(&seq(&[]), &seq(&[]), &cfg), 1.0);
        assert_eq!(sentence_bleu(&seq(&[]), &s, &cfg), 0.0);
    }

    #[test]
    fn zero_policy_differs_on_short_candidates() {
        let reference = seq(&["the", "cat", "sat"]);
        let candidate = seq(&["the", "cat"]);
        let cap = BleuConfig::default();
        let strict = BleuConfig {
            zero_policy: ZeroPolicy::ScoreZero,
            ..cap
        };
        assert!(
            (sentence_bleu(&candidate, &reference, &cap) - 0.606_530_659_712_633_4).abs() < 1e-9
        );
        assert_eq!(sentence_bleu(&candidate, &reference, &strict), 0.0);
    }

    #[test]
    fn lowercase_flag() {
        let a = seq(&["The", "Cat"]);
        let b = seq(&["the", "cat"]);
        assert_eq!(sentence_bleu(&a, &b, &BleuConfig::default()), 1.0);
        let cased = BleuConfig {
            lowercase: false,
            ..BleuConfig::default()
        };
        assert_eq!(sentence_bleu(&a, &b, &cased), 0.0);
    }

    #[test]
    fn report_examples() {
        let cfg = BleuConfig::default();
        let same = [("sentence", "a b c", "a b c"), ("sentence", "d e", "d e")];
        let r = divergence_report(&same, &cfg);
        assert_eq!(r.fields.len(), 1);
        assert_eq!(r.fields[0].mean, Some(1.0));
        assert_eq!(r.fields[0].std, Some(0.0));

        let two = BleuConfig {
            max_order: 2,
            ..cfg
        };
        let mixed = [("s", "the cat sat", "the cat"), ("s", "a b", "a b")];
        let r = divergence_report(&mixed, &two);
        assert!((r.fields[0].mean.unwrap() - 0.803_266).abs() < 1e-6);
        assert!((r.fields[0].std.unwrap() - 0.196_734).abs() < 1e-6);
        assert!(r.render_text().contains("0.80 ± 0.20"));
    }

    #[test]
    fn report_field_order_and_missing_fields() {
        let cfg = BleuConfig::default();
        let pairs = [
            ("hypothesis", "a", "a"),
            ("premise", "b", "b"),
            ("hypothesis", "c", "c"),
        ];
        let r = divergence_report_for(&["premise", "extra"], &pairs, &cfg);
        let names: Vec<_> = r.fields.iter().map(|f| f.field.as_str()).collect();
        assert_eq!(names, ["premise", "extra", "hypothesis"]);
        assert_eq!(r.fields[1].count, 0);
        assert_eq!(r.fields[1].mean, None);
        assert_eq!(r.fields[2].count, 2);
        assert!(r.render_text().contains("n/a"));
        let single = divergence_report(&[("x", "a b", "a")], &cfg);
        assert_eq!(single.fields[0].std, Some(0.0));
    }

    fn token_seq(max_len: usize) -> impl Strategy<Value = TokenSeq> {
        prop::collection::vec(
            prop::sample::select(vec!["a", "b", "c", "d", "E", "f"]),
            0..max_len,
        )
        .prop_map(|v| seq(&v))
    }

    proptest! {
        #[test]
        fn bleu_is_bounded(c in token_seq(12), r in token_seq(12), order in 1usize..6, strict in any::<bool>()) {
            let cfg = BleuConfig {
                max_order: order,
                zero_policy: if strict { ZeroPolicy::ScoreZero } else { ZeroPolicy::CapOrder },
                lowercase: true,
            };
            let s = sentence_bleu(&c, &r, &cfg);
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn bleu_identity(t in token_seq(12), order in 1usize..6) {
            prop_assume!(!t.is_empty());
            for policy in [ZeroPolicy::ScoreZero, ZeroPolicy::CapOrder] {
                let cfg = BleuConfig { max_order: order, zero_policy: policy, lowercase: true };
                // Score-zero needs enough tokens to have every order present.
                if policy == ZeroPolicy::ScoreZero && t.len() < order {
                    continue;
                }
                prop_assert_eq!(sentence_bleu(&t, &t, &cfg), 1.0);
            }
        }

        #[test]
        fn precision_matches_brute_force(c in token_seq(8), r in token_seq(8), n in 1usize..5) {
            let (clipped, total) = modified_precision(&c, &r, n);
            prop_assert_eq!((clipped, total), naive_precision(&c, &r, n));
            prop_assert!(clipped <= total);
            // A candidate that is a window of the reference matches fully.
            if c.len() >= n && r.windows(c.len()).any(|w| w == &c[..]) {
                prop_assert_eq!(clipped, total);
            }
        }

        #[test]
        fn tokenize_is_idempotent(text in "[a-z.,;:!?\"() \t]{0,40}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join());
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.iter().all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        }

        #[test]
        fn report_matches_naive_recomputation(texts in prop::collection::vec(("[a-c ]{1,12}", "[a-c ]{1,12}"), 1..20)) {
            let cfg = BleuConfig::default();
            let pairs: Vec<_> = texts.iter().map(|(o, s)| ("f", o.as_str(), s.as_str())).collect();
            let r = divergence_report(&pairs, &cfg);
            let scores: Vec<f64> = texts.iter().map(|(o, s)| sentence_bleu(&tokenize(s), &tokenize(o), &cfg)).collect();
            let n = scores.len() as f64;
            let mut mean = 0.0;
            for s in &scores { mean += s / n; }
            let mut var = 0.0;
            for s in &scores { var += (s - mean) * (s - mean) / n; }
            prop_assert!((r.fields[0].mean.unwrap() - mean).abs() < 1e-9);
            prop_assert!((r.fields[0].std.unwrap() - var.sqrt()).abs() < 1e-9);
        }
    }
}
