//! Training-set construction and prediction-time preparation.
//!
//! Three strategies build a training set from a dataset and a simplifier:
//!
//! * append: keep every original and add simplified copies of a seeded
//!   sample (ids get a suffix);
//! * swap: replace a seeded sample in place by its simplified form;
//! * replace-if-preserved: simplify everything, keep a simplification only
//!   where it preserves both relation entities.
//!
//! A simplification that errors or leaves the text unchanged never produces
//! a new or replaced example. Relation examples are rewritten only when the
//! entity spans can be relocated in the simplified sentence.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{simplify_batch, Simplifier, SimplifyOutcome};
use crate::dataset::{Dataset, Examples, GenericExample, NliExample, RelationExample, Task};
use crate::error::{AugmentError, PlanError};
use crate::preservation::simplified_example;

pub const DEFAULT_ID_SUFFIX: &str = "-simp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Append,
    Swap,
    ReplaceIfPreserved,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Append => "append",
            Strategy::Swap => "swap",
            Strategy::ReplaceIfPreserved => "replace-if-preserved",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "append" => Ok(Strategy::Append),
            "swap" => Ok(Strategy::Swap),
            "replace-if-preserved" => Ok(Strategy::ReplaceIfPreserved),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    EntityPreservation,
    None,
}

impl FilterMode {
    /// The only filter each task supports.
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Relation => FilterMode::EntityPreservation,
            Task::Nli | Task::Generic => FilterMode::None,
        }
    }
}

impl FromStr for FilterMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entity-preservation" => Ok(FilterMode::EntityPreservation),
            "none" => Ok(FilterMode::None),
            other => Err(format!("unknown filter {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub strategy: Strategy,
    /// Share of examples to simplify; unused by replace-if-preserved.
    pub fraction: Option<f64>,
    pub seed: u64,
    pub filter: FilterMode,
    /// Text fields to simplify. Empty means the task default: the sentence
    /// for relation data, premise and hypothesis for NLI, every field for
    /// generic data.
    pub fields: Vec<String>,
    pub id_suffix: String,
}

impl AugmentationPlan {
    pub fn new(strategy: Strategy, fraction: Option<f64>, seed: u64, filter: FilterMode) -> Self {
        Self {
            strategy,
            fraction,
            seed,
            filter,
            fields: Vec::new(),
            id_suffix: DEFAULT_ID_SUFFIX.to_string(),
        }
    }

    /// Checks the plan on its own and against `task`.
    pub fn validate(&self, task: Task) -> Result<(), PlanError> {
        match (self.strategy, self.fraction) {
            (Strategy::Append | Strategy::Swap, None) => {
                return Err(PlanError::MissingFraction(self.strategy.as_str()))
            }
            (_, Some(f)) if !(0.0..=1.0).contains(&f) => {
                return Err(PlanError::FractionOutOfRange(f))
            }
            _ => {}
        }
        match (task, self.filter) {
            (Task::Relation, FilterMode::None) => return Err(PlanError::Incompatible(
                "relation data needs filter entity-preservation: spans cannot be placed otherwise"
                    .into(),
            )),
            (Task::Nli | Task::Generic, FilterMode::EntityPreservation) => {
                return Err(PlanError::Incompatible(format!(
                    "filter entity-preservation applies only to relation data, not {task}"
                )))
            }
            _ => {}
        }
        if self.strategy == Strategy::ReplaceIfPreserved && task != Task::Relation {
            return Err(PlanError::Incompatible(format!(
                "replace-if-preserved needs relation data, not {task}"
            )));
        }
        if self.strategy == Strategy::Append && self.id_suffix.is_empty() {
            return Err(PlanError::Incompatible(
                "append needs a non-empty id suffix".into(),
            ));
        }
        resolve_fields(task, &self.fields)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    Original,
    Simplified,
    SimplifiedComplement,
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(EvalMode::Original),
            "simplified" => Ok(EvalMode::Simplified),
            "simplified-complement" => Ok(EvalMode::SimplifiedComplement),
            other => Err(format!("unknown eval mode {other:?}")),
        }
    }
}

/// Which text fields of an example get simplified.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Fields {
    Sentence,
    Nli {
        premise: bool,
        hypothesis: bool,
    },
    /// `None` selects every field of each example.
    Generic(Option<Vec<String>>),
}

fn resolve_fields(task: Task, fields: &[String]) -> Result<Fields, PlanError> {
    match task {
        Task::Relation => {
            if fields.iter().all(|f| f == "sentence" || f == "token") {
                Ok(Fields::Sentence)
            } else {
                Err(PlanError::Incompatible(
                    "relation data has a single field: sentence".into(),
                ))
            }
        }
        Task::Nli => {
            if fields.is_empty() {
                return Ok(Fields::Nli {
                    premise: true,
                    hypothesis: true,
                });
            }
            let mut premise = false;
            let mut hypothesis = false;
            for f in fields {
                match f.as_str() {
                    "premise" | "sentence1" => premise = true,
                    "hypothesis" | "sentence2" => hypothesis = true,
                    other => {
                        return Err(PlanError::Incompatible(format!(
                            "unknown NLI field {other:?} (expected premise or hypothesis)"
                        )))
                    }
                }
            }
            Ok(Fields::Nli {
                premise,
                hypothesis,
            })
        }
        Task::Generic => Ok(Fields::Generic(
            (!fields.is_empty()).then(|| fields.to_vec()),
        )),
    }
}

/// Picks `floor(fraction * n)` of `0..n`, returned in ascending order.
///
/// The pick is the prefix of a permutation shuffled by a ChaCha8 generator
/// seeded with `seed`, so equal arguments always give equal sets. A
/// product within 1e-9 below an integer is rounded up to absorb binary
/// representation error in decimal fractions such as 0.29.
pub fn select_indices(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    assert!(
        (0.0..=1.0).contains(&fraction),
        "fraction must lie in [0, 1]"
    );
    let k = ((fraction * n as f64 + 1e-9).floor() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Counters for one run, echoed into the manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub input: usize,
    pub output: usize,
    /// Examples chosen for simplification.
    pub selected: usize,
    pub appended: usize,
    pub swapped: usize,
    /// Backend errors on individual texts.
    pub failed: usize,
    /// Simplifications identical to their source.
    pub unchanged: usize,
    /// Simplifications rejected by the preservation filter.
    pub filtered: usize,
}

enum Attempt<T> {
    Rewritten(T),
    Failed,
    Unchanged,
    Filtered,
}

impl RunStats {
    fn count<T>(&mut self, attempt: &Attempt<T>) {
        match attempt {
            Attempt::Rewritten(_) => {}
            Attempt::Failed => self.failed += 1,
            Attempt::Unchanged => self.unchanged += 1,
            Attempt::Filtered => self.filtered += 1,
        }
    }
}

fn field_outcome(outcome: &SimplifyOutcome, index: usize) -> Result<Option<String>, ()> {
    if outcome.error.is_some() {
        log::debug!("record {index}: backend error, simplification skipped");
        return Err(());
    }
    Ok(outcome.changed.then(|| outcome.simplified.clone()))
}

fn attempt_relation(
    examples: &[RelationExample],
    selected: &[usize],
    backend: &mut dyn Simplifier,
) -> Result<Vec<Attempt<RelationExample>>, AugmentError> {
    let texts: Vec<String> = selected.iter().map(|&i| examples[i].text()).collect();
    let outcomes = simplify_batch(backend, &texts)?;
    Ok(selected
        .iter()
        .zip(&outcomes)
        .map(|(&i, outcome)| match field_outcome(outcome, i) {
            Err(()) => Attempt::Failed,
            Ok(None) => Attempt::Unchanged,
            Ok(Some(text)) => match simplified_example(&examples[i], &text, examples[i].id.clone())
            {
                Some(e) => Attempt::Rewritten(e),
                None => {
                    log::debug!("record {i}: simplification lost an entity");
                    Attempt::Filtered
                }
            },
        })
        .collect())
}

/// Simplifies the chosen fields of each selected example. A record counts
/// as rewritten when no field failed and at least one changed.
fn attempt_fields<E>(
    examples: &[E],
    selected: &[usize],
    backend: &mut dyn Simplifier,
    fields_of: impl Fn(&E) -> Vec<(String, String)>,
    rebuild: impl Fn(&E, &HashMap<String, String>) -> E,
) -> Result<Vec<Attempt<E>>, AugmentError> {
    let per_example: Vec<Vec<(String, String)>> =
        selected.iter().map(|&i| fields_of(&examples[i])).collect();
    let texts: Vec<&str> = per_example
        .iter()
        .flatten()
        .map(|(_, t)| t.as_str())
        .collect();
    let outcomes = simplify_batch(backend, &texts)?;
    let mut outcomes = outcomes.iter();
    let mut attempts = Vec::with_capacity(selected.len());
    for (&i, fields) in selected.iter().zip(&per_example) {
        let mut replaced = HashMap::new();
        let mut failed = false;
        for (name, _) in fields {
            let outcome = outcomes.next().expect("one outcome per field");
            match field_outcome(outcome, i) {
                Err(()) => failed = true,
                Ok(Some(text)) => {
                    replaced.insert(name.clone(), text);
                }
                Ok(None) => {}
            }
        }
        attempts.push(if failed {
            Attempt::Failed
        } else if replaced.is_empty() {
            Attempt::Unchanged
        } else {
            Attempt::Rewritten(rebuild(&examples[i], &replaced))
        });
    }
    Ok(attempts)
}

fn attempt_nli(
    examples: &[NliExample],
    selected: &[usize],
    premise: bool,
    hypothesis: bool,
    backend: &mut dyn Simplifier,
) -> Result<Vec<Attempt<NliExample>>, AugmentError> {
    attempt_fields(
        examples,
        selected,
        backend,
        |e| {
            let mut f = Vec::new();
            if premise {
                f.push(("premise".to_string(), e.premise.clone()));
            }
            if hypothesis {
                f.push(("hypothesis".to_string(), e.hypothesis.clone()));
            }
            f
        },
        |e, replaced| {
            let mut e = e.clone();
            if let Some(p) = replaced.get("premise") {
                e.premise = p.clone();
            }
            if let Some(h) = replaced.get("hypothesis") {
                e.hypothesis = h.clone();
            }
            e
        },
    )
}

fn attempt_generic(
    examples: &[GenericExample],
    selected: &[usize],
    names: &Option<Vec<String>>,
    backend: &mut dyn Simplifier,
) -> Result<Vec<Attempt<GenericExample>>, AugmentError> {
    attempt_fields(
        examples,
        selected,
        backend,
        |e| {
            e.fields
                .iter()
                .filter(|(k, v)| {
                    names.as_ref().is_none_or(|n| n.contains(k)) && !v.trim().is_empty()
                })
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect()
        },
        |e, replaced| {
            let mut e = e.clone();
            for (k, v) in replaced {
                e.fields.insert(k.clone(), v.clone());
            }
            e
        },
    )
}

/// How rewritten examples are merged back.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Merge {
    Append,
    InPlace,
}

trait Keyed: Clone {
    fn set_id(&mut self, id: String);
    fn id(&self) -> &str;
}

impl Keyed for RelationExample {
    fn set_id(&mut self, id: String) {
        self.id = id;
    }
    fn id(&self) -> &str {
        &self.id
    }
}

impl Keyed for NliExample {
    fn set_id(&mut self, id: String) {
        self.pair_id = id;
    }
    fn id(&self) -> &str {
        &self.pair_id
    }
}

impl Keyed for GenericExample {
    fn set_id(&mut self, id: String) {
        self.id = id;
    }
    fn id(&self) -> &str {
        &self.id
    }
}

fn merge<E: Keyed>(
    examples: &[E],
    selected: &[usize],
    attempts: Vec<Attempt<E>>,
    how: Merge,
    id_suffix: &str,
    stats: &mut RunStats,
) -> Vec<E> {
    let mut out = examples.to_vec();
    for (&i, attempt) in selected.iter().zip(attempts) {
        stats.count(&attempt);
        if let Attempt::Rewritten(mut e) = attempt {
            match how {
                Merge::Append => {
                    e.set_id(format!("{}{id_suffix}", examples[i].id()));
                    out.push(e);
                    stats.appended += 1;
                }
                Merge::InPlace => {
                    e.set_id(examples[i].id().to_string());
                    out[i] = e;
                    stats.swapped += 1;
                }
            }
        }
    }
    out
}

fn run(
    dataset: &Dataset,
    backend: &mut dyn Simplifier,
    selected: &[usize],
    fields: &Fields,
    how: Merge,
    id_suffix: &str,
) -> Result<(Dataset, RunStats), AugmentError> {
    let mut stats = RunStats {
        input: dataset.len(),
        selected: selected.len(),
        ..RunStats::default()
    };
    let examples = match (&dataset.examples, fields) {
        (Examples::Relation(v), _) => {
            let attempts = attempt_relation(v, selected, backend)?;
            Examples::Relation(merge(v, selected, attempts, how, id_suffix, &mut stats))
        }
        (
            Examples::Nli(v),
            Fields::Nli {
                premise,
                hypothesis,
            },
        ) => {
            let attempts = attempt_nli(v, selected, *premise, *hypothesis, backend)?;
            Examples::Nli(merge(v, selected, attempts, how, id_suffix, &mut stats))
        }
        (Examples::Generic(v), Fields::Generic(names)) => {
            let attempts = attempt_generic(v, selected, names, backend)?;
            Examples::Generic(merge(v, selected, attempts, how, id_suffix, &mut stats))
        }
        _ => unreachable!("fields resolved for the dataset's task"),
    };
    let out = Dataset::new(examples, dataset.provenance.clone());
    out.validate()?;
    stats.output = out.len();
    Ok((out, stats))
}

/// Original examples followed by simplified copies of a seeded sample.
pub fn augment_append(
    dataset: &Dataset,
    backend: &mut dyn Simplifier,
    plan: &AugmentationPlan,
) -> Result<(Dataset, RunStats), AugmentError> {
    if plan.strategy != Strategy::Append {
        return Err(PlanError::Incompatible(format!(
            "augment_append given a {} plan",
            plan.strategy
        ))
        .into());
    }
    plan.validate(dataset.task())?;
    let fields = resolve_fields(dataset.task(), &plan.fields)?;
    let selected = select_indices(dataset.len(), plan.fraction.unwrap_or(0.0), plan.seed);
    run(
        dataset,
        backend,
        &selected,
        &fields,
        Merge::Append,
        &plan.id_suffix,
    )
}

/// Same length and order as the input, with a seeded sample replaced by
/// its simplified form.
pub fn augment_swap(
    dataset: &Dataset,
    backend: &mut dyn Simplifier,
    plan: &AugmentationPlan,
) -> Result<(Dataset, RunStats), AugmentError> {
    if plan.strategy != Strategy::Swap {
        return Err(PlanError::Incompatible(format!(
            "augment_swap given a {} plan",
            plan.strategy
        ))
        .into());
    }
    plan.validate(dataset.task())?;
    let fields = resolve_fields(dataset.task(), &plan.fields)?;
    let selected = select_indices(dataset.len(), plan.fraction.unwrap_or(0.0), plan.seed);
    run(dataset, backend, &selected, &fields, Merge::InPlace, "")
}

/// Every relation example replaced by its simplification when that
/// changes the text and keeps both entities; otherwise kept as is.
pub fn replace_if_preserved(
    dataset: &Dataset,
    backend: &mut dyn Simplifier,
) -> Result<(Dataset, RunStats), AugmentError> {
    if dataset.task() != Task::Relation {
        return Err(PlanError::Incompatible(format!(
            "replace-if-preserved needs relation data, not {}",
            dataset.task()
        ))
        .into());
    }
    let all: Vec<usize> = (0..dataset.len()).collect();
    run(
        dataset,
        backend,
        &all,
        &Fields::Sentence,
        Merge::InPlace,
        "",
    )
}

/// Runs whichever strategy `plan` names.
pub fn augment(
    dataset: &Dataset,
    backend: &mut dyn Simplifier,
    plan: &AugmentationPlan,
) -> Result<(Dataset, RunStats), AugmentError> {
    match plan.strategy {
        Strategy::Append => augment_append(dataset, backend, plan),
        Strategy::Swap => augment_swap(dataset, backend, plan),
        Strategy::ReplaceIfPreserved => {
            plan.validate(dataset.task())?;
            replace_if_preserved(dataset, backend)
        }
    }
}

/// Evaluation data in the requested form; ids, labels and length are kept.
///
/// `Simplified` rewrites every text field and falls back to the original
/// where the backend fails. For relation data a simplification that loses
/// an entity also falls back, since its spans cannot be placed, which
/// makes `Simplified` and `SimplifiedComplement` coincide on that task.
pub fn prepare_eval(
    dataset: &Dataset,
    backend: &mut dyn Simplifier,
    mode: EvalMode,
    fields: &[String],
) -> Result<(Dataset, RunStats), AugmentError> {
    let task = dataset.task();
    match mode {
        EvalMode::Original => {
            let n = dataset.len();
            Ok((
                dataset.clone(),
                RunStats {
                    input: n,
                    output: n,
                    ..RunStats::default()
                },
            ))
        }
        EvalMode::Simplified => {
            let fields = resolve_fields(task, fields)?;
            let all: Vec<usize> = (0..dataset.len()).collect();
            run(dataset, backend, &all, &fields, Merge::InPlace, "")
        }
        EvalMode::SimplifiedComplement => {
            if task != Task::Relation {
                return Err(PlanError::Incompatible(format!(
                    "simplified-complement needs a task with a preservation filter; {task} has none"
                ))
                .into());
            }
            replace_if_preserved(dataset, backend)
        }
    }
}

/// Provenance record written next to every output dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub task: Task,
    pub input: String,
    pub output: String,
    pub backend: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub plan: Option<AugmentationPlan>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_mode: Option<EvalMode>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub counts: RunStats,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
