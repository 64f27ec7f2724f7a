//! In-memory records for the supported tasks and their file formats.
//!
//! * relation: one JSON array of TACRED-style records (`id`, `token`,
//!   `subj_start`, ..., optional `stanford_pos` / `stanford_ner`). Spans are
//!   inclusive on both ends. Extra keys in real TACRED files are ignored.
//! * nli: one JSON object per line with the MNLI keys `pairID`,
//!   `sentence1`, `sentence2`, `gold_label`, `genre`. Tab-separated MNLI
//!   files with a header row are accepted on read.
//! * generic: one JSON object per line with `id`, `label` and any number of
//!   string-valued text fields.
//!
//! Writers emit one record per line so that records stay byte-comparable
//! across runs.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::DatasetError;
use crate::metrics::TokenSeq;

/// Inclusive token span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotations {
    pub pos: Option<Vec<String>>,
    pub ner: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationExample {
    pub id: String,
    pub tokens: TokenSeq,
    pub subj_span: Span,
    pub obj_span: Span,
    pub subj_type: String,
    pub obj_type: String,
    pub relation: String,
    pub annotations: Option<Annotations>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    Subject,
    Object,
}

impl RelationExample {
    /// Tokens covered by the subject or object span.
    pub fn surface(&self, which: Entity) -> &[String] {
        let span = match which {
            Entity::Subject => self.subj_span,
            Entity::Object => self.obj_span,
        };
        &self.tokens[span.start..=span.end]
    }

    /// The sentence as plain text, tokens separated by single spaces.
    pub fn text(&self) -> String {
        self.tokens.join()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.relation.is_empty() {
            return Err("empty relation label".into());
        }
        let n = self.tokens.len();
        for (name, span) in [("subject", self.subj_span), ("object", self.obj_span)] {
            if span.start > span.end || span.end >= n {
                return Err(format!(
                    "{name} span ({}, {}) out of range for {n} tokens",
                    span.start, span.end
                ));
            }
        }
        if self.subj_span.overlaps(&self.obj_span) {
            return Err("subject and object spans overlap".into());
        }
        if let Some(a) = &self.annotations {
            for (name, tags) in [("stanford_pos", &a.pos), ("stanford_ner", &a.ner)] {
                if let Some(tags) = tags {
                    if tags.len() != n {
                        return Err(format!("{name} has {} tags for {n} tokens", tags.len()));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Contradiction,
    Neutral,
}

impl NliLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            NliLabel::Entailment => "entailment",
            NliLabel::Contradiction => "contradiction",
            NliLabel::Neutral => "neutral",
        }
    }
}

impl FromStr for NliLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entailment" => Ok(NliLabel::Entailment),
            "contradiction" => Ok(NliLabel::Contradiction),
            "neutral" => Ok(NliLabel::Neutral),
            _ => Err("unknown label".into()),
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NliExample {
    pub pair_id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub genre: String,
}

impl NliExample {
    pub fn validate(&self) -> Result<(), String> {
        if self.pair_id.is_empty() {
            return Err("empty pairID".into());
        }
        if self.premise.trim().is_empty() {
            return Err("empty premise".into());
        }
        if self.hypothesis.trim().is_empty() {
            return Err("empty hypothesis".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenericExample {
    pub id: String,
    pub fields: IndexMap<String, String>,
    pub label: String,
}

impl GenericExample {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.fields.is_empty() {
            return Err("no text fields".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Relation,
    Nli,
    Generic,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Relation => "relation",
            Task::Nli => "nli",
            Task::Generic => "generic",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relation" => Ok(Task::Relation),
            "nli" => Ok(Task::Nli),
            "generic" => Ok(Task::Generic),
            other => Err(format!(
                "unknown task {other:?} (expected relation, nli or generic)"
            )),
        }
    }
}

/// A homogeneous, ordered list of examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Examples {
    Relation(Vec<RelationExample>),
    Nli(Vec<NliExample>),
    Generic(Vec<GenericExample>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Examples,
    /// Where the data came from; echoed into run manifests.
    pub provenance: String,
}

impl Dataset {
    pub fn new(examples: Examples, provenance: impl Into<String>) -> Self {
        Self {
            examples,
            provenance: provenance.into(),
        }
    }

    pub fn task(&self) -> Task {
        match &self.examples {
            Examples::Relation(_) => Task::Relation,
            Examples::Nli(_) => Task::Nli,
            Examples::Generic(_) => Task::Generic,
        }
    }

    pub fn len(&self) -> usize {
        match &self.examples {
            Examples::Relation(v) => v.len(),
            Examples::Nli(v) => v.len(),
            Examples::Generic(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<&str> {
        match &self.examples {
            Examples::Relation(v) => v.iter().map(|e| e.id.as_str()).collect(),
            Examples::Nli(v) => v.iter().map(|e| e.pair_id.as_str()).collect(),
            Examples::Generic(v) => v.iter().map(|e| e.id.as_str()).collect(),
        }
    }

    /// Label of every example, in order, as strings.
    pub fn labels(&self) -> Vec<String> {
        match &self.examples {
            Examples::Relation(v) => v.iter().map(|e| e.relation.clone()).collect(),
            Examples::Nli(v) => v.iter().map(|e| e.label.to_string()).collect(),
            Examples::Generic(v) => v.iter().map(|e| e.label.clone()).collect(),
        }
    }

    /// Checks every record invariant plus id uniqueness.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let check = |index: usize, r: Result<(), String>| {
            r.map_err(|message| DatasetError::Invalid { index, message })
        };
        match &self.examples {
            Examples::Relation(v) => {
                for (i, e) in v.iter().enumerate() {
                    check(i, e.validate())?;
                }
            }
            Examples::Nli(v) => {
                for (i, e) in v.iter().enumerate() {
                    check(i, e.validate())?;
                }
            }
            Examples::Generic(v) => {
                for (i, e) in v.iter().enumerate() {
                    check(i, e.validate())?;
                }
            }
        }
        let mut seen = HashSet::new();
        for (index, id) in self.ids().into_iter().enumerate() {
            if !seen.insert(id) {
                return Err(DatasetError::DuplicateId { index });
            }
        }
        Ok(())
    }

    /// One serialized line per example, in the task's file format.
    pub fn record_lines(&self) -> Vec<String> {
        match &self.examples {
            Examples::Relation(v) => v
                .iter()
                .map(|e| to_line(&RelationRecord::from(e)))
                .collect(),
            Examples::Nli(v) => v.iter().map(|e| to_line(&NliRecord::from(e))).collect(),
            Examples::Generic(v) => v.iter().map(|e| to_line(&generic_record(e))).collect(),
        }
    }

    /// Serializes to the task's file format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let lines = self.record_lines();
        let mut out = String::new();
        match self.task() {
            Task::Relation => {
                out.push_str("[\n");
                for (i, line) in lines.iter().enumerate() {
                    out.push_str(line);
                    if i + 1 < lines.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str("]\n");
            }
            Task::Nli | Task::Generic => {
                for line in &lines {
                    out.push_str(line);
                    out.push('\n');
                }
            }
        }
        out.into_bytes()
    }
}

/// Text fields of one example as `(field name, text)`, in field order.
/// Relation examples expose their token sentence as `sentence`.
fn text_fields_of(examples: &Examples, index: usize) -> Vec<(String, String)> {
    match examples {
        Examples::Relation(v) => vec![("sentence".into(), v[index].text())],
        Examples::Nli(v) => vec![
            ("premise".into(), v[index].premise.clone()),
            ("hypothesis".into(), v[index].hypothesis.clone()),
        ],
        Examples::Generic(v) => v[index]
            .fields
            .iter()
            .map(|(k, t)| (k.clone(), t.clone()))
            .collect(),
    }
}

impl Dataset {
    /// Names of the text fields present, in first-seen order.
    pub fn text_field_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for i in 0..self.len() {
            for (name, _) in text_fields_of(&self.examples, i) {
                if !names.contains(&name) {
                    names.push(name);
                }
            }
        }
        names
    }
}

/// Pairs every text field of `simplified` with the same field of its
/// source in `original`, as `(field, original text, simplified text)`.
///
/// Without `id_suffix` both datasets must list the same ids in the same
/// order. With it, only records whose id ends in the suffix are scored,
/// each against the original record whose id is the remainder.
pub fn align_for_report(
    original: &Dataset,
    simplified: &Dataset,
    id_suffix: Option<&str>,
) -> Result<Vec<(String, String, String)>, DatasetError> {
    if original.task() != simplified.task() {
        return Err(DatasetError::WrongTask {
            expected: original.task().as_str(),
            actual: simplified.task().as_str(),
        });
    }
    let source_of: Vec<(usize, usize)> = match id_suffix {
        None => {
            let (a, b) = (original.ids(), simplified.ids());
            if a.len() != b.len() {
                return Err(DatasetError::Misaligned(format!(
                    "{} original records vs {} simplified records",
                    a.len(),
                    b.len()
                )));
            }
            if let Some(i) = a.iter().zip(&b).position(|(x, y)| x != y) {
                return Err(DatasetError::Misaligned(format!(
                    "ids differ at record {i}"
                )));
            }
            (0..a.len()).map(|i| (i, i)).collect()
        }
        Some(suffix) => {
            let index: std::collections::HashMap<&str, usize> = original
                .ids()
                .into_iter()
                .enumerate()
                .map(|(i, id)| (id, i))
                .collect();
            let mut pairs = Vec::new();
            for (j, id) in simplified.ids().into_iter().enumerate() {
                let Some(base) = id.strip_suffix(suffix) else {
                    continue;
                };
                match index.get(base) {
                    Some(&i) => pairs.push((i, j)),
                    None if index.contains_key(id) => {}
                    None => {
                        return Err(DatasetError::Misaligned(format!(
                            "record {j} has no source record"
                        )))
                    }
                }
            }
            pairs
        }
    };
    let mut out = Vec::new();
    for (i, j) in source_of {
        let before = text_fields_of(&original.examples, i);
        for (name, after) in text_fields_of(&simplified.examples, j) {
            if let Some((_, text)) = before.iter().find(|(n, _)| *n == name) {
                out.push((name, text.clone(), after));
            }
        }
    }
    Ok(out)
}

fn to_line<T: Serialize>(record: &T) -> String {
    serde_json::to_string(record).expect("records serialize to JSON")
}

#[derive(Debug, Serialize, Deserialize)]
struct RelationRecord {
    id: String,
    token: Vec<String>,
    subj_start: usize,
    subj_end: usize,
    obj_start: usize,
    obj_end: usize,
    subj_type: String,
    obj_type: String,
    relation: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    stanford_pos: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    stanford_ner: Option<Vec<String>>,
}

impl From<&RelationExample> for RelationRecord {
    fn from(e: &RelationExample) -> Self {
        let (pos, ner) = e
            .annotations
            .as_ref()
            .map_or((None, None), |a| (a.pos.clone(), a.ner.clone()));
        Self {
            id: e.id.clone(),
            token: e.tokens.to_vec(),
            subj_start: e.subj_span.start,
            subj_end: e.subj_span.end,
            obj_start: e.obj_span.start,
            obj_end: e.obj_span.end,
            subj_type: e.subj_type.clone(),
            obj_type: e.obj_type.clone(),
            relation: e.relation.clone(),
            stanford_pos: pos,
            stanford_ner: ner,
        }
    }
}

impl RelationRecord {
    fn into_example(self) -> Result<RelationExample, String> {
        let tokens = TokenSeq::new(self.token)
            .ok_or_else(|| "token list contains an empty or whitespace token".to_string())?;
        let annotations =
            (self.stanford_pos.is_some() || self.stanford_ner.is_some()).then_some(Annotations {
                pos: self.stanford_pos,
                ner: self.stanford_ner,
            });
        let e = RelationExample {
            id: self.id,
            tokens,
            subj_span: Span::new(self.subj_start, self.subj_end),
            obj_span: Span::new(self.obj_start, self.obj_end),
            subj_type: self.subj_type,
            obj_type: self.obj_type,
            relation: self.relation,
            annotations,
        };
        e.validate()?;
        Ok(e)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NliRecord {
    #[serde(rename = "pairID")]
    pair_id: String,
    sentence1: String,
    sentence2: String,
    gold_label: String,
    genre: String,
}

impl From<&NliExample> for NliRecord {
    fn from(e: &NliExample) -> Self {
        Self {
            pair_id: e.pair_id.clone(),
            sentence1: e.premise.clone(),
            sentence2: e.hypothesis.clone(),
            gold_label: e.label.to_string(),
            genre: e.genre.clone(),
        }
    }
}

impl NliRecord {
    fn into_example(self) -> Result<NliExample, String> {
        let label = self
            .gold_label
            .parse()
            .map_err(|_| "gold_label is not entailment, contradiction or neutral".to_string())?;
        let e = NliExample {
            pair_id: self.pair_id,
            premise: self.sentence1,
            hypothesis: self.sentence2,
            label,
            genre: self.genre,
        };
        e.validate()?;
        Ok(e)
    }
}

fn generic_record(e: &GenericExample) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert("id".into(), e.id.clone().into());
    m.insert("label".into(), e.label.clone().into());
    for (k, v) in &e.fields {
        m.insert(k.clone(), v.clone().into());
    }
    m
}

fn read_to_string(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses the relation format from an in-memory document.
pub fn parse_relation(text: &str, provenance: &str) -> Result<Dataset, DatasetError> {
    let raw: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| DatasetError::Parse {
            path: PathBuf::from(provenance),
            message: format!("expected an array of records ({e})"),
        })?;
    let mut examples = Vec::with_capacity(raw.len());
    for (index, value) in raw.into_iter().enumerate() {
        let record: RelationRecord =
            serde_json::from_value(value).map_err(|e| DatasetError::Invalid {
                index,
                message: e.to_string(),
            })?;
        let example = record
            .into_example()
            .map_err(|message| DatasetError::Invalid { index, message })?;
        examples.push(example);
    }
    let d = Dataset::new(Examples::Relation(examples), provenance);
    d.validate()?;
    Ok(d)
}

pub fn read_relation(path: &Path) -> Result<Dataset, DatasetError> {
    parse_relation(&read_to_string(path)?, &path.display().to_string())
}

fn nonblank_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Parses NLI data, either JSON lines or MNLI-style TSV with a header.
pub fn parse_nli(text: &str, provenance: &str) -> Result<Dataset, DatasetError> {
    let is_tsv = nonblank_lines(text)
        .next()
        .is_some_and(|(_, l)| !l.trim_start().starts_with('{'));
    let mut examples = Vec::new();
    let mut lines_of = Vec::new();
    if is_tsv {
        let mut lines = nonblank_lines(text);
        let (_, header) = lines.next().expect("non-empty by construction");
        let columns: Vec<&str> = header.split('\t').collect();
        let col = |name: &str| {
            columns
                .iter()
                .position(|c| *c == name)
                .ok_or_else(|| DatasetError::InvalidLine {
                    line: 1,
                    message: format!("header lacks column {name}"),
                })
        };
        let (ci, cp, ch, cl, cg) = (
            col("pairID")?,
            col("sentence1")?,
            col("sentence2")?,
            col("gold_label")?,
            col("genre")?,
        );
        for (line, l) in lines {
            let cells: Vec<&str> = l.split('\t').collect();
            let get = |i: usize| {
                cells
                    .get(i)
                    .map(|s| s.to_string())
                    .ok_or_else(|| DatasetError::InvalidLine {
                        line,
                        message: format!("expected at least {} columns", i + 1),
                    })
            };
            let record = NliRecord {
                pair_id: get(ci)?,
                sentence1: get(cp)?,
                sentence2: get(ch)?,
                gold_label: get(cl)?,
                genre: get(cg)?,
            };
            examples.push(
                record
                    .into_example()
                    .map_err(|message| DatasetError::InvalidLine { line, message })?,
            );
            lines_of.push(line);
        }
    } else {
        for (line, l) in nonblank_lines(text) {
            let record: NliRecord =
                serde_json::from_str(l).map_err(|e| DatasetError::InvalidLine {
                    line,
                    message: e.to_string(),
                })?;
            examples.push(
                record
                    .into_example()
                    .map_err(|message| DatasetError::InvalidLine { line, message })?,
            );
            lines_of.push(line);
        }
    }
    let d = Dataset::new(Examples::Nli(examples), provenance);
    d.validate().map_err(|e| relabel_by_line(e, &lines_of))?;
    Ok(d)
}

pub fn read_nli(path: &Path) -> Result<Dataset, DatasetError> {
    parse_nli(&read_to_string(path)?, &path.display().to_string())
}

fn relabel_by_line(e: DatasetError, lines_of: &[usize]) -> DatasetError {
    match e {
        DatasetError::DuplicateId { index } => DatasetError::InvalidLine {
            line: lines_of[index],
            message: "duplicate id".into(),
        },
        other => other,
    }
}

pub fn parse_generic(text: &str, provenance: &str) -> Result<Dataset, DatasetError> {
    let mut examples = Vec::new();
    let mut lines_of = Vec::new();
    for (line, l) in nonblank_lines(text) {
        let bad = |message: String| DatasetError::InvalidLine { line, message };
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(l).map_err(|e| bad(e.to_string()))?;
        let mut id = None;
        let mut label = None;
        let mut fields = IndexMap::new();
        for (k, v) in map {
            let serde_json::Value::String(s) = v else {
                return Err(bad(format!("field {k:?} is not a string")));
            };
            match k.as_str() {
                "id" => id = Some(s),
                "label" => label = Some(s),
                _ => {
                    fields.insert(k, s);
                }
            }
        }
        let e = GenericExample {
            id: id.ok_or_else(|| bad("missing id".into()))?,
            label: label.ok_or_else(|| bad("missing label".into()))?,
            fields,
        };
        e.validate().map_err(bad)?;
        examples.push(e);
        lines_of.push(line);
    }
    let d = Dataset::new(Examples::Generic(examples), provenance);
    d.validate().map_err(|e| relabel_by_line(e, &lines_of))?;
    Ok(d)
}

pub fn read_generic(path: &Path) -> Result<Dataset, DatasetError> {
    parse_generic(&read_to_string(path)?, &path.display().to_string())
}

/// Reads a dataset of the given task from `path`.
pub fn read(task: Task, path: &Path) -> Result<Dataset, DatasetError> {
    match task {
        Task::Relation => read_relation(path),
        Task::Nli => read_nli(path),
        Task::Generic => read_generic(path),
    }
}

/// Validates, then writes `dataset` in its task's format.
pub fn write(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    dataset.validate()?;
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(&dataset.to_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn expect_task(dataset: &Dataset, task: Task) -> Result<(), DatasetError> {
    if dataset.task() == task {
        Ok(())
    } else {
        Err(DatasetError::WrongTask {
            expected: task.as_str(),
            actual: dataset.task().as_str(),
        })
    }
}

pub fn write_relation(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    expect_task(dataset, Task::Relation)?;
    write(dataset, path)
}

pub fn write_nli(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    expect_task(dataset, Task::Nli)?;
    write(dataset, path)
}

pub fn write_generic(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    expect_task(dataset, Task::Generic)?;
    write(dataset, path)
}
