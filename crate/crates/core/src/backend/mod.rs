//! Simplification backends.
//!
//! Every backend implements [`Simplifier`]; callers go through
//! [`simplify_batch`], which enforces the input contract and turns raw
//! backend answers into [`SimplifyOutcome`]s aligned with the inputs.

mod http;
mod proc;
mod rules;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use self::http::HttpBackend;
pub use self::proc::ProcBackend;
pub use self::rules::{rules_simplify, EchoBackend, Lexicon, RulesBackend};
use crate::error::BackendError;

pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_HTTP_CONCURRENCY: usize = 4;

/// Environment variable consulted for a backend when none is given.
pub const BACKEND_ENV: &str = "SIMPLAUG_BACKEND";

/// Per-text answer from a backend: the simplified text or a model error.
pub type RawOutcome = Result<String, String>;

pub trait Simplifier {
    /// Stable identifier recorded in outcomes and manifests.
    fn id(&self) -> String;

    /// Simplifies `texts`, which are non-empty and free of newlines.
    ///
    /// Must return exactly one entry per input, in input order. An `Err`
    /// aborts the whole call.
    fn simplify(&mut self, texts: &[String]) -> Result<Vec<RawOutcome>, BackendError>;
}

impl<S: Simplifier + ?Sized> Simplifier for Box<S> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn simplify(&mut self, texts: &[String]) -> Result<Vec<RawOutcome>, BackendError> {
        (**self).simplify(texts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplifyOutcome {
    pub original: String,
    pub simplified: String,
    pub backend_id: String,
    pub changed: bool,
    pub error: Option<String>,
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Runs `texts` through `backend`, returning one outcome per input.
///
/// Newlines inside a text are replaced by single spaces before dispatch.
/// A text the model fails on comes back unchanged with `error` set.
pub fn simplify_batch<B, S>(
    backend: &mut B,
    texts: &[S],
) -> Result<Vec<SimplifyOutcome>, BackendError>
where
    B: Simplifier + ?Sized,
    S: AsRef<str>,
{
    let mut prepared = Vec::with_capacity(texts.len());
    for (index, text) in texts.iter().enumerate() {
        let text = text.as_ref();
        if text.trim().is_empty() {
            return Err(BackendError::EmptyInput { index });
        }
        prepared.push(text.replace("\r\n", " ").replace(['\n', '\r'], " "));
    }
    if prepared.is_empty() {
        return Ok(Vec::new());
    }
    let raw = backend.simplify(&prepared)?;
    if raw.len() != prepared.len() {
        return Err(BackendError::Protocol(format!(
            "backend returned {} results for {} inputs",
            raw.len(),
            prepared.len()
        )));
    }
    let backend_id = backend.id();
    Ok(texts
        .iter()
        .zip(raw)
        .map(|(original, result)| {
            let original = original.as_ref().to_string();
            match result {
                Ok(simplified) => SimplifyOutcome {
                    changed: normalize_ws(&simplified) != normalize_ws(&original),
                    original,
                    simplified,
                    backend_id: backend_id.clone(),
                    error: None,
                },
                Err(message) => SimplifyOutcome {
                    simplified: original.clone(),
                    original,
                    backend_id: backend_id.clone(),
                    changed: false,
                    error: Some(message),
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Echo,
    Rules,
    Proc,
    Http,
}

/// How to reach a backend.
///
/// The string form is `echo`, `rules[:LEXICON]`, `proc:COMMAND LINE` or
/// `http:URL`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub locator: String,
    pub batch_size: usize,
    pub timeout: Duration,
    /// Concurrent in-flight requests; only the HTTP backend uses more than one.
    pub max_concurrency: usize,
}

impl BackendSpec {
    pub fn new(kind: BackendKind, locator: impl Into<String>) -> Self {
        Self {
            kind,
            locator: locator.into(),
            batch_size: DEFAULT_BATCH_SIZE,
            timeout: DEFAULT_TIMEOUT,
            max_concurrency: DEFAULT_HTTP_CONCURRENCY,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.batch_size == 0 {
            return Err(BackendError::Spec("batch size must be at least 1".into()));
        }
        if self.max_concurrency == 0 {
            return Err(BackendError::Spec("concurrency must be at least 1".into()));
        }
        if matches!(self.kind, BackendKind::Proc | BackendKind::Http)
            && self.locator.trim().is_empty()
        {
            return Err(BackendError::Spec(format!("{self} needs a locator")));
        }
        Ok(())
    }

    /// Starts the backend described by this spec.
    pub fn open(&self) -> Result<Box<dyn Simplifier>, BackendError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Echo => Box::new(EchoBackend),
            BackendKind::Rules => {
                let lexicon = if self.locator.is_empty() {
                    Lexicon::default()
                } else {
                    Lexicon::load(self.locator.as_ref())?
                };
                Box::new(RulesBackend::new(lexicon, self.locator.clone()))
            }
            BackendKind::Proc => Box::new(ProcBackend::spawn(
                &self.locator,
                self.batch_size,
                self.timeout,
            )?),
            BackendKind::Http => Box::new(HttpBackend::new(
                &self.locator,
                self.batch_size,
                self.timeout,
                self.max_concurrency,
            )?),
        })
    }
}

impl FromStr for BackendSpec {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, locator) = s.split_once(':').unwrap_or((s, ""));
        let kind = match kind {
            "echo" if locator.is_empty() => BackendKind::Echo,
            "rules" => BackendKind::Rules,
            "proc" => BackendKind::Proc,
            "http" => BackendKind::Http,
            _ => {
                return Err(BackendError::Spec(format!(
                    "{s:?}: expected echo, rules[:LEXICON], proc:COMMAND or http:URL"
                )))
            }
        };
        let spec = BackendSpec::new(kind, locator);
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BackendKind::Echo => f.write_str("echo"),
            BackendKind::Rules if self.locator.is_empty() => f.write_str("rules"),
            BackendKind::Rules => write!(f, "rules:{}", self.locator),
            BackendKind::Proc => write!(f, "proc:{}", self.locator),
            BackendKind::Http => write!(f, "http:{}", self.locator),
        }
    }
}
