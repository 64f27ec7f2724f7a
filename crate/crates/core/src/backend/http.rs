//! HTTP backend: `POST {"texts": [...]}`, answer `{"simplified": [...]}`.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{RawOutcome, Simplifier};
use crate::error::BackendError;

#[derive(Serialize)]
struct Request<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct Response {
    simplified: Vec<String>,
}

pub struct HttpBackend {
    url: String,
    client: Client,
    batch_size: usize,
    max_concurrency: usize,
}

impl HttpBackend {
    pub fn new(
        url: &str,
        batch_size: usize,
        timeout: Duration,
        max_concurrency: usize,
    ) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Startup(e.to_string()))?;
        Ok(Self {
            url: url.to_string(),
            client,
            batch_size: batch_size.max(1),
            max_concurrency: max_concurrency.max(1),
        })
    }

    fn post(&self, texts: &[String]) -> Result<Vec<String>, BackendError> {
        let response = self
            .client
            .post(&self.url)
            .json(&Request { texts })
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    BackendError::Transport(format!("request timed out: {e}"))
                } else {
                    BackendError::Transport(e.to_string())
                }
            })?;
        let status = response.status();
        if status != StatusCode::OK {
            return Err(BackendError::Transport(format!("server answered {status}")));
        }
        let body: Response = response
            .json()
            .map_err(|e| BackendError::Protocol(format!("bad response body: {e}")))?;
        if body.simplified.len() != texts.len() {
            return Err(BackendError::Protocol(format!(
                "server returned {} texts for {} inputs",
                body.simplified.len(),
                texts.len()
            )));
        }
        Ok(body.simplified)
    }
}

impl Simplifier for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.url)
    }

    fn simplify(&mut self, texts: &[String]) -> Result<Vec<RawOutcome>, BackendError> {
        let chunks: Vec<&[String]> = texts.chunks(self.batch_size).collect();
        let mut out = Vec::with_capacity(texts.len());
        for wave in chunks.chunks(self.max_concurrency) {
            let results: Vec<Result<Vec<String>, BackendError>> = thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|chunk| s.spawn(|| self.post(chunk)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("request thread panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?.into_iter().map(Ok));
            }
        }
        Ok(out)
    }
}
