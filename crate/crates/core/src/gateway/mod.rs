//! Uniform completion interface over pluggable backends, plus prompt
//! rendering and strict parsers for triples and agent actions.

mod http;
mod journal;
mod parse;
mod prompt;
mod scripted;

pub use http::{HttpBackend, HttpConfig};
pub use journal::{read_journal, Journal, JournalBackend, JournalEntry};
pub use parse::{
    format_action, format_triples, parse_action, parse_thought, parse_triples, AgentAction,
    ParseIssue, ParseIssueKind, ParseMode, Tool, TOOLS,
};
pub use prompt::{
    list_slot, render_prompt, text_slot, PromptTemplate, Section, SlotValue, Slots,
    HEADER_CANDIDATES, HEADER_EXAMPLES, HEADER_INFO, HEADER_MEMORY, SLOT_CANDIDATES,
    SLOT_EXAMPLES, SLOT_INFO, SLOT_INPUT, SLOT_MEMORY,
};
pub use scripted::{Matcher, ScriptedBackend, ScriptedRule};

use std::sync::Arc;
use std::time::Duration;

use crate::error::{Error, Result};

/// One completion call. Temperature defaults to 0 so extraction runs are
/// reproducible against live backends too.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop_sequences: Vec<String>,
    /// Free-form run label recorded in the journal.
    pub tag: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, tag: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 1024,
            stop_sequences: Vec::new(),
            tag: tag.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.prompt.is_empty() {
            return Err(Error::InvalidRequest("empty prompt".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// The closed set of completion backends.
pub enum BackendHandle {
    Scripted(ScriptedBackend),
    Http(HttpBackend),
    /// Replays a previously recorded journal in order.
    Journal(JournalBackend),
}

impl BackendHandle {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        match self {
            BackendHandle::Scripted(b) => b.complete(&req.prompt),
            BackendHandle::Http(b) => b.complete(req),
            BackendHandle::Journal(b) => b.complete(&req.prompt),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BackendHandle::Scripted(_) => "scripted",
            BackendHandle::Http(_) => "http",
            BackendHandle::Journal(_) => "journal",
        }
    }

    /// Position-matched scripts assume one global call order, which only
    /// holds under the sequential agent loop.
    pub fn requires_sequential_calls(&self) -> bool {
        matches!(self, BackendHandle::Scripted(b) if b.has_position_rules())
    }
}

/// Retry policy for transport failures. Script misses and parse problems are
/// never retried.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Total tries, including the first call.
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        // 3 retries after the initial call, backing off 1s/2s/4s.
        RetryPolicy {
            attempts: 4,
            base_delay: Duration::from_secs(1),
        }
    }
}

/// Backend plus retry policy plus optional journal. All completions in a run
/// flow through one gateway so the journal is a complete record.
pub struct Gateway {
    backend: BackendHandle,
    retry: RetryPolicy,
    journal: Option<Arc<Journal>>,
}

impl Gateway {
    pub fn new(backend: BackendHandle) -> Self {
        Gateway {
            backend,
            retry: RetryPolicy::default(),
            journal: None,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_journal(mut self, journal: Arc<Journal>) -> Self {
        self.journal = Some(journal);
        self
    }

    pub fn backend(&self) -> &BackendHandle {
        &self.backend
    }

    pub fn journal(&self) -> Option<&Arc<Journal>> {
        self.journal.as_ref()
    }

    /// Complete a request, retrying transport failures with exponential
    /// backoff, and append the exchange to the journal.
    pub fn complete(&self, req: &CompletionRequest) -> Result<String> {
        req.validate()?;
        let started = now_ms();
        let mut last_err = None;
        for attempt in 0..self.retry.attempts {
            match self.backend.complete(req) {
                Ok(response) => {
                    if let Some(journal) = &self.journal {
                        journal.append(&JournalEntry {
                            tag: req.tag.clone(),
                            prompt: req.prompt.clone(),
                            response: response.clone(),
                            started_ms: started,
                            finished_ms: now_ms(),
                        })?;
                    }
                    return Ok(response);
                }
                Err(Error::Transport(detail)) => {
                    log::warn!("transport failure (attempt {}): {detail}", attempt + 1);
                    last_err = Some(Error::Transport(detail));
                    if attempt + 1 < self.retry.attempts {
                        std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt));
                    }
                }
                Err(other) => return Err(other),
            }
        }
        Err(last_err.unwrap_or_else(|| Error::Transport("no attempts made".into())))
    }

    /// Record an out-of-band event (e.g. a parser fallback) in the journal.
    pub fn note(&self, tag: &str, text: &str) {
        if let Some(journal) = &self.journal {
            let _ = journal.append(&JournalEntry {
                tag: tag.to_string(),
                prompt: String::new(),
                response: text.to_string(),
                started_ms: now_ms(),
                finished_ms: now_ms(),
            });
        }
    }
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
