//! Sentiment prompts, pluggable completion backends and a response cache.

mod backends;
mod cache;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backtest::Variant;

#[cfg(feature = "remote")]
pub(crate) use backends::classify_http_error;
#[cfg(feature = "remote")]
pub use backends::ChatCompletionBackend;
pub use backends::{ChatCompletionConfig, LexiconBackend, ReplayBackend, TokenBucket};
pub use cache::{cache_key, CachedResponse, ResponseCache};

pub const COMPANY_PLACEHOLDER: &str = "[company name]";
pub const HEADLINE_PLACEHOLDER: &str = "[headline]";

pub const PROMPT_TEMPLATE: &str = "Forget all your previous instructions. Pretend you are a financial expert. \
You are a financial expert with stock recommendation experience. Answer \u{201c}YES\u{201d} if good news, \
\u{201c}NO\u{201d} if bad news, or \u{201c}UNKNOWN\u{201d} if uncertain in the first line. Then elaborate \
with one short and concise sentence on the next line. Is this headline good or bad for the stock price of \
[company name] in the short term?\n\nHeadline: [headline]";

#[derive(Debug, thiserror::Error)]
pub enum ScorerError {
    #[error("prompt template: {0}")]
    Template(String),
    #[error("scoring headline {headline_id} failed after {attempts} attempt(s): {source}")]
    Scoring {
        headline_id: String,
        attempts: usize,
        source: BackendError,
    },
    #[error("cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying (timeouts, 429, 5xx).
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
    #[error("credential: {0}")]
    Credential(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Score {
    Negative,
    Neutral,
    Positive,
}

impl Score {
    pub fn as_i8(self) -> i8 {
        match self {
            Score::Negative => -1,
            Score::Neutral => 0,
            Score::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.as_i8() as f64
    }

    pub fn from_i8(v: i8) -> Option<Score> {
        match v {
            -1 => Some(Score::Negative),
            0 => Some(Score::Neutral),
            1 => Some(Score::Positive),
            _ => None,
        }
    }
}

impl From<Score> for i8 {
    fn from(s: Score) -> i8 {
        s.as_i8()
    }
}

impl TryFrom<i8> for Score {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        Score::from_i8(v).ok_or_else(|| format!("score {v} not in {{-1, 0, 1}}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    FallbackZero,
}

impl ParseStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseStatus::Ok => "ok",
            ParseStatus::FallbackZero => "fallback_zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredHeadline {
    pub headline_id: String,
    pub variant: Variant,
    pub score: Score,
    pub raw_first_line: String,
    pub rationale: String,
    pub backend_id: String,
    pub parse_status: ParseStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub template: String,
    pub company_display_name: String,
    pub headline_text: String,
    pub temperature: f64,
}

impl PromptSpec {
    pub fn new(company_display_name: impl Into<String>, headline_text: impl Into<String>) -> Self {
        Self {
            template: PROMPT_TEMPLATE.to_string(),
            company_display_name: company_display_name.into(),
            headline_text: headline_text.into(),
            temperature: 0.0,
        }
    }
}

pub fn build_prompt(spec: &PromptSpec) -> Result<String, ScorerError> {
    for ph in [COMPANY_PLACEHOLDER, HEADLINE_PLACEHOLDER] {
        let n = spec.template.matches(ph).count();
        if n != 1 {
            return Err(ScorerError::Template(format!(
                "template must contain {ph} exactly once, found {n}"
            )));
        }
    }
    if spec.temperature != 0.0 {
        return Err(ScorerError::Template(format!(
            "temperature must be 0, got {}",
            spec.temperature
        )));
    }
    if spec.headline_text.trim().is_empty() {
        return Err(ScorerError::Template("headline is empty".into()));
    }
    if spec.company_display_name.trim().is_empty() {
        return Err(ScorerError::Template("company name is empty".into()));
    }
    Ok(spec
        .template
        .replace(COMPANY_PLACEHOLDER, &spec.company_display_name)
        .replace(HEADLINE_PLACEHOLDER, &spec.headline_text))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub score: Score,
    pub status: ParseStatus,
    pub first_line: String,
    pub rationale: String,
}

/// Reads the verdict from the first nonblank line. Total: anything that is not
/// YES, NO or UNKNOWN becomes a flagged neutral.
pub fn parse_response(text: &str) -> ParsedResponse {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let first_line = lines.next().unwrap_or("").to_string();
    let rationale = lines.collect::<Vec<_>>().join(" ");
    let cleaned: String = first_line
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect();
    let word = cleaned.split_whitespace().next().unwrap_or("").to_uppercase();
    let (score, status) = match word.as_str() {
        "YES" => (Score::Positive, ParseStatus::Ok),
        "NO" => (Score::Negative, ParseStatus::Ok),
        "UNKNOWN" => (Score::Neutral, ParseStatus::Ok),
        _ => (Score::Neutral, ParseStatus::FallbackZero),
    };
    ParsedResponse {
        score,
        status,
        first_line,
        rationale,
    }
}

/// A chat-completion-like service: one prompt in, one text response out, at
/// temperature 0.
pub trait ScoringBackend: Send + Sync {
    /// Part of every cache key, so responses of different backends never mix.
    fn id(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: usize) -> Self {
        Self {
            attempts,
            base_delay: Duration::ZERO,
        }
    }

    /// Runs `f` until it succeeds, fails fatally or runs out of attempts.
    /// Returns the result and the number of attempts made.
    pub fn run<T>(&self, mut f: impl FnMut() -> Result<T, BackendError>) -> (Result<T, BackendError>, usize) {
        let attempts = self.attempts.max(1);
        let mut delay = self.base_delay;
        for n in 1..=attempts {
            match f() {
                Err(BackendError::Transient(msg)) if n < attempts => {
                    log::warn!("attempt {n}/{attempts} failed: {msg}; retrying in {delay:?}");
                    thread::sleep(delay);
                    delay *= 2;
                }
                other => return (other, n),
            }
        }
        unreachable!()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreRequest {
    pub headline_id: String,
    pub variant: Variant,
    pub company_display_name: String,
    pub text: String,
}

pub fn score_headline(
    request: &ScoreRequest,
    backend: &dyn ScoringBackend,
    cache: Option<&ResponseCache>,
    retry: &RetryPolicy,
) -> Result<ScoredHeadline, ScorerError> {
    let prompt = build_prompt(&PromptSpec::new(&request.company_display_name, &request.text))?;
    let backend_id = backend.id().to_string();
    let cached = match cache {
        Some(c) => c.get(&backend_id, &prompt)?,
        None => None,
    };
    let response = match cached {
        Some(r) => r,
        None => {
            let (result, attempts) = retry.run(|| backend.complete(&prompt));
            let response = result.map_err(|source| ScorerError::Scoring {
                headline_id: request.headline_id.clone(),
                attempts,
                source,
            })?;
            if let Some(c) = cache {
                c.put(&backend_id, &prompt, &response)?;
            }
            response
        }
    };
    let parsed = parse_response(&response);
    Ok(ScoredHeadline {
        headline_id: request.headline_id.clone(),
        variant: request.variant,
        score: parsed.score,
        raw_first_line: parsed.first_line,
        rationale: parsed.rationale,
        backend_id,
        parse_status: parsed.status,
    })
}

/// Scores every request with at most `max_in_flight` concurrent backend calls.
/// Results come back in request order.
pub fn score_batch(
    requests: &[ScoreRequest],
    backend: &dyn ScoringBackend,
    cache: Option<&ResponseCache>,
    retry: &RetryPolicy,
    max_in_flight: usize,
) -> Vec<Result<ScoredHeadline, ScorerError>> {
    let workers = max_in_flight.max(1).min(requests.len());
    if workers <= 1 {
        return requests
            .iter()
            .map(|r| score_headline(r, backend, cache, retry))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<ScoredHeadline, ScorerError>>>> =
        requests.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= requests.len() {
                    break;
                }
                let r = score_headline(&requests[i], backend, cache, retry);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot filled"))
        .collect()
}
