use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BackendError, ScoringBackend};

const LEXICON: &str = include_str!("../../data/lexicon.txt");

/// Deterministic word-list scorer for offline runs and tests.
#[derive(Debug, Clone)]
pub struct LexiconBackend {
    words: HashMap<String, i32>,
}

impl LexiconBackend {
    pub const ID: &'static str = "lexicon-v1";

    pub fn bundled() -> Self {
        Self::parse(LEXICON).expect("bundled lexicon parses")
    }

    /// `word<TAB>polarity` per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut words = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (w, p) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| format!("line {}: expected word and polarity", i + 1))?;
            let p: i32 = p.trim().parse().map_err(|e| format!("line {}: {e}", i + 1))?;
            words.insert(w.to_lowercase(), p.signum());
        }
        Ok(Self { words })
    }

    pub fn polarity(&self, headline: &str) -> i32 {
        headline
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(|w| self.words.get(&w.to_lowercase()).copied().unwrap_or(0))
            .sum()
    }
}

impl Default for LexiconBackend {
    fn default() -> Self {
        Self::bundled()
    }
}

pub(crate) fn headline_of(prompt: &str) -> &str {
    prompt.rsplit_once("Headline: ").map_or(prompt, |(_, h)| h)
}

impl ScoringBackend for LexiconBackend {
    fn id(&self) -> &str {
        Self::ID
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let p = self.polarity(headline_of(prompt));
        Ok(match p.signum() {
            1 => "YES\nThe headline leans positive.".into(),
            -1 => "NO\nThe headline leans negative.".into(),
            _ => "UNKNOWN\nThe headline is mixed or neutral.".into(),
        })
    }
}

/// Offline stand-in for another backend: every answer must come from the
/// response cache, so `complete` always fails.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    id: String,
}

impl ReplayBackend {
    pub fn new(replayed_backend_id: impl Into<String>) -> Self {
        Self {
            id: replayed_backend_id.into(),
        }
    }
}

impl ScoringBackend for ReplayBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, _prompt: &str) -> Result<String, BackendError> {
        Err(BackendError::Fatal(format!(
            "offline replay of {}: response not cached",
            self.id
        )))
    }
}

/// Requests-per-minute limiter; `acquire` blocks until a token is free.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn per_minute(rpm: u32) -> Self {
        let capacity = rpm.max(1) as f64;
        Self {
            capacity,
            per_second: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Takes a token if one is available, otherwise returns the wait.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let mut st = self.state.lock().unwrap_or_else(|p| p.into_inner());
        let now = Instant::now();
        let refill = now.duration_since(st.1).as_secs_f64() * self.per_second;
        st.0 = (st.0 + refill).min(self.capacity);
        st.1 = now;
        if st.0 >= 1.0 {
            st.0 -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - st.0) / self.per_second))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire() {
            std::thread::sleep(wait);
        }
    }
}

#[cfg(feature = "remote")]
pub(crate) use remote::classify_http_error;
#[cfg(feature = "remote")]
pub use remote::ChatCompletionBackend;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatCompletionConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub requests_per_minute: u32,
    pub timeout_secs: u64,
}

impl Default for ChatCompletionConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            requests_per_minute: 60,
            timeout_secs: 60,
        }
    }
}

impl ChatCompletionConfig {
    /// Backend id used in cache keys and manifests.
    pub fn backend_id(&self) -> String {
        format!("chat:{}", self.model)
    }
}

#[cfg(feature = "remote")]
mod remote {
    use std::time::Duration;

    use serde::{Deserialize, Serialize};

    use super::{ChatCompletionConfig, TokenBucket};
    use crate::scorer::{BackendError, ScoringBackend};

    #[derive(Serialize)]
    struct Message<'a> {
        role: &'a str,
        content: &'a str,
    }

    #[derive(Serialize)]
    struct Request<'a> {
        model: &'a str,
        messages: [Message<'a>; 1],
        temperature: f64,
    }

    #[derive(Deserialize)]
    struct Response {
        choices: Vec<Choice>,
    }

    #[derive(Deserialize)]
    struct Choice {
        message: ChoiceMessage,
    }

    #[derive(Deserialize)]
    struct ChoiceMessage {
        content: Option<String>,
    }

    pub struct ChatCompletionBackend {
        config: ChatCompletionConfig,
        id: String,
        api_key: String,
        agent: ureq::Agent,
        bucket: TokenBucket,
    }

    impl ChatCompletionBackend {
        /// Reads the bearer token from `config.api_key_env`.
        pub fn new(config: ChatCompletionConfig) -> Result<Self, BackendError> {
            let api_key = std::env::var(&config.api_key_env).map_err(|_| {
                BackendError::Credential(format!("environment variable {} is not set", config.api_key_env))
            })?;
            Ok(Self::with_key(config, api_key))
        }

        pub fn with_key(config: ChatCompletionConfig, api_key: impl Into<String>) -> Self {
            let api_key = api_key.into();
            let agent: ureq::Agent = ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
                .build()
                .into();
            Self {
                id: config.backend_id(),
                bucket: TokenBucket::per_minute(config.requests_per_minute),
                config,
                api_key,
                agent,
            }
        }
    }

    impl ScoringBackend for ChatCompletionBackend {
        fn id(&self) -> &str {
            &self.id
        }

        fn complete(&self, prompt: &str) -> Result<String, BackendError> {
            self.bucket.acquire();
            let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
            let body = Request {
                model: &self.config.model,
                messages: [Message {
                    role: "user",
                    content: prompt,
                }],
                temperature: 0.0,
            };
            let mut resp = self
                .agent
                .post(&url)
                .header("Authorization", &format!("Bearer {}", self.api_key))
                .send_json(&body)
                .map_err(classify_http_error)?;
            let parsed: Response = resp
                .body_mut()
                .read_json()
                .map_err(|e| BackendError::Fatal(format!("malformed completion: {e}")))?;
            parsed
                .choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .ok_or_else(|| BackendError::Fatal("completion has no content".into()))
        }
    }

    pub(crate) fn classify_http_error(e: ureq::Error) -> BackendError {
        match e {
            ureq::Error::StatusCode(401 | 403) => BackendError::Credential(e.to_string()),
            ureq::Error::StatusCode(code) if code == 429 || code >= 500 => BackendError::Transient(e.to_string()),
            ureq::Error::StatusCode(_) => BackendError::Fatal(e.to_string()),
            other => BackendError::Transient(other.to_string()),
        }
    }
}
