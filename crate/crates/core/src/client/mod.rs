//! Endpoint clients and the exchange journal. A [`CompletionSource`] answers
//! one rendered prompt at a time; the HTTP client targets chat-completion
//! APIs while the mock respondent answers offline from seeded distributions.
//! Every exchange becomes a [`PromptRecord`] in an append-only journal.

mod http;
mod journal;
mod mock;

use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{MessagePair, QuestionId};

pub use http::HttpEndpoint;
pub use journal::{journal_load, journal_path, journal_recover, JournalWriter};
pub use mock::{MockRespondent, MockRespondentSpec};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("transport error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Transport {
        status: Option<u16>,
        message: String,
        retryable: bool,
        backoff_hint: Option<Duration>,
    },
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("unknown question: {0}")]
    UnknownQuestion(QuestionId),
    #[error("invalid mock respondent spec: {0}")]
    InvalidSpec(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt record at line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
}

impl ClientError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ClientError::Transport { retryable: true, .. })
    }

    pub fn backoff_hint(&self) -> Option<Duration> {
        match self {
            ClientError::Transport { backoff_hint, .. } => *backoff_hint,
            _ => None,
        }
    }
}

fn default_temperature() -> f64 {
    2.0
}
fn default_max_concurrency() -> usize {
    4
}
fn default_timeout_s() -> u64 {
    60
}
fn default_max_attempts() -> u32 {
    5
}

/// One chat-completion endpoint. The credential is named here but read from
/// the environment only; it never appears in config files or journals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Short name used in population labels; defaults to `model_id`.
    #[serde(default)]
    pub label: Option<String>,
    pub model_id: String,
    pub base_url: String,
    pub credential_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts_per_question: u32,
}

impl EndpointConfig {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.model_id)
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let problem = if self.model_id.is_empty() {
            Some("model_id must not be empty")
        } else if self.base_url.is_empty() {
            Some("base_url must not be empty")
        } else if self.credential_env.is_empty() {
            Some("credential_env must not be empty")
        } else if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            Some("temperature must be finite and ≥ 0")
        } else if self.max_concurrency < 1 {
            Some("max_concurrency must be ≥ 1")
        } else if self.timeout_s < 1 {
            Some("timeout_s must be ≥ 1")
        } else if self.max_attempts_per_question < 1 {
            Some("max_attempts_per_question must be ≥ 1")
        } else if self.label.as_deref().is_some_and(|l| l.is_empty() || l.contains('_')) {
            Some("label must be non-empty and must not contain '_'")
        } else {
            None
        };
        match problem {
            Some(p) => Err(ClientError::InvalidConfig(format!("{p} (model {:?})", self.model_id))),
            None => Ok(()),
        }
    }
}

/// One journaled exchange. `population_id` is the label form
/// `<model>_<lang>[_<culture>]`; the tuple (population_id, survey_index,
/// question_id, attempt) is unique within a journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub population_id: String,
    pub survey_index: u32,
    pub question_id: QuestionId,
    pub attempt: u32,
    pub system_text: String,
    pub user_text: String,
    pub raw_response: String,
    pub parsed_score: Option<u8>,
    pub timestamp: DateTime<Utc>,
    pub model_id: String,
    /// Present only when the endpoint rejected the configured temperature and
    /// the run proceeded at this one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_clamped_to: Option<f64>,
}

impl PromptRecord {
    pub fn key(&self) -> (String, u32, QuestionId, u32) {
        (self.population_id.clone(), self.survey_index, self.question_id, self.attempt)
    }

    #[cfg(test)]
    pub(crate) fn for_tests(
        population_id: &str,
        survey_index: u32,
        question_id: QuestionId,
        attempt: u32,
        parsed_score: Option<u8>,
    ) -> PromptRecord {
        PromptRecord {
            population_id: population_id.to_owned(),
            survey_index,
            question_id,
            attempt,
            system_text: "system".to_owned(),
            user_text: "user".to_owned(),
            raw_response: match parsed_score {
                Some(score) => format!("Your score: {score}"),
                None => "no score here".to_owned(),
            },
            parsed_score,
            timestamp: DateTime::UNIX_EPOCH,
            model_id: "mock".to_owned(),
            temperature_clamped_to: None,
        }
    }
}

/// Identifies the slot a completion is being requested for; the mock
/// respondent keys its deterministic draws off this.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionContext {
    pub population_id: String,
    pub survey_index: u32,
    pub question_id: QuestionId,
    pub attempt: u32,
}

/// Anything that can answer one rendered prompt. Implementations must be
/// safe to call from multiple threads; the runner bounds the parallelism.
pub trait CompletionSource: Send + Sync {
    fn complete(&self, messages: &MessagePair, ctx: &CompletionContext) -> Result<String, ClientError>;

    /// The temperature the run actually proceeded at, when the endpoint
    /// rejected the configured value.
    fn clamped_temperature(&self) -> Option<f64> {
        None
    }
}

/// Exponential backoff with jitter for retryable transport errors. An
/// explicit server hint (Retry-After) wins over the computed delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackoffPolicy {
    pub base: Duration,
    pub cap: Duration,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        BackoffPolicy { base: Duration::from_millis(250), cap: Duration::from_secs(8) }
    }
}

impl BackoffPolicy {
    pub fn delay(&self, attempt: u32, hint: Option<Duration>, rng: &mut impl Rng) -> Duration {
        if let Some(hint) = hint {
            return hint.min(Duration::from_secs(30));
        }
        let doublings = attempt.saturating_sub(1).min(6);
        let exp = self.base.saturating_mul(1 << doublings);
        exp.mul_f64(rng.gen_range(0.5..1.5)).min(self.cap)
    }
}
