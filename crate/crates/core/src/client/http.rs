//! Blocking chat-completion client. One request per prompt, one sampled
//! choice, bearer credential from the environment. Targets OpenAI-style and
//! DeepSeek-style `/chat/completions` endpoints.

use std::sync::Mutex;
use std::time::Duration;

use super::{ClientError, CompletionContext, CompletionSource, EndpointConfig};
use crate::types::MessagePair;

/// Temperature retried when the endpoint rejects the configured one; well
/// inside every provider's accepted range.
const CLAMP_FALLBACK: f64 = 1.0;
const ERROR_BODY_LIMIT: usize = 300;

pub struct HttpEndpoint {
    config: EndpointConfig,
    credential: String,
    http: reqwest::blocking::Client,
    url: String,
    clamped_to: Mutex<Option<f64>>,
}

/// Never prints the credential.
impl std::fmt::Debug for HttpEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpEndpoint")
            .field("label", &self.config.label())
            .field("url", &self.url)
            .finish_non_exhaustive()
    }
}

impl HttpEndpoint {
    /// Reads the credential from `credential_env`; configs and journals never
    /// carry it.
    pub fn new(config: &EndpointConfig) -> Result<HttpEndpoint, ClientError> {
        config.validate()?;
        let credential = std::env::var(&config.credential_env)
            .ok()
            .filter(|value| !value.trim().is_empty())
            .ok_or_else(|| ClientError::MissingCredential(config.credential_env.clone()))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| ClientError::InvalidConfig(format!("http client: {e}")))?;
        let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        Ok(HttpEndpoint { config: config.clone(), credential, http, url, clamped_to: Mutex::new(None) })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn post_once(&self, messages: &MessagePair, temperature: f64) -> Result<String, ClientError> {
        let body = serde_json::json!({
            "model": self.config.model_id,
            "temperature": temperature,
            "messages": [
                { "role": "system", "content": messages.system },
                { "role": "user", "content": messages.user },
            ],
        });
        let response = self
            .http
            .post(&self.url)
            .bearer_auth(&self.credential)
            .json(&body)
            .send()
            .map_err(|e| ClientError::Transport {
                status: None,
                message: e.to_string(),
                retryable: true,
                backoff_hint: None,
            })?;

        let status = response.status();
        if !status.is_success() {
            let backoff_hint = response
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|value| value.to_str().ok())
                .and_then(|value| value.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            let mut message = response.text().unwrap_or_default();
            if message.len() > ERROR_BODY_LIMIT {
                let mut cut = ERROR_BODY_LIMIT;
                while !message.is_char_boundary(cut) {
                    cut -= 1;
                }
                message.truncate(cut);
            }
            let retryable = matches!(status.as_u16(), 408 | 429) || status.is_server_error();
            return Err(ClientError::Transport {
                status: Some(status.as_u16()),
                message,
                retryable,
                backoff_hint,
            });
        }

        let value: serde_json::Value = response
            .json()
            .map_err(|e| ClientError::MalformedResponse(format!("invalid JSON body: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| {
                ClientError::MalformedResponse("missing choices[0].message.content".to_owned())
            })
    }

    fn is_temperature_rejection(error: &ClientError) -> bool {
        matches!(
            error,
            ClientError::Transport { status: Some(400), message, .. }
                if message.to_lowercase().contains("temperature")
        )
    }
}

impl CompletionSource for HttpEndpoint {
    fn complete(&self, messages: &MessagePair, _ctx: &CompletionContext) -> Result<String, ClientError> {
        let temperature = self
            .clamped_to
            .lock()
            .expect("clamp lock")
            .unwrap_or(self.config.temperature);
        match self.post_once(messages, temperature) {
            Err(e) if Self::is_temperature_rejection(&e) && temperature > CLAMP_FALLBACK => {
                log::warn!(
                    "{}: endpoint rejected temperature {temperature}, retrying at {CLAMP_FALLBACK}",
                    self.config.label()
                );
                *self.clamped_to.lock().expect("clamp lock") = Some(CLAMP_FALLBACK);
                self.post_once(messages, CLAMP_FALLBACK)
            }
            other => other,
        }
    }

    fn clamped_temperature(&self) -> Option<f64> {
        *self.clamped_to.lock().expect("clamp lock")
    }
}
