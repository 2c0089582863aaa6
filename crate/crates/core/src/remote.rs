//! JSON-over-HTTP transport shared by the remote critic and actor adapters.
//!
//! Both adapters send one POST per request and expect one JSON object back.
//! Requests carry `schema_version`; replies are validated by the adapter.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version of the request/reply schema spoken by the remote adapters.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the critic endpoint URL.
pub const CRITIC_URL_ENV: &str = "VRL_CRITIC_URL";
/// Environment variable holding the actor endpoint URL.
pub const ACTOR_URL_ENV: &str = "VRL_ACTOR_URL";
/// Environment variable holding the bearer token sent to either endpoint.
pub const API_TOKEN_ENV: &str = "VRL_API_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    /// No reply within the deadline, or the endpoint could not be reached.
    #[error("endpoint unreachable or timed out: {0}")]
    Unreachable(String),
    /// The endpoint answered with a non-success status.
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
}

/// Sends one JSON request and returns the raw reply body.
pub trait Transport {
    fn post(&mut self, body: &serde_json::Value) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Full URL; when absent the matching environment variable is used.
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_attempts() -> u32 {
    3
}

fn default_timeout() -> f64 {
    60.0
}

impl EndpointConfig {
    pub fn with_url(url: impl Into<String>) -> Self {
        EndpointConfig {
            url: Some(url.into()),
            max_attempts: default_attempts(),
            timeout_secs: default_timeout(),
        }
    }

    /// URL from the config, falling back to the environment variable `env`.
    pub fn resolve_url(&self, env: &str) -> Option<String> {
        self.url.clone().or_else(|| std::env::var(env).ok())
    }
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    /// Reads the bearer token from [`API_TOKEN_ENV`] if set.
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            url: url.into(),
            token: std::env::var(API_TOKEN_ENV).ok(),
            agent,
        }
    }
}

impl Transport for HttpTransport {
    fn post(&mut self, body: &serde_json::Value) -> Result<String, TransportError> {
        let mut req = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        if (200..300).contains(&status) {
            Ok(text)
        } else {
            Err(TransportError::Status { status, body: text })
        }
    }
}

/// Replays canned replies in order; the last one repeats. Records every
/// request it receives.
#[derive(Debug, Clone, Default)]
pub struct StubTransport {
    pub replies: Vec<Result<String, TransportError>>,
    pub requests: Vec<serde_json::Value>,
}

impl StubTransport {
    pub fn new(replies: Vec<Result<String, TransportError>>) -> Self {
        StubTransport {
            replies,
            requests: Vec::new(),
        }
    }
}

impl Transport for StubTransport {
    fn post(&mut self, body: &serde_json::Value) -> Result<String, TransportError> {
        self.requests.push(body.clone());
        let i = (self.requests.len() - 1).min(self.replies.len().saturating_sub(1));
        self.replies
            .get(i)
            .cloned()
            .unwrap_or_else(|| Err(TransportError::Unreachable("stub has no replies".into())))
    }
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn post(&mut self, body: &serde_json::Value) -> Result<String, TransportError> {
        (**self).post(body)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn post(&mut self, body: &serde_json::Value) -> Result<String, TransportError> {
        (**self).post(body)
    }
}
