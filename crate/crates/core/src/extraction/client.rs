//! Text-completion clients: a deterministic mock, a scripted client for
//! tests and an HTTP client for live endpoints.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

use super::prompts::{render_answer, Layer, PromptPattern, ANSWER_MARKER, REPORT_MARKER};
use crate::model::AccidentAbstract;

pub const ENDPOINT_VAR: &str = "CRASHSYNTH_LLM_ENDPOINT";
pub const KEY_VAR: &str = "CRASHSYNTH_LLM_KEY";
pub const MODEL_VAR: &str = "CRASHSYNTH_LLM_MODEL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint returned status {0}")]
    Status(u16),
    #[error("client misconfigured: {0}")]
    Config(String),
}

impl ClientError {
    /// Whether another attempt may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            ClientError::Transport(_) => true,
            ClientError::Status(s) => *s == 429 || *s >= 500,
            ClientError::Config(_) => false,
        }
    }
}

/// A text-completion endpoint.
pub trait ExtractionClient: Sync {
    fn complete(&self, prompt: &str) -> Result<String, ClientError>;
}

/// Answers from annotated abstracts, keyed by the exact report text.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    gold: BTreeMap<String, AccidentAbstract>,
}

impl MockClient {
    pub fn new() -> Self {
        MockClient::default()
    }

    pub fn insert(&mut self, report: &str, gold: AccidentAbstract) {
        self.gold.insert(report.trim().to_string(), gold);
    }

    fn layer_of(prompt: &str) -> Option<Layer> {
        Layer::ALL
            .into_iter()
            .find(|&l| prompt.starts_with(&PromptPattern::standard(l).task))
    }

    fn report_of(prompt: &str) -> Option<&str> {
        let start = prompt.rfind(REPORT_MARKER)? + REPORT_MARKER.len();
        let end = prompt.rfind(ANSWER_MARKER)?;
        prompt.get(start..end)
    }
}

impl ExtractionClient for MockClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let layer = Self::layer_of(prompt)
            .ok_or_else(|| ClientError::Config("mock does not recognise this prompt".into()))?;
        match Self::report_of(prompt).and_then(|r| self.gold.get(r.trim())) {
            Some(gold) => Ok(render_answer(layer, gold)),
            None => Ok(layer.tags().iter().map(|t| format!("<{t}></{t}>")).collect::<Vec<_>>().join("\n")),
        }
    }
}

/// Replays a fixed sequence of responses, one per call.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    responses: Mutex<Vec<Result<String, ClientError>>>,
    calls: Mutex<Vec<String>>,
}

impl ScriptedClient {
    pub fn new(responses: Vec<Result<String, ClientError>>) -> Self {
        let mut r = responses;
        r.reverse();
        ScriptedClient {
            responses: Mutex::new(r),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Prompts received so far.
    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().expect("calls lock").clone()
    }
}

impl ExtractionClient for ScriptedClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        self.calls.lock().expect("calls lock").push(prompt.to_string());
        self.responses
            .lock()
            .expect("responses lock")
            .pop()
            .unwrap_or_else(|| Err(ClientError::Config("script exhausted".into())))
    }
}

/// Chat-completions style HTTP endpoint.
pub struct HttpClient {
    endpoint: String,
    key: Option<String>,
    model: String,
    http: reqwest::blocking::Client,
}

impl HttpClient {
    pub fn new(endpoint: &str, key: Option<String>, model: &str) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(HttpClient {
            endpoint: endpoint.to_string(),
            key,
            model: model.to_string(),
            http,
        })
    }

    /// Reads the endpoint, key and model from the environment.
    pub fn from_env() -> Result<Self, ClientError> {
        let endpoint =
            std::env::var(ENDPOINT_VAR).map_err(|_| ClientError::Config(format!("{ENDPOINT_VAR} is not set")))?;
        let model = std::env::var(MODEL_VAR).unwrap_or_else(|_| "gpt-4".into());
        HttpClient::new(&endpoint, std::env::var(KEY_VAR).ok(), &model)
    }
}

impl ExtractionClient for HttpClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let body = serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.http.post(&self.endpoint).json(&body);
        if let Some(k) = &self.key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| ClientError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ClientError::Status(resp.status().as_u16()));
        }
        let v: serde_json::Value = resp.json().map_err(|e| ClientError::Transport(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| ClientError::Transport("response has no message content".into()))
    }
}
