use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use super::{CompletionProvider, CompletionRequest, ProviderError};

pub const ENV_ENDPOINT: &str = "STAR_FM_ENDPOINT";
pub const ENV_KEY: &str = "STAR_FM_KEY";
pub const ENV_MODEL: &str = "STAR_FM_MODEL";

/// Chat-completions client for OpenAI-compatible endpoints.
#[derive(Debug)]
pub struct HttpProvider {
    endpoint: String,
    key: Option<String>,
    model: String,
    agent: ureq::Agent,
    calls: AtomicUsize,
}

impl HttpProvider {
    pub fn new(endpoint: &str, key: Option<&str>, model: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .new_agent();
        HttpProvider {
            endpoint: endpoint.to_string(),
            key: key.map(str::to_string),
            model: model.to_string(),
            agent,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| ProviderError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let key = std::env::var(ENV_KEY).ok();
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-4o".to_string());
        Ok(Self::new(&endpoint, key.as_deref(), &model))
    }

    pub fn request_body(&self, request: &CompletionRequest<'_>) -> Value {
        let mut messages = vec![json!({"role": "system", "content": request.prompt.system})];
        for (ask, answer) in &request.prompt.few_shot_examples {
            messages.push(json!({"role": "user", "content": ask}));
            messages.push(json!({"role": "assistant", "content": format!("```\n{answer}```")}));
        }
        let user = if request.images.is_empty() {
            json!(request.prompt.user)
        } else {
            let mut parts = vec![json!({"type": "text", "text": request.prompt.user})];
            for img in request.images {
                let data = base64::engine::general_purpose::STANDARD.encode(&img.png);
                parts.push(json!({
                    "type": "image_url",
                    "image_url": {"url": format!("data:image/png;base64,{data}")}
                }));
            }
            Value::Array(parts)
        };
        messages.push(json!({"role": "user", "content": user}));
        json!({
            "model": self.model,
            "messages": messages,
            "temperature": 0,
            "max_tokens": request.max_tokens,
        })
    }
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(self.request_body(request))
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let body: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Response(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Response("no choices[0].message.content".into()))
    }

    fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}
