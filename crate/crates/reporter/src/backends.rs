//! HTTP completion backends and the shared clock/gate implementations.
//!
//! Two wire shapes are supported: an OpenAI-style chat endpoint
//! (`POST <base>/v1/chat/completions`, reply text at
//! `choices[0].message.content`) and an Ollama-style local server
//! (`POST <base>/api/generate`, reply text at `response`). Both are plain
//! blocking calls; retry, backoff and pacing live in the core `complete`
//! wrapper.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use ietf_reporter_core::llm::{
    Clock, CompletionRequest, DispatchGate, LlmBackend, RateLimiter, SendFailure,
};
use serde_json::json;

/// Env var holding the API key for the remote backend.
pub const API_KEY_ENV: &str = "INSIGHTS_API_KEY";
/// Env var holding the remote backend base URL.
pub const API_BASE_ENV: &str = "INSIGHTS_API_BASE";

/// Context window assumed for models the registry does not know.
pub const DEFAULT_CONTEXT_TOKENS: u32 = 32_768;

/// Wall clock: monotonic milliseconds since construction, real sleeping.
#[derive(Debug)]
pub struct SystemClock {
    started: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            started: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(Duration::from_millis(ms));
    }
}

/// Thread-safe dispatch gate shared by concurrent summarizers.
#[derive(Debug)]
pub struct SharedGate(Mutex<RateLimiter>);

impl SharedGate {
    pub fn new(requests_per_minute: u32) -> Self {
        SharedGate(Mutex::new(RateLimiter::new(requests_per_minute)))
    }
}

impl DispatchGate for SharedGate {
    fn try_dispatch(&self, now_ms: u64) -> Result<(), u64> {
        self.0.lock().unwrap().try_dispatch(now_ms)
    }
}

fn classify_status(status: u16, body: String) -> SendFailure {
    if status == 429 || (500..600).contains(&status) {
        SendFailure::Retryable {
            status: Some(status),
            message: body,
        }
    } else {
        SendFailure::Terminal {
            status: Some(status),
            message: body,
        }
    }
}

fn post_json(
    agent: &ureq::Agent,
    url: &str,
    api_key: Option<&str>,
    payload: &serde_json::Value,
) -> Result<serde_json::Value, SendFailure> {
    let mut request = agent.post(url);
    if let Some(key) = api_key {
        request = request.set("Authorization", &format!("Bearer {key}"));
    }
    match request.send_json(payload) {
        Ok(response) => response.into_json().map_err(|e| SendFailure::Terminal {
            status: None,
            message: format!("reply is not JSON: {e}"),
        }),
        Err(ureq::Error::Status(status, response)) => {
            let body = response.into_string().unwrap_or_default();
            Err(classify_status(status, body))
        }
        Err(ureq::Error::Transport(t)) => Err(SendFailure::Retryable {
            status: None,
            message: t.to_string(),
        }),
    }
}

/// Remote chat-completions backend.
pub struct ApiBackend {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub context_tokens: u32,
    agent: ureq::Agent,
}

impl ApiBackend {
    pub fn new(
        base_url: String,
        model: String,
        api_key: Option<String>,
        context_tokens: u32,
        timeout_ms: u64,
    ) -> Self {
        ApiBackend {
            base_url,
            model,
            api_key,
            context_tokens,
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_millis(timeout_ms.max(1)))
                .build(),
        }
    }
}

impl LlmBackend for ApiBackend {
    fn name(&self) -> &str {
        "api"
    }

    fn context_tokens(&self) -> u32 {
        self.context_tokens
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, SendFailure> {
        let url = format!("{}/v1/chat/completions", self.base_url.trim_end_matches('/'));
        let payload = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        });
        let reply = post_json(&self.agent, &url, self.api_key.as_deref(), &payload)?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(String::from)
            .ok_or_else(|| SendFailure::Terminal {
                status: None,
                message: "reply carries no choices[0].message.content".into(),
            })
    }
}

/// Local model-server backend.
pub struct LocalBackend {
    pub base_url: String,
    pub model: String,
    pub context_tokens: u32,
    agent: ureq::Agent,
}

impl LocalBackend {
    pub fn new(base_url: String, model: String, context_tokens: u32, timeout_ms: u64) -> Self {
        LocalBackend {
            base_url,
            model,
            context_tokens,
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_millis(timeout_ms.max(1)))
                .build(),
        }
    }
}

impl LlmBackend for LocalBackend {
    fn name(&self) -> &str {
        "local"
    }

    fn context_tokens(&self) -> u32 {
        self.context_tokens
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, SendFailure> {
        let url = format!("{}/api/generate", self.base_url.trim_end_matches('/'));
        let payload = json!({
            "model": self.model,
            "prompt": format!("{}\n\n{}", request.system_prompt, request.user_prompt),
            "stream": false,
        });
        let reply = post_json(&self.agent, &url, None, &payload)?;
        reply["response"]
            .as_str()
            .map(String::from)
            .ok_or_else(|| SendFailure::Terminal {
                status: None,
                message: "reply carries no response field".into(),
            })
    }
}

/// Context window for a model: registry value when known, otherwise the
/// default.
pub fn context_tokens_for(model: &str) -> u32 {
    ietf_reporter_core::llm::find_model(model)
        .map(|m| m.context_tokens)
        .unwrap_or(DEFAULT_CONTEXT_TOKENS)
}
