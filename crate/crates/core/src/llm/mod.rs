//! Completion backends, policy, and the model registry.
//!
//! A backend is anything that can answer one [`CompletionRequest`];
//! [`complete`] wraps it with context-budget enforcement, sliding-window
//! rate limiting and retry with exponential backoff. Time is abstracted
//! behind [`Clock`] so the retry and rate-limit behavior can be simulated
//! deterministically.

pub mod mock;
pub mod summarize;

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::index::SCALARS_PER_TOKEN;

/// Parameter-count boundary between Small and Large models, in billions.
pub const LARGE_MODEL_PARAMS_THRESHOLD: f64 = 10.0;

/// Default context window for Small models.
pub const SMALL_CONTEXT_TOKENS: u32 = 8_192;
/// Default context window for Large models.
pub const LARGE_CONTEXT_TOKENS: u32 = 32_768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelCategory {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Locality {
    Local,
    Api,
}

/// One entry of the model registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub parameters_billions: f64,
    pub size_gb: f64,
    pub category: ModelCategory,
    pub context_tokens: u32,
    pub locality: Locality,
}

/// A model is Large iff it has at least
/// [`LARGE_MODEL_PARAMS_THRESHOLD`] billion parameters.
pub fn classify_model(parameters_billions: f64) -> ModelCategory {
    if parameters_billions >= LARGE_MODEL_PARAMS_THRESHOLD {
        ModelCategory::Large
    } else {
        ModelCategory::Small
    }
}

/// The built-in registry of locally runnable models.
pub fn builtin_models() -> Vec<ModelSpec> {
    let rows: [(&str, f64, f64); 7] = [
        ("codestral:latest", 22.2, 12.0),
        ("llama3:70b-instruct", 70.6, 39.0),
        ("command-r:latest", 35.0, 20.0),
        ("mixtral:latest", 47.0, 26.0),
        ("gemma2", 9.2, 5.4),
        ("phi3", 3.8, 2.4),
        ("llama3", 8.0, 4.7),
    ];
    rows.iter()
        .map(|&(name, parameters_billions, size_gb)| {
            let category = classify_model(parameters_billions);
            ModelSpec {
                name: String::from(name),
                parameters_billions,
                size_gb,
                category,
                context_tokens: match category {
                    ModelCategory::Small => SMALL_CONTEXT_TOKENS,
                    ModelCategory::Large => LARGE_CONTEXT_TOKENS,
                },
                locality: Locality::Local,
            }
        })
        .collect()
}

/// Looks a model up in the built-in registry.
pub fn find_model(name: &str) -> Option<ModelSpec> {
    builtin_models().into_iter().find(|m| m.name == name)
}

/// One completion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl CompletionRequest {
    /// Estimated tokens this request needs from the context window: the
    /// prompt estimate plus the output reservation.
    pub fn required_tokens(&self) -> u32 {
        let prompt_scalars =
            self.system_prompt.chars().count() + self.user_prompt.chars().count();
        (prompt_scalars.div_ceil(SCALARS_PER_TOKEN)) as u32 + self.max_output_tokens
    }
}

/// Retry and rate-limit policy for a backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendPolicy {
    pub max_retries: u32,
    pub base_backoff_ms: u64,
    /// Also the maximum burst: at most this many dispatches happen in any
    /// sixty-second window.
    pub requests_per_minute: u32,
}

impl Default for BackendPolicy {
    fn default() -> Self {
        BackendPolicy {
            max_retries: 3,
            base_backoff_ms: 500,
            requests_per_minute: 60,
        }
    }
}

/// A failed send attempt, split by whether retrying can help.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SendFailure {
    /// Transport errors, HTTP 429 and 5xx.
    Retryable { status: Option<u16>, message: String },
    /// Anything else; retrying would repeat the same failure.
    Terminal { status: Option<u16>, message: String },
}

impl SendFailure {
    fn status(&self) -> Option<u16> {
        match self {
            SendFailure::Retryable { status, .. } | SendFailure::Terminal { status, .. } => *status,
        }
    }

    fn message(&self) -> &str {
        match self {
            SendFailure::Retryable { message, .. } | SendFailure::Terminal { message, .. } => {
                message
            }
        }
    }
}

/// A completion backend: one raw attempt, no retry or pacing.
pub trait LlmBackend {
    fn name(&self) -> &str;
    fn context_tokens(&self) -> u32;
    fn send(&self, request: &CompletionRequest) -> Result<String, SendFailure>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for &T {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn context_tokens(&self) -> u32 {
        (**self).context_tokens()
    }
    fn send(&self, request: &CompletionRequest) -> Result<String, SendFailure> {
        (**self).send(request)
    }
}

/// Monotonic time source. Sleeping through an injected clock keeps backoff
/// and rate-limit behavior testable without real waiting.
pub trait Clock {
    fn now_ms(&self) -> u64;
    fn sleep_ms(&self, ms: u64);
}

impl<T: Clock + ?Sized> Clock for &T {
    fn now_ms(&self) -> u64 {
        (**self).now_ms()
    }
    fn sleep_ms(&self, ms: u64) {
        (**self).sleep_ms(ms)
    }
}

/// Simulated clock: sleeping advances time immediately.
#[derive(Debug, Default)]
pub struct SimClock {
    now: AtomicU64,
}

impl SimClock {
    pub fn new() -> Self {
        SimClock::default()
    }
}

impl Clock for SimClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }
    fn sleep_ms(&self, ms: u64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }
}

/// Admission control for dispatches, shared between concurrent callers.
pub trait DispatchGate {
    /// Records a dispatch at `now_ms` if allowed, otherwise returns how many
    /// milliseconds to wait before asking again.
    fn try_dispatch(&self, now_ms: u64) -> Result<(), u64>;
}

impl<T: DispatchGate + ?Sized> DispatchGate for &T {
    fn try_dispatch(&self, now_ms: u64) -> Result<(), u64> {
        (**self).try_dispatch(now_ms)
    }
}

/// Sliding-window rate limiter.
///
/// Keeps the timestamps of the last minute's dispatches; a new dispatch is
/// admitted only while fewer than `requests_per_minute` fall inside the
/// window, which bounds every sixty-second interval — including bursts —
/// to the configured rate.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    window: VecDeque<u64>,
    requests_per_minute: u32,
}

const WINDOW_MS: u64 = 60_000;

impl RateLimiter {
    pub fn new(requests_per_minute: u32) -> Self {
        RateLimiter {
            window: VecDeque::new(),
            requests_per_minute: requests_per_minute.max(1),
        }
    }

    pub fn try_dispatch(&mut self, now_ms: u64) -> Result<(), u64> {
        while let Some(&oldest) = self.window.front() {
            if oldest + WINDOW_MS <= now_ms {
                self.window.pop_front();
            } else {
                break;
            }
        }
        if (self.window.len() as u32) < self.requests_per_minute {
            self.window.push_back(now_ms);
            Ok(())
        } else {
            let oldest = *self.window.front().expect("window is non-empty");
            Err(oldest + WINDOW_MS - now_ms)
        }
    }
}

/// Single-threaded [`DispatchGate`] over a [`RateLimiter`].
#[derive(Debug)]
pub struct SerialGate(RefCell<RateLimiter>);

impl SerialGate {
    pub fn new(requests_per_minute: u32) -> Self {
        SerialGate(RefCell::new(RateLimiter::new(requests_per_minute)))
    }
}

impl DispatchGate for SerialGate {
    fn try_dispatch(&self, now_ms: u64) -> Result<(), u64> {
        self.0.borrow_mut().try_dispatch(now_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompleteError {
    #[error("request needs {needed} tokens but the model context is {available}")]
    ContextOverflow { needed: u32, available: u32 },
    #[error("gave up after {attempts} attempts: {last_error}")]
    RateLimitExhausted { attempts: u32, last_error: String },
    #[error("backend error{}: {message}", status.map(|s| alloc::format!(" (status {s})")).unwrap_or_default())]
    Backend { status: Option<u16>, message: String },
}

/// Sends a request through `backend` under `policy`.
///
/// The context budget is checked before anything is dispatched. Every
/// attempt, including retries, passes the gate; retryable failures back off
/// `base_backoff_ms * 2^attempt` and retry up to `max_retries` times.
pub fn complete<B, G, C>(
    backend: &B,
    request: &CompletionRequest,
    policy: &BackendPolicy,
    gate: &G,
    clock: &C,
) -> Result<String, CompleteError>
where
    B: LlmBackend + ?Sized,
    G: DispatchGate + ?Sized,
    C: Clock + ?Sized,
{
    let needed = request.required_tokens();
    let available = backend.context_tokens();
    if needed > available {
        return Err(CompleteError::ContextOverflow { needed, available });
    }

    let mut attempts = 0u32;
    loop {
        loop {
            match gate.try_dispatch(clock.now_ms()) {
                Ok(()) => break,
                Err(wait_ms) => clock.sleep_ms(wait_ms.max(1)),
            }
        }
        attempts += 1;
        match backend.send(request) {
            Ok(text) => return Ok(text),
            Err(failure @ SendFailure::Terminal { .. }) => {
                return Err(CompleteError::Backend {
                    status: failure.status(),
                    message: String::from(failure.message()),
                })
            }
            Err(failure @ SendFailure::Retryable { .. }) => {
                if attempts > policy.max_retries {
                    return Err(CompleteError::RateLimitExhausted {
                        attempts,
                        last_error: String::from(failure.message()),
                    });
                }
                clock.sleep_ms(policy.base_backoff_ms << (attempts - 1));
            }
        }
    }
}

/// A backend bundled with its policy, gate and clock.
pub struct LlmClient<B, G, C> {
    pub backend: B,
    pub gate: G,
    pub clock: C,
    pub policy: BackendPolicy,
}

impl<B, G, C> LlmClient<B, G, C>
where
    B: LlmBackend,
    G: DispatchGate,
    C: Clock,
{
    pub fn new(backend: B, gate: G, clock: C, policy: BackendPolicy) -> Self {
        LlmClient {
            backend,
            gate,
            clock,
            policy,
        }
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<String, CompleteError> {
        complete(&self.backend, request, &self.policy, &self.gate, &self.clock)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec::Vec;
    use core::cell::RefCell;

    /// Replays a fixed status script; 0 means success.
    struct ScriptedBackend {
        script: RefCell<VecDeque<u16>>,
        attempts: core::cell::Cell<u32>,
    }

    impl ScriptedBackend {
        fn new(script: &[u16]) -> Self {
            ScriptedBackend {
                script: RefCell::new(script.iter().copied().collect()),
                attempts: core::cell::Cell::new(0),
            }
        }
    }

    impl LlmBackend for ScriptedBackend {
        fn name(&self) -> &str {
            "scripted"
        }
        fn context_tokens(&self) -> u32 {
            1 << 20
        }
        fn send(&self, _request: &CompletionRequest) -> Result<String, SendFailure> {
            self.attempts.set(self.attempts.get() + 1);
            match self.script.borrow_mut().pop_front() {
                None | Some(0) => Ok("ok".to_string()),
                Some(status @ (429 | 500..=599)) => Err(SendFailure::Retryable {
                    status: Some(status),
                    message: alloc::format!("status {status}"),
                }),
                Some(status) => Err(SendFailure::Terminal {
                    status: Some(status),
                    message: alloc::format!("status {status}"),
                }),
            }
        }
    }

    fn request() -> CompletionRequest {
        CompletionRequest {
            system_prompt: "sys".to_string(),
            user_prompt: "user".to_string(),
            max_output_tokens: 16,
            temperature: 0.0,
        }
    }

    #[test]
    fn registry_matches_published_table() {
        let models = builtin_models();
        assert_eq!(models.len(), 7);
        let expected = [
            ("codestral:latest", 22.2, 12.0, ModelCategory::Large),
            ("llama3:70b-instruct", 70.6, 39.0, ModelCategory::Large),
            ("command-r:latest", 35.0, 20.0, ModelCategory::Large),
            ("mixtral:latest", 47.0, 26.0, ModelCategory::Large),
            ("gemma2", 9.2, 5.4, ModelCategory::Small),
            ("phi3", 3.8, 2.4, ModelCategory::Small),
            ("llama3", 8.0, 4.7, ModelCategory::Small),
        ];
        for (model, (name, params, size, category)) in models.iter().zip(expected) {
            assert_eq!(model.name, name);
            assert_eq!(model.parameters_billions, params);
            assert_eq!(model.size_gb, size);
            assert_eq!(model.category, category);
            assert_eq!(classify_model(model.parameters_billions), category);
            assert_eq!(model.locality, Locality::Local);
        }
    }

    #[test]
    fn classification_boundary() {
        assert_eq!(classify_model(22.2), ModelCategory::Large);
        assert_eq!(classify_model(3.8), ModelCategory::Small);
        assert_eq!(classify_model(9.2), ModelCategory::Small);
        assert_eq!(classify_model(10.0), ModelCategory::Large);
    }

    #[test]
    fn succeeds_on_third_attempt_after_two_rate_limits() {
        let backend = ScriptedBackend::new(&[429, 429, 0]);
        let clock = SimClock::new();
        let gate = SerialGate::new(100);
        let out = complete(&backend, &request(), &BackendPolicy::default(), &gate, &clock);
        assert_eq!(out.unwrap(), "ok");
        assert_eq!(backend.attempts.get(), 3);
        // Backoff slept 500 then 1000 simulated milliseconds.
        assert_eq!(clock.now_ms(), 1500);
    }

    #[test]
    fn exhausts_after_max_retries_plus_one_attempts() {
        let backend = ScriptedBackend::new(&[500, 500, 500, 500]);
        let clock = SimClock::new();
        let gate = SerialGate::new(100);
        let err = complete(&backend, &request(), &BackendPolicy::default(), &gate, &clock)
            .unwrap_err();
        assert!(matches!(
            err,
            CompleteError::RateLimitExhausted { attempts: 4, .. }
        ));
        assert_eq!(backend.attempts.get(), 4);
    }

    #[test]
    fn terminal_status_fails_without_retry() {
        let backend = ScriptedBackend::new(&[400]);
        let clock = SimClock::new();
        let gate = SerialGate::new(100);
        let err = complete(&backend, &request(), &BackendPolicy::default(), &gate, &clock)
            .unwrap_err();
        assert!(matches!(err, CompleteError::Backend { status: Some(400), .. }));
        assert_eq!(backend.attempts.get(), 1);
    }

    #[test]
    fn context_overflow_reported_before_any_dispatch() {
        let backend = ScriptedBackend::new(&[0]);
        let clock = SimClock::new();
        let gate = SerialGate::new(100);
        let mut req = request();
        req.max_output_tokens = 2 << 20;
        let err = complete(&backend, &req, &BackendPolicy::default(), &gate, &clock).unwrap_err();
        assert!(matches!(err, CompleteError::ContextOverflow { .. }));
        assert_eq!(backend.attempts.get(), 0);
    }

    #[test]
    fn rate_limiter_bounds_every_window() {
        let mut limiter = RateLimiter::new(5);
        let mut now = 0u64;
        let mut dispatches: Vec<u64> = Vec::new();
        for _ in 0..25 {
            loop {
                match limiter.try_dispatch(now) {
                    Ok(()) => {
                        dispatches.push(now);
                        now += 700;
                        break;
                    }
                    Err(wait) => now += wait,
                }
            }
        }
        for (i, &t) in dispatches.iter().enumerate() {
            let in_window = dispatches[i..].iter().take_while(|&&u| u < t + 60_000).count();
            assert!(in_window <= 5, "window starting at {t} has {in_window} dispatches");
        }
    }

    #[test]
    fn gate_is_consulted_for_every_attempt() {
        let backend = ScriptedBackend::new(&[429, 429, 429, 0]);
        let clock = SimClock::new();
        // One slot per minute: each retry must wait a full window out.
        let gate = SerialGate::new(1);
        let out = complete(&backend, &request(), &BackendPolicy::default(), &gate, &clock);
        assert_eq!(out.unwrap(), "ok");
        assert_eq!(backend.attempts.get(), 4);
        assert!(clock.now_ms() >= 3 * 60_000);
    }

    #[test]
    fn request_token_estimate_counts_prompt_and_reservation() {
        let req = CompletionRequest {
            system_prompt: "abcd".to_string(),
            user_prompt: "efgh".to_string(),
            max_output_tokens: 10,
            temperature: 0.0,
        };
        assert_eq!(req.required_tokens(), 12);
    }
}
