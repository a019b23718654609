//! Retrying HTTP GET used by ingestion.
//!
//! Transport errors, 429 and 5xx responses retry with exponential backoff;
//! 404 is surfaced as its own case so callers can distinguish an absent
//! meeting from a broken service. Bodies are decoded as UTF-8 with invalid
//! sequences replaced, never rejected.

use std::io::Read;
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum HttpError {
    #[error("resource not found: {0}")]
    NotFound(String),
    #[error("request to {url} failed after {attempts} attempts: {message}")]
    Exhausted {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("request to {url} failed with status {status}")]
    Status { url: String, status: u16 },
}

#[derive(Debug, Clone, Copy)]
pub struct RetrySettings {
    pub max_retries: u32,
    pub base_backoff_ms: u64,
}

impl Default for RetrySettings {
    fn default() -> Self {
        RetrySettings {
            max_retries: 3,
            base_backoff_ms: 500,
        }
    }
}

pub struct HttpClient {
    agent: ureq::Agent,
    retry: RetrySettings,
}

impl HttpClient {
    pub fn new(timeout_ms: u64, retry: RetrySettings) -> Self {
        HttpClient {
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_millis(timeout_ms.max(1)))
                .build(),
            retry,
        }
    }

    /// Fetches `url` as text. Retries transport errors and 429/5xx with
    /// backoff `base * 2^attempt`; other statuses fail immediately.
    pub fn get_text(&self, url: &str) -> Result<String, HttpError> {
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            let outcome = self.agent.get(url).call();
            let (retryable, message) = match outcome {
                Ok(response) => return Ok(read_lossy(response)),
                Err(ureq::Error::Status(404, _)) => return Err(HttpError::NotFound(url.into())),
                Err(ureq::Error::Status(status, _)) if status == 429 || (500..600).contains(&status) => {
                    (true, format!("status {status}"))
                }
                Err(ureq::Error::Status(status, _)) => {
                    return Err(HttpError::Status {
                        url: url.into(),
                        status,
                    })
                }
                Err(ureq::Error::Transport(t)) => (true, t.to_string()),
            };
            debug_assert!(retryable);
            if attempts > self.retry.max_retries {
                return Err(HttpError::Exhausted {
                    url: url.into(),
                    attempts,
                    message,
                });
            }
            std::thread::sleep(Duration::from_millis(
                self.retry.base_backoff_ms << (attempts - 1),
            ));
        }
    }
}

fn read_lossy(response: ureq::Response) -> String {
    let mut bytes = Vec::new();
    // A short read only truncates the body; the pipeline treats missing
    // material as empty rather than failing the whole sync.
    let _ = response.into_reader().read_to_end(&mut bytes);
    String::from_utf8_lossy(&bytes).into_owned()
}
