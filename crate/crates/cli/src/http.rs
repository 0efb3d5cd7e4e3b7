use std::sync::Mutex;
use std::time::{Duration, Instant};

use counsel_core::session::{ChatClient, ChatRequest};
use counsel_core::{Error, Result};
use serde_json::json;

/// Spaces requests evenly: at most `per_minute` starts in any minute.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(n: u32) -> Self {
        RateLimiter { interval: Duration::from_secs(60) / n.max(1), next: Mutex::new(None) }
    }

    /// Reserve the next slot and sleep until it arrives.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |t| t.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Chat-completions adapter for OpenAI-compatible endpoints.
pub struct OpenAiClient {
    model: String,
    url: String,
    api_key: String,
    agent: ureq::Agent,
    limiter: RateLimiter,
    retries: usize,
}

impl OpenAiClient {
    pub fn new(model: &str, base_url: &str, api_key: String, per_minute: u32, retries: usize, timeout: Duration) -> Self {
        OpenAiClient {
            model: model.to_string(),
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            limiter: RateLimiter::per_minute(per_minute),
            retries,
        }
    }

    fn send(&self, body: &serde_json::Value) -> std::result::Result<String, (bool, String)> {
        let resp = self
            .agent
            .post(&self.url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body.clone());
        match resp {
            Ok(r) => {
                let v: serde_json::Value = r.into_json().map_err(|e| (false, format!("unreadable response: {e}")))?;
                v["choices"][0]["message"]["content"]
                    .as_str()
                    .map(str::to_string)
                    .ok_or_else(|| (false, format!("response has no message content: {v}")))
            }
            // rate limiting and server errors are worth another try
            Err(ureq::Error::Status(code, r)) => {
                let text = r.into_string().unwrap_or_default();
                Err((code == 429 || code >= 500, format!("HTTP {code}: {text}")))
            }
            Err(e) => Err((true, e.to_string())),
        }
    }
}

impl ChatClient for OpenAiClient {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        });
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(500 << attempt.min(6)));
            }
            self.limiter.acquire();
            match self.send(&body) {
                Ok(text) => return Ok(text),
                Err((retry, msg)) => {
                    log::warn!("chat request attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                    if !retry {
                        break;
                    }
                }
            }
        }
        Err(Error::Client(last))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limiter_spaces_requests() {
        let l = RateLimiter::per_minute(1200); // one slot per 50 ms
        let start = Instant::now();
        for _ in 0..4 {
            l.acquire();
        }
        let took = start.elapsed();
        assert!(took >= Duration::from_millis(150), "{took:?}");
        assert!(took < Duration::from_millis(1000), "{took:?}");
    }

    #[test]
    fn unreachable_endpoint_is_a_client_error() {
        let c = OpenAiClient::new("m", "http://127.0.0.1:9", "k".into(), 6000, 0, Duration::from_millis(200));
        let req = ChatRequest { model: "m".into(), system: "s".into(), user: "u".into(), temperature: 0.0 };
        assert!(matches!(c.complete(&req), Err(Error::Client(_))));
    }
}
