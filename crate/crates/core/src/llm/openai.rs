use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{LlmError, LlmRequest};

/// Minimal OpenAI-compatible `/chat/completions` client with bounded
/// exponential backoff on 429, 5xx and transport failures.
#[derive(Debug, Clone)]
pub struct OpenAiClient {
    base_url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    max_retries: u32,
    base_delay: Duration,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl OpenAiClient {
    pub const MAX_RETRIES: u32 = 3;

    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            client,
            max_retries: Self::MAX_RETRIES,
            base_delay: Duration::from_millis(500),
        })
    }

    pub fn with_retry_policy(mut self, max_retries: u32, base_delay: Duration) -> Self {
        self.max_retries = max_retries.min(Self::MAX_RETRIES);
        self.base_delay = base_delay;
        self
    }

    fn body(request: &LlmRequest) -> serde_json::Value {
        let mut messages = Vec::new();
        if !request.system_instruction.is_empty() {
            messages.push(json!({ "role": "system", "content": request.system_instruction }));
        }
        messages.push(json!({ "role": "user", "content": request.user_content }));
        json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
        })
    }

    pub fn complete(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let url = format!("{}/chat/completions", self.base_url);
        let body = Self::body(request);
        let mut attempt = 0u32;
        loop {
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let retryable = match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: ChatResponse = resp.json().map_err(|e| LlmError::Api {
                            status: Some(status.as_u16()),
                            retries: attempt,
                            message: format!("unreadable response body: {e}"),
                        })?;
                        let text = parsed
                            .choices
                            .into_iter()
                            .next()
                            .and_then(|c| c.message.content)
                            .unwrap_or_default();
                        if text.trim().is_empty() {
                            return Err(LlmError::Api {
                                status: Some(status.as_u16()),
                                retries: attempt,
                                message: "empty completion".into(),
                            });
                        }
                        return Ok(text);
                    }
                    let message = resp.text().unwrap_or_default();
                    let err = LlmError::Api {
                        status: Some(status.as_u16()),
                        retries: attempt,
                        message,
                    };
                    if status.as_u16() == 429 || status.is_server_error() {
                        err
                    } else {
                        return Err(err);
                    }
                }
                Err(e) if e.is_timeout() => LlmError::Timeout { retries: attempt },
                Err(e) => LlmError::Api {
                    status: None,
                    retries: attempt,
                    message: e.to_string(),
                },
            };
            if attempt >= self.max_retries {
                return Err(retryable);
            }
            log::warn!("LLM request failed ({retryable}); retrying");
            std::thread::sleep(self.base_delay * 2u32.pow(attempt));
            attempt += 1;
        }
    }
}
