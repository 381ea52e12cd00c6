//! OpenAI-compatible chat-completions backend for the planner.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tale_core::planner::{BackendError, LlmBackend, PlanSource, Stage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub retry_base_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
            max_retries: 3,
            retry_base_ms: 1000,
        }
    }
}

#[derive(Deserialize)]
struct Completion {
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

pub struct HttpBackend {
    cfg: BackendConfig,
    key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&cfg.api_key_env)
            .map_err(|_| BackendError(format!("environment variable {} is not set", cfg.api_key_env)))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend { cfg, key, agent })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, prompt: &str) -> Result<String, (bool, String)> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": 0,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let mut resp = self
            .agent
            .post(&self.url())
            .header("Authorization", &format!("Bearer {}", self.key))
            .send_json(&body)
            .map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err((true, format!("HTTP {status}")));
        }
        if status != 200 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err((false, format!("HTTP {status}: {}", text.chars().take(300).collect::<String>())));
        }
        let c: Completion = resp.body_mut().read_json().map_err(|e| (false, format!("bad response body: {e}")))?;
        c.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or((false, "response has no message content".into()))
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&mut self, stage: Stage, prompt: &str) -> Result<String, BackendError> {
        let mut delay = self.cfg.retry_base_ms;
        let mut tries = 0;
        loop {
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err((retry, msg)) if retry && tries < self.cfg.max_retries => {
                    log::warn!("{stage:?} query failed ({msg}); retrying in {delay} ms");
                    thread::sleep(Duration::from_millis(delay));
                    delay *= 2;
                    tries += 1;
                }
                Err((_, msg)) => return Err(BackendError(msg)),
            }
        }
    }

    fn source(&self) -> PlanSource {
        PlanSource::Live
    }

    fn model(&self) -> String {
        self.cfg.model.clone()
    }

    fn timestamp(&self) -> String {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}
