//! Completion backends.

use std::collections::VecDeque;

/// Text in, text out. Transport failures are reported as strings and
/// surfaced by the harness with the attempt number.
pub trait BackendClient {
    fn complete(&mut self, prompt: &str) -> std::result::Result<String, String>;
}

/// Replays canned completions in order and records every prompt.
#[derive(Clone, Debug, Default)]
pub struct ScriptedBackend {
    responses: VecDeque<std::result::Result<String, String>>,
    pub prompts: Vec<String>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedBackend {
            responses: responses.into_iter().map(|s| Ok(s.into())).collect(),
            prompts: Vec::new(),
        }
    }

    /// Queues a transport failure.
    pub fn push_failure(&mut self, message: impl Into<String>) {
        self.responses.push_back(Err(message.into()));
    }

    pub fn push(&mut self, response: impl Into<String>) {
        self.responses.push_back(Ok(response.into()));
    }

    pub fn remaining(&self) -> usize {
        self.responses.len()
    }
}

impl BackendClient for ScriptedBackend {
    fn complete(&mut self, prompt: &str) -> std::result::Result<String, String> {
        self.prompts.push(prompt.to_string());
        self.responses
            .pop_front()
            .unwrap_or_else(|| Err("script exhausted".into()))
    }
}

impl<F> BackendClient for F
where
    F: FnMut(&str) -> std::result::Result<String, String>,
{
    fn complete(&mut self, prompt: &str) -> std::result::Result<String, String> {
        self(prompt)
    }
}

#[cfg(feature = "remote")]
pub use remote::{RemoteBackend, RemoteConfig};

#[cfg(feature = "remote")]
mod remote {
    use serde::{Deserialize, Serialize};
    use serde_json::json;

    use super::BackendClient;
    use crate::error::{Error, Result};

    pub const ENDPOINT_VAR: &str = "PBT_LLM_ENDPOINT";
    pub const MODEL_VAR: &str = "PBT_LLM_MODEL";
    /// Names the variable holding the credential.
    pub const CREDENTIAL_VAR_VAR: &str = "PBT_LLM_CREDENTIAL_VAR";
    pub const DEFAULT_CREDENTIAL_VAR: &str = "PBT_LLM_API_KEY";

    #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
    pub struct RemoteConfig {
        pub endpoint: String,
        pub model: String,
        pub credential_var: String,
        #[serde(default)]
        pub temperature: Option<f64>,
        #[serde(default = "default_retries")]
        pub retries: usize,
    }

    fn default_retries() -> usize {
        2
    }

    impl RemoteConfig {
        pub fn from_env() -> Result<RemoteConfig> {
            let var = |name: &str| {
                std::env::var(name).map_err(|_| Error::InvalidConfig(format!("{name} is not set")))
            };
            Ok(RemoteConfig {
                endpoint: var(ENDPOINT_VAR)?,
                model: var(MODEL_VAR)?,
                credential_var: std::env::var(CREDENTIAL_VAR_VAR)
                    .unwrap_or_else(|_| DEFAULT_CREDENTIAL_VAR.to_string()),
                temperature: None,
                retries: default_retries(),
            })
        }
    }

    /// An OpenAI-style chat-completions client.
    pub struct RemoteBackend {
        config: RemoteConfig,
        credential: String,
        agent: ureq::Agent,
    }

    impl RemoteBackend {
        pub fn new(config: RemoteConfig) -> Result<Self> {
            let credential = std::env::var(&config.credential_var).map_err(|_| {
                Error::InvalidConfig(format!("{} is not set", config.credential_var))
            })?;
            Ok(RemoteBackend {
                config,
                credential,
                agent: ureq::Agent::new_with_defaults(),
            })
        }

        fn request(&self, prompt: &str) -> std::result::Result<String, String> {
            let mut body = json!({
                "model": self.config.model,
                "messages": [{"role": "user", "content": prompt}],
            });
            if let Some(t) = self.config.temperature {
                body["temperature"] = json!(t);
            }
            let reply: serde_json::Value = self
                .agent
                .post(&self.config.endpoint)
                .header("Authorization", &format!("Bearer {}", self.credential))
                .send_json(&body)
                .map_err(|e| e.to_string())?
                .body_mut()
                .read_json()
                .map_err(|e| e.to_string())?;
            reply["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| "reply has no message content".to_string())
        }
    }

    impl BackendClient for RemoteBackend {
        fn complete(&mut self, prompt: &str) -> std::result::Result<String, String> {
            let mut last = String::new();
            for _ in 0..=self.config.retries {
                match self.request(prompt) {
                    Ok(text) => return Ok(text),
                    Err(e) => last = e,
                }
            }
            Err(last)
        }
    }
}
