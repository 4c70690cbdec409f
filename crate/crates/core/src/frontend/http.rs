use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use crate::model::{RobotProfile, Task};

use super::extract::{extract_first_json, parse_fitness, parse_task_list};
use super::mock::mock_decompose;
use super::template::{render, Templates};
use super::{DecompositionProvider, FitnessProvider, FrontendError, Instruction, Provided};

pub const DEFAULT_TOKEN_ENV: &str = "ROBOSCHED_LLM_TOKEN";

/// Generic chat-completion endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token, if any.
    pub token_env: String,
    pub timeout_secs: f64,
    /// Re-prompts after a reply that fails schema validation.
    pub max_retries: u32,
    pub max_response_bytes: u64,
    /// Process-wide cap on concurrent requests.
    pub max_in_flight: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            token_env: DEFAULT_TOKEN_ENV.into(),
            timeout_secs: 30.0,
            max_retries: 2,
            max_response_bytes: 1 << 20,
            max_in_flight: 4,
        }
    }
}

struct Gate {
    busy: Mutex<usize>,
    freed: Condvar,
}

static IN_FLIGHT: Gate = Gate { busy: Mutex::new(0), freed: Condvar::new() };

struct Permit;

impl Gate {
    fn acquire(&'static self, cap: usize) -> Permit {
        let mut busy = self.busy.lock().expect("gate lock");
        while *busy >= cap.max(1) {
            busy = self.freed.wait(busy).expect("gate lock");
        }
        *busy += 1;
        Permit
    }
}

impl Drop for Permit {
    fn drop(&mut self) {
        *IN_FLIGHT.busy.lock().expect("gate lock") -= 1;
        IN_FLIGHT.freed.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct HttpProvider {
    pub endpoint: EndpointConfig,
    pub templates: Templates,
}

impl HttpProvider {
    pub fn new(endpoint: EndpointConfig) -> Self {
        Self { endpoint, templates: Templates::default() }
    }

    /// One chat round trip; returns the assistant message text.
    pub fn chat(&self, prompt: &str) -> Result<String, FrontendError> {
        let _permit = IN_FLIGHT.acquire(self.endpoint.max_in_flight);
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(self.endpoint.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}/chat/completions", self.endpoint.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.endpoint.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        })
        .to_string();
        let mut req = agent.post(&url).header("Content-Type", "application/json");
        if let Ok(token) = std::env::var(&self.endpoint.token_env) {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send(body.as_str()).map_err(transport)?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(self.endpoint.max_response_bytes)
            .read_to_string()
            .map_err(transport)?;
        if !(200..300).contains(&status) {
            return Err(FrontendError::Transport(format!("HTTP status {status}")));
        }
        let reply: Value = serde_json::from_str(&text).map_err(|e| FrontendError::Transport(format!("bad envelope: {e}")))?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| FrontendError::Transport("reply has no choices[0].message.content".into()))
    }

    /// Prompts, extracts and validates, re-prompting with the validation
    /// error until `max_retries` is used up.
    fn ask<T>(&self, prompt: &str, parse: impl Fn(&Value) -> Result<T, FrontendError>) -> Result<T, FrontendError> {
        let attempts = self.endpoint.max_retries + 1;
        let mut current = prompt.to_string();
        let mut last = String::new();
        for _ in 0..attempts {
            let content = self.chat(&current)?;
            let outcome = extract_first_json(&content)
                .ok_or_else(|| FrontendError::Schema("reply contains no JSON value".into()))
                .and_then(|v| parse(&v));
            match outcome {
                Ok(v) => return Ok(v),
                Err(e) => {
                    last = e.to_string();
                    current = format!(
                        "{prompt}\n\nYour previous reply was rejected: {last}\nReply again with the corrected JSON only."
                    );
                }
            }
        }
        Err(FrontendError::SchemaInvalidAfterRetries { attempts, last })
    }
}

fn transport(e: ureq::Error) -> FrontendError {
    match e {
        ureq::Error::Timeout(_) => FrontendError::Timeout,
        other => FrontendError::Transport(other.to_string()),
    }
}

fn profiles_json(robots: &[RobotProfile]) -> String {
    serde_json::to_string_pretty(robots).expect("profiles serialize")
}

impl DecompositionProvider for HttpProvider {
    /// Falls back to the structured hint when the endpoint fails.
    fn decompose(&self, instruction: &Instruction, robots: &[RobotProfile]) -> Result<Provided<Vec<Task>>, FrontendError> {
        let prompt = render(
            &self.templates.decompose,
            &[("instruction", &instruction.text), ("robot_profiles", &profiles_json(robots))],
        );
        match self.ask(&prompt, |v| parse_task_list(v, robots)) {
            Ok(tasks) => Ok(Provided::clean(tasks)),
            Err(err) => match mock_decompose(instruction, robots) {
                Ok(hint) => Ok(Provided::degraded(parse_task_list(&hint, robots)?, format!("decomposition fallback: {err}"))),
                Err(_) => Err(err),
            },
        }
    }
}

impl FitnessProvider for HttpProvider {
    /// Falls back to uniform scores when the endpoint fails.
    fn fitness(&self, robots: &[RobotProfile], tasks: &[Task]) -> Result<Provided<Vec<Vec<f64>>>, FrontendError> {
        let task_list = serde_json::to_string_pretty(tasks).expect("tasks serialize");
        let prompt = render(
            &self.templates.fitness,
            &[("robot_profiles", &profiles_json(robots)), ("task_list", &task_list)],
        );
        match self.ask(&prompt, |v| parse_fitness(v, robots.len(), tasks.len())) {
            Ok(f) => Ok(Provided::clean(f)),
            Err(err) => Ok(Provided::degraded(
                vec![vec![1.0; tasks.len()]; robots.len()],
                format!("uniform fitness fallback: {err}"),
            )),
        }
    }
}
