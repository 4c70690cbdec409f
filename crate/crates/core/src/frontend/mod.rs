//! Producers of the two planning artifacts: the task list and the raw
//! robot/task fitness matrix.

mod extract;
mod http;
mod mock;
mod template;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{RobotProfile, Task};

pub use extract::{extract_first_json, parse_fitness, parse_task_list};
pub use http::{EndpointConfig, HttpProvider, DEFAULT_TOKEN_ENV};
pub use mock::{mock_decompose, mock_fitness, MockProvider, MockRules};
pub use template::{render, Templates, DECOMPOSE_TEMPLATE, FITNESS_TEMPLATE};

/// Natural-language request plus an optional machine-readable task list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured_hint: Option<Value>,
}

impl Instruction {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into(), structured_hint: None }
    }

    pub fn with_hint(mut self, hint: Value) -> Self {
        self.structured_hint = Some(hint);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontendError {
    #[error("instruction carries no structured hint")]
    MissingHint,
    #[error("task list is empty")]
    EmptyTaskList,
    #[error("output does not match the schema: {0}")]
    Schema(String),
    #[error("request timed out")]
    Timeout,
    #[error("no valid output after {attempts} attempts: {last}")]
    SchemaInvalidAfterRetries { attempts: u32, last: String },
    #[error("transport error: {0}")]
    Transport(String),
}

/// A provider result. `degraded` explains why a fallback was used.
#[derive(Debug, Clone, PartialEq)]
pub struct Provided<T> {
    pub value: T,
    pub degraded: Option<String>,
}

impl<T> Provided<T> {
    pub fn clean(value: T) -> Self {
        Self { value, degraded: None }
    }

    pub fn degraded(value: T, reason: impl Into<String>) -> Self {
        Self { value, degraded: Some(reason.into()) }
    }
}

pub trait DecompositionProvider: Send + Sync {
    fn decompose(&self, instruction: &Instruction, robots: &[RobotProfile]) -> Result<Provided<Vec<Task>>, FrontendError>;
}

/// Raw, unnormalized scores, robot-major.
pub trait FitnessProvider: Send + Sync {
    fn fitness(&self, robots: &[RobotProfile], tasks: &[Task]) -> Result<Provided<Vec<Vec<f64>>>, FrontendError>;
}

/// Scores every pair 1.0; the documented default when no grader is used.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformFitness;

impl FitnessProvider for UniformFitness {
    fn fitness(&self, robots: &[RobotProfile], tasks: &[Task]) -> Result<Provided<Vec<Vec<f64>>>, FrontendError> {
        Ok(Provided::clean(vec![vec![1.0; tasks.len()]; robots.len()]))
    }
}
