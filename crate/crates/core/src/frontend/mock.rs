use std::collections::BTreeSet;

use serde_json::Value;

use crate::model::{RobotProfile, Task};

use super::extract::parse_task_list;
use super::{DecompositionProvider, FitnessProvider, FrontendError, Instruction, Provided};

/// Scoring table for [`mock_fitness`].
#[derive(Debug, Clone, PartialEq)]
pub struct MockRules {
    /// Capability tags every robot is expected to have; they never make a
    /// robot a specialist.
    pub generic: BTreeSet<String>,
    pub specialist: f64,
    pub capable: f64,
    pub incapable: f64,
}

impl Default for MockRules {
    fn default() -> Self {
        Self {
            generic: ["nav", "navigation"].into_iter().map(String::from).collect(),
            specialist: 1.0,
            capable: 0.5,
            incapable: 0.0,
        }
    }
}

/// Returns the instruction's structured hint after checking it is a valid
/// task list for `robots`.
pub fn mock_decompose(instruction: &Instruction, robots: &[RobotProfile]) -> Result<Value, FrontendError> {
    let hint = instruction.structured_hint.as_ref().ok_or(FrontendError::MissingHint)?;
    parse_task_list(hint, robots)?;
    Ok(hint.clone())
}

fn words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Capability-keyed scores: `specialist` when the robot can do the task and
/// holds a non-generic tag that the task requires or its description
/// mentions, `capable` when it merely can, `incapable` otherwise.
pub fn mock_fitness(robots: &[RobotProfile], tasks: &[Task], rules: &MockRules) -> Vec<Vec<f64>> {
    let mentioned: Vec<BTreeSet<String>> = tasks.iter().map(|t| words(&t.description)).collect();
    robots
        .iter()
        .map(|r| {
            tasks
                .iter()
                .zip(&mentioned)
                .map(|(t, said)| {
                    if !r.can_perform(t) {
                        return rules.incapable;
                    }
                    let special = r
                        .capabilities
                        .iter()
                        .filter(|c| !rules.generic.contains(*c))
                        .any(|c| t.required_capabilities.contains(c) || said.contains(&c.to_lowercase()));
                    if special { rules.specialist } else { rules.capable }
                })
                .collect()
        })
        .collect()
}

/// Deterministic stand-in for both providers.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    pub rules: MockRules,
}

impl DecompositionProvider for MockProvider {
    fn decompose(&self, instruction: &Instruction, robots: &[RobotProfile]) -> Result<Provided<Vec<Task>>, FrontendError> {
        let hint = mock_decompose(instruction, robots)?;
        Ok(Provided::clean(parse_task_list(&hint, robots)?))
    }
}

impl FitnessProvider for MockProvider {
    fn fitness(&self, robots: &[RobotProfile], tasks: &[Task]) -> Result<Provided<Vec<Vec<f64>>>, FrontendError> {
        Ok(Provided::clean(mock_fitness(robots, tasks, &self.rules)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::normalize_fitness;
    use serde_json::json;

    fn team() -> Vec<RobotProfile> {
        vec![RobotProfile::new("ir_bot", ["nav", "ir"]), RobotProfile::new("rgb_bot", ["nav", "rgb"])]
    }

    #[test]
    fn hint_passes_through() {
        let hint = json!([
            {"id": "t1", "duration": 3, "constraints": {"location": "dock"}},
            {"id": "t2", "duration": 2, "dependencies": ["t1"]}
        ]);
        let ins = Instruction::new("go").with_hint(hint.clone());
        assert_eq!(mock_decompose(&ins, &team()).unwrap(), hint);
        let tasks = MockProvider::default().decompose(&ins, &team()).unwrap().value;
        assert_eq!(tasks[1].dependencies, vec!["t1".to_string()]);
        assert_eq!(tasks[0].location(), Some("dock"));
    }

    #[test]
    fn hint_errors() {
        assert_eq!(mock_decompose(&Instruction::new("go"), &team()), Err(FrontendError::MissingHint));
        let empty = Instruction::new("go").with_hint(json!([]));
        assert_eq!(mock_decompose(&empty, &team()), Err(FrontendError::EmptyTaskList));
    }

    #[test]
    fn rule_table() {
        let thermal = Task::new("scan", 1.0).with_capabilities(["ir"]);
        let walk = Task::new("walk", 1.0).with_capabilities(["nav"]);
        let photo = Task::new("photo", 1.0).with_description("Take an RGB photo of the valve");
        let f = mock_fitness(&team(), &[thermal, walk, photo], &MockRules::default());
        assert_eq!(f, vec![vec![1.0, 0.5, 0.5], vec![0.0, 0.5, 1.0]]);
        let norm = normalize_fitness(&f).unwrap();
        assert_eq!(norm.column(1), vec![0.5, 0.5]);
    }
}
