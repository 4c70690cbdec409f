use serde_json::Value;

use crate::model::{validate_instance, CostParams, ObjectiveWeights, RobotProfile, Task, ValidateOptions};

use super::FrontendError;

/// End index (exclusive) of the balanced JSON value opening at `start`.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (k, &b) in bytes.iter().enumerate().skip(start) {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(k + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// First balanced object or array in `text` that parses as JSON.
pub fn extract_first_json(text: &str) -> Option<Value> {
    let bytes = text.as_bytes();
    let mut from = 0;
    while let Some(off) = bytes[from..].iter().position(|&b| b == b'{' || b == b'[') {
        let start = from + off;
        if let Some(end) = balanced_end(bytes, start) {
            if let Ok(v) = serde_json::from_str(&text[start..end]) {
                return Some(v);
            }
        }
        from = start + 1;
    }
    None
}

/// Reads a task list from either a bare array or `{"tasks": [...]}` and
/// checks it against the instance rules for `robots`.
pub fn parse_task_list(value: &Value, robots: &[RobotProfile]) -> Result<Vec<Task>, FrontendError> {
    let list = match value {
        Value::Object(map) => map.get("tasks").ok_or_else(|| FrontendError::Schema("object without `tasks`".into()))?,
        other => other,
    };
    let tasks: Vec<Task> = serde_json::from_value(list.clone()).map_err(|e| FrontendError::Schema(e.to_string()))?;
    if tasks.is_empty() {
        return Err(FrontendError::EmptyTaskList);
    }
    if let Some(t) = tasks.iter().find(|t| !(t.duration.is_finite() && t.duration > 0.0)) {
        return Err(FrontendError::Schema(format!("task `{}` has non-positive duration", t.id)));
    }
    validate_instance(
        tasks.clone(),
        robots.to_vec(),
        None,
        CostParams::default(),
        ObjectiveWeights::default(),
        ValidateOptions::default(),
    )
    .map_err(|e| FrontendError::Schema(e.to_string()))?;
    Ok(tasks)
}

/// Reads an `n x m` matrix from either a bare array or `{"fitness": [...]}`.
pub fn parse_fitness(value: &Value, n: usize, m: usize) -> Result<Vec<Vec<f64>>, FrontendError> {
    let rows = match value {
        Value::Object(map) => map.get("fitness").ok_or_else(|| FrontendError::Schema("object without `fitness`".into()))?,
        other => other,
    };
    let rows: Vec<Vec<f64>> = serde_json::from_value(rows.clone()).map_err(|e| FrontendError::Schema(e.to_string()))?;
    if rows.len() != n || rows.iter().any(|r| r.len() != m) {
        return Err(FrontendError::Schema(format!("expected a {n}x{m} matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(FrontendError::Schema("non-finite score".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn finds_json_inside_prose() {
        let text = "Sure! Here is the plan:\n```json\n[{\"id\": \"a\", \"note\": \"uses ] and }\"}]\n```\nGood luck.";
        assert_eq!(extract_first_json(text), Some(json!([{"id": "a", "note": "uses ] and }"}])));
    }

    #[test]
    fn skips_unparseable_brace_runs() {
        let text = "set {x | x > 0} then {\"fitness\": [[1]]}";
        assert_eq!(extract_first_json(text), Some(json!({"fitness": [[1]]})));
        assert_eq!(extract_first_json("no json here"), None);
        assert_eq!(extract_first_json("{\"open\": "), None);
    }

    #[test]
    fn task_list_checks() {
        let robots = vec![RobotProfile::new("r", ["arm"])];
        let ok = json!({"tasks": [{"id": "a", "duration": 1.0}, {"id": "b", "duration": 2.0, "dependencies": ["a"]}]});
        assert_eq!(parse_task_list(&ok, &robots).unwrap().len(), 2);
        assert_eq!(parse_task_list(&json!([]), &robots), Err(FrontendError::EmptyTaskList));
        let cyclic = json!([{"id": "a", "duration": 1, "dependencies": ["a"]}]);
        assert!(matches!(parse_task_list(&cyclic, &robots), Err(FrontendError::Schema(_))));
        let unknown_cap = json!([{"id": "a", "duration": 1, "required_capabilities": ["lidar"]}]);
        assert!(matches!(parse_task_list(&unknown_cap, &robots), Err(FrontendError::Schema(_))));
        assert!(matches!(parse_task_list(&json!([{"id": "a", "duration": 0}]), &robots), Err(FrontendError::Schema(_))));
    }

    #[test]
    fn fitness_shape() {
        assert_eq!(parse_fitness(&json!([[0.1, 0.2]]), 1, 2).unwrap(), vec![vec![0.1, 0.2]]);
        assert!(parse_fitness(&json!({"fitness": [[0.1]]}), 1, 2).is_err());
        assert!(parse_fitness(&json!({"scores": []}), 0, 0).is_err());
    }
}
