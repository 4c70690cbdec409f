use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{InstanceDoc, ModelError, ProblemInstance};

use super::config::SimConfig;

/// Where a scenario's instance comes from: a path relative to the scenario
/// file, or the document inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Path(PathBuf),
    Inline(InstanceDoc),
}

/// A simulation scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub instance: InstanceSource,
    #[serde(default)]
    pub sim: SimConfig,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("`{path}` is not a valid document: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

/// Reads a scenario and resolves and validates its instance.
pub fn load_scenario(path: &Path) -> Result<(ProblemInstance, SimConfig), ScenarioError> {
    let scenario: Scenario = parse(path, &read(path)?)?;
    let doc = match scenario.instance {
        InstanceSource::Inline(doc) => doc,
        InstanceSource::Path(rel) => {
            let full = path.parent().unwrap_or(Path::new(".")).join(rel);
            parse(&full, &read(&full)?)?
        }
    };
    Ok((doc.validate()?, scenario.sim))
}
