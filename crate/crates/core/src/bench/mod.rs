//! Synthetic instance families, the ablation grid and its report.

mod family;
mod grid;
mod report;

use thiserror::Error;

pub use family::{generate_family, generate_instance, with_provider_fitness, Category, FamilySpec};
pub use grid::{run_grid, AblationArm, GridSpec};
pub use report::{BenchReport, CellResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("invalid benchmark spec: {0}")]
    SpecInvalid(String),
    #[error("malformed report: {0}")]
    Csv(String),
}
