//! The mixed-integer model, its LP export, and the exact anytime solver.

mod anytime;
mod bnb;
mod config;
mod lp;
mod model;
mod warm;

pub use anytime::anytime_solve;
pub use bnb::solve_exact;
pub use config::{BoundSample, SolveConfig, SolveError, SolveResult, SolveStatus};
pub use lp::{check_lp_text, export_lp, fmt_coef, LpParseError, LpSummary, ParsedRow};
pub use model::{
    build_model, build_model_with_big_m, expected_row_count, expected_var_count, schedule_to_point, Bound,
    MilpModel, PointViolation, Row, RowKind, Sense, Var,
};
pub use warm::{warm_start, WarmStart};
