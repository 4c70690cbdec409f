//! Domain types, instance validation, cost arithmetic and the schedule
//! verifier.

mod cost;
mod fitness;
mod instance;
mod schedule;
mod types;
mod verify;

pub use cost::{assignment_cost, objective_value, ObjectiveError};
pub use fitness::{normalize_fitness, FitnessError, DEGENERATE_FITNESS};
pub use instance::{validate_instance, InstanceDoc, ModelError, ProblemInstance, ValidateOptions};
pub use schedule::{Schedule, ScheduleEntry, ScheduleFile, FROZEN_KEY};
pub use types::{
    CostParams, FeasibilityMask, FitnessMatrix, ObjectiveWeights, RobotProfile, Task, TaskConstraints,
    TimeWindow, TravelMode,
};
pub use verify::{check_schedule, ConstraintFamily, Violation, TIME_TOL};
