//! Multi-robot task scheduling: instance model and verifier, an exact
//! anytime solver for the makespan model, auction and greedy allocators,
//! provider front-ends, a closed-loop execution simulator and a benchmark
//! grid.

pub mod allocator;
pub mod auction;
pub mod bench;
pub mod frontend;
pub mod milp;
pub mod model;
pub mod par;
pub mod sim;

pub use allocator::{Allocator, ExactAllocator, PlanError};
pub use auction::{AuctionAllocator, GreedyAllocator};
