//! Exact solver for the scheduling and initial-allocation models.

pub mod brute;
pub mod mcf;
pub mod schedule;

pub use brute::{brute_force_schedule, within_guard};
pub use mcf::{solve_min_cost_flow, Capacity, FlowArc, FlowNetwork, FlowSolution};
pub use schedule::{
    build_time_expanded_network, extract_plan, solve_schedule, MovePlan, SchedulingInstance,
    TimeExpandedNetwork,
};
