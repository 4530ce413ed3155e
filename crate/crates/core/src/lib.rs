//! Predict-then-optimize scheduling for battery-swapping stations.
//!
//! Station demand is forecast a few hours ahead, the mobile batteries are
//! planned with an exact min-cost-flow model over that window, the first
//! hour of the plan is executed against realized demand, and the loop
//! repeats every hour.

pub mod allocation;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod forecast;
pub mod scheduler;
pub mod simulate;
pub mod topology;
pub mod traffic;

pub use allocation::{allocate_fixed, allocate_mobile_initial, FleetConfig, FleetSize};
pub use error::{Error, Result};
pub use flow::{brute_force_schedule, solve_schedule, MovePlan, SchedulingInstance};
pub use forecast::{ForecastWindow, Forecaster, ForecasterSpec};
pub use scheduler::{plan_step, FirstStepMoves, PolicyConfig};
pub use simulate::{compute_metrics, hindsight_optimum, run_simulation, Metrics, SimulationTrace};
pub use topology::{load_topology, StationId, Topology};
pub use traffic::{SeriesKind, ShiftSpec, TrafficSeries};
