//! Grid-market simulation, jump detection along cost paths, curvature-smoothed
//! allocations and cutoff-gap statistics.

mod gaps;
mod rng;
mod scenario;
mod smooth;
mod sweep;

pub use gaps::{cutoff_gap_statistics, GapStudy, GapSummary};
pub use rng::stream_rng;
pub use scenario::{run_grid_scenario, scenario_rows, CostModel, ScenarioConfig, ScenarioOutcome, ScenarioRow};
pub use smooth::{smoothed_allocation, smoothed_allocation_costs, smoothed_kkt_residual};
pub use sweep::{sweep_cost_path, CostPath, JumpEvent, T_RESOLUTION, T_RESOLUTION_FINE};
