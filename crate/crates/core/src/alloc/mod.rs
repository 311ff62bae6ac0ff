//! Efficient, cost-minimizing and worst-case allocations of a fixed supply,
//! and the welfare accounting that compares them.

mod efficient;
mod greedy;
mod vertex;
mod welfare;
mod worst;

pub(crate) use efficient::equalize_marginal_values;
pub use efficient::{efficient_allocation, efficient_kkt_residual};
pub use greedy::{cost_order, greedy_allocation, greedy_controlled_allocation, TieBreak};
pub use vertex::{lp_vertex_oracle, vertices, ORACLE_LIMIT, VERTEX_LIMIT};
pub use welfare::{harberger_loss, misallocation_between, misallocation_loss, welfare_report, WelfareReport};
pub use worst::{worst_case_allocation, worst_cutoff, worst_kkt_residual, WorstCase, WorstMethod};
