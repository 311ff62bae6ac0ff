//! Sharp bounds on misallocation loss when demand is only known through an
//! anchor point, slope bounds and an optional choke price per market.

mod conditional;
mod extremal;
mod penalty;
mod problem;
mod sampler;
mod search;

pub use conditional::{conditional_bound, ConditionalBound, Side};
pub use extremal::{construct_extremal, profile_misallocation};
pub use penalty::triangle_penalty;
pub use problem::{candidate_interval, interiority_violations, BoundsMarket, BoundsProblem};
pub use sampler::admissible_sampler;
pub use search::{
    solve_bounds, solve_bounds_at, solve_bounds_seeded, AnchorMode, BoundsDiagnostics, BoundsResult, SideSolution,
    PRICE_TOL,
};
