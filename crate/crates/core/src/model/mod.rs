//! Demand curves, surplus integrals and the feasible allocation polytope.

mod demand;
mod feasible;

pub use demand::{DemandCurve, DEFAULT_HILL};
pub use feasible::{caps_at_ceiling, total_gross_surplus, Allocation, FeasibleSet, MarketSpec, Slot};

/// Numerical tolerances shared by every solver.
pub mod tol {
    /// Root finding and bisection brackets.
    pub const ROOT: f64 = 1e-10;
    /// Adding-up and box constraints.
    pub const SUM: f64 = 1e-9;
    /// Absolute error target for numerical quadrature.
    pub const QUADRATURE: f64 = 1e-10;
    /// Two unit costs closer than this are a tie.
    pub const COST_TIE: f64 = 1e-12;
}
