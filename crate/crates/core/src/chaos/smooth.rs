use crate::error::{invalid, Error, Result};
use crate::model::{Allocation, FeasibleSet, MarketSpec};

const MAX_BISECTIONS: usize = 400;

/// Minimizer of `c . q + (kappa / 2) |q|^2` over `fs`.
///
/// The solution is `q_i = clamp((lambda - c_i) / kappa, 0, cap_i)` for the
/// `lambda` that makes the quantities add up; `lambda` is found by bisection
/// and the final bracket is interpolated so the total is met exactly.
pub fn smoothed_allocation_costs(costs: &[f64], fs: &FeasibleSet, kappa: f64) -> Result<(Allocation, f64)> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(invalid("curvature kappa must be positive"));
    }
    if costs.len() != fs.len() {
        return Err(invalid("one cost per market required"));
    }
    let caps = fs.caps();
    let at = |lambda: f64| -> Vec<f64> {
        costs
            .iter()
            .zip(caps)
            .map(|(&c, &cap)| ((lambda - c) / kappa).clamp(0.0, cap))
            .collect()
    };
    let sum = |q: &[f64]| q.iter().sum::<f64>();
    let max_cap = caps.iter().cloned().fold(0.0, f64::max);
    let mut lo = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + kappa * max_cap;
    let (mut q_lo, mut q_hi) = (at(lo), at(hi));
    let total = fs.total();
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let q = at(mid);
        if sum(&q) <= total {
            lo = mid;
            q_lo = q;
        } else {
            hi = mid;
            q_hi = q;
        }
        iterations += 1;
        if iterations > MAX_BISECTIONS {
            return Err(Error::NonConvergence {
                what: "smoothed allocation multiplier",
                iterations,
            });
        }
    }
    let (s_lo, s_hi) = (sum(&q_lo), sum(&q_hi));
    let theta = if s_hi > s_lo {
        (total - s_lo) / (s_hi - s_lo)
    } else {
        0.0
    };
    let q = q_lo
        .iter()
        .zip(&q_hi)
        .zip(caps)
        .map(|((&a, &b), &cap)| (a + theta * (b - a)).clamp(0.0, cap))
        .collect();
    Ok((Allocation::classify(fs, q)?, 0.5 * (lo + hi)))
}

/// [`smoothed_allocation_costs`] with each market's unit cost.
pub fn smoothed_allocation(markets: &[MarketSpec], fs: &FeasibleSet, kappa: f64) -> Result<(Allocation, f64)> {
    let costs: Vec<f64> = markets.iter().map(|m| m.unit_cost).collect();
    smoothed_allocation_costs(&costs, fs, kappa)
}

/// Largest violation of the optimality conditions of the smoothed problem at `lambda`.
pub fn smoothed_kkt_residual(costs: &[f64], fs: &FeasibleSet, kappa: f64, q: &[f64], lambda: f64) -> f64 {
    q.iter()
        .zip(costs)
        .zip(fs.caps())
        .map(|((&x, &c), &cap)| {
            let grad = c + kappa * x - lambda;
            if x <= 0.0 {
                (-grad).max(0.0)
            } else if x >= cap {
                grad.max(0.0)
            } else {
                grad.abs()
            }
        })
        .fold(0.0, f64::max)
}
