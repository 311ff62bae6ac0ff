use serde::{Deserialize, Serialize};

use super::penalty::triangle_penalty;
use super::problem::BoundsProblem;
use crate::error::{invalid, Result};
use crate::model::tol;

/// Which end of the identified set to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        }
    }
}

/// The inner optimum at a fixed common shadow price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalBound {
    pub value: f64,
    /// Per-market quantity at the common price in the optimizing profile.
    pub endpoints: Vec<f64>,
    /// Per-market distance of the endpoint from its baseline envelope.
    pub delta: Vec<f64>,
    /// Adding-up gap `total - sum(baseline endpoints)` before the projection.
    pub shortfall: f64,
    pub penalty: f64,
}

/// Baseline envelope for `side` at `p`: `true` selects `u`.
///
/// The upper bound minimizes the area under quantity between `p0` and `p`, so
/// it starts from `l` above the anchor and from `u` below it; the lower bound
/// does the opposite.
pub(crate) fn baseline_is_upper(side: Side, p: f64, p0: f64) -> bool {
    (p >= p0) == (side == Side::Lower)
}

/// Extreme of misallocation loss over admissible profiles whose common
/// shadow price is `p`, for the given anchors.
pub fn conditional_bound(prob: &BoundsProblem, anchors: &[f64], p: f64, side: Side) -> Result<ConditionalBound> {
    prob.check_anchors(anchors)?;
    evaluate(prob, anchors, p, side)
}

/// `conditional_bound` without re-validating anchors.
pub(crate) fn evaluate(prob: &BoundsProblem, anchors: &[f64], p: f64, side: Side) -> Result<ConditionalBound> {
    let n = prob.len();
    let mut value = prob.total * p;
    let mut base = Vec::with_capacity(n);
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    let mut on_upper = Vec::with_capacity(n);
    for (m, &p0) in prob.markets.iter().zip(anchors) {
        let (l, u) = m.envelopes(p0, p);
        let up = baseline_is_upper(side, p, p0);
        value -= m.q_obs * p0 + m.envelope_integral(p0, p0, p, up);
        base.push(if up { u } else { l });
        lo.push(l);
        hi.push(u);
        on_upper.push(up);
    }
    let (lsum, usum): (f64, f64) = (lo.iter().sum(), hi.iter().sum());
    let slack = tol::SUM * (1.0 + prob.total);
    if lsum > prob.total + slack || usum < prob.total - slack {
        return Err(invalid(format!(
            "price {p} lies outside the candidate interval (L = {lsum}, U = {usum}, total = {})",
            prob.total
        )));
    }
    let shortfall = prob.total - base.iter().sum::<f64>();
    // Raising mass moves markets off `l`; removing it moves them off `u`.
    let raise = shortfall > 0.0;
    let active: Vec<usize> = (0..n).filter(|&i| on_upper[i] != raise).collect();
    let d: Vec<f64> = active.iter().map(|&i| prob.markets[i].d()).collect();
    let caps: Vec<f64> = active.iter().map(|&i| (hi[i] - lo[i]).max(0.0)).collect();
    let room: f64 = caps.iter().sum();
    let mass = shortfall.abs().min(room);
    let (penalty, moved) = triangle_penalty(&d, &caps, mass)?;
    let mut delta = vec![0.0; n];
    let mut endpoints = base;
    for (k, &i) in active.iter().enumerate() {
        delta[i] = moved[k];
        endpoints[i] += if raise { moved[k] } else { -moved[k] };
    }
    value += match side {
        Side::Upper => -penalty,
        Side::Lower => penalty,
    };
    Ok(ConditionalBound {
        value,
        endpoints,
        delta,
        shortfall,
        penalty,
    })
}
