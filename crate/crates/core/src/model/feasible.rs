use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{tol, DemandCurve};

/// The polytope `{ q : 0 <= q_i <= cap_i, sum q_i = total }` under a binding ceiling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    caps: Vec<f64>,
    total: f64,
}

impl FeasibleSet {
    /// Requires `0 < total < sum(caps)`: a ceiling that does not bind is rejected here.
    pub fn new(caps: Vec<f64>, total: f64) -> Result<Self> {
        if caps.is_empty() {
            return Err(invalid("feasible set needs at least one market"));
        }
        if let Some(i) = caps.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(invalid(format!("cap of market {i} must be finite and >= 0")));
        }
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Infeasible(format!("total supply {total} must be > 0")));
        }
        let sum: f64 = caps.iter().sum();
        if total >= sum {
            return Err(Error::Infeasible(format!(
                "total supply {total} must be below the sum of caps {sum} (ceiling must bind)"
            )));
        }
        Ok(FeasibleSet { caps, total })
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.len() == self.caps.len()
            && (q.iter().sum::<f64>() - self.total).abs() <= tol::SUM
            && q.iter()
                .zip(&self.caps)
                .all(|(&x, &c)| x >= -tol::SUM && x <= c + tol::SUM)
    }
}

/// Where a coordinate sits in its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    AtZero,
    Interior,
    AtCap,
}

impl Slot {
    pub fn as_str(self) -> &'static str {
        match self {
            Slot::AtZero => "at_zero",
            Slot::Interior => "interior",
            Slot::AtCap => "at_cap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub quantities: Vec<f64>,
    pub slots: Vec<Slot>,
}

impl Allocation {
    /// Validates `q` against `fs` and tags each coordinate.
    pub fn classify(fs: &FeasibleSet, quantities: Vec<f64>) -> Result<Self> {
        if quantities.len() != fs.len() {
            return Err(invalid(format!(
                "allocation has {} coordinates, feasible set has {}",
                quantities.len(),
                fs.len()
            )));
        }
        if !fs.contains(&quantities) {
            return Err(Error::Infeasible(format!(
                "allocation {quantities:?} violates caps or sums to {} instead of {}",
                quantities.iter().sum::<f64>(),
                fs.total()
            )));
        }
        let slots = quantities
            .iter()
            .zip(fs.caps())
            .map(|(&q, &c)| {
                if q <= tol::SUM {
                    Slot::AtZero
                } else if q >= c - tol::SUM {
                    Slot::AtCap
                } else {
                    Slot::Interior
                }
            })
            .collect();
        Ok(Allocation { quantities, slots })
    }

    pub fn interior_count(&self) -> usize {
        self.slots.iter().filter(|s| **s == Slot::Interior).count()
    }

    /// At most one coordinate strictly inside its box.
    pub fn is_vertex(&self) -> bool {
        self.interior_count() <= 1
    }

    pub fn len(&self) -> usize {
        self.quantities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quantities.is_empty()
    }
}

/// One segmented submarket: its demand, its unit delivery cost, and the
/// quantity cap on its demand domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub demand: DemandCurve,
    pub unit_cost: f64,
    pub q_max: f64,
}

impl MarketSpec {
    pub fn new(demand: DemandCurve, unit_cost: f64, q_max: f64) -> Result<Self> {
        let m = MarketSpec {
            demand,
            unit_cost,
            q_max,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.demand.validate()?;
        if !(self.unit_cost.is_finite() && self.unit_cost >= 0.0) {
            return Err(invalid("unit cost must be finite and >= 0"));
        }
        if !(self.q_max > 0.0) {
            return Err(invalid("q_max must be > 0"));
        }
        if self.q_max > self.demand.domain_max() + tol::SUM {
            return Err(invalid(format!(
                "q_max {} exceeds the demand domain {}",
                self.q_max,
                self.demand.domain_max()
            )));
        }
        Ok(())
    }

    /// Demand at price `p`, `D(p)`, capped at `q_max`.
    pub fn demand_at(&self, p: f64) -> f64 {
        self.demand.inverse_within(p, self.q_max)
    }
}

/// Gross surplus of an allocation: `sum_i integral_0^{q_i} P_i`.
pub fn total_gross_surplus(markets: &[MarketSpec], q: &[f64]) -> Result<f64> {
    markets
        .iter()
        .zip(q)
        .map(|(m, &x)| m.demand.gross_surplus(0.0, x))
        .sum()
}

/// Caps `D_i(ceiling)` for each market.
pub fn caps_at_ceiling(markets: &[MarketSpec], ceiling: f64) -> Vec<f64> {
    markets.iter().map(|m| m.demand_at(ceiling)).collect()
}
