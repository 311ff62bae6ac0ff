use serde::{Deserialize, Serialize};

use crate::alloc::efficient::check_lengths;
use crate::error::{Error, Result};
use crate::model::{tol, Allocation, FeasibleSet, MarketSpec};

/// What to do when two unit costs coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Reject the instance.
    #[default]
    Error,
    /// Serve the lower market index first.
    Index,
}

impl std::str::FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(TieBreak::Error),
            "index" => Ok(TieBreak::Index),
            other => Err(Error::InvalidInput(format!("unknown tie-break rule {other:?}"))),
        }
    }
}

/// Market indices in serving order: increasing cost, then increasing index.
pub fn cost_order(costs: &[f64], tie: TieBreak) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    if tie == TieBreak::Error {
        for w in order.windows(2) {
            if (costs[w[1]] - costs[w[0]]).abs() <= tol::COST_TIE {
                return Err(Error::CostTie {
                    first: w[0].min(w[1]),
                    second: w[0].max(w[1]),
                });
            }
        }
    }
    Ok(order)
}

/// Fills markets to their caps in increasing cost order until supply runs out.
///
/// The result is a vertex of `fs` with exactly one partially served market.
/// Supply that exactly exhausts a prefix of caps leaves no partial market and
/// is rejected as degenerate.
pub fn greedy_allocation(costs: &[f64], fs: &FeasibleSet, tie: TieBreak) -> Result<Allocation> {
    if costs.len() != fs.len() {
        return Err(Error::InvalidInput(format!(
            "{} costs but {} caps",
            costs.len(),
            fs.len()
        )));
    }
    let order = cost_order(costs, tie)?;
    let caps = fs.caps();
    let mut q = vec![0.0; caps.len()];
    let mut left = fs.total();
    let mut partial = None;
    for &i in &order {
        if left <= 0.0 {
            break;
        }
        if (left - caps[i]).abs() <= tol::COST_TIE && caps[i] > 0.0 {
            return Err(Error::Degenerate(format!(
                "supply {} exhausts the cheapest markets exactly at market {i}",
                fs.total()
            )));
        }
        if left < caps[i] {
            partial = Some(i);
            break;
        }
        q[i] = caps[i];
        left -= caps[i];
    }
    // The remainder is summed in index order so it matches vertex enumeration bit for bit.
    if let Some(j) = partial {
        q[j] = fs.total() - q.iter().sum::<f64>();
    }
    Allocation::classify(fs, q)
}

/// Cost-minimizing allocation under the ceiling, using each market's unit cost.
pub fn greedy_controlled_allocation(markets: &[MarketSpec], fs: &FeasibleSet, tie: TieBreak) -> Result<Allocation> {
    check_lengths(markets, fs)?;
    let costs: Vec<f64> = markets.iter().map(|m| m.unit_cost).collect();
    greedy_allocation(&costs, fs, tie)
}
