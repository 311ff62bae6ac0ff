use serde::{Deserialize, Serialize};

use crate::alloc::efficient::{check_lengths, efficient_allocation};
use crate::error::{Error, Result};
use crate::model::{total_gross_surplus, Allocation, DemandCurve, FeasibleSet, MarketSpec};

/// Welfare accounting for one allocation. Surplus values are relative to the
/// ceiling price for `net_surplus` and absolute for `gross_surplus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub gross_surplus: f64,
    pub net_surplus: f64,
    /// Common shadow price for efficient allocations, cutoff for worst-case ones.
    pub shadow_price: Option<f64>,
    pub misallocation_loss: f64,
    pub harberger_loss: Option<f64>,
    pub ratio: Option<f64>,
}

/// `sum_i integral_{q_i}^{qstar_i} P_i`: surplus forgone by `q` relative to `qstar`.
pub fn misallocation_between(markets: &[MarketSpec], qstar: &[f64], q: &[f64]) -> Result<f64> {
    markets
        .iter()
        .zip(qstar.iter().zip(q))
        .map(|(m, (&s, &x))| m.demand.gross_surplus(x, s))
        .sum()
}

/// Surplus lost by `q` relative to the efficient split of the same supply.
pub fn misallocation_loss(markets: &[MarketSpec], fs: &FeasibleSet, q: &[f64]) -> Result<f64> {
    check_lengths(markets, fs)?;
    if !fs.contains(q) {
        return Err(Error::Infeasible(format!(
            "allocation {q:?} is not in the feasible set"
        )));
    }
    let (qstar, _) = efficient_allocation(markets, fs)?;
    misallocation_between(markets, &qstar.quantities, q)
}

/// Loss from cutting aggregate quantity from `base_q` to `total` when the
/// remaining units go to their highest-value uses: the area between `aggregate`
/// and `base_p` over `[total, base_q]`.
pub fn harberger_loss(aggregate: &DemandCurve, base_p: f64, base_q: f64, total: f64) -> Result<f64> {
    if total > base_q {
        return Err(Error::InvalidInput(format!(
            "supply {total} exceeds the baseline quantity {base_q}"
        )));
    }
    Ok(aggregate.gross_surplus(total, base_q)? - base_p * (base_q - total))
}

/// Full report for `alloc`. `harberger` is the aggregate loss used to
/// normalize the misallocation ratio, when known.
pub fn welfare_report(
    markets: &[MarketSpec],
    fs: &FeasibleSet,
    alloc: &Allocation,
    ceiling: f64,
    shadow_price: Option<f64>,
    harberger: Option<f64>,
) -> Result<WelfareReport> {
    let gross_surplus = total_gross_surplus(markets, &alloc.quantities)?;
    let misallocation_loss = misallocation_loss(markets, fs, &alloc.quantities)?;
    let ratio = harberger.filter(|h| *h > 0.0).map(|h| misallocation_loss / h);
    Ok(WelfareReport {
        gross_surplus,
        net_surplus: gross_surplus - ceiling * fs.total(),
        shadow_price,
        misallocation_loss,
        harberger_loss: harberger,
        ratio,
    })
}
