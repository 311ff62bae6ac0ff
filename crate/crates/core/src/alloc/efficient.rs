use crate::error::{Error, Result};
use crate::model::{tol, Allocation, DemandCurve, FeasibleSet, MarketSpec, Slot};

const MAX_BISECTIONS: usize = 400;

/// Solves `P_i(q_i) - offset_i = lambda` for a common `lambda`, with each
/// `q_i` clamped to `[0, caps_i]` and `sum q_i = total`.
///
/// Returns the quantities and `lambda`. Quantities are interpolated between
/// the two final bracket ends, so flat demand segments and jumps in the
/// clamped inverse still add up to `total` exactly.
pub(crate) fn equalize_marginal_values(
    curves: &[&DemandCurve],
    offsets: &[f64],
    caps: &[f64],
    total: f64,
) -> Result<(Vec<f64>, f64)> {
    let at = |lambda: f64| -> Vec<f64> {
        curves
            .iter()
            .zip(offsets)
            .zip(caps)
            .map(|((c, &o), &cap)| c.inverse_within(lambda + o, cap))
            .collect()
    };
    let sum = |q: &[f64]| q.iter().sum::<f64>();

    let mut hi = curves
        .iter()
        .zip(offsets)
        .map(|(c, &o)| c.choke_price() - o)
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = -offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = hi - 1.0;
    let mut q_lo = at(lo);
    let mut steps = 0;
    while sum(&q_lo) < total {
        if lo <= floor {
            return Err(Error::Infeasible(format!(
                "markets absorb at most {} units, below total {total}",
                sum(&q_lo)
            )));
        }
        lo = (hi - 2.0 * (hi - lo)).max(floor);
        q_lo = at(lo);
        steps += 1;
        if steps > MAX_BISECTIONS {
            return Err(Error::NonConvergence {
                what: "shadow price bracket",
                iterations: steps,
            });
        }
    }
    let mut q_hi = at(hi);

    // Invariant: sum(q_lo) >= total >= sum(q_hi).
    let mut iterations = 0;
    while hi - lo > tol::ROOT * 1e-3 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let q_mid = at(mid);
        let s = sum(&q_mid);
        if s.is_nan() {
            return Err(Error::NonConvergence {
                what: "shadow price bisection",
                iterations,
            });
        }
        if s >= total {
            lo = mid;
            q_lo = q_mid;
        } else {
            hi = mid;
            q_hi = q_mid;
        }
        iterations += 1;
        if iterations > MAX_BISECTIONS {
            return Err(Error::NonConvergence {
                what: "shadow price bisection",
                iterations,
            });
        }
    }

    let (s_lo, s_hi) = (sum(&q_lo), sum(&q_hi));
    let theta = if s_lo.is_infinite() {
        0.0
    } else if s_lo - s_hi > 0.0 {
        ((total - s_hi) / (s_lo - s_hi)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let q = q_lo
        .iter()
        .zip(&q_hi)
        .zip(caps)
        .map(|((&a, &b), &cap)| {
            let x = if theta == 0.0 { b } else { theta * a + (1.0 - theta) * b };
            x.clamp(0.0, cap)
        })
        .collect();
    Ok((q, 0.5 * (lo + hi)))
}

/// The surplus-maximizing split of `fs.total()` across markets and its common
/// shadow price `p*`.
pub fn efficient_allocation(markets: &[MarketSpec], fs: &FeasibleSet) -> Result<(Allocation, f64)> {
    check_lengths(markets, fs)?;
    let curves: Vec<&DemandCurve> = markets.iter().map(|m| &m.demand).collect();
    let offsets = vec![0.0; markets.len()];
    let (q, p) = equalize_marginal_values(&curves, &offsets, fs.caps(), fs.total())?;
    Ok((Allocation::classify(fs, q)?, p))
}

/// Largest violation of the equal-shadow-price conditions at `p`:
/// interior markets priced at `p`, capped markets at or above, empty markets at or below.
pub fn efficient_kkt_residual(markets: &[MarketSpec], alloc: &Allocation, p: f64) -> f64 {
    markets
        .iter()
        .zip(&alloc.quantities)
        .zip(&alloc.slots)
        .map(|((m, &q), slot)| match slot {
            Slot::Interior => (m.demand.price(q) - p).abs(),
            Slot::AtCap => (p - m.demand.price(q)).max(0.0),
            Slot::AtZero => (m.demand.choke_price() - p).max(0.0),
        })
        .fold(0.0, f64::max)
}

pub(crate) fn check_lengths(markets: &[MarketSpec], fs: &FeasibleSet) -> Result<()> {
    if markets.len() != fs.len() {
        return Err(Error::InvalidInput(format!(
            "{} markets but {} caps",
            markets.len(),
            fs.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(choke: f64, slope: f64) -> MarketSpec {
        let d = DemandCurve::linear(0.0, choke, slope).unwrap();
        let max = d.domain_max();
        MarketSpec::new(d, 0.0, max).unwrap()
    }

    #[test]
    fn symmetric_split() {
        let m = vec![lin(3.0, -1.0), lin(3.0, -1.0)];
        let fs = FeasibleSet::new(vec![2.0, 2.0], 3.0).unwrap();
        let (a, p) = efficient_allocation(&m, &fs).unwrap();
        assert!((a.quantities[0] - 1.5).abs() < 1e-9);
        assert!((a.quantities[1] - 1.5).abs() < 1e-9);
        assert!((p - 1.5).abs() < 1e-9);
    }

    #[test]
    fn two_market_hand_solution() {
        let m = vec![lin(3.0, -2.0), lin(2.0, -1.0)];
        let fs = FeasibleSet::new(vec![1.0, 1.0], 1.0).unwrap();
        let (a, p) = efficient_allocation(&m, &fs).unwrap();
        assert!((a.quantities[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!((a.quantities[1] - 1.0 / 3.0).abs() < 1e-9);
        assert!((p - 5.0 / 3.0).abs() < 1e-9);
        assert!(efficient_kkt_residual(&m, &a, p) < 1e-8);
    }

    #[test]
    fn flat_segment_absorbs_residual() {
        let flat = DemandCurve::piecewise(vec![(0.0, 3.0), (1.0, 1.0), (3.0, 1.0), (4.0, 0.0)]).unwrap();
        let m = vec![
            MarketSpec::new(flat.clone(), 0.0, 4.0).unwrap(),
            MarketSpec::new(flat, 0.0, 4.0).unwrap(),
        ];
        let fs = FeasibleSet::new(vec![4.0, 4.0], 5.0).unwrap();
        let (a, p) = efficient_allocation(&m, &fs).unwrap();
        assert!((a.quantities.iter().sum::<f64>() - 5.0).abs() < 1e-12);
        assert!((p - 1.0).abs() < 1e-9);
    }
}
