use crate::error::{Error, Result};
use crate::model::{tol, Allocation, FeasibleSet};

/// Largest market count accepted by [`vertices`].
pub const VERTEX_LIMIT: usize = 20;

/// Every vertex of `fs`: each coordinate at 0 or its cap except at most one.
///
/// Exponential in `fs.len()`; rejects more than [`VERTEX_LIMIT`] markets.
pub fn vertices(fs: &FeasibleSet) -> Result<Vec<Vec<f64>>> {
    let n = fs.len();
    if n > VERTEX_LIMIT {
        return Err(Error::TooLarge {
            what: "vertex enumeration",
            n,
            limit: VERTEX_LIMIT,
        });
    }
    let caps = fs.caps();
    let total = fs.total();
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let full: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| caps[i]).sum();
        let rest = total - full;
        if rest.abs() <= tol::SUM {
            out.push(point(caps, mask, None, rest));
            continue;
        }
        for j in (0..n).filter(|j| mask >> j & 1 == 0) {
            if rest > tol::SUM && rest < caps[j] - tol::SUM {
                out.push(point(caps, mask, Some(j), rest));
            }
        }
    }
    Ok(out)
}

fn point(caps: &[f64], mask: u32, interior: Option<usize>, rest: f64) -> Vec<f64> {
    let mut q: Vec<f64> = (0..caps.len())
        .map(|i| if mask >> i & 1 == 1 { caps[i] } else { 0.0 })
        .collect();
    if let Some(j) = interior {
        q[j] = rest;
    }
    q
}

/// Largest market count accepted by [`lp_vertex_oracle`].
pub const ORACLE_LIMIT: usize = 12;

/// Exact minimizer of `costs . q` over `fs`, by checking every vertex.
///
/// A verification oracle for the greedy allocator; the first minimal vertex in
/// enumeration order wins ties.
pub fn lp_vertex_oracle(costs: &[f64], fs: &FeasibleSet) -> Result<Allocation> {
    let n = fs.len();
    if n > ORACLE_LIMIT {
        return Err(Error::TooLarge {
            what: "vertex oracle",
            n,
            limit: ORACLE_LIMIT,
        });
    }
    if costs.len() != n {
        return Err(Error::InvalidInput(format!("{} costs but {n} caps", costs.len())));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for v in vertices(fs)? {
        let c: f64 = v.iter().zip(costs).map(|(q, c)| q * c).sum();
        if best.as_ref().map_or(true, |(b, _)| c < *b) {
            best = Some((c, v));
        }
    }
    let (_, q) = best.ok_or_else(|| Error::Infeasible("feasible set has no vertex".into()))?;
    Allocation::classify(fs, q)
}
