use super::conditional::Side;
use super::problem::BoundsMarket;
use crate::alloc::{efficient_allocation, misallocation_between};
use crate::error::{invalid, Error, Result};
use crate::model::{DemandCurve, FeasibleSet, MarketSpec};

/// Inverse demand attaining a conditional bound for one market.
///
/// Quantity leaves the anchor along one extreme slope and switches to the
/// other `delta / d` before reaching `p_star`: flattest first for the upper
/// bound, steepest first for the lower. Outside the traversed range the curve
/// continues with the flattest slope until it reaches `q = 0`, price zero or
/// `q_max`.
pub fn construct_extremal(m: &BoundsMarket, p0: f64, p_star: f64, delta: f64, side: Side) -> Result<DemandCurve> {
    m.validate()?;
    if !(p0.is_finite() && p_star.is_finite() && delta.is_finite()) {
        return Err(invalid("extremal inputs must be finite"));
    }
    let dist = (p_star - p0).abs();
    let h = delta / m.d();
    if delta < 0.0 || h > dist * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::Infeasible(format!(
            "offset {delta} exceeds the envelope gap {} at price {p_star}",
            m.d() * dist
        )));
    }
    let h = h.min(dist);
    let dir = if p_star >= p0 { 1.0 } else { -1.0 };
    let (first, second) = match side {
        Side::Upper => (m.alpha(), m.beta()),
        Side::Lower => (m.beta(), m.alpha()),
    };
    let pk = p0 + dir * (dist - h);
    let qk = m.q_obs + first * (pk - p0);
    let qe = qk + second * (p_star - pk);
    let mut pts = vec![(m.q_obs, p0), (qk, pk), (qe, p_star)];
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let flat = -m.g_hi;
    let (qt, pt) = pts[0];
    pts.insert(0, (0.0, pt + flat * qt));
    let (qb, pb) = pts[pts.len() - 1];
    pts.push((qb + pb / flat, 0.0));
    let mut knots = clip(&pts, m.q_max);
    if let (Some(cap), true) = (m.choke, knots.len() > 1) {
        knots[0].1 = knots[0].1.min(cap).max(knots[1].1);
    }
    DemandCurve::piecewise(knots)
}

/// Restricts a decreasing polyline to `0 <= q <= q_max`, `p >= 0`, and drops
/// knots closer than rounding.
fn clip(pts: &[(f64, f64)], q_max: f64) -> Vec<(f64, f64)> {
    let at = |q: f64| -> f64 {
        let k = pts.partition_point(|&(x, _)| x <= q).clamp(1, pts.len() - 1);
        let (q0, p0) = pts[k - 1];
        let (q1, p1) = pts[k];
        if q1 == q0 {
            p1
        } else {
            p0 + (p1 - p0) * (q - q0) / (q1 - q0)
        }
    };
    let end = q_max.min(pts[pts.len() - 1].0);
    let mut out = vec![(0.0, at(0.0))];
    for &(q, p) in pts {
        if q > 0.0 && q < end {
            out.push((q, p));
        }
    }
    out.push((end, at(end).max(0.0)));
    let scale = 1e-13 * (1.0 + end);
    let mut dedup: Vec<(f64, f64)> = Vec::with_capacity(out.len());
    for (q, p) in out {
        match dedup.last_mut() {
            Some(last) if q - last.0 <= scale => {
                // Keep the later price so the right end survives.
                last.1 = last.1.min(p);
            }
            _ => dedup.push((q, p.max(0.0))),
        }
    }
    if let Some(first) = dedup.first_mut() {
        first.0 = 0.0;
    }
    dedup
}

/// Misallocation loss of a demand profile at observed quantities `q_obs`:
/// returns `(loss, shadow price, efficient quantities)`.
pub fn profile_misallocation(curves: &[DemandCurve], q_obs: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if curves.len() != q_obs.len() || curves.is_empty() {
        return Err(invalid("profile and observed quantities differ in length"));
    }
    let markets = curves
        .iter()
        .map(|c| MarketSpec::new(c.clone(), 0.0, c.domain_max()))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = q_obs.iter().sum();
    let caps: Vec<f64> = markets.iter().map(|m| m.q_max).collect();
    let fs = FeasibleSet::new(caps, total)?;
    let (alloc, p) = efficient_allocation(&markets, &fs)?;
    let loss = misallocation_between(&markets, &alloc.quantities, q_obs)?;
    Ok((loss, p, alloc.quantities))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market() -> BoundsMarket {
        BoundsMarket::fixed(1.0, 1.0, -5.0, -2.5, 3.0)
    }

    fn slopes(c: &DemandCurve) -> Vec<f64> {
        c.knots()
            .unwrap()
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect()
    }

    #[test]
    fn zero_offset_follows_one_slope() {
        let c = construct_extremal(&market(), 1.0, 1.5, 0.0, Side::Upper).unwrap();
        assert!(slopes(&c).iter().all(|s| (s + 2.5).abs() < 1e-12));
        assert!((c.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((c.eval(0.8).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn full_offset_follows_opposite_slope() {
        let m = market();
        let delta = m.d() * 0.5;
        let c = construct_extremal(&m, 1.0, 1.5, delta, Side::Upper).unwrap();
        // Steep on the traversed range, flat outside it.
        assert!((c.eval(0.9).unwrap() - 1.5).abs() < 1e-12);
        assert!((c.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(slopes(&c)
            .iter()
            .all(|s| (s + 2.5).abs() < 1e-12 || (s + 5.0).abs() < 1e-12));
    }

    #[test]
    fn lower_side_below_anchor() {
        let m = market();
        let c = construct_extremal(&m, 1.0, 0.5, 0.03, Side::Lower).unwrap();
        // l(0.5) = 1.1; endpoint raised by 0.03.
        assert!((c.generalized_inverse(0.5) - 1.13).abs() < 1e-12);
        assert!((c.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_at_zero_price() {
        let m = BoundsMarket::fixed(1.0, 0.5, -5.0, -2.5, 3.0);
        let c = construct_extremal(&m, 0.5, 0.5, 0.0, Side::Upper).unwrap();
        assert!((c.domain_max() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn oversized_offset_rejected() {
        assert!(construct_extremal(&market(), 1.0, 1.5, 1.0, Side::Upper).is_err());
    }
}
