use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::tol;

/// One market of a bounds problem: an observed quantity, an interval for the
/// price at that quantity, slope bounds for inverse demand and optional caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsMarket {
    pub q_obs: f64,
    /// Lowest admissible price at `q_obs`.
    pub p0_lo: f64,
    /// Highest admissible price at `q_obs`.
    pub p0_hi: f64,
    /// Steepest admissible slope of inverse demand, `g_L < g_U`.
    pub g_lo: f64,
    /// Flattest admissible slope of inverse demand, `g_U < 0`.
    pub g_hi: f64,
    /// Upper bound `M` on the price at zero quantity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choke: Option<f64>,
    pub q_max: f64,
}

impl BoundsMarket {
    /// Anchor fixed at `p0`.
    pub fn fixed(q_obs: f64, p0: f64, g_lo: f64, g_hi: f64, q_max: f64) -> Self {
        BoundsMarket {
            q_obs,
            p0_lo: p0,
            p0_hi: p0,
            g_lo,
            g_hi,
            choke: None,
            q_max,
        }
    }

    pub fn with_choke(mut self, choke: f64) -> Self {
        self.choke = Some(choke);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.q_obs, self.p0_lo, self.p0_hi, self.g_lo, self.g_hi, self.q_max];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(invalid("bounds market parameters must be finite"));
        }
        if !(self.g_lo < self.g_hi && self.g_hi < 0.0) {
            return Err(invalid(format!(
                "slope bounds need g_lo < g_hi < 0, got [{}, {}]",
                self.g_lo, self.g_hi
            )));
        }
        if !(self.q_obs > 0.0 && self.q_obs < self.q_max) {
            return Err(invalid(format!(
                "observed quantity {} must lie in (0, q_max = {})",
                self.q_obs, self.q_max
            )));
        }
        if self.p0_lo > self.p0_hi {
            return Err(invalid("anchor interval needs p0_lo <= p0_hi"));
        }
        if let Some(m) = self.choke {
            if !(m > self.p0_lo) {
                return Err(invalid(format!("choke cap {m} must exceed the anchor price")));
            }
            if self.anchor_ceiling() < self.p0_lo - tol::SUM {
                return Err(Error::Infeasible(format!(
                    "no demand through ({}, {}) with slope >= {} stays below choke {m}",
                    self.q_obs, self.p0_lo, self.g_lo
                )));
            }
        }
        Ok(())
    }

    /// `1 / g_U`: the slope of quantity in price along the flattest demand.
    pub fn alpha(&self) -> f64 {
        1.0 / self.g_hi
    }

    /// `1 / g_L`: the slope of quantity in price along the steepest demand.
    pub fn beta(&self) -> f64 {
        1.0 / self.g_lo
    }

    /// `beta - alpha > 0`.
    pub fn d(&self) -> f64 {
        self.beta() - self.alpha()
    }

    /// Highest anchor price consistent with the choke cap: a curve through
    /// `(q_obs, p0)` reaches `q = 0` no lower than `p0 + |g_U| q_obs`.
    pub fn anchor_ceiling(&self) -> f64 {
        match self.choke {
            Some(m) => m + self.g_hi * self.q_obs,
            None => f64::INFINITY,
        }
    }

    /// The anchor interval after trimming by the choke cap.
    pub fn anchor_range(&self) -> (f64, f64) {
        (self.p0_lo, self.p0_hi.min(self.anchor_ceiling()).max(self.p0_lo))
    }

    fn lines(&self, p0: f64, p: f64) -> (f64, f64) {
        (
            self.q_obs + (p - p0) * self.alpha(),
            self.q_obs + (p - p0) * self.beta(),
        )
    }

    /// Quantities `(l, u)` bracketing `q(p)` for every admissible demand through
    /// `(q_obs, p0)`.
    pub fn envelopes(&self, p0: f64, p: f64) -> (f64, f64) {
        let m = self.choke.unwrap_or(f64::INFINITY);
        if p >= m {
            return (0.0, 0.0);
        }
        let (a, b) = self.lines(p0, p);
        let lo = a.min(b).max(0.0);
        let mut hi = a.max(b).min(self.q_max);
        if m.is_finite() {
            hi = hi.min((m - p) / -self.g_hi);
        }
        (lo, hi.max(0.0))
    }

    /// Prices where either envelope changes slope.
    pub fn envelope_kinks(&self, p0: f64) -> Vec<f64> {
        let (ga, gb) = (-self.g_hi, -self.g_lo);
        let mut k = vec![
            p0,
            p0 + ga * self.q_obs,
            p0 + gb * self.q_obs,
            p0 - ga * (self.q_max - self.q_obs),
            p0 - gb * (self.q_max - self.q_obs),
        ];
        if let Some(m) = self.choke {
            k.push(m);
            k.push(m - ga * self.q_max);
            // Steep line meets the choke line.
            let (alpha, beta) = (self.alpha(), self.beta());
            let denom = beta - alpha;
            if denom.abs() > 0.0 {
                // q_obs + (p - p0) beta = (m - p) (-alpha)
                let p = (-m * alpha - self.q_obs + p0 * beta) / denom;
                k.push(p);
            }
        }
        k
    }

    /// `integral_a^b l(s) ds` (`upper = false`) or of `u`, signed.
    pub fn envelope_integral(&self, p0: f64, a: f64, b: f64, upper: bool) -> f64 {
        if a == b {
            return 0.0;
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let mut pts: Vec<f64> = self
            .envelope_kinks(p0)
            .into_iter()
            .filter(|&k| k > lo && k < hi)
            .collect();
        pts.push(lo);
        pts.push(hi);
        pts.sort_by(f64::total_cmp);
        let f = |s: f64| {
            let (l, u) = self.envelopes(p0, s);
            if upper {
                u
            } else {
                l
            }
        };
        pts.windows(2)
            .map(|w| (w[1] - w[0]) * 0.5 * (f(w[0]) + f(w[1])))
            .sum::<f64>()
            * sign
    }
}

/// Markets plus the aggregate quantity and the ceiling price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsProblem {
    pub markets: Vec<BoundsMarket>,
    /// Aggregate quantity; equals the sum of observed quantities.
    pub total: f64,
    pub ceiling: f64,
}

impl BoundsProblem {
    /// Builds a problem whose total is the sum of observed quantities.
    pub fn new(markets: Vec<BoundsMarket>, ceiling: f64) -> Result<Self> {
        let total = markets.iter().map(|m| m.q_obs).sum();
        let p = BoundsProblem {
            markets,
            total,
            ceiling,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.markets.is_empty() {
            return Err(invalid("bounds problem needs at least one market"));
        }
        for (i, m) in self.markets.iter().enumerate() {
            m.validate().map_err(|e| match e {
                Error::InvalidInput(msg) => Error::InvalidInput(format!("market {i}: {msg}")),
                Error::Infeasible(msg) => Error::Infeasible(format!("market {i}: {msg}")),
                other => other,
            })?;
        }
        let sum: f64 = self.markets.iter().map(|m| m.q_obs).sum();
        if (sum - self.total).abs() > tol::SUM {
            return Err(invalid(format!(
                "total {} must equal the sum of observed quantities {sum}",
                self.total
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.markets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markets.is_empty()
    }

    /// `(L(p), U(p))`: sums of the envelopes.
    pub fn envelope_sums(&self, anchors: &[f64], p: f64) -> (f64, f64) {
        self.markets
            .iter()
            .zip(anchors)
            .map(|(m, &p0)| m.envelopes(p0, p))
            .fold((0.0, 0.0), |(a, b), (l, u)| (a + l, b + u))
    }

    /// All envelope kinks across markets, sorted and deduplicated.
    pub fn kinks(&self, anchors: &[f64]) -> Vec<f64> {
        let mut k: Vec<f64> = self
            .markets
            .iter()
            .zip(anchors)
            .flat_map(|(m, &p0)| m.envelope_kinks(p0))
            .filter(|x| x.is_finite())
            .collect();
        k.sort_by(f64::total_cmp);
        k.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + b.abs()));
        k
    }

    pub(crate) fn check_anchors(&self, anchors: &[f64]) -> Result<()> {
        if anchors.len() != self.len() {
            return Err(invalid(format!("{} anchors for {} markets", anchors.len(), self.len())));
        }
        for (i, (m, &p0)) in self.markets.iter().zip(anchors).enumerate() {
            let (lo, hi) = m.anchor_range();
            if p0 < lo - tol::SUM || p0 > hi + tol::SUM {
                return Err(invalid(format!(
                    "anchor {p0} of market {i} outside its admissible range [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// The set of common shadow prices compatible with adding-up,
/// `{p : L(p) <= total <= U(p)}`.
///
/// Both sums are nonincreasing in `p`, so the set is one closed interval.
pub fn candidate_interval(prob: &BoundsProblem, anchors: &[f64]) -> Result<(f64, f64)> {
    prob.check_anchors(anchors)?;
    let total = prob.total;
    let lsum = |p: f64| prob.envelope_sums(anchors, p).0;
    let usum = |p: f64| prob.envelope_sums(anchors, p).1;
    let kinks = prob.kinks(anchors);
    // Left end: first p with L(p) <= total. Right end: last p with U(p) >= total.
    let lo = crossing(&kinks, total, lsum, true);
    let hi = crossing(&kinks, total, usum, false);
    match (lo, hi) {
        (Some(lo), Some(hi)) if lo <= hi + tol::ROOT => Ok((lo, hi.max(lo))),
        _ => Err(Error::EmptyInterval),
    }
}

/// Exact crossing of a nonincreasing piecewise-linear `f` with level `y`.
/// `first_below`: smallest `p` with `f(p) <= y`; otherwise the largest `p` with `f(p) >= y`.
fn crossing(kinks: &[f64], y: f64, f: impl Fn(f64) -> f64, first_below: bool) -> Option<f64> {
    let span = kinks.iter().fold(1.0f64, |acc, k| acc.max(k.abs())).max(1.0);
    let mut pts = kinks.to_vec();
    pts.insert(0, kinks.first().copied().unwrap_or(0.0) - 10.0 * span);
    pts.push(kinks.last().copied().unwrap_or(0.0) + 10.0 * span);
    let vals: Vec<f64> = pts.iter().map(|&p| f(p)).collect();
    if first_below {
        if vals[0] <= y {
            return None;
        }
        let k = vals.iter().position(|&v| v <= y)?;
        Some(interpolate(pts[k - 1], vals[k - 1], pts[k], vals[k], y))
    } else {
        if vals[vals.len() - 1] >= y {
            return None;
        }
        let k = vals.iter().rposition(|&v| v >= y)?;
        Some(if vals[k] == y {
            pts[k]
        } else {
            interpolate(pts[k], vals[k], pts[k + 1], vals[k + 1], y)
        })
    }
}

/// Crossing on one affine piece; both envelopes are continuous and affine
/// between listed kinks, so linear interpolation is exact.
fn interpolate(a: f64, fa: f64, b: f64, fb: f64, y: f64) -> f64 {
    if fa == fb {
        return a;
    }
    (a + (y - fa) * (b - a) / (fb - fa)).clamp(a, b)
}

/// Whether every envelope stays on its unclipped line over the traversed
/// price range `[min(p, p0), max(p, p0)]` for all `p` in `[lo, hi]`.
/// Returns the markets where it does not.
pub fn interiority_violations(prob: &BoundsProblem, anchors: &[f64], lo: f64, hi: f64) -> Vec<usize> {
    prob.markets
        .iter()
        .zip(anchors)
        .enumerate()
        .filter(|(_, (m, &p0))| {
            let a = lo.min(p0);
            let b = hi.max(p0);
            let mm = m.choke.unwrap_or(f64::INFINITY);
            [a, b].iter().any(|&s| {
                let (x, y) = m.lines(p0, s);
                let choke_q = if mm.is_finite() {
                    (mm - s) / -m.g_hi
                } else {
                    f64::INFINITY
                };
                !(x > 0.0 && x < m.q_max && y > 0.0 && y < m.q_max && s < mm) || x.max(y) > choke_q + tol::SUM
            })
        })
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market() -> BoundsMarket {
        BoundsMarket::fixed(1.0, 1.0, -5.0, -2.5, 3.0)
    }

    #[test]
    fn envelope_examples() {
        let m = market();
        let (l, u) = m.envelopes(1.0, 1.5);
        assert!((l - 0.8).abs() < 1e-15 && (u - 0.9).abs() < 1e-15);
        assert_eq!(m.envelopes(1.0, 1.0), (1.0, 1.0));
        let c = market().with_choke(4.0);
        assert_eq!(c.envelopes(1.0, 4.0), (0.0, 0.0));
        assert_eq!(c.envelopes(1.0, 5.0), (0.0, 0.0));
    }

    #[test]
    fn envelope_integral_matches_fine_trapezoid() {
        let m = market().with_choke(4.2);
        for &(a, b) in &[(0.2, 1.0), (1.0, 4.5), (-1.0, 2.9), (4.3, 0.5)] {
            for upper in [false, true] {
                let exact = m.envelope_integral(1.0, a, b, upper);
                let n = 200_000;
                let h = (b - a) / n as f64;
                let mut s = 0.0;
                for k in 0..n {
                    let x = a + (k as f64 + 0.5) * h;
                    let (l, u) = m.envelopes(1.0, x);
                    s += h * if upper { u } else { l };
                }
                assert!((exact - s).abs() < 1e-6, "{a} {b} {upper}: {exact} vs {s}");
            }
        }
    }

    #[test]
    fn interval_contains_common_anchor() {
        let p = BoundsProblem::new(vec![market(), market()], 0.8).unwrap();
        let (lo, hi) = candidate_interval(&p, &[1.0, 1.0]).unwrap();
        assert!(lo <= 1.0 && hi >= 1.0);
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_matches_grid_scan() {
        let a = BoundsMarket::fixed(1.06, 0.8, -5.0, -2.5, 2.5);
        let b = BoundsMarket::fixed(0.66, 2.0, -5.0, -2.5, 2.5);
        let p = BoundsProblem::new(vec![a, b], 0.8).unwrap();
        let anchors = [0.8, 2.0];
        let (lo, hi) = candidate_interval(&p, &anchors).unwrap();
        let mut scan = (f64::INFINITY, f64::NEG_INFINITY);
        let mut x = -1.0;
        while x < 5.0 {
            let (l, u) = p.envelope_sums(&anchors, x);
            if l <= p.total && p.total <= u {
                scan = (scan.0.min(x), scan.1.max(x));
            }
            x += 1e-4;
        }
        assert!(
            (lo - scan.0).abs() < 2e-4 && (hi - scan.1).abs() < 2e-4,
            "{lo} {hi} {scan:?}"
        );
    }

    #[test]
    fn single_market_interval_is_a_point() {
        let p = BoundsProblem::new(vec![market()], 0.8).unwrap();
        let (lo, hi) = candidate_interval(&p, &[1.0]).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn choke_trims_anchor_range() {
        let m = BoundsMarket { p0_hi: 3.0, ..market() }.with_choke(4.0);
        assert_eq!(m.anchor_range(), (1.0, 1.5));
        let bad = BoundsMarket::fixed(1.0, 2.0, -5.0, -2.5, 3.0).with_choke(4.0);
        assert!(bad.validate().is_err());
    }
}
