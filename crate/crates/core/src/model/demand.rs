//! Inverse demand curves.
//!
//! Every curve is a nonincreasing map from quantity to price on `[0, domain_max]`
//! with a finite price at zero. Prices and quantities are in normalized units
//! (baseline price 1, baseline aggregate quantity 1).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::tol;

/// Default Hill parameters for the grid simulation.
///
/// With 100 identical markets, supply 150 and a ceiling at 80% of the
/// market-clearing price, these give a per-market cap of about 2.15 units, so
/// roughly 70 markets absorb all supply. They are a documented choice, not a
/// calibration to data.
pub const DEFAULT_HILL: DemandCurve = DemandCurve::TruncatedHill {
    choke: 4.0,
    scale: 2.7,
    exponent: 2.0,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DemandCurve {
    /// `P(q) = anchor_p + slope * (q - anchor_q)`, truncated where the price reaches zero.
    LinearAnchored { anchor_q: f64, anchor_p: f64, slope: f64 },
    /// `P(q) = choke * scale^h / (scale^h + q^h)`; `P(0) = choke`.
    TruncatedHill { choke: f64, scale: f64, exponent: f64 },
    /// Continuous interpolation of `(q, p)` knots starting at `q = 0`.
    PiecewiseAffine { knots: Vec<(f64, f64)> },
}

impl DemandCurve {
    pub fn linear(anchor_q: f64, anchor_p: f64, slope: f64) -> Result<Self> {
        let c = DemandCurve::LinearAnchored {
            anchor_q,
            anchor_p,
            slope,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn hill(choke: f64, scale: f64, exponent: f64) -> Result<Self> {
        let c = DemandCurve::TruncatedHill { choke, scale, exponent };
        c.validate()?;
        Ok(c)
    }

    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        let c = DemandCurve::PiecewiseAffine { knots };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DemandCurve::LinearAnchored {
                anchor_q,
                anchor_p,
                slope,
            } => {
                if !(anchor_q.is_finite() && anchor_p.is_finite() && slope.is_finite()) {
                    return Err(invalid("linear demand parameters must be finite"));
                }
                if *slope >= 0.0 {
                    return Err(invalid(format!("linear demand slope {slope} must be < 0")));
                }
                if self.choke_price() <= 0.0 {
                    return Err(invalid("linear demand must have a positive price at q = 0"));
                }
                Ok(())
            }
            DemandCurve::TruncatedHill { choke, scale, exponent } => {
                if !(choke.is_finite() && *choke > 0.0) {
                    return Err(invalid("hill choke price must be finite and > 0"));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(invalid("hill scale must be > 0"));
                }
                if !(exponent.is_finite() && *exponent >= 1.0) {
                    return Err(invalid("hill exponent must be >= 1"));
                }
                Ok(())
            }
            DemandCurve::PiecewiseAffine { knots } => {
                if knots.len() < 2 {
                    return Err(invalid("piecewise demand needs at least two knots"));
                }
                if knots[0].0 != 0.0 {
                    return Err(invalid("piecewise demand must start at q = 0"));
                }
                for (k, &(q, p)) in knots.iter().enumerate() {
                    if !(q.is_finite() && p.is_finite()) || p < 0.0 {
                        return Err(invalid(format!("knot {k} must be finite with p >= 0")));
                    }
                    if k > 0 {
                        let (q0, p0) = knots[k - 1];
                        if q <= q0 {
                            return Err(invalid(format!("knot {k}: quantities must strictly increase")));
                        }
                        if p > p0 {
                            return Err(invalid(format!("knot {k}: prices must not increase")));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Right end of the quantity domain. Linear curves end where the price
    /// hits zero; Hill curves are unbounded.
    pub fn domain_max(&self) -> f64 {
        match self {
            DemandCurve::LinearAnchored {
                anchor_q,
                anchor_p,
                slope,
            } => anchor_q + anchor_p / (-slope),
            DemandCurve::TruncatedHill { .. } => f64::INFINITY,
            DemandCurve::PiecewiseAffine { knots } => knots[knots.len() - 1].0,
        }
    }

    /// `P(0)`.
    pub fn choke_price(&self) -> f64 {
        match self {
            DemandCurve::LinearAnchored {
                anchor_q,
                anchor_p,
                slope,
            } => anchor_p - slope * anchor_q,
            DemandCurve::TruncatedHill { choke, .. } => *choke,
            DemandCurve::PiecewiseAffine { knots } => knots[0].1,
        }
    }

    /// Inverse demand `P(q)` with a domain check.
    pub fn eval(&self, q: f64) -> Result<f64> {
        let max = self.domain_max();
        if !(q >= -tol::SUM && q <= max + tol::SUM) {
            return Err(Error::Domain { q, max });
        }
        Ok(self.price(q.clamp(0.0, max)))
    }

    /// Unchecked evaluation; callers guarantee `q` is in the domain.
    pub(crate) fn price(&self, q: f64) -> f64 {
        match self {
            DemandCurve::LinearAnchored {
                anchor_q,
                anchor_p,
                slope,
            } => (anchor_p + slope * (q - anchor_q)).max(0.0),
            DemandCurve::TruncatedHill { choke, scale, exponent } => {
                let ratio = (q / scale).powf(*exponent);
                choke / (1.0 + ratio)
            }
            DemandCurve::PiecewiseAffine { knots } => {
                let last = knots.len() - 1;
                if q >= knots[last].0 {
                    return knots[last].1;
                }
                let k = knots.partition_point(|&(kq, _)| kq <= q).max(1) - 1;
                let (q0, p0) = knots[k];
                let (q1, p1) = knots[k + 1];
                p0 + (p1 - p0) * (q - q0) / (q1 - q0)
            }
        }
    }

    /// Left-continuous generalized inverse:
    /// `inf { x in [0, domain_max] : P(x) <= p }`, or `domain_max` if that set is empty.
    pub fn generalized_inverse(&self, p: f64) -> f64 {
        let max = self.domain_max();
        if p >= self.choke_price() {
            return 0.0;
        }
        match self {
            DemandCurve::LinearAnchored {
                anchor_q,
                anchor_p,
                slope,
            } => (anchor_q + (p - anchor_p) / slope).clamp(0.0, max),
            DemandCurve::TruncatedHill { choke, scale, exponent } => {
                if p <= 0.0 {
                    return max;
                }
                scale * (choke / p - 1.0).powf(1.0 / exponent)
            }
            DemandCurve::PiecewiseAffine { knots } => {
                // First knot with price <= p; the crossing lies on the segment ending there.
                let k = match knots.iter().position(|&(_, kp)| kp <= p) {
                    Some(k) => k,
                    None => return max,
                };
                let (q0, p0) = knots[k - 1];
                let (q1, p1) = knots[k];
                (q0 + (p - p0) * (q1 - q0) / (p1 - p0)).clamp(q0, q1)
            }
        }
    }

    /// Generalized inverse restricted to `[0, cap]`.
    pub fn inverse_within(&self, p: f64, cap: f64) -> f64 {
        self.generalized_inverse(p).min(cap)
    }

    /// Signed integral of `P` over `[a, b]`.
    pub fn gross_surplus(&self, a: f64, b: f64) -> Result<f64> {
        let max = self.domain_max();
        for x in [a, b] {
            if !(x >= -tol::SUM && x <= max + tol::SUM) {
                return Err(Error::Domain { q: x, max });
            }
        }
        let (a, b) = (a.clamp(0.0, max), b.clamp(0.0, max));
        if a == b {
            return Ok(0.0);
        }
        let value = match self {
            DemandCurve::LinearAnchored { .. } => (b - a) * 0.5 * (self.price(a) + self.price(b)),
            DemandCurve::TruncatedHill { .. } => {
                let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
                sign * hill_integral(self, lo, hi)?
            }
            DemandCurve::PiecewiseAffine { .. } => self.pwa_cumulative(b) - self.pwa_cumulative(a),
        };
        Ok(value)
    }

    /// `integral_0^q P - price_paid * q`.
    pub fn consumer_surplus(&self, q: f64, price_paid: f64) -> Result<f64> {
        Ok(self.gross_surplus(0.0, q)? - price_paid * q)
    }

    /// Same curve with every price multiplied by `factor > 0`.
    pub fn scale_prices(&self, factor: f64) -> DemandCurve {
        match self {
            DemandCurve::LinearAnchored {
                anchor_q,
                anchor_p,
                slope,
            } => DemandCurve::LinearAnchored {
                anchor_q: *anchor_q,
                anchor_p: anchor_p * factor,
                slope: slope * factor,
            },
            DemandCurve::TruncatedHill { choke, scale, exponent } => DemandCurve::TruncatedHill {
                choke: choke * factor,
                scale: *scale,
                exponent: *exponent,
            },
            DemandCurve::PiecewiseAffine { knots } => DemandCurve::PiecewiseAffine {
                knots: knots.iter().map(|&(q, p)| (q, p * factor)).collect(),
            },
        }
    }

    /// Same curve stretched along the quantity axis: `Q(p)` becomes `factor * Q(p)`.
    pub fn scale_quantities(&self, factor: f64) -> DemandCurve {
        match self {
            DemandCurve::LinearAnchored {
                anchor_q,
                anchor_p,
                slope,
            } => DemandCurve::LinearAnchored {
                anchor_q: anchor_q * factor,
                anchor_p: *anchor_p,
                slope: slope / factor,
            },
            DemandCurve::TruncatedHill { choke, scale, exponent } => DemandCurve::TruncatedHill {
                choke: *choke,
                scale: scale * factor,
                exponent: *exponent,
            },
            DemandCurve::PiecewiseAffine { knots } => DemandCurve::PiecewiseAffine {
                knots: knots.iter().map(|&(q, p)| (q * factor, p)).collect(),
            },
        }
    }

    /// Knot list for piecewise-affine curves.
    pub fn knots(&self) -> Option<&[(f64, f64)]> {
        match self {
            DemandCurve::PiecewiseAffine { knots } => Some(knots),
            _ => None,
        }
    }

    fn pwa_cumulative(&self, x: f64) -> f64 {
        let knots = match self {
            DemandCurve::PiecewiseAffine { knots } => knots,
            _ => unreachable!("pwa_cumulative on a non-piecewise curve"),
        };
        let mut total = 0.0;
        for w in knots.windows(2) {
            let (q0, p0) = w[0];
            let (q1, _) = w[1];
            if x <= q0 {
                break;
            }
            let end = x.min(q1);
            total += (end - q0) * 0.5 * (p0 + self.price(end));
        }
        total
    }
}

fn hill_integral(curve: &DemandCurve, a: f64, b: f64) -> Result<f64> {
    fn recurse(curve: &DemandCurve, a: f64, b: f64, depth: usize) -> Result<f64> {
        let out = quadrature::double_exponential::integrate(|x| curve.price(x), a, b, 1e-12);
        if out.error_estimate <= tol::QUADRATURE && out.integral.is_finite() {
            return Ok(out.integral);
        }
        if depth == 0 {
            return Err(Error::NonConvergence {
                what: "hill quadrature",
                iterations: 24,
            });
        }
        let mid = 0.5 * (a + b);
        Ok(recurse(curve, a, mid, depth - 1)? + recurse(curve, mid, b, depth - 1)?)
    }
    recurse(curve, a, b, 24)
}
