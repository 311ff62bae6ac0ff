use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conditional::{baseline_is_upper, evaluate, ConditionalBound, Side};
use super::extremal::construct_extremal;
use super::problem::{candidate_interval, interiority_violations, BoundsProblem};
use crate::error::{invalid, Error, Result};
use crate::model::DemandCurve;

/// How anchor prices are chosen within their intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMode {
    /// Each anchor at the midpoint of its admissible range.
    #[default]
    Fixed,
    /// Anchors chosen within their ranges to extremize each bound.
    Interval,
}

impl std::str::FromStr for AnchorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(AnchorMode::Fixed),
            "interval" => Ok(AnchorMode::Interval),
            other => Err(invalid(format!(
                "unknown anchor mode {other:?} (expected fixed|interval)"
            ))),
        }
    }
}

/// Per-point samples per smooth piece of the outer search.
const SAMPLES: usize = 16;
/// Golden-section stopping width in price.
pub const PRICE_TOL: f64 = 1e-9;
const ANCHOR_RESTARTS: usize = 5;
const ASCENT_ROUNDS: usize = 50;

/// One end of the identified set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideSolution {
    pub value: f64,
    pub p_star: f64,
    pub anchors: Vec<f64>,
    pub interval: (f64, f64),
    pub endpoints: Vec<f64>,
    pub delta: Vec<f64>,
    pub extremal: Vec<DemandCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsDiagnostics {
    /// True when no envelope is clipped on the traversed ranges, so both
    /// bounds are attained exactly; otherwise the bounds are conservative.
    pub interior: bool,
    pub violations_upper: Vec<usize>,
    pub violations_lower: Vec<usize>,
    /// Markets whose choke cap trims the anchor range or clips an envelope.
    pub active_chokes: Vec<usize>,
}

impl BoundsDiagnostics {
    pub fn status(&self) -> &'static str {
        if self.interior {
            "exact"
        } else {
            "conservative"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub phi_lower: f64,
    pub phi_upper: f64,
    pub lower: SideSolution,
    pub upper: SideSolution,
    pub diagnostics: BoundsDiagnostics,
}

/// Sharp bounds on misallocation loss over every admissible demand profile.
pub fn solve_bounds(prob: &BoundsProblem, mode: AnchorMode) -> Result<BoundsResult> {
    solve_bounds_seeded(prob, mode, 0)
}

/// `solve_bounds` with the seed for the random restarts of the anchor search.
pub fn solve_bounds_seeded(prob: &BoundsProblem, mode: AnchorMode, seed: u64) -> Result<BoundsResult> {
    prob.validate()?;
    let (upper, lower) = match mode {
        AnchorMode::Fixed => {
            let mid: Vec<f64> = prob
                .markets
                .iter()
                .map(|m| {
                    let (lo, hi) = m.anchor_range();
                    0.5 * (lo + hi)
                })
                .collect();
            (
                solve_side(prob, &mid, Side::Upper)?,
                solve_side(prob, &mid, Side::Lower)?,
            )
        }
        AnchorMode::Interval => (
            search_anchors(prob, Side::Upper, seed)?,
            search_anchors(prob, Side::Lower, seed)?,
        ),
    };
    finish(prob, upper, lower)
}

/// Bounds for explicitly given anchors.
pub fn solve_bounds_at(prob: &BoundsProblem, anchors: &[f64]) -> Result<BoundsResult> {
    prob.validate()?;
    prob.check_anchors(anchors)?;
    let upper = solve_side(prob, anchors, Side::Upper)?;
    let lower = solve_side(prob, anchors, Side::Lower)?;
    finish(prob, upper, lower)
}

fn finish(prob: &BoundsProblem, upper: SideSolution, lower: SideSolution) -> Result<BoundsResult> {
    let violations_upper = interiority_violations(prob, &upper.anchors, upper.p_star, upper.p_star);
    let violations_lower = interiority_violations(prob, &lower.anchors, lower.p_star, lower.p_star);
    let mut active_chokes: Vec<usize> = prob
        .markets
        .iter()
        .enumerate()
        .filter(|(i, m)| {
            m.choke.is_some_and(|c| {
                let trimmed = m.p0_hi > m.anchor_ceiling();
                let clips = |s: &SideSolution| {
                    let (_, u) = m.envelopes(s.anchors[*i], s.p_star);
                    let line = m.q_obs + (s.p_star - s.anchors[*i]) * m.beta();
                    s.p_star >= c || u < line.min(m.q_max) - 1e-12
                };
                trimmed || clips(&upper) || clips(&lower)
            })
        })
        .map(|(i, _)| i)
        .collect();
    active_chokes.dedup();
    let diagnostics = BoundsDiagnostics {
        interior: violations_upper.is_empty() && violations_lower.is_empty(),
        violations_upper,
        violations_lower,
        active_chokes,
    };
    Ok(BoundsResult {
        phi_lower: lower.value,
        phi_upper: upper.value,
        lower,
        upper,
        diagnostics,
    })
}

/// Objective oriented so that larger is better for `side`.
fn score(prob: &BoundsProblem, anchors: &[f64], p: f64, side: Side) -> f64 {
    match evaluate(prob, anchors, p, side) {
        Ok(c) => orient(c.value, side),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Score at `p`, or at `p` clamped into the candidate interval when `p` is
/// infeasible for these anchors. Returns the score and the price used.
fn clamped_score(prob: &BoundsProblem, anchors: &[f64], p: f64, side: Side) -> (f64, f64) {
    let s = score(prob, anchors, p, side);
    if s.is_finite() {
        return (s, p);
    }
    match candidate_interval(prob, anchors) {
        Ok((a, b)) => {
            let q = p.clamp(a, b);
            (score(prob, anchors, q, side), q)
        }
        Err(_) => (f64::NEG_INFINITY, p),
    }
}

fn orient(v: f64, side: Side) -> f64 {
    match side {
        Side::Upper => v,
        Side::Lower => -v,
    }
}

/// Global maximizer over `[lo, hi]` of a function that is smooth between
/// consecutive `breaks`: dense samples per piece, then golden section around
/// the best sample.
fn maximize_piecewise(lo: f64, hi: f64, breaks: &[f64], f: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut best = (lo, f(lo));
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let xs: Vec<f64> = (0..=SAMPLES).map(|k| a + (b - a) * k as f64 / SAMPLES as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let k = (0..vs.len()).fold(0, |k, j| if vs[j] > vs[k] { j } else { k });
        if vs[k] > best.1 {
            best = (xs[k], vs[k]);
        }
        let left = xs[k.saturating_sub(1)];
        let right = xs[(k + 1).min(SAMPLES)];
        let g = golden(left, right, &f)?;
        if g.1 > best.1 {
            best = g;
        }
    }
    Ok(best)
}

fn golden(mut a: f64, mut b: f64, f: &impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while b - a > PRICE_TOL * (1.0 + a.abs().max(b.abs())) {
        iterations += 1;
        if iterations > 200 {
            return Err(Error::NonConvergence {
                what: "golden-section search",
                iterations,
            });
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Price where the baseline adding-up gap changes sign; the gap is monotone
/// in `p` because every envelope is nonincreasing.
fn shortfall_zero(prob: &BoundsProblem, anchors: &[f64], side: Side, lo: f64, hi: f64) -> Option<f64> {
    let gap = |p: f64| -> f64 {
        prob.total
            - prob
                .markets
                .iter()
                .zip(anchors)
                .map(|(m, &p0)| {
                    let (l, u) = m.envelopes(p0, p);
                    if baseline_is_upper(side, p, p0) {
                        u
                    } else {
                        l
                    }
                })
                .sum::<f64>()
    };
    let (ga, gb) = (gap(lo), gap(hi));
    if ga.signum() == gb.signum() || ga == 0.0 || gb == 0.0 {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if gap(mid).signum() == ga.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Best common shadow price for fixed anchors.
fn best_price(prob: &BoundsProblem, anchors: &[f64], side: Side) -> Result<(f64, f64, (f64, f64))> {
    let (lo, hi) = candidate_interval(prob, anchors)?;
    let mut breaks = prob.kinks(anchors);
    breaks.extend_from_slice(anchors);
    breaks.extend(shortfall_zero(prob, anchors, side, lo, hi));
    let (p, v) = maximize_piecewise(lo, hi, &breaks, |p| score(prob, anchors, p, side))?;
    if !v.is_finite() {
        return Err(Error::NonConvergence {
            what: "outer price search",
            iterations: 0,
        });
    }
    Ok((p, v, (lo, hi)))
}

fn solve_side(prob: &BoundsProblem, anchors: &[f64], side: Side) -> Result<SideSolution> {
    let (p, _, interval) = best_price(prob, anchors, side)?;
    build_solution(prob, anchors, p, side, interval)
}

fn build_solution(
    prob: &BoundsProblem,
    anchors: &[f64],
    p: f64,
    side: Side,
    interval: (f64, f64),
) -> Result<SideSolution> {
    let ConditionalBound {
        value,
        endpoints,
        delta,
        ..
    } = evaluate(prob, anchors, p, side)?;
    let extremal = prob
        .markets
        .iter()
        .zip(anchors)
        .zip(&delta)
        .map(|((m, &p0), &dl)| construct_extremal(m, p0, p, dl, side))
        .collect::<Result<Vec<_>>>()?;
    Ok(SideSolution {
        value,
        p_star: p,
        anchors: anchors.to_vec(),
        interval,
        endpoints,
        delta,
        extremal,
    })
}

/// Joint search over anchors and the common price for one side.
///
/// Markets whose anchor range lies entirely below the current price, with
/// unclipped envelopes, sit at the corner that moves the anchor away from the
/// price (lowest anchor for the upper bound, highest for the lower). Every
/// other anchor is improved by one-dimensional search with the price held
/// fixed, or clamped into the trial's candidate interval when the move leaves
/// it infeasible, and the price is re-optimized after each sweep. The search starts
/// from that corner and from random corners of the anchor box.
fn search_anchors(prob: &BoundsProblem, side: Side, seed: u64) -> Result<SideSolution> {
    let ranges: Vec<(f64, f64)> = prob.markets.iter().map(|m| m.anchor_range()).collect();
    if ranges.iter().all(|(lo, hi)| lo == hi) {
        let fixed: Vec<f64> = ranges.iter().map(|r| r.0).collect();
        return solve_side(prob, &fixed, side);
    }
    let corner = |r: &(f64, f64)| match side {
        Side::Upper => r.0,
        Side::Lower => r.1,
    };
    let mut starts: Vec<Vec<f64>> = vec![ranges.iter().map(corner).collect()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ANCHOR_RESTARTS {
        starts.push(
            ranges
                .iter()
                .map(|r| if rng.gen::<bool>() { r.0 } else { r.1 })
                .collect(),
        );
    }
    let mut best: Option<(f64, Vec<f64>, f64, (f64, f64))> = None;
    for start in starts {
        let Ok(found) = ascend(prob, &ranges, start, side) else {
            continue;
        };
        if best.as_ref().map_or(true, |b| found.0 > b.0) {
            best = Some(found);
        }
    }
    let (_, anchors, p, interval) = best.ok_or(Error::EmptyInterval)?;
    build_solution(prob, &anchors, p, side, interval)
}

fn ascend(
    prob: &BoundsProblem,
    ranges: &[(f64, f64)],
    mut anchors: Vec<f64>,
    side: Side,
) -> Result<(f64, Vec<f64>, f64, (f64, f64))> {
    let (mut p, mut v, mut interval) = best_price(prob, &anchors, side)?;
    for _ in 0..ASCENT_ROUNDS {
        let before = v;
        for i in 0..anchors.len() {
            let (lo, hi) = ranges[i];
            if lo == hi {
                continue;
            }
            let m = &prob.markets[i];
            let pinned = p >= hi && {
                let (l, u) = m.envelopes(lo, p);
                let (a, b) = (m.q_obs + (p - lo) * m.alpha(), m.q_obs + (p - lo) * m.beta());
                (l - a).abs() <= 1e-12 && (u - b).abs() <= 1e-12
            };
            let choice = if pinned {
                match side {
                    Side::Upper => lo,
                    Side::Lower => hi,
                }
            } else {
                // The price follows the candidate interval as the anchor moves;
                // holding it fixed strands the search once the interval passes it.
                let (x, fx) = maximize_piecewise(lo, hi, &[], |x| {
                    let mut trial = anchors.clone();
                    trial[i] = x;
                    clamped_score(prob, &trial, p, side).0
                })?;
                if fx > v {
                    x
                } else {
                    anchors[i]
                }
            };
            if anchors[i] != choice {
                anchors[i] = choice;
                (v, p) = clamped_score(prob, &anchors, p, side);
            }
        }
        (p, v, interval) = best_price(prob, &anchors, side)?;
        if v <= before + 1e-13 * (1.0 + before.abs()) {
            break;
        }
    }
    Ok((v, anchors, p, interval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::BoundsMarket;

    #[test]
    fn single_market_has_no_loss() {
        let prob = BoundsProblem::new(vec![BoundsMarket::fixed(1.0, 1.0, -5.0, -2.5, 3.0)], 0.8).unwrap();
        let r = solve_bounds(&prob, AnchorMode::Fixed).unwrap();
        assert!(r.phi_lower.abs() < 1e-12 && r.phi_upper.abs() < 1e-12);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = maximize_piecewise(0.0, 3.0, &[1.0], |x| -(x - 1.7) * (x - 1.7)).unwrap();
        assert!((x - 1.7).abs() < 1e-8 && v.abs() < 1e-15);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("interval".parse::<AnchorMode>().unwrap(), AnchorMode::Interval);
        assert!("corner".parse::<AnchorMode>().is_err());
    }
}
