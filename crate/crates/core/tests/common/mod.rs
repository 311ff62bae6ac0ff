#![allow(dead_code)]

use misalloc::bounds::{candidate_interval, interiority_violations, BoundsMarket, BoundsProblem};
use misalloc::model::{caps_at_ceiling, DemandCurve, FeasibleSet, MarketSpec};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random bounds problem whose envelopes stay unclipped over the whole
/// candidate interval for the extreme anchor choices.
pub fn interior_problem(rng: &mut ChaCha8Rng, n_max: usize, interval_anchors: bool, choke: bool) -> BoundsProblem {
    loop {
        let n = rng.gen_range(2..=n_max);
        let markets: Vec<BoundsMarket> = (0..n)
            .map(|_| {
                let q_obs = rng.gen_range(0.5..1.5);
                let g_hi = rng.gen_range(-3.0..-1.0);
                let g_lo = g_hi * rng.gen_range(1.3..3.0);
                let p0 = rng.gen_range(0.8..2.0);
                let width = if interval_anchors { rng.gen_range(0.0..0.3) } else { 0.0 };
                let mut m = BoundsMarket {
                    q_obs,
                    p0_lo: p0,
                    p0_hi: p0 + width,
                    g_lo,
                    g_hi,
                    choke: None,
                    q_max: q_obs * rng.gen_range(2.5..4.0),
                };
                if choke {
                    m.choke = Some(p0 - g_hi * q_obs + rng.gen_range(-0.2..3.0));
                }
                m
            })
            .collect();
        let Ok(prob) = BoundsProblem::new(markets, 0.8) else {
            continue;
        };
        if interior(&prob) {
            return prob;
        }
    }
}

pub fn interior(prob: &BoundsProblem) -> bool {
    let lo: Vec<f64> = prob.markets.iter().map(|m| m.anchor_range().0).collect();
    let hi: Vec<f64> = prob.markets.iter().map(|m| m.anchor_range().1).collect();
    let (Ok(a), Ok(b)) = (candidate_interval(prob, &lo), candidate_interval(prob, &hi)) else {
        return false;
    };
    let span = (a.0.min(b.0), a.1.max(b.1));
    interiority_violations(prob, &lo, span.0, span.1).is_empty()
        && interiority_violations(prob, &hi, span.0, span.1).is_empty()
}

/// Two-market pooled problem: open stations at `s * 1.06` and closed ones
/// absorbing the rest of a 9% shortfall, per-capita slopes in [-5, -2.5].
pub fn pooled(choke: Option<f64>) -> BoundsProblem {
    let s = 0.623;
    let q_open = 1.06;
    let q_closed = (0.91 - s * q_open) / (1.0 - s);
    let market = |share: f64, q: f64, lo: f64, hi: f64| BoundsMarket {
        q_obs: share * q,
        p0_lo: lo,
        p0_hi: hi,
        g_lo: -5.0 / share,
        g_hi: -2.5 / share,
        choke,
        q_max: share * 2.0,
    };
    BoundsProblem::new(
        vec![
            market(s, q_open, 0.7, 0.85),
            market(
                1.0 - s,
                q_closed,
                1.0 + 2.5 * (1.0 - q_closed),
                1.0 + 5.0 * (1.0 - q_closed),
            ),
        ],
        0.8,
    )
    .unwrap()
}

/// Random demand with `P(0)` well above `ceiling`: linear, Hill or piecewise.
pub fn random_demand(rng: &mut ChaCha8Rng, ceiling: f64) -> (DemandCurve, f64) {
    match rng.gen_range(0..3) {
        0 => {
            let slope = -rng.gen_range(0.3..3.0);
            let anchor_q = rng.gen_range(0.5..2.0);
            let c = DemandCurve::linear(anchor_q, 1.0 + rng.gen_range(0.0..0.5), slope).unwrap();
            let q_max = c.domain_max();
            (c, q_max)
        }
        1 => {
            let c = DemandCurve::hill(
                ceiling + rng.gen_range(1.0..4.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(1.0..3.0),
            )
            .unwrap();
            (c, 10.0)
        }
        _ => {
            let mut knots = vec![(0.0, ceiling + rng.gen_range(1.0..3.0))];
            for _ in 0..rng.gen_range(1..4) {
                let (q, p) = *knots.last().unwrap();
                knots.push((q + rng.gen_range(0.2..1.5), p - rng.gen_range(0.1..0.8) * p));
            }
            let q_max = knots.last().unwrap().0;
            (DemandCurve::piecewise(knots).unwrap(), q_max)
        }
    }
}

/// Markets with distinct costs in `[0, 0.1]` facing `ceiling`, and a supply
/// strictly between zero and total demand at the ceiling.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, ceiling: f64) -> (Vec<MarketSpec>, FeasibleSet) {
    let markets: Vec<MarketSpec> = (0..n)
        .map(|_| {
            let (demand, q_max) = random_demand(rng, ceiling);
            MarketSpec::new(demand, rng.gen_range(0.0..0.1), q_max).unwrap()
        })
        .collect();
    let caps = caps_at_ceiling(&markets, ceiling);
    let total = caps.iter().sum::<f64>() * rng.gen_range(0.05..0.95);
    (markets, FeasibleSet::new(caps, total).unwrap())
}

/// Every vertex of the feasible set: each market is at zero or its cap except
/// at most one, which takes the remainder.
pub fn enumerate_vertices(fs: &FeasibleSet) -> Vec<Vec<f64>> {
    let caps = fs.caps();
    let n = caps.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let filled: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| caps[i]).sum();
        for j in (0..n).filter(|j| mask & (1 << j) == 0) {
            let rest = fs.total() - filled;
            if rest >= -1e-12 && rest <= caps[j] + 1e-12 {
                let mut q: Vec<f64> = (0..n)
                    .map(|i| if mask & (1 << i) != 0 { caps[i] } else { 0.0 })
                    .collect();
                q[j] = rest.clamp(0.0, caps[j]);
                out.push(q);
            }
        }
    }
    out
}

/// Uniform-ish random point of the feasible set: random weights scaled to the
/// supply, then excess above caps pushed to markets with room.
pub fn random_feasible(rng: &mut ChaCha8Rng, fs: &FeasibleSet) -> Vec<f64> {
    let caps = fs.caps();
    let w: Vec<f64> = caps.iter().map(|c| c * rng.gen_range(0.0..1.0)).collect();
    let sum: f64 = w.iter().sum();
    let mut q: Vec<f64> = w.iter().map(|x| x * fs.total() / sum).collect();
    loop {
        let excess: f64 = q.iter().zip(caps).map(|(x, c)| (x - c).max(0.0)).sum();
        if excess <= 0.0 {
            break;
        }
        for (x, c) in q.iter_mut().zip(caps) {
            *x = x.min(*c);
        }
        let room: f64 = q.iter().zip(caps).map(|(x, c)| c - x).sum();
        for (x, c) in q.iter_mut().zip(caps) {
            *x += (c - *x) * excess / room;
        }
    }
    q
}

/// Largest violation of the linear-program optimality conditions for a
/// cost-ordered vertex, with the cutoff market's cost as multiplier.
pub fn greedy_kkt_residual(costs: &[f64], fs: &FeasibleSet, q: &[f64]) -> f64 {
    let caps = fs.caps();
    let n = q.len();
    let interior: Vec<usize> = (0..n).filter(|&i| q[i] > 1e-9 && q[i] < caps[i] - 1e-9).collect();
    let lambda = match interior.as_slice() {
        [j] => costs[*j],
        [] => (0..n)
            .filter(|&i| q[i] > 1e-9)
            .map(|i| costs[i])
            .fold(f64::NEG_INFINITY, f64::max),
        _ => return f64::INFINITY,
    };
    (0..n)
        .map(|i| {
            let reduced = costs[i] - lambda;
            if q[i] <= 1e-9 {
                (-reduced).max(0.0)
            } else if q[i] >= caps[i] - 1e-9 {
                reduced.max(0.0)
            } else {
                reduced.abs()
            }
        })
        .fold(0.0, f64::max)
}
