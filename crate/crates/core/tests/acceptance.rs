//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so every verdict is printed even when all
//! pass. Exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use misalloc::alloc::*;
use misalloc::bounds::*;
use misalloc::calibration::*;
use misalloc::chaos::*;
use misalloc::model::{DemandCurve, FeasibleSet, MarketSpec, Slot};
use rand::Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within_budget(start: Instant, budget: Duration) -> Outcome {
    let t = start.elapsed();
    check!(t <= budget, "took {:.1?}, budget {:.0?}", t, budget);
    Ok(format!("{t:.2?}"))
}

// 1. Calibration headline through the command-line entry point.
fn calibration_headline() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().to_str().unwrap();
    let code = misalloc::cli::main_with(["misalloc", "calibrate", "--out", out]);
    check!(code == 0, "calibrate exited {code}");
    let text = std::fs::read_to_string(dir.path().join("decomposition.json")).map_err(|e| e.to_string())?;
    let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let pooled = &v["pooled"];
    let num = |k: &str| pooled[k].as_f64().ok_or(format!("missing {k}"));
    let (q_o, q_c, harb) = (num("q_open")?, num("q_closed")?, num("harberger_loss")?);
    let (r_lo, r_hi) = (num("ratio_lower")?, num("ratio_upper")?);
    check!((q_o - 1.06).abs() <= 1e-9, "q_O = {q_o}");
    check!((q_c - 0.66).abs() <= 0.01, "q_C = {q_c}");
    check!((100.0 * harb - 2.025).abs() <= 0.001, "Harberger = {}%", 100.0 * harb);
    check!(
        (r_lo - 1.15).abs() <= 0.10 && (r_hi - 9.18).abs() <= 0.10,
        "ratio [{r_lo}, {r_hi}]"
    );
    let t = within_budget(start, Duration::from_secs(5))?;
    Ok(format!(
        "q_O={q_o:.4} q_C={q_c:.4} Harberger={:.4}% R=[{r_lo:.3}, {r_hi:.3}] in {t}",
        100.0 * harb
    ))
}

// 2. The four-row assumption decomposition on the shipped state data.
fn decomposition_table() -> Outcome {
    let start = Instant::now();
    let raw = parse_station_survey(SYNTHETIC_STATES.as_bytes()).map_err(|e| e.to_string())?;
    let rows = impute_gallons(&raw).map_err(|e| e.to_string())?;
    let t = assumption_decomposition(&rows, &CalibrationParams::default()).map_err(|e| e.to_string())?;
    check!(t.len() == 4, "{} rows", t.len());
    let targets = [(4.43, 8.86), (4.98, 9.97), (2.21, 17.72), (2.21, 12.40)];
    for (r, (lo, hi)) in t.iter().zip(targets) {
        let (a, b) = (100.0 * r.phi_lower, 100.0 * r.phi_upper);
        check!(
            (a - lo).abs() <= 0.15 && (b - hi).abs() <= 0.15,
            "{}: [{a:.3}, {b:.3}]",
            r.assumptions
        );
    }
    check!(
        (t[0].ratio_lower - 4.37).abs() <= 0.05 && (t[0].ratio_upper - 4.37).abs() <= 0.05,
        "row 1 ratio"
    );
    check!(
        (t[2].ratio_lower - 1.09).abs() <= 0.10 && (t[2].ratio_upper - 8.75).abs() <= 0.10,
        "row 3 ratio [{}, {}]",
        t[2].ratio_lower,
        t[2].ratio_upper
    );
    check!(
        (t[3].ratio_upper - 6.12).abs() <= 0.10,
        "row 4 ratio upper {}",
        t[3].ratio_upper
    );
    let took = within_budget(start, Duration::from_secs(60))?;
    let cells: Vec<String> = t
        .iter()
        .map(|r| format!("[{:.2}, {:.2}]", 100.0 * r.phi_lower, 100.0 * r.phi_upper))
        .collect();
    Ok(format!("{} in {took}", cells.join(" ")))
}

// 3. Sharpness of both bounds and containment of sampled profiles.
fn bounds_sharpness() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(3);
    let mut worst_gap: f64 = 0.0;
    for k in 0..200 {
        let interval = k % 2 == 1;
        let prob = common::interior_problem(&mut rng, 5, interval, k % 3 == 0);
        let mode = if interval {
            AnchorMode::Interval
        } else {
            AnchorMode::Fixed
        };
        let r = solve_bounds(&prob, mode).map_err(|e| format!("instance {k}: {e}"))?;
        let q_obs: Vec<f64> = prob.markets.iter().map(|m| m.q_obs).collect();
        for sol in [&r.lower, &r.upper] {
            let (phi, _, _) = profile_misallocation(&sol.extremal, &q_obs).map_err(|e| e.to_string())?;
            let gap = (phi - sol.value).abs() / sol.value.abs().max(1.0);
            worst_gap = worst_gap.max(gap);
            check!(gap <= 1e-7, "instance {k}: extremal gives {phi}, bound {}", sol.value);
        }
        for j in 0..500u64 {
            let curves = prob
                .markets
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let (lo, hi) = m.anchor_range();
                    let p0 = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                    admissible_sampler(m, p0, (k as u64) << 32 | j << 4 | i as u64)
                })
                .collect::<misalloc::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            let (phi, _, _) = profile_misallocation(&curves, &q_obs).map_err(|e| e.to_string())?;
            check!(
                phi >= r.phi_lower - 1e-7 && phi <= r.phi_upper + 1e-7,
                "instance {k} sample {j}: {phi} outside [{}, {}]",
                r.phi_lower,
                r.phi_upper
            );
        }
    }
    let t = within_budget(start, Duration::from_secs(600))?;
    Ok(format!(
        "200 instances x 500 profiles, max sharpness gap {worst_gap:.1e} in {t}"
    ))
}

// 4. Agreement with brute-force oracles.
fn brute_force_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(4);
    for k in 0..1000 {
        let n = rng.gen_range(1..=8);
        let (markets, fs) = common::random_instance(&mut rng, n, 0.8);
        let costs: Vec<f64> = markets.iter().map(|m| m.unit_cost).collect();
        let g = greedy_controlled_allocation(&markets, &fs, TieBreak::Error).map_err(|e| e.to_string())?;
        let o = lp_vertex_oracle(&costs, &fs).map_err(|e| e.to_string())?;
        check!(g == o, "greedy instance {k}: {:?} vs {:?}", g.quantities, o.quantities);
    }
    for k in 0..500 {
        let n = rng.gen_range(1..=8);
        let (markets, fs) = common::random_instance(&mut rng, n, 0.8);
        let w = worst_case_allocation(&markets, &fs).map_err(|e| e.to_string())?;
        let surplus = |q: &[f64]| -> f64 {
            markets
                .iter()
                .zip(q)
                .map(|(m, &x)| m.demand.gross_surplus(0.0, x).unwrap())
                .sum()
        };
        let best = common::enumerate_vertices(&fs)
            .into_iter()
            .min_by(|a, b| surplus(a).total_cmp(&surplus(b)))
            .unwrap();
        let same_vertex = best
            .iter()
            .zip(&w.allocation.quantities)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        check!(
            same_vertex,
            "worst instance {k}: {:?} vs enumerated {best:?}",
            w.allocation.quantities
        );
    }
    let mut max_err: f64 = 0.0;
    for k in 0..50 {
        let prob = common::interior_problem(&mut rng, 3, false, k % 2 == 0);
        let anchors: Vec<f64> = prob.markets.iter().map(|m| m.p0_lo).collect();
        let (lo, hi) = candidate_interval(&prob, &anchors).map_err(|e| e.to_string())?;
        for f in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let p = lo + f * (hi - lo);
            for side in [Side::Upper, Side::Lower] {
                let got = conditional_bound(&prob, &anchors, p, side)
                    .map_err(|e| e.to_string())?
                    .value;
                let want = dp_oracle(&prob, &anchors, p, side);
                max_err = max_err.max((got - want).abs());
                check!(
                    (got - want).abs() <= 1e-3,
                    "instance {k} p={p} {side:?}: {got} vs oracle {want}"
                );
            }
        }
    }
    let t = within_budget(start, Duration::from_secs(300))?;
    Ok(format!(
        "1000 greedy, 500 worst-case exact; 50 bound instances max error {max_err:.1e} in {t}"
    ))
}

const CELLS: usize = 200;

/// Best achievable `integral_{p0}^{p} q` for one market over demand paths on a
/// `CELLS`-cell price mesh, each cell taking the steep, middle or flat slope.
/// Indexed by the number of half-width slope increments used; infeasible
/// endpoints hold `None`.
fn market_table(m: &BoundsMarket, p0: f64, p: f64, minimize: bool) -> Vec<Option<f64>> {
    let h = (p - p0) / CELLS as f64;
    let step = 0.5 * m.d();
    let width = 2 * CELLS + 1;
    let q_at = |k: usize, j: usize| m.q_obs + k as f64 * h * m.alpha() + h * step * j as f64;
    let ok = |k: usize, q: f64| {
        let price = p0 + k as f64 * h;
        let choke_cap = m.choke.map_or(f64::INFINITY, |c| (c - price) / -m.g_hi);
        q >= -1e-12 && q <= m.q_max + 1e-12 && q <= choke_cap + 1e-12
    };
    let mut best: Vec<Option<f64>> = vec![None; width];
    best[0] = Some(0.0);
    for k in 0..CELLS {
        let mut next: Vec<Option<f64>> = vec![None; width];
        for j in 0..=2 * k {
            let Some(v) = best[j] else { continue };
            let q = q_at(k, j);
            for t in 0..3 {
                let q2 = q_at(k + 1, j + t);
                if !ok(k + 1, q2) {
                    continue;
                }
                let cand = v + 0.5 * h * (q + q2);
                let slot = &mut next[j + t];
                let better = match *slot {
                    None => true,
                    Some(old) => (cand < old) == minimize,
                };
                if better {
                    *slot = Some(cand);
                }
            }
        }
        best = next;
    }
    best
}

/// Bound at `p` from exhaustive search over mesh paths, with the market whose
/// anchor is farthest from `p` absorbing the adding-up residual by linear
/// interpolation between adjacent mesh endpoints.
fn dp_oracle(prob: &BoundsProblem, anchors: &[f64], p: f64, side: Side) -> f64 {
    let minimize = side == Side::Upper;
    let n = prob.len();
    let tables: Vec<Vec<Option<f64>>> = (0..n)
        .map(|i| market_table(&prob.markets[i], anchors[i], p, minimize))
        .collect();
    let endpoint = |i: usize, j: f64| {
        let m = &prob.markets[i];
        let h = (p - anchors[i]) / CELLS as f64;
        m.q_obs + (p - anchors[i]) * m.alpha() + h * 0.5 * m.d() * j
    };
    let free = (0..n)
        .max_by(|&a, &b| (p - anchors[a]).abs().total_cmp(&(p - anchors[b]).abs()))
        .unwrap();
    let others: Vec<usize> = (0..n).filter(|&i| i != free).collect();
    let mut best: Option<f64> = None;
    let mut visit = |js: &[usize]| {
        let mut sum_i = 0.0;
        let mut sum_q = 0.0;
        for (&i, &j) in others.iter().zip(js) {
            let Some(v) = tables[i][j] else { return };
            sum_i += v;
            sum_q += endpoint(i, j as f64);
        }
        let need = prob.total - sum_q;
        let base = endpoint(free, 0.0);
        let unit = endpoint(free, 1.0) - base;
        let jf = (need - base) / unit;
        if !(0.0..=(2 * CELLS) as f64).contains(&jf) {
            return;
        }
        let (a, b) = (jf.floor() as usize, (jf.ceil() as usize).min(2 * CELLS));
        let (Some(va), Some(vb)) = (tables[free][a], tables[free][b]) else {
            return;
        };
        let total = sum_i + va + (vb - va) * (jf - a as f64);
        let better = best.map_or(true, |old| (total < old) == minimize);
        if better {
            best = Some(total);
        }
    };
    let width = 2 * CELLS + 1;
    match others.len() {
        1 => (0..width).for_each(|j| visit(&[j])),
        2 => (0..width).for_each(|j1| (0..width).for_each(|j2| visit(&[j1, j2]))),
        _ => unreachable!("oracle handles two or three markets"),
    }
    let anchor_value: f64 = prob.markets.iter().zip(anchors).map(|(m, p0)| m.q_obs * p0).sum();
    prob.total * p - anchor_value - best.expect("oracle found no feasible path")
}

// 5. Allocation jumps on tie paths and the grid scenario shape.
fn chaos_properties() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(5);
    for k in 0..100 {
        let demands: Vec<DemandCurve> = (0..2).map(|_| common::random_demand(&mut rng, 0.8).0).collect();
        let caps: Vec<f64> = demands
            .iter()
            .map(|d| rng.gen_range(0.3..2.0f64).min(d.domain_max()))
            .collect();
        let total = (caps[0] + caps[1]) * rng.gen_range(0.1..0.9);
        let fs = FeasibleSet::new(caps, total).map_err(|e| e.to_string())?;
        let c = rng.gen_range(0.0..0.1);
        let a = rng.gen_range(0.01..1.0);
        let path = CostPath {
            base: vec![c, c],
            direction: vec![-a, a],
        };
        let ev = sweep_cost_path(&demands, &fs, &path, -0.05, 0.05, 0.003).map_err(|e| e.to_string())?;
        let back = sweep_cost_path(&demands, &fs, &path.reversed(), -0.05, 0.05, 0.003).map_err(|e| e.to_string())?;
        check!(
            ev.len() == 1 && back.len() == 1,
            "path {k}: {} and {} events",
            ev.len(),
            back.len()
        );
        let (e, r) = (&ev[0], &back[0]);
        let moved = (0..2).filter(|&i| (e.pre[i] - e.post[i]).abs() > 1e-12).count();
        check!(moved == 2 && !e.compound, "path {k}: {moved} coordinates moved");
        check!(e.welfare_jump.abs() > 0.0, "path {k}: no welfare change");
        let w = |q: &[f64]| -> f64 {
            demands
                .iter()
                .zip(q)
                .map(|(d, &x)| d.gross_surplus(0.0, x).unwrap())
                .sum()
        };
        let recomputed = w(&e.post) - w(&e.pre);
        check!(
            (e.welfare_jump - recomputed).abs() <= 1e-9,
            "path {k}: {} vs {recomputed}",
            e.welfare_jump
        );
        check!(
            (e.welfare_jump + r.welfare_jump).abs() <= 1e-9 && e.welfare_jump.signum() != r.welfare_jump.signum(),
            "path {k}: reversed jump {} vs {}",
            r.welfare_jump,
            e.welfare_jump
        );
    }
    let mut unserved = Vec::with_capacity(100);
    for seed in 0..100 {
        let out = run_grid_scenario(&ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let interior = out
            .controlled_allocation
            .slots
            .iter()
            .filter(|s| **s == Slot::Interior)
            .count();
        check!(interior <= 1, "seed {seed}: {interior} interior markets");
        check!(
            (22..=38).contains(&out.unserved_count),
            "seed {seed}: {} unserved",
            out.unserved_count
        );
        unserved.push(out.unserved_count);
    }
    let t = within_budget(start, Duration::from_secs(120))?;
    let (lo, hi) = (unserved.iter().min().unwrap(), unserved.iter().max().unwrap());
    Ok(format!(
        "100 tie paths; 100 grid seeds all vertices, unserved in [{lo}, {hi}] in {t}"
    ))
}

// 6. Triangle inequality, smoothing Lipschitz bound and optimality residuals.
fn analytic_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(6);
    let (mut tight, mut strict) = (0, 0);
    for k in 0..1000 {
        let alpha = -rng.gen_range(0.2..2.0);
        let d = rng.gen_range(0.05..1.5);
        let len = rng.gen_range(0.1..2.0);
        let bang_bang = k % 2 == 0;
        let (cuts, slopes) = if bang_bang {
            let switch = rng.gen_range(0.0..len);
            (vec![0.0, switch, len], vec![alpha, alpha + d])
        } else {
            let pieces = rng.gen_range(1..8);
            let mut cuts: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(0.0..len)).collect();
            cuts.extend([0.0, len]);
            cuts.sort_by(f64::total_cmp);
            let slopes = (0..pieces).map(|_| alpha + d * rng.gen_range(0.01..0.99)).collect();
            (cuts, slopes)
        };
        let mut gap_path = 0.0;
        let mut area = 0.0;
        for (w, s) in cuts.windows(2).zip(&slopes) {
            let next = gap_path + (s - alpha) * (w[1] - w[0]);
            area += 0.5 * (gap_path + next) * (w[1] - w[0]);
            gap_path = next;
        }
        let (psi, _) = triangle_penalty(&[d], &[d * len], gap_path).map_err(|e| e.to_string())?;
        let excess = area - psi;
        check!(excess >= -1e-9, "path {k}: integral {area} below triangle {psi}");
        if bang_bang {
            check!(excess.abs() < 1e-9, "bang-bang path {k}: gap {excess}");
            tight += 1;
        } else {
            check!(excess > 0.0, "path {k}: gap {excess} with interior slopes");
            strict += 1;
        }
    }
    for k in 0..1000 {
        let n = rng.gen_range(2..10);
        let caps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
        let fs = FeasibleSet::new(caps.clone(), caps.iter().sum::<f64>() * rng.gen_range(0.1..0.9))
            .map_err(|e| e.to_string())?;
        let kappa = 10f64.powf(rng.gen_range(-2.0..1.0));
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let c2: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (q, _) = smoothed_allocation_costs(&c, &fs, kappa).map_err(|e| e.to_string())?;
        let (q2, _) = smoothed_allocation_costs(&c2, &fs, kappa).map_err(|e| e.to_string())?;
        let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let (dq, dc) = (norm(&q.quantities, &q2.quantities), norm(&c, &c2));
        check!(
            dq <= dc / kappa + 1e-9,
            "pair {k}: |dq| {dq} > |dc|/kappa {}",
            dc / kappa
        );
    }
    let mut worst_residual: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=8);
        let (markets, fs) = common::random_instance(&mut rng, n, 0.8);
        let (e, p) = efficient_allocation(&markets, &fs).map_err(|e| e.to_string())?;
        let w = worst_case_allocation(&markets, &fs).map_err(|e| e.to_string())?;
        let costs: Vec<f64> = markets.iter().map(|m: &MarketSpec| m.unit_cost).collect();
        let g = greedy_controlled_allocation(&markets, &fs, TieBreak::Error).map_err(|e| e.to_string())?;
        let r = efficient_kkt_residual(&markets, &e, p)
            .max(worst_kkt_residual(&markets, &w.allocation, w.cutoff))
            .max(common::greedy_kkt_residual(&costs, &fs, &g.quantities));
        worst_residual = worst_residual.max(r);
        check!(r <= 1e-8, "residual {r}");
    }
    let t = within_budget(start, Duration::from_secs(120))?;
    Ok(format!(
        "{tight} bang-bang tight, {strict} strict; 1000 Lipschitz pairs; max residual {worst_residual:.1e} in {t}"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("calibration headline", calibration_headline),
        ("decomposition table", decomposition_table),
        ("bounds sharpness", bounds_sharpness),
        ("brute-force equivalence", brute_force_equivalence),
        ("chaos properties", chaos_properties),
        ("analytic invariants", analytic_invariants),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(detail) => println!("criterion {} ({name}): PASS  {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL  {why}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
