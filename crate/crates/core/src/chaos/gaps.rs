use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{cost_order, greedy_allocation, TieBreak};
use crate::chaos::rng::stream_rng;
use crate::error::{invalid, Result};
use crate::model::FeasibleSet;

/// Settings for sampling the cost gap at the served/unserved cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStudy {
    pub n_values: Vec<usize>,
    pub draws: usize,
    pub cost_lo: f64,
    pub cost_hi: f64,
    /// Cap of every market.
    pub cap: f64,
    /// Share of markets served: supply is `(floor(fraction * n) + 1/2) * cap`,
    /// so the cutoff market is always half served.
    pub supply_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub n: usize,
    /// Draws that had an unserved market, and so a cutoff gap.
    pub samples: usize,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

/// For each market count, the distribution of `c_(k+1) - c_(k)`, where `k` is
/// the last market served by the greedy rule and `k+1` the first one starved.
pub fn cutoff_gap_statistics(study: &GapStudy) -> Result<Vec<GapSummary>> {
    if study.draws == 0 {
        return Err(invalid("at least one draw required"));
    }
    if !(study.cost_lo < study.cost_hi) {
        return Err(invalid("cost range needs lo < hi"));
    }
    if !(study.supply_fraction > 0.0 && study.supply_fraction < 1.0) || !(study.cap > 0.0) {
        return Err(invalid("supply fraction must lie in (0, 1) and cap must be positive"));
    }
    study
        .n_values
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(invalid("market count must be positive"));
            }
            let full = (study.supply_fraction * n as f64).floor();
            let fs = FeasibleSet::new(vec![study.cap; n], (full + 0.5) * study.cap)?;
            let mut gaps = Vec::with_capacity(study.draws);
            for draw in 0..study.draws {
                let mut rng = stream_rng(study.seed ^ (n as u64).rotate_left(32), draw as u64);
                let costs: Vec<f64> = (0..n).map(|_| rng.gen_range(study.cost_lo..study.cost_hi)).collect();
                let alloc = greedy_allocation(&costs, &fs, TieBreak::Index)?;
                let order = cost_order(&costs, TieBreak::Index)?;
                let served = order.iter().take_while(|&&i| alloc.quantities[i] > 0.0).count();
                if served < n {
                    gaps.push(costs[order[served]] - costs[order[served - 1]]);
                }
            }
            Ok(summarize(n, gaps))
        })
        .collect()
}

fn summarize(n: usize, mut gaps: Vec<f64>) -> GapSummary {
    gaps.sort_by(f64::total_cmp);
    let samples = gaps.len();
    let mean = if samples > 0 {
        gaps.iter().sum::<f64>() / samples as f64
    } else {
        f64::NAN
    };
    GapSummary {
        n,
        samples,
        mean,
        median: quantile(&gaps, 0.5),
        q10: quantile(&gaps, 0.1),
        q90: quantile(&gaps, 0.9),
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let pos = p * (len - 1) as f64;
            let k = pos.floor() as usize;
            let frac = pos - k as f64;
            if k + 1 < len {
                sorted[k] + frac * (sorted[k + 1] - sorted[k])
            } else {
                sorted[k]
            }
        }
    }
}
