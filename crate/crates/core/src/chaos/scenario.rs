use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{equalize_marginal_values, greedy_allocation, TieBreak};
use crate::chaos::rng::{stream_rng, SHARED_STREAM_BASE};
use crate::error::{invalid, Result};
use crate::model::{Allocation, DemandCurve, FeasibleSet, Slot, DEFAULT_HILL};

/// How unit delivery costs are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CostModel {
    /// Independent uniform draws on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// `base + slope * distance / max_distance + U[0, noise]`, with distance
    /// measured from the `source` cell.
    Systematic {
        base: f64,
        slope: f64,
        noise: f64,
        source: (usize, usize),
    },
}

/// A grid of identical-template markets sharing a fixed supply under a ceiling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub demand: DemandCurve,
    /// Each market's demand is stretched along the quantity axis by a factor
    /// drawn from `U[1 - s, 1 + s]`; 0 keeps markets identical.
    pub demand_spread: f64,
    pub costs: CostModel,
    pub supply: f64,
    /// Ceiling as a fraction of the market-clearing price.
    pub ceiling_fraction: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            grid_rows: 10,
            grid_cols: 10,
            demand: DEFAULT_HILL,
            demand_spread: 0.0,
            costs: CostModel::Uniform { lo: 0.0, hi: 0.1 },
            supply: 150.0,
            ceiling_fraction: 0.8,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(invalid("grid must have at least one row and one column"));
        }
        if !(self.ceiling_fraction > 0.0 && self.ceiling_fraction < 1.0) {
            return Err(invalid("ceiling fraction must lie in (0, 1)"));
        }
        if !(self.supply > 0.0 && self.supply.is_finite()) {
            return Err(invalid("supply must be positive"));
        }
        if !(0.0..1.0).contains(&self.demand_spread) {
            return Err(invalid("demand spread must lie in [0, 1)"));
        }
        match self.costs {
            CostModel::Uniform { lo, hi } if !(lo < hi) => {
                return Err(invalid("uniform cost bounds need lo < hi"));
            }
            CostModel::Systematic { noise, source, .. }
                if noise < 0.0 || source.0 >= self.grid_rows || source.1 >= self.grid_cols =>
            {
                return Err(invalid(
                    "systematic costs need noise >= 0 and a source cell on the grid",
                ));
            }
            _ => {}
        }
        self.demand.validate()
    }

    pub fn market_count(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    /// `(row, col)` of market `i`, row-major.
    pub fn cell(&self, i: usize) -> (usize, usize) {
        (i / self.grid_cols, i % self.grid_cols)
    }

    /// Per-market demand curves; identical unless `demand_spread > 0`.
    pub fn demands(&self) -> Vec<DemandCurve> {
        (0..self.market_count())
            .map(|i| {
                if self.demand_spread == 0.0 {
                    return self.demand.clone();
                }
                let mut rng = stream_rng(self.seed, SHARED_STREAM_BASE + i as u64);
                let f = rng.gen_range(1.0 - self.demand_spread..=1.0 + self.demand_spread);
                self.demand.scale_quantities(f)
            })
            .collect()
    }

    /// Per-market unit costs, one generator stream per market.
    pub fn draw_costs(&self) -> Vec<f64> {
        let n = self.market_count();
        let max_dist = ((self.grid_rows - 1).pow(2) as f64 + (self.grid_cols - 1).pow(2) as f64)
            .sqrt()
            .max(1.0);
        (0..n)
            .map(|i| {
                let mut rng = stream_rng(self.seed, i as u64);
                match self.costs {
                    CostModel::Uniform { lo, hi } => rng.gen_range(lo..hi),
                    CostModel::Systematic {
                        base,
                        slope,
                        noise,
                        source,
                    } => {
                        let (r, c) = self.cell(i);
                        let dr = r as f64 - source.0 as f64;
                        let dc = c as f64 - source.1 as f64;
                        let jitter = if noise > 0.0 { rng.gen_range(0.0..noise) } else { 0.0 };
                        base + slope * (dr * dr + dc * dc).sqrt() / max_dist + jitter
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub costs: Vec<f64>,
    /// Price at which aggregate demand equals supply with no ceiling.
    pub market_price: f64,
    pub ceiling: f64,
    /// Demand at the ceiling, the most each market can absorb.
    pub caps: Vec<f64>,
    /// Surplus-maximizing allocation net of delivery costs, no ceiling.
    pub free_allocation: Vec<f64>,
    /// The common `P_i(q_i) - c_i` of the free allocation.
    pub free_net_price: f64,
    /// Cost-minimizing allocation under the ceiling.
    pub controlled_allocation: Allocation,
    /// Gross surplus of each allocation.
    pub welfare_free: f64,
    pub welfare_controlled: f64,
    pub delivery_cost_free: f64,
    pub delivery_cost_controlled: f64,
    pub unserved_count: usize,
}

/// Runs one grid scenario: free-market split, ceiling, and the controlled
/// allocation suppliers choose by minimizing delivery cost.
///
/// Exact cost ties, which occur with probability zero, are served in index order.
pub fn run_grid_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let demands = cfg.demands();
    let curves: Vec<&DemandCurve> = demands.iter().collect();
    let n = curves.len();
    let costs = cfg.draw_costs();
    let unbounded = vec![f64::INFINITY; n];

    let (_, market_price) = equalize_marginal_values(&curves, &vec![0.0; n], &unbounded, cfg.supply)?;
    let ceiling = cfg.ceiling_fraction * market_price;
    let caps: Vec<f64> = demands.iter().map(|d| d.generalized_inverse(ceiling)).collect();
    let fs = FeasibleSet::new(caps.clone(), cfg.supply)?;

    let (free_allocation, free_net_price) = equalize_marginal_values(&curves, &costs, &unbounded, cfg.supply)?;
    let controlled_allocation = greedy_allocation(&costs, &fs, TieBreak::Index)?;

    let gross = |q: &[f64]| -> Result<f64> { demands.iter().zip(q).map(|(d, &x)| d.gross_surplus(0.0, x)).sum() };
    let cost = |q: &[f64]| -> f64 { q.iter().zip(&costs).map(|(x, c)| x * c).sum() };

    Ok(ScenarioOutcome {
        welfare_free: gross(&free_allocation)?,
        welfare_controlled: gross(&controlled_allocation.quantities)?,
        delivery_cost_free: cost(&free_allocation),
        delivery_cost_controlled: cost(&controlled_allocation.quantities),
        unserved_count: controlled_allocation
            .slots
            .iter()
            .filter(|s| **s == Slot::AtZero)
            .count(),
        costs,
        market_price,
        ceiling,
        caps,
        free_allocation,
        free_net_price,
        controlled_allocation,
    })
}

/// Rows for the per-market CSV: index, grid cell, cost, both allocations and
/// the controlled allocation's slot.
pub fn scenario_rows(cfg: &ScenarioConfig, out: &ScenarioOutcome) -> Vec<ScenarioRow> {
    (0..out.costs.len())
        .map(|i| {
            let (row, col) = cfg.cell(i);
            ScenarioRow {
                market_index: i,
                row,
                col,
                cost: out.costs[i],
                free_q: out.free_allocation[i],
                controlled_q: out.controlled_allocation.quantities[i],
                classification: out.controlled_allocation.slots[i].as_str(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub market_index: usize,
    pub row: usize,
    pub col: usize,
    pub cost: f64,
    pub free_q: f64,
    pub controlled_q: f64,
    pub classification: &'static str,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_shape() {
        let out = run_grid_scenario(&ScenarioConfig::default()).unwrap();
        assert_eq!(out.costs.len(), 100);
        assert!(out.controlled_allocation.is_vertex());
        assert!((out.market_price - 3.0566).abs() < 1e-3, "{}", out.market_price);
        assert!((out.caps[0] - 2.153).abs() < 1e-3, "{}", out.caps[0]);
        assert_eq!(out.unserved_count, 30);
        let total: f64 = out.free_allocation.iter().sum();
        assert!((total - 150.0).abs() < 1e-9);
    }

    #[test]
    fn equal_costs_split_free_market_evenly() {
        let cfg = ScenarioConfig {
            grid_rows: 2,
            grid_cols: 2,
            supply: 6.0,
            costs: CostModel::Systematic {
                base: 0.05,
                slope: 0.0,
                noise: 0.0,
                source: (0, 0),
            },
            ..ScenarioConfig::default()
        };
        let out = run_grid_scenario(&cfg).unwrap();
        for q in &out.free_allocation {
            assert!((q - 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn seeds_change_costs() {
        let a = ScenarioConfig::default().draw_costs();
        let b = ScenarioConfig {
            seed: 1,
            ..ScenarioConfig::default()
        }
        .draw_costs();
        assert_ne!(a, b);
    }
}
