use serde::{Deserialize, Serialize};

use super::survey::StationSurveyRow;
use crate::alloc::harberger_loss;
use crate::bounds::{profile_misallocation, solve_bounds, AnchorMode, BoundsMarket, BoundsProblem, BoundsResult, Side};
use crate::error::{invalid, Result};
use crate::model::DemandCurve;

/// Per-capita calibration inputs. Quantities are relative to the pre-shortage
/// baseline of 1 at a baseline price of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationParams {
    pub ceiling: f64,
    pub epsilon_lo: f64,
    pub epsilon_hi: f64,
    /// Elasticity used to place the open-station quantity.
    pub epsilon_point: f64,
    /// Aggregate quantity relative to baseline.
    pub total: f64,
    pub choke: Option<f64>,
    pub harberger_epsilon: f64,
    /// Open share for the pooled two-market problem.
    pub open_share: f64,
    /// Largest per-capita quantity any market could absorb.
    pub q_max: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams {
            ceiling: 0.8,
            epsilon_lo: 0.2,
            epsilon_hi: 0.4,
            epsilon_point: 0.3,
            total: 0.91,
            choke: None,
            harberger_epsilon: 0.2,
            open_share: 0.623,
            q_max: 2.0,
        }
    }
}

impl CalibrationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ceiling > 0.0 && self.ceiling < 1.0) {
            return Err(invalid("ceiling must lie in (0, 1)"));
        }
        if !(self.epsilon_lo > 0.0 && self.epsilon_lo <= self.epsilon_point && self.epsilon_point <= self.epsilon_hi) {
            return Err(invalid(
                "elasticities need 0 < epsilon_lo <= epsilon_point <= epsilon_hi",
            ));
        }
        if !(self.total > 0.0 && self.total < 1.0) {
            return Err(invalid("aggregate quantity must lie in (0, 1)"));
        }
        if !(self.harberger_epsilon > 0.0) {
            return Err(invalid("harberger elasticity must be > 0"));
        }
        if !(self.q_max > self.open_quantity()) {
            return Err(invalid("q_max must exceed the open-station quantity"));
        }
        if self.choke.is_some_and(|m| !(m > 1.0)) {
            return Err(invalid("choke cap must exceed the baseline price"));
        }
        Ok(())
    }

    /// Per-capita quantity bought at open stations: demand at the ceiling.
    pub fn open_quantity(&self) -> f64 {
        1.0 + (1.0 - self.ceiling) * self.epsilon_point
    }

    /// Per-capita quantity at non-open stations that restores the aggregate.
    pub fn closed_quantity(&self, open_share: f64) -> Result<f64> {
        if !(open_share >= 0.0 && open_share < 1.0) {
            return Err(invalid(format!("open share {open_share} leaves no non-open market")));
        }
        Ok((self.total - open_share * self.open_quantity()) / (1.0 - open_share))
    }

    /// Prices at per-capita quantity `q` on linear demands through the
    /// baseline with elasticity `epsilon_lo` and `epsilon_hi`, in increasing order.
    pub fn anchor_interval(&self, q: f64) -> (f64, f64) {
        let a = 1.0 + (1.0 - q) / self.epsilon_lo;
        let b = 1.0 + (1.0 - q) / self.epsilon_hi;
        (a.min(b), a.max(b))
    }

    /// Harberger loss at elasticity `epsilon` on linear aggregate demand.
    pub fn harberger(&self, epsilon: f64) -> Result<f64> {
        let aggregate = DemandCurve::linear(1.0, 1.0, -1.0 / epsilon)?;
        harberger_loss(&aggregate, 1.0, 1.0, self.total)
    }

    /// A market holding `weight` of the population at per-capita quantity `q`.
    fn market(&self, weight: f64, q: f64) -> BoundsMarket {
        let (lo, hi) = self.anchor_interval(q);
        BoundsMarket {
            q_obs: weight * q,
            p0_lo: lo,
            p0_hi: hi,
            g_lo: -1.0 / (self.epsilon_lo * weight),
            g_hi: -1.0 / (self.epsilon_hi * weight),
            choke: self.choke,
            q_max: weight * self.q_max,
        }
    }
}

/// Whether a market is open stations or rationing ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Open,
    NonOpen,
}

/// One market of a calibrated problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub state: String,
    pub status: Status,
    /// Population weight; weights sum to 1.
    pub weight: f64,
    /// Per-capita observed quantity.
    pub quantity: f64,
}

/// A calibrated bounds problem with the cell behind each market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrated {
    pub problem: BoundsProblem,
    pub cells: Vec<Cell>,
    pub open_share: f64,
    pub q_open: f64,
    pub q_closed: f64,
}

fn build(params: &CalibrationParams, cells: Vec<(String, Status, f64)>, open_share: f64) -> Result<Calibrated> {
    params.validate()?;
    let q_open = params.open_quantity();
    let q_closed = params.closed_quantity(open_share)?;
    if !(q_closed > 0.0) {
        return Err(invalid(format!("non-open quantity {q_closed} must be > 0")));
    }
    let cells: Vec<Cell> = cells
        .into_iter()
        .filter(|c| c.2 > 0.0)
        .map(|(state, status, weight)| Cell {
            state,
            status,
            weight,
            quantity: match status {
                Status::Open => q_open,
                Status::NonOpen => q_closed,
            },
        })
        .collect();
    if cells.is_empty() {
        return Err(invalid("every market has zero weight"));
    }
    let markets = cells.iter().map(|c| params.market(c.weight, c.quantity)).collect();
    let mut problem = BoundsProblem::new(markets, params.ceiling)?;
    // Weights may not sum to exactly 1 after filtering rounding; restate the total.
    problem.total = problem.markets.iter().map(|m| m.q_obs).sum();
    Ok(Calibrated {
        problem,
        cells,
        open_share,
        q_open,
        q_closed,
    })
}

/// Open and non-open stations pooled nationally.
pub fn pooled_two_market(params: &CalibrationParams) -> Result<Calibrated> {
    let s = params.open_share;
    build(
        params,
        vec![
            ("pooled".into(), Status::Open, s),
            ("pooled".into(), Status::NonOpen, 1.0 - s),
        ],
        s,
    )
}

/// Gallon-weighted open share across states.
pub fn weighted_open_share(rows: &[StationSurveyRow]) -> Result<f64> {
    let gallons = state_gallons(rows)?;
    let total: f64 = gallons.iter().sum();
    Ok(rows.iter().zip(&gallons).map(|(r, g)| g * r.share_open).sum::<f64>() / total)
}

fn state_gallons(rows: &[StationSurveyRow]) -> Result<Vec<f64>> {
    let gallons = rows
        .iter()
        .map(|r| {
            r.gallons_1972
                .ok_or_else(|| invalid(format!("state {} has no gallons; impute first", r.state)))
        })
        .collect::<Result<Vec<_>>>()?;
    if !(gallons.iter().sum::<f64>() > 0.0) {
        return Err(invalid("total gallons must be > 0"));
    }
    Ok(gallons)
}

/// One open and one non-open market per state, weighted by gallons; cells
/// with zero share are dropped.
pub fn state_by_status(rows: &[StationSurveyRow], params: &CalibrationParams) -> Result<Calibrated> {
    let gallons = state_gallons(rows)?;
    let total: f64 = gallons.iter().sum();
    let mut cells = Vec::with_capacity(2 * rows.len());
    for (r, g) in rows.iter().zip(&gallons) {
        let w = g / total;
        cells.push((r.state.clone(), Status::Open, w * r.share_open));
        cells.push((r.state.clone(), Status::NonOpen, w * (1.0 - r.share_open)));
    }
    build(params, cells, weighted_open_share(rows)?)
}

/// One row of the assumption-to-interval table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub assumptions: String,
    pub phi_lower: f64,
    pub phi_upper: f64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
}

/// Elasticities evaluated for the common-elasticity row.
const COMMON_SWEEP: usize = 21;

/// Bounds under successively weaker restrictions: a common known elasticity,
/// slope bounds with anchors fixed at their midpoints, anchors free within
/// their intervals, and the same with a choke cap.
///
/// The first row is normalized by the Harberger loss at the same elasticity,
/// the others by the Harberger loss at `harberger_epsilon`.
pub fn assumption_decomposition(
    rows: &[StationSurveyRow],
    params: &CalibrationParams,
) -> Result<Vec<DecompositionRow>> {
    let cal = state_by_status(rows, params)?;
    let mut out = vec![common_elasticity_row(&cal, params)?];
    let harb = params.harberger(params.harberger_epsilon)?;
    let row = |label: &str, r: &BoundsResult| DecompositionRow {
        assumptions: label.into(),
        phi_lower: r.phi_lower,
        phi_upper: r.phi_upper,
        ratio_lower: r.phi_lower / harb,
        ratio_upper: r.phi_upper / harb,
    };
    let free = CalibrationParams {
        choke: None,
        ..params.clone()
    };
    let cal_free = state_by_status(rows, &free)?;
    out.push(row(
        "heterogeneous elasticity",
        &solve_bounds(&cal_free.problem, AnchorMode::Fixed)?,
    ));
    out.push(row(
        "anchor uncertainty",
        &solve_bounds(&cal_free.problem, AnchorMode::Interval)?,
    ));
    let capped = CalibrationParams {
        choke: Some(params.choke.unwrap_or(4.0)),
        ..params.clone()
    };
    let cal_capped = state_by_status(rows, &capped)?;
    out.push(row(
        "choke constraint",
        &solve_bounds(&cal_capped.problem, AnchorMode::Interval)?,
    ));
    Ok(out)
}

/// Loss when every market has linear demand through the baseline with one
/// common elasticity, swept over the elasticity range.
fn common_elasticity_row(cal: &Calibrated, params: &CalibrationParams) -> Result<DecompositionRow> {
    let q_obs: Vec<f64> = cal.problem.markets.iter().map(|m| m.q_obs).collect();
    let mut row = DecompositionRow {
        assumptions: "common elasticity".into(),
        phi_lower: f64::INFINITY,
        phi_upper: f64::NEG_INFINITY,
        ratio_lower: f64::INFINITY,
        ratio_upper: f64::NEG_INFINITY,
    };
    for k in 0..COMMON_SWEEP {
        let eps = params.epsilon_lo + (params.epsilon_hi - params.epsilon_lo) * k as f64 / (COMMON_SWEEP - 1) as f64;
        let curves = cal
            .cells
            .iter()
            .map(|c| DemandCurve::linear(c.weight, 1.0, -1.0 / (eps * c.weight)))
            .collect::<Result<Vec<_>>>()?;
        let (phi, _, _) = profile_misallocation(&curves, &q_obs)?;
        let ratio = phi / params.harberger(eps)?;
        row.phi_lower = row.phi_lower.min(phi);
        row.phi_upper = row.phi_upper.max(phi);
        row.ratio_lower = row.ratio_lower.min(ratio);
        row.ratio_upper = row.ratio_upper.max(ratio);
    }
    Ok(row)
}

/// Per-state average shadow price, weighting open and non-open anchor prices
/// of the chosen bound by the state's open and rationing shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateShadowPrice {
    pub state: String,
    pub rationing_share: f64,
    pub value: f64,
}

pub fn state_shadow_prices(
    rows: &[StationSurveyRow],
    params: &CalibrationParams,
    side: Side,
) -> Result<Vec<StateShadowPrice>> {
    let cal = state_by_status(rows, params)?;
    let result = solve_bounds(&cal.problem, AnchorMode::Interval)?;
    Ok(shadow_prices_from(rows, &cal, &result, side))
}

/// Per-state averages from an already solved state problem.
pub fn shadow_prices_from(
    rows: &[StationSurveyRow],
    cal: &Calibrated,
    result: &BoundsResult,
    side: Side,
) -> Vec<StateShadowPrice> {
    let anchors = match side {
        Side::Upper => &result.upper.anchors,
        Side::Lower => &result.lower.anchors,
    };
    let find = |state: &str, status: Status| {
        cal.cells
            .iter()
            .position(|c| c.state == state && c.status == status)
            .map(|i| anchors[i])
    };
    rows.iter()
        .map(|r| {
            let open = find(&r.state, Status::Open);
            let closed = find(&r.state, Status::NonOpen);
            let rate = 1.0 - r.share_open;
            let value = match (open, closed) {
                (Some(o), Some(c)) => (1.0 - rate) * o + rate * c,
                (Some(o), None) => o,
                (None, Some(c)) => c,
                (None, None) => f64::NAN,
            };
            StateShadowPrice {
                state: r.state.clone(),
                rationing_share: rate,
                value,
            }
        })
        .collect()
}
