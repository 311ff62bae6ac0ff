use serde::{Deserialize, Serialize};

use crate::alloc::{greedy_allocation, TieBreak};
use crate::error::{invalid, Result};
use crate::model::{tol, DemandCurve, FeasibleSet};

/// Localization width for a detected allocation change.
pub const T_RESOLUTION: f64 = 1e-10;
/// Finest width tried before an event is declared compound.
pub const T_RESOLUTION_FINE: f64 = 1e-12;

/// Affine cost path `c(t) = base + t * direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPath {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
}

impl CostPath {
    pub fn at(&self, t: f64) -> Vec<f64> {
        self.base.iter().zip(&self.direction).map(|(b, d)| b + t * d).collect()
    }

    /// The same path traversed in the opposite direction: `c(-t)`.
    pub fn reversed(&self) -> CostPath {
        CostPath {
            base: self.base.clone(),
            direction: self.direction.iter().map(|d| -d).collect(),
        }
    }
}

/// One discontinuity of the controlled allocation along a cost path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// Path parameter of the change, localized to [`T_RESOLUTION`].
    pub t: f64,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    /// Units moved; equal to what the losing market gives up.
    pub reallocated_mass: f64,
    /// Change in gross surplus from `pre` to `post`.
    pub welfare_jump: f64,
    /// Market that loses units, when exactly two markets change.
    pub from_market: Option<usize>,
    /// Market that gains units, when exactly two markets change.
    pub to_market: Option<usize>,
    /// Several markets changed at a `t` that could not be split further.
    pub compound: bool,
}

fn changed(a: &[f64], b: &[f64]) -> Vec<usize> {
    (0..a.len()).filter(|&i| (a[i] - b[i]).abs() > tol::SUM).collect()
}

fn same(a: &[f64], b: &[f64]) -> bool {
    changed(a, b).is_empty()
}

/// Every change of the greedy allocation for `t` in `[t_start, t_end]`.
///
/// A grid of width `step` finds intervals containing changes; each is bisected
/// to [`T_RESOLUTION`]. Several changes inside one step are found one after
/// another. Welfare jumps are gross-surplus differences under `demands`.
pub fn sweep_cost_path(
    demands: &[DemandCurve],
    fs: &FeasibleSet,
    path: &CostPath,
    t_start: f64,
    t_end: f64,
    step: f64,
) -> Result<Vec<JumpEvent>> {
    let n = fs.len();
    if demands.len() != n || path.base.len() != n || path.direction.len() != n {
        return Err(invalid("demands, path and feasible set must have the same length"));
    }
    if !(step > 0.0 && t_end > t_start) {
        return Err(invalid("sweep needs t_end > t_start and step > 0"));
    }
    let alloc = |t: f64| -> Result<Vec<f64>> { Ok(greedy_allocation(&path.at(t), fs, TieBreak::Index)?.quantities) };

    let steps = ((t_end - t_start) / step).ceil() as usize;
    let mut events = Vec::new();
    let mut t_prev = t_start;
    let mut q_prev = alloc(t_prev)?;
    for k in 1..=steps {
        let t_next = (t_start + k as f64 * step).min(t_end);
        let q_next = alloc(t_next)?;
        let (mut a, mut qa) = (t_prev, q_prev.clone());
        while !same(&qa, &q_next) {
            let (b, qb) = first_change(&alloc, a, &qa, t_next, T_RESOLUTION)?;
            let (b, qb, compound) = if changed(&qa, &qb).len() > 2 {
                let (fb, fqb) = first_change(&alloc, a, &qa, b, T_RESOLUTION_FINE)?;
                let compound = changed(&qa, &fqb).len() > 2;
                (fb, fqb, compound)
            } else {
                (b, qb, false)
            };
            events.push(event(demands, b, &qa, &qb, compound)?);
            a = b;
            qa = qb;
        }
        t_prev = t_next;
        q_prev = q_next;
    }
    Ok(events)
}

/// Bisects `(a, b]` for the first `t` whose allocation differs from `qa`.
fn first_change(
    alloc: &impl Fn(f64) -> Result<Vec<f64>>,
    mut a: f64,
    qa: &[f64],
    mut b: f64,
    width: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut qb = alloc(b)?;
    while b - a > width {
        let mid = 0.5 * (a + b);
        let qm = alloc(mid)?;
        if same(&qm, qa) {
            a = mid;
        } else {
            b = mid;
            qb = qm;
        }
    }
    Ok((b, qb))
}

fn event(demands: &[DemandCurve], t: f64, pre: &[f64], post: &[f64], compound: bool) -> Result<JumpEvent> {
    let moved = changed(pre, post);
    let mut welfare_jump = 0.0;
    let mut mass = 0.0;
    for &i in &moved {
        welfare_jump += demands[i].gross_surplus(pre[i], post[i])?;
        mass += (post[i] - pre[i]).max(0.0);
    }
    let (from_market, to_market) = if moved.len() == 2 {
        let (x, y) = (moved[0], moved[1]);
        if post[x] < pre[x] {
            (Some(x), Some(y))
        } else {
            (Some(y), Some(x))
        }
    } else {
        (None, None)
    };
    Ok(JumpEvent {
        t,
        pre: pre.to_vec(),
        post: post.to_vec(),
        reallocated_mass: mass,
        welfare_jump,
        from_market,
        to_market,
        compound,
    })
}
