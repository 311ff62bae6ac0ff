use serde::{Deserialize, Serialize};

use crate::alloc::efficient::check_lengths;
use crate::alloc::vertex::VERTEX_LIMIT;
use crate::error::Result;
use crate::model::{tol, Allocation, FeasibleSet, MarketSpec, Slot};

/// How a worst-case allocation was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorstMethod {
    /// Branch and bound over all vertices; globally optimal.
    Exact,
    /// Average-value ordering plus pairwise vertex swaps; no global guarantee.
    LocalSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub allocation: Allocation,
    /// The cutoff separating starved markets from filled ones.
    pub cutoff: f64,
    pub gross_surplus: f64,
    pub method: WorstMethod,
}

/// The feasible allocation with the least gross surplus.
///
/// Exact for up to 20 markets; larger instances fall back to a local search
/// over vertices.
pub fn worst_case_allocation(markets: &[MarketSpec], fs: &FeasibleSet) -> Result<WorstCase> {
    check_lengths(markets, fs)?;
    let search = Search::new(markets, fs)?;
    let (q, method) = if fs.len() <= VERTEX_LIMIT {
        (search.exact()?, WorstMethod::Exact)
    } else {
        (search.local()?, WorstMethod::LocalSearch)
    };
    let gross_surplus = search.value(&q)?;
    let allocation = Allocation::classify(fs, q)?;
    let cutoff = worst_cutoff(markets, &allocation);
    Ok(WorstCase {
        allocation,
        cutoff,
        gross_surplus,
        method,
    })
}

/// The price `lambda` that starved markets' choke prices sit above and filled
/// markets' cap prices sit below.
///
/// Equal to the interior market's price when there is one, else the highest
/// price among filled markets at their caps.
pub fn worst_cutoff(markets: &[MarketSpec], alloc: &Allocation) -> f64 {
    if let Some(j) = alloc.slots.iter().position(|s| *s == Slot::Interior) {
        return markets[j].demand.price(alloc.quantities[j]);
    }
    markets
        .iter()
        .zip(&alloc.quantities)
        .zip(&alloc.slots)
        .filter(|(_, s)| **s == Slot::AtCap)
        .map(|((m, &q), _)| m.demand.price(q))
        .fold(0.0, f64::max)
}

/// Largest violation of the worst-case cutoff conditions at `lambda`.
pub fn worst_kkt_residual(markets: &[MarketSpec], alloc: &Allocation, lambda: f64) -> f64 {
    markets
        .iter()
        .zip(&alloc.quantities)
        .zip(&alloc.slots)
        .map(|((m, &q), slot)| match slot {
            Slot::Interior => (m.demand.price(q) - lambda).abs(),
            Slot::AtZero => (lambda - m.demand.choke_price()).max(0.0),
            Slot::AtCap => (m.demand.price(q) - lambda).max(0.0),
        })
        .fold(0.0, f64::max)
}

struct Search<'a> {
    markets: &'a [MarketSpec],
    caps: &'a [f64],
    total: f64,
    /// Gross surplus of each market filled to its cap.
    full: Vec<f64>,
    /// Lowest marginal value any unit can have.
    floor_price: f64,
}

impl<'a> Search<'a> {
    fn new(markets: &'a [MarketSpec], fs: &'a FeasibleSet) -> Result<Self> {
        let caps = fs.caps();
        let full = markets
            .iter()
            .zip(caps)
            .map(|(m, &c)| m.demand.gross_surplus(0.0, c))
            .collect::<Result<Vec<_>>>()?;
        let floor_price = markets
            .iter()
            .zip(caps)
            .map(|(m, &c)| m.demand.price(c))
            .fold(f64::INFINITY, f64::min);
        Ok(Search {
            markets,
            caps,
            total: fs.total(),
            full,
            floor_price,
        })
    }

    fn value(&self, q: &[f64]) -> Result<f64> {
        self.markets
            .iter()
            .zip(q)
            .map(|(m, &x)| m.demand.gross_surplus(0.0, x))
            .sum()
    }

    fn partial(&self, j: usize, r: f64) -> Result<f64> {
        self.markets[j].demand.gross_surplus(0.0, r)
    }

    /// Markets by increasing average value over their whole cap.
    fn by_average_value(&self) -> Vec<usize> {
        let avg = |i: usize| {
            if self.caps[i] > 0.0 {
                self.full[i] / self.caps[i]
            } else {
                f64::INFINITY
            }
        };
        let mut order: Vec<usize> = (0..self.caps.len()).collect();
        order.sort_by(|&a, &b| avg(a).total_cmp(&avg(b)).then(a.cmp(&b)));
        order
    }

    fn fill(&self, order: &[usize]) -> Vec<f64> {
        let mut q = vec![0.0; self.caps.len()];
        let mut left = self.total;
        for &i in order {
            let take = left.min(self.caps[i]);
            q[i] = take;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        q
    }

    fn exact(&self) -> Result<Vec<f64>> {
        let order = self.by_average_value();
        let start = self.fill(&order);
        let mut best = Best {
            value: self.value(&start)?,
            q: start,
        };
        let n = self.caps.len();
        // Interior market `j`, or none when the full markets add up exactly.
        for interior in (0..n).map(Some).chain(std::iter::once(None)) {
            let others: Vec<usize> = order.iter().copied().filter(|&i| Some(i) != interior).collect();
            let mut suffix = vec![0.0; others.len() + 1];
            for k in (0..others.len()).rev() {
                suffix[k] = suffix[k + 1] + self.caps[others[k]];
            }
            let mut chosen = Vec::with_capacity(n);
            self.branch(interior, &others, &suffix, 0, 0.0, 0.0, &mut chosen, &mut best)?;
        }
        Ok(best.q)
    }

    #[allow(clippy::too_many_arguments)]
    fn branch(
        &self,
        interior: Option<usize>,
        others: &[usize],
        suffix: &[f64],
        k: usize,
        used: f64,
        value: f64,
        chosen: &mut Vec<usize>,
        best: &mut Best,
    ) -> Result<()> {
        let rest = self.total - used;
        if rest < -tol::SUM {
            return Ok(());
        }
        let reach = suffix[k] + interior.map_or(0.0, |j| self.caps[j]);
        if rest > reach + tol::SUM {
            return Ok(());
        }
        if value + rest.max(0.0) * self.floor_price >= best.value {
            return Ok(());
        }
        if k == others.len() {
            let (v, q) = match interior {
                None if rest.abs() <= tol::SUM => (value, self.point(chosen, None, 0.0)),
                Some(j) if rest > tol::SUM && rest < self.caps[j] - tol::SUM => {
                    (value + self.partial(j, rest)?, self.point(chosen, Some(j), rest))
                }
                _ => return Ok(()),
            };
            if v < best.value {
                *best = Best { value: v, q };
            }
            return Ok(());
        }
        let i = others[k];
        chosen.push(i);
        self.branch(
            interior,
            others,
            suffix,
            k + 1,
            used + self.caps[i],
            value + self.full[i],
            chosen,
            best,
        )?;
        chosen.pop();
        self.branch(interior, others, suffix, k + 1, used, value, chosen, best)
    }

    fn point(&self, full: &[usize], interior: Option<usize>, rest: f64) -> Vec<f64> {
        let mut q = vec![0.0; self.caps.len()];
        for &i in full {
            q[i] = self.caps[i];
        }
        if let Some(j) = interior {
            q[j] = rest;
        }
        // Absorb rounding so the point sums to the total exactly.
        let drift = self.total - q.iter().sum::<f64>();
        if let Some(j) = interior {
            q[j] = (q[j] + drift).clamp(0.0, self.caps[j]);
        }
        q
    }

    fn local(&self) -> Result<Vec<f64>> {
        let mut q = self.fill(&self.by_average_value());
        let mut value = self.value(&q)?;
        let n = q.len();
        for _sweep in 0..50 {
            let mut improved = false;
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    let t = q[a].min(self.caps[b] - q[b]);
                    if t <= tol::SUM {
                        continue;
                    }
                    let mut cand = q.clone();
                    cand[a] -= t;
                    cand[b] += t;
                    let cand = self.vertexify(cand)?;
                    let v = self.value(&cand)?;
                    if v < value - 1e-12 {
                        q = cand;
                        value = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        Ok(q)
    }

    /// Moves along edges until at most one coordinate is strictly inside its box.
    /// Gross surplus is concave along each edge, so an endpoint never does worse.
    fn vertexify(&self, mut q: Vec<f64>) -> Result<Vec<f64>> {
        loop {
            let inner: Vec<usize> = (0..q.len())
                .filter(|&i| q[i] > tol::SUM && q[i] < self.caps[i] - tol::SUM)
                .take(2)
                .collect();
            if inner.len() < 2 {
                return Ok(q);
            }
            let (i, j) = (inner[0], inner[1]);
            let up = (self.caps[i] - q[i]).min(q[j]);
            let down = q[i].min(self.caps[j] - q[j]);
            let mut a = q.clone();
            a[i] += up;
            a[j] -= up;
            let mut b = q.clone();
            b[i] -= down;
            b[j] += down;
            q = if self.value(&a)? <= self.value(&b)? { a } else { b };
            for (x, &c) in q.iter_mut().zip(self.caps) {
                if (*x - c).abs() <= tol::SUM {
                    *x = c;
                } else if x.abs() <= tol::SUM {
                    *x = 0.0;
                }
            }
        }
    }
}

struct Best {
    value: f64,
    q: Vec<f64>,
}
