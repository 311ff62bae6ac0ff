use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::problem::BoundsMarket;
use crate::error::Result;
use crate::model::DemandCurve;

/// Random admissible inverse demand through `(q_obs, p0)`: one to six affine
/// pieces with slopes in `[g_lo, g_hi]` and `P(0)` no higher than the choke cap.
/// The curve ends at `q_max` or where its price reaches zero.
pub fn admissible_sampler(m: &BoundsMarket, p0: f64, seed: u64) -> Result<DemandCurve> {
    m.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces = rng.gen_range(1..=6usize);
    let mut breaks: Vec<f64> = (1..pieces).map(|_| rng.gen_range(0.0..m.q_max)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut grid = Vec::with_capacity(breaks.len() + 3);
    grid.push(0.0);
    grid.extend(
        breaks
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < m.q_max && b != m.q_obs),
    );
    grid.push(m.q_obs);
    grid.push(m.q_max);
    grid.sort_by(f64::total_cmp);
    let slopes: Vec<f64> = {
        // One slope per original piece; the anchor splits a piece without changing it.
        let piece_slopes: Vec<f64> = (0..pieces).map(|_| rng.gen_range(m.g_lo..=m.g_hi)).collect();
        grid.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                piece_slopes[breaks.partition_point(|&b| b <= mid).min(pieces - 1)]
            })
            .collect()
    };
    let k_obs = grid.iter().position(|&q| q == m.q_obs).expect("anchor is a grid point");
    let mut price = vec![0.0; grid.len()];
    price[k_obs] = p0;
    for k in (0..k_obs).rev() {
        price[k] = price[k + 1] - slopes[k] * (grid[k + 1] - grid[k]);
    }
    for k in k_obs + 1..grid.len() {
        price[k] = price[k - 1] + slopes[k - 1] * (grid[k] - grid[k - 1]);
    }
    if let Some(cap) = m.choke {
        // Blend the left pieces toward the flattest slope until P(0) fits.
        let flat_top = p0 - m.g_hi * m.q_obs;
        let excess = price[0] - flat_top;
        if price[0] > cap && excess > 0.0 {
            let t = ((cap - flat_top) / excess).clamp(0.0, 1.0);
            for k in (0..k_obs).rev() {
                let s = m.g_hi + t * (slopes[k] - m.g_hi);
                price[k] = price[k + 1] - s * (grid[k + 1] - grid[k]);
            }
        }
    }
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        if price[k] >= 0.0 {
            knots.push((grid[k], price[k]));
            continue;
        }
        let (q0, p0k) = (grid[k - 1], price[k - 1]);
        let q_zero = q0 + p0k / (p0k - price[k]) * (grid[k] - q0);
        if q_zero > q0 {
            knots.push((q_zero, 0.0));
        }
        break;
    }
    DemandCurve::piecewise(knots)
}
