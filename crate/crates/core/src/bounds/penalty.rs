use crate::error::{Error, Result};
use crate::model::tol;

/// Minimum of `sum delta_i^2 / (2 d_i)` subject to `sum delta_i = mass` and
/// `0 <= delta_i <= cap_i`, with the minimizer.
///
/// The solution is `delta_i = min(lambda d_i, cap_i)`; `lambda` is found by an
/// exact sweep over the breakpoints `cap_i / d_i`.
pub fn triangle_penalty(d: &[f64], caps: &[f64], mass: f64) -> Result<(f64, Vec<f64>)> {
    if d.len() != caps.len() {
        return Err(crate::error::invalid("penalty weights and caps differ in length"));
    }
    if d.iter().any(|&x| !(x > 0.0 && x.is_finite())) || caps.iter().any(|&c| !(c >= 0.0)) {
        return Err(crate::error::invalid("penalty weights must be > 0 and caps >= 0"));
    }
    if !(mass >= 0.0) {
        return Err(crate::error::invalid(format!("penalty mass {mass} must be >= 0")));
    }
    let n = d.len();
    if mass == 0.0 {
        return Ok((0.0, vec![0.0; n]));
    }
    let room: f64 = caps.iter().sum();
    if mass > room + tol::SUM * (1.0 + room) {
        return Err(Error::Infeasible(format!(
            "penalty mass {mass} exceeds the available room {room}"
        )));
    }
    if mass >= room {
        let delta = caps.to_vec();
        return Ok((value(d, &delta), delta));
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| caps[i] > 0.0).collect();
    order.sort_by(|&a, &b| (caps[a] / d[a]).total_cmp(&(caps[b] / d[b])));
    // Below the k-th breakpoint, markets order[..k] sit at their caps and the
    // rest grow at rate d_i.
    let mut saturated = 0.0;
    let mut slope: f64 = order.iter().map(|&i| d[i]).sum();
    let mut lambda = 0.0;
    for &i in &order {
        let bp = caps[i] / d[i];
        if saturated + slope * bp >= mass {
            lambda = (mass - saturated) / slope;
            break;
        }
        saturated += caps[i];
        slope -= d[i];
        lambda = bp;
    }
    let delta: Vec<f64> = (0..n).map(|i| (lambda * d[i]).clamp(0.0, caps[i])).collect();
    Ok((value(d, &delta), delta))
}

fn value(d: &[f64], delta: &[f64]) -> f64 {
    delta.iter().zip(d).map(|(x, w)| x * x / (2.0 * w)).sum()
}
