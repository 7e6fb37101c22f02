//! Difference-quotient derivatives, the fallback when a field cannot be
//! pushed through jets.

use crate::error::Result;
use crate::lie_algebra::AlgVec;

/// Central difference along `w` with one Richardson level (error `O(h⁴)`).
pub fn directional_richardson<F>(f: F, y: &AlgVec, w: &AlgVec, h: f64) -> Result<AlgVec>
where
    F: Fn(&AlgVec) -> Result<AlgVec>,
{
    let scale = w.norm();
    if scale == 0.0 {
        return Ok(AlgVec::zeros(y.len()));
    }
    let u = w / scale;
    let central = |step: f64| -> Result<AlgVec> {
        Ok((f(&(y + &u * step))? - f(&(y - &u * step))?) / (2.0 * step))
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok((fine * 4.0 - coarse) / 3.0 * scale)
}

/// Five-point central first derivative from samples at `t + k·h`, `k = -2..=2`.
pub fn five_point<T>(samples: [&T; 5], h: f64) -> T
where
    for<'a> &'a T: std::ops::Sub<&'a T, Output = T>,
    T: std::ops::Mul<f64, Output = T> + std::ops::Add<T, Output = T>,
{
    let [m2, m1, _, p1, p2] = samples;
    (p1 - m1) * (8.0 / (12.0 * h)) + (m2 - p2) * (1.0 / (12.0 * h))
}
