//! Exponentially scaled exponential integral e^x E₁(x).

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577215664901532860606512090082402431;

const MAX_ITER: usize = 400;

/// e^x · E₁(x) for x > 0.
///
/// The scaled form stays O(1/x) for large x where E₁ itself underflows.
/// Power series below x = 1, modified Lentz continued fraction above.
pub fn exp_scaled_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(
            "exp_scaled_e1",
            format!("x = {x} must be > 0"),
        ));
    }
    if x < 1.0 {
        // E₁(x) = −γ − ln x + Σ_{k≥1} (−1)^{k+1} x^k/(k·k!)
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..=MAX_ITER {
            term *= -x / k as f64;
            let contrib = -term / k as f64;
            sum += contrib;
            if contrib.abs() < sum.abs() * f64::EPSILON {
                break;
            }
        }
        Ok(x.exp() * (-EULER_GAMMA - x.ln() + sum))
    } else {
        // e^x E₁(x) = 1/(x + 1 − 1²/(x + 3 − 2²/(x + 5 − …))), modified Lentz
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for n in 1..=MAX_ITER {
            let an = -((n * n) as f64);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = c * d;
            h *= delta;
            if (delta - 1.0).abs() < f64::EPSILON {
                return Ok(h);
            }
        }
        Err(Error::NonConvergence {
            op: "exp_scaled_e1",
            partial: h,
        })
    }
}
