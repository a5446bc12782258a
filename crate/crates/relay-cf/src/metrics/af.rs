//! Average AF consumption factor: the series over j of products of per-hop
//! fraction moments, with an integral tail estimate past the truncation
//! point.
//!
//! The per-hop series factor is
//!
//! ```text
//! φ(m, z; j) = zᵐ Γ(j+m) U(j+m, 1+m, z) / Γ(m) = E[(γ/(1+γ))^j],
//! ```
//!
//! with γ Gamma-distributed (shape m, rate z = m/γ̄). The right-hand side is
//! the defining integral of U evaluated against the fading density, which is
//! what [`ln_fraction_moment`] computes directly; it stays accurate for the
//! large real orders the tail estimate needs.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::{Dual, Scalar};
use crate::specfun::{gauss_laguerre, ln_gamma_raw, QuadratureRule};

use super::SeriesControl;

/// Internal Gauss-Laguerre order for the series tail integral.
const TAIL_RULE_ORDER: usize = 60;

/// A tail worth more than this fraction of the total means the truncated
/// series plus its tail estimate can no longer be trusted.
const TAIL_FRACTION_LIMIT: f64 = 0.5;

fn tail_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_laguerre(TAIL_RULE_ORDER).expect("static rule order is valid"))
}

/// ln E[(γ/(1+γ))^t] for γ ~ Gamma(shape m, rate z), real t ≥ 0.
///
/// Log-spaced trapezoid on w = ln γ centred at the mode of the integrand;
/// the grid is laid out from the primal value of `z` so dual evaluation
/// differentiates a fixed quadrature.
pub(crate) fn ln_fraction_moment<S: Scalar>(m: u32, z: S, t: f64) -> S {
    let z0 = z.value();
    debug_assert!(z0 > 0.0 && t >= 0.0);
    let mf = m as f64;
    // mode of (t+m)w − t·ln(1+e^w) − z e^w: solves zγ² + (z−m)γ − (t+m) = 0
    let q = z0 - mf;
    let gamma_c = (-q + (q * q + 4.0 * z0 * (t + mf)).sqrt()) / (2.0 * z0);
    let w_c = gamma_c.ln();
    let l = |w: f64| {
        let g = w.exp();
        (t + mf) * w - t * g.ln_1p() - z0 * g
    };
    let l_max = l(w_c);
    // curvature at the mode: −(t+m) + t γ²/(1+γ)²
    let lpp = -(t + mf) + t * (gamma_c / (1.0 + gamma_c)).powi(2);
    let sigma = 1.0 / (-lpp).max(1e-300).sqrt();
    let h = (sigma / 3.5).min(0.22);

    let mut lo = w_c;
    while l(lo) - l_max > -46.0 {
        lo -= 10.0 * h;
    }
    let mut hi = w_c;
    while l(hi) - l_max > -46.0 {
        hi += 10.0 * h;
    }
    let n = ((hi - lo) / h).ceil() as usize + 1;
    let step = (hi - lo) / (n - 1) as f64;

    let mut sum = S::from_f64(0.0);
    for i in 0..n {
        let w = lo + step * i as f64;
        let g = w.exp();
        // split the exponent into its constant part and the −zγ part so the
        // dual variable enters linearly
        let fixed = (t + mf) * w - t * g.ln_1p() - l_max;
        let v = (S::from_f64(fixed) - z * S::from_f64(g)).exp();
        let v = if i == 0 || i == n - 1 {
            v * S::from_f64(0.5)
        } else {
            v
        };
        sum = sum + v;
    }
    S::from_f64(l_max + step.ln() - ln_gamma_raw(mf)) + sum.ln() + z.ln() * S::from_f64(mf)
}

/// Result of the AF capacity series for one power vector.
pub(crate) struct AfEval {
    /// E[ln(1 + γ_e2e)] in nats.
    pub capacity_nats: f64,
    /// ∂(capacity_nats)/∂γ̄ᵢ, present when a gradient was requested.
    pub d_dgbar: Option<Vec<f64>>,
    /// Series terms actually summed.
    pub terms_used: usize,
}

/// Evaluate the AF ergodic-capacity series Σ_j h(j)/j with h(j) = Πᵢ φᵢ(j).
///
/// The series is summed until a term's relative contribution drops below
/// `ctrl.rel_tol` or `ctrl.max_terms` is reached; the remainder is then
/// estimated as ∫ h(t)/t dt from J+1/2 (Gauss-Laguerre after the √t
/// substitution) with the leading Euler-Maclaurin midpoint corrections.
/// `coeff_scale` multiplies each per-hop factor (1 for the production form;
/// 1/mᵢ reproduces the rejected factorial-normalized variant).
pub(crate) fn af_capacity_nats(
    ms: &[u32],
    gbars: &[f64],
    ctrl: &SeriesControl,
    want_grad: bool,
    coeff_scale: bool,
) -> Result<AfEval> {
    let n = ms.len();
    let zs: Vec<f64> = ms.iter().zip(gbars).map(|(&m, &g)| m as f64 / g).collect();
    // offset per hop: ln of the coefficient variant scale
    let ln_offsets: Vec<f64> = if coeff_scale {
        vec![0.0; n]
    } else {
        ms.iter()
            .map(|&m| -ln_gamma_raw(m as f64 + 1.0) + ln_gamma_raw(m as f64))
            .collect()
    };

    // h(t) and its per-hop ∂/∂z as dual evaluations
    let h_at = |t: f64, grads: &mut Vec<f64>, want: bool| -> f64 {
        let mut ln_h = 0.0;
        grads.clear();
        for i in 0..n {
            if want {
                let lf = ln_fraction_moment(ms[i], Dual::variable(zs[i]), t);
                ln_h += lf.v + ln_offsets[i];
                grads.push(lf.d);
            } else {
                ln_h += ln_fraction_moment(ms[i], zs[i], t) + ln_offsets[i];
            }
        }
        ln_h.exp()
    };

    let mut sum = 0.0f64;
    let mut dsum = vec![0.0f64; n];
    let mut grads = Vec::with_capacity(n);
    let mut terms_used = ctrl.max_terms;
    for j in 1..=ctrl.max_terms {
        let h = h_at(j as f64, &mut grads, want_grad);
        let term = h / j as f64;
        sum += term;
        if want_grad {
            for i in 0..n {
                dsum[i] += term * grads[i];
            }
        }
        if term < ctrl.rel_tol * sum {
            terms_used = j;
            break;
        }
    }

    // tail: ∫_A^∞ h(t)/t dt = 2∫_{√A}^∞ h(u²)/u du, exponential rate 2c
    let a = terms_used as f64 + 0.5;
    let sqrt_a = a.sqrt();
    let c: f64 = zs.iter().map(|&z| z.sqrt()).sum();
    let rule = tail_rule();
    let mut tail = 0.0f64;
    let mut dtail = vec![0.0f64; n];
    for (&y, &ew) in rule.nodes().iter().zip(rule.exp_weights()) {
        let u = sqrt_a + y / (2.0 * c);
        let h = h_at(u * u, &mut grads, want_grad);
        let contrib = ew * h / (u * c);
        tail += contrib;
        if want_grad {
            for i in 0..n {
                dtail[i] += contrib * grads[i];
            }
        }
    }
    // Euler-Maclaurin midpoint corrections: + f'(A)/24 − 7 f'''(A)/5760
    let eps = 0.25;
    let mut f_vals = [0.0f64; 4];
    let mut f_grads = vec![[0.0f64; 4]; n];
    for (slot, t) in [a - 2.0 * eps, a - eps, a + eps, a + 2.0 * eps]
        .iter()
        .enumerate()
    {
        let h = h_at(*t, &mut grads, want_grad);
        f_vals[slot] = h / t;
        if want_grad {
            for i in 0..n {
                f_grads[i][slot] = f_vals[slot] * grads[i];
            }
        }
    }
    let em = |f: &[f64; 4]| {
        let fp = (f[2] - f[1]) / (2.0 * eps);
        let fppp = (f[3] - 2.0 * f[2] + 2.0 * f[1] - f[0]) / (2.0 * eps * eps * eps);
        fp / 24.0 - 7.0 * fppp / 5760.0
    };
    tail += em(&f_vals);
    if want_grad {
        for i in 0..n {
            dtail[i] += em(&f_grads[i]);
        }
    }

    let total = sum + tail;
    if !(total.is_finite()) || tail.abs() > TAIL_FRACTION_LIMIT * total.abs() {
        return Err(Error::NonConvergence {
            op: "cf_af",
            partial: sum,
        });
    }

    let d_dgbar = want_grad.then(|| {
        (0..n)
            .map(|i| (dsum[i] + dtail[i]) * (-zs[i] / gbars[i]))
            .collect()
    });
    Ok(AfEval {
        capacity_nats: total,
        d_dgbar,
        terms_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{exp_scaled_e1, tricomi_u};
    use approx::assert_relative_eq;

    fn default_ctrl() -> SeriesControl {
        SeriesControl::default()
    }

    #[test]
    fn fraction_moment_matches_tricomi_u_route() {
        // φ(j) = z^m Γ(j+m) U(j+m, 1+m, z)/Γ(m), both sides computed
        // through entirely different code paths
        for &(m, z, j) in &[
            (1u32, 1.0, 1u32),
            (1, 0.25, 7),
            (2, 2.0, 3),
            (3, 0.8, 12),
            (4, 5.0, 2),
        ] {
            let mine = ln_fraction_moment(m, z, j as f64).exp();
            let mut ln_ratio = 0.0; // ln Γ(j+m)/Γ(m)
            for k in 0..j {
                ln_ratio += (m as f64 + k as f64).ln();
            }
            let reference = (m as f64 * z.ln() + ln_ratio).exp()
                * tricomi_u((j + m) as f64, 1.0 + m as f64, z).unwrap();
            assert_relative_eq!(mine, reference, max_relative = 1e-9);
        }
    }

    #[test]
    fn fraction_moment_is_a_probability_weight() {
        // φ ∈ (0, 1), decreasing in t
        let mut prev = 1.0;
        for t in [1.0, 2.0, 5.0, 20.0, 100.0, 3000.0] {
            let v = ln_fraction_moment(2, 0.7, t).exp();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn fraction_moment_dual_matches_finite_difference() {
        for &(m, z, t) in &[(1u32, 0.9, 3.0), (2, 0.05, 150.0), (3, 4.0, 1.0)] {
            let d = ln_fraction_moment(m, Dual::variable(z), t).d;
            let h = z * 1e-6;
            let fd =
                (ln_fraction_moment(m, z + h, t) - ln_fraction_moment(m, z - h, t)) / (2.0 * h);
            assert_relative_eq!(d, fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn single_hop_rayleigh_capacity_identity() {
        // N=1, m=1: E[ln(1+γ)] = e^{1/γ̄} E₁(1/γ̄)
        for &gbar in &[0.5, 1.0, 10.0, 100.0, 1000.0] {
            let eval = af_capacity_nats(&[1], &[gbar], &default_ctrl(), false, true).unwrap();
            let exact = exp_scaled_e1(1.0 / gbar).unwrap();
            assert_relative_eq!(eval.capacity_nats, exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn series_converges_quickly_at_low_snr() {
        let eval = af_capacity_nats(&[1, 1], &[0.5, 0.5], &default_ctrl(), false, true).unwrap();
        assert!(eval.terms_used < 100, "terms_used = {}", eval.terms_used);
        assert!(eval.capacity_nats > 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ms = [2u32, 1];
        let gbars = [3.0, 8.0];
        let ctrl = default_ctrl();
        let eval = af_capacity_nats(&ms, &gbars, &ctrl, true, true).unwrap();
        let grad = eval.d_dgbar.unwrap();
        for i in 0..2 {
            let h = gbars[i] * 1e-6;
            let mut up = gbars.to_vec();
            up[i] += h;
            let mut dn = gbars.to_vec();
            dn[i] -= h;
            let fu = af_capacity_nats(&ms, &up, &ctrl, false, true)
                .unwrap()
                .capacity_nats;
            let fd = af_capacity_nats(&ms, &dn, &ctrl, false, true)
                .unwrap()
                .capacity_nats;
            assert_relative_eq!(grad[i], (fu - fd) / (2.0 * h), max_relative = 1e-6);
        }
    }

    #[test]
    fn factorial_variant_scales_by_inverse_m() {
        // the rejected coefficient differs from the production one by Π 1/mᵢ
        let ms = [2u32, 3];
        let gbars = [1.5, 4.0];
        let good = af_capacity_nats(&ms, &gbars, &default_ctrl(), false, true).unwrap();
        let bad = af_capacity_nats(&ms, &gbars, &default_ctrl(), false, false).unwrap();
        assert_relative_eq!(
            bad.capacity_nats,
            good.capacity_nats / 6.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn hopeless_truncation_is_reported() {
        // γ̄ so large that the tail dominates the truncated series
        let err = af_capacity_nats(&[1], &[1e9], &default_ctrl(), false, true);
        assert!(matches!(err, Err(Error::NonConvergence { .. })));
    }
}
