//! Average DF consumption factor via Gauss-Laguerre quadrature.
//!
//! The DF ergodic capacity is ∫₀^∞ Πᵢ Q(mᵢ, mᵢ(e^x−1)/γ̄ᵢ) dx. The
//! substitution u = e^x − 1 turns it into ∫₀^∞ Πᵢ Q(mᵢ, zᵢu) du/(1+u),
//! whose integrand decays like e^{−λu} (λ = Σzᵢ) times a rational function:
//! for integer fading parameters Πᵢ Q(mᵢ, zᵢu)·e^{λu} is a polynomial. The
//! rule is therefore applied in the rescaled variable y = λu, where it is
//! exact up to the simple pole at u = −1; for small λ (where that pole sits
//! close to the integration range) the pole part is subtracted and
//! reinstated in closed form through e^λ E₁(λ).

use crate::error::Result;
use crate::scalar::{Dual, Scalar};
use crate::specfun::{
    alternating_poincare_sum, exp_scaled_e1, ln_reg_upper_gamma_int, QuadratureRule,
};

/// Below this total rate λ the pole correction is applied; above it the
/// rescaled rule is already exact to rounding and the correction would only
/// amplify cancellation in the residue factor.
const POLE_CORRECTION_MAX_LAMBDA: f64 = 10.0;

/// Result of the DF capacity quadrature for one power vector.
pub(crate) struct DfEval {
    /// E[ln(1 + γ_e2e)] in nats.
    pub capacity_nats: f64,
    /// ∂(capacity_nats)/∂γ̄ᵢ when a gradient was requested.
    pub d_dgbar: Option<Vec<f64>>,
}

/// ln Q(m, zu), which is ≤ 0 for every u ≥ 0; the whole integrand is
/// assembled from these so no exponent can overflow.
#[inline]
fn ln_hop_survival<S: Scalar>(m: u32, z: S, u: f64) -> S {
    ln_reg_upper_gamma_int(m, z * S::from_f64(u))
}

pub(crate) fn df_capacity_nats(
    ms: &[u32],
    gbars: &[f64],
    rule: &QuadratureRule,
    want_grad: bool,
) -> Result<DfEval> {
    let n = ms.len();
    let zs: Vec<f64> = ms.iter().zip(gbars).map(|(&m, &g)| m as f64 / g).collect();
    let lambda: f64 = zs.iter().sum();

    // Σ_k w_k G(y_k) with G(y) = e^y Πᵢ qᵢ(u)/(1+u) assembled as
    // ew_k·exp(Σᵢ ln qᵢ(u) + zᵢu − ln(1+u))·e^{−y}-folded-into-ew
    let mut quad = 0.0f64;
    let mut dquad = vec![0.0f64; n];
    let mut sum_wr = 0.0f64; // Σ w_k/(1+u_k): the rule applied to the pole term
    let mut dls = vec![0.0f64; n];
    for ((&y, &w), &ew) in rule
        .nodes()
        .iter()
        .zip(rule.weights())
        .zip(rule.exp_weights())
    {
        let u = y / lambda;
        let mut ln_g = -u.ln_1p();
        if want_grad {
            for i in 0..n {
                let lf = ln_hop_survival(ms[i], Dual::variable(zs[i]), u);
                ln_g += lf.v;
                dls[i] = lf.d;
            }
        } else {
            for i in 0..n {
                ln_g += ln_hop_survival(ms[i], zs[i], u);
            }
        }
        let contrib = ew * ln_g.exp();
        quad += contrib;
        if want_grad {
            for i in 0..n {
                dquad[i] += contrib * dls[i];
            }
        }
        sum_wr += w / (1.0 + u);
    }

    let mut cap = quad / lambda;
    let mut dcap: Vec<f64> = dquad.iter().map(|d| d / lambda).collect();

    if lambda < POLE_CORRECTION_MAX_LAMBDA {
        // residue of the integrand at u = −1: c = Πᵢ Σ_{r<mᵢ}(−zᵢ)^r/r!
        let s: Vec<f64> = ms
            .iter()
            .zip(&zs)
            .map(|(&m, &z)| alternating_poincare_sum(m, z))
            .collect();
        let c_res: f64 = s.iter().product();
        let e1 = exp_scaled_e1(lambda)?;
        cap += c_res * (e1 - sum_wr / lambda);
        if want_grad {
            // leave-one-out products keep zero factors differentiable
            let mut prefix = vec![1.0f64; n + 1];
            for i in 0..n {
                prefix[i + 1] = prefix[i] * s[i];
            }
            let mut suffix = vec![1.0f64; n + 1];
            for i in (0..n).rev() {
                suffix[i] = suffix[i + 1] * s[i];
            }
            for i in 0..n {
                let ds = alternating_poincare_sum(ms[i], Dual::variable(zs[i])).d;
                // the residue also carries an e^{Σz−λ} factor, frozen at the
                // primal point, whose z-derivative contributes c itself
                let dc = prefix[i] * suffix[i + 1] * ds + c_res;
                dcap[i] += dc * (e1 - sum_wr / lambda);
            }
        }
    }

    let d_dgbar = want_grad.then(|| (0..n).map(|i| dcap[i] * (-zs[i] / gbars[i])).collect());
    Ok(DfEval {
        capacity_nats: cap,
        d_dgbar,
    })
}
