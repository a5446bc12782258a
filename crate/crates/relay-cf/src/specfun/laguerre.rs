//! Gauss-Laguerre quadrature rules: ∫₀^∞ e^{−x} f(x) dx ≈ Σ w_k f(x_k).

use crate::error::{Error, Result};

/// Nodes and weights of a K-point Gauss-Laguerre rule.
///
/// Immutable after construction. A rule of order K integrates polynomials of
/// degree ≤ 2K−1 against e^{−x} exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// w_k·e^{x_k}, computed overflow-free; the natural weights when the
    /// integrand carries its own exponential decay.
    exp_weights: Vec<f64>,
}

impl QuadratureRule {
    /// Rule order K.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Nodes, strictly increasing, all positive.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights for the e^{−x} weight function.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Scaled weights w_k·e^{x_k}.
    pub fn exp_weights(&self) -> &[f64] {
        &self.exp_weights
    }

    /// Σ w_k f(x_k).
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

const NEWTON_MAX_ITER: usize = 100;

/// Build the K-point Gauss-Laguerre rule, 1 ≤ K ≤ 200.
///
/// Nodes are the roots of L_K found by Newton iteration from the classical
/// initial guesses; the recurrence runs on e^{−x/2}-scaled polynomials so
/// that large orders stay in range. Residual tolerance 1e-14.
pub fn gauss_laguerre(order: usize) -> Result<QuadratureRule> {
    if order < 1 || order > 200 {
        return Err(Error::config(
            "gauss_laguerre",
            format!("order K = {order} outside 1..=200"),
        ));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut exp_weights = vec![0.0; n];

    let mut z = 0.0f64;
    for i in 0..n {
        // initial guesses (Stroud/Secrest via Numerical Recipes, α = 0)
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * n as f64),
            1 => z + 15.0 / (1.0 + 2.5 * n as f64),
            _ => {
                let ai = i as f64 - 1.0;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
            }
        };
        let mut converged = false;
        let mut polish = 0u32;
        for _ in 0..NEWTON_MAX_ITER {
            let (lk, lkm1) = scaled_laguerre_pair(n, z);
            // L_K'(x) = K (L_K − L_{K−1})/x, same prefactor after scaling
            let dl = (n as f64) * (lk - lkm1) / z;
            let delta = lk / dl;
            z -= delta;
            if delta.abs() <= 1e-14 * z.max(1.0) {
                converged = true;
                // two more steps squeeze the residual to machine level
                polish += 1;
                if polish > 2 {
                    break;
                }
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                op: "gauss_laguerre",
                partial: z,
            });
        }
        let (_, lkm1) = scaled_laguerre_pair(n, z);
        // one more recurrence step gives the scaled L_{K+1}(z)
        let lkp1 = scaled_laguerre_next(n, z, 0.0, lkm1);
        // w = x / [(K+1)² L_{K+1}(x)²]; with scaled values this carries e^{−x}
        let denom = ((n + 1) as f64).powi(2) * lkp1 * lkp1;
        exp_weights[i] = z / denom;
        weights[i] = exp_weights[i] * (-z).exp();
        nodes[i] = z;
    }

    // enforce the exact zeroth moment Σw = 1
    let w_sum: f64 = weights.iter().sum();
    for (w, ew) in weights.iter_mut().zip(&mut exp_weights) {
        *w /= w_sum;
        *ew /= w_sum;
    }

    Ok(QuadratureRule {
        order,
        nodes,
        weights,
        exp_weights,
    })
}

/// (e^{−x/2} L_n(x), e^{−x/2} L_{n−1}(x)) by the three-term recurrence.
fn scaled_laguerre_pair(n: usize, x: f64) -> (f64, f64) {
    let s = (-0.5 * x).exp();
    let mut lm1 = 0.0; // scaled L_{-1}
    let mut l = s; // scaled L_0
    for k in 0..n {
        let kf = k as f64;
        let lnext = ((2.0 * kf + 1.0 - x) * l - kf * lm1) / (kf + 1.0);
        lm1 = l;
        l = lnext;
    }
    (l, lm1)
}

/// Scaled L_{n+1}(x) given scaled (L_n, L_{n−1}); here L_n(x) = 0 at a node.
fn scaled_laguerre_next(n: usize, x: f64, ln_val: f64, lnm1: f64) -> f64 {
    let nf = n as f64;
    ((2.0 * nf + 1.0 - x) * ln_val - nf * lnm1) / (nf + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn order_one_rule() {
        let r = gauss_laguerre(1).unwrap();
        assert_relative_eq!(r.nodes()[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(r.weights()[0], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn order_two_rule() {
        let r = gauss_laguerre(2).unwrap();
        let s2 = 2.0f64.sqrt();
        assert_relative_eq!(r.nodes()[0], 2.0 - s2, max_relative = 1e-13);
        assert_relative_eq!(r.nodes()[1], 2.0 + s2, max_relative = 1e-13);
        assert_relative_eq!(r.weights()[0], (2.0 + s2) / 4.0, max_relative = 1e-13);
        assert_relative_eq!(r.weights()[1], (2.0 - s2) / 4.0, max_relative = 1e-13);
    }

    #[test]
    fn moments_and_monomials() {
        // ∫ e^{−x} x^5 dx = 120, exact for K = 30 (degree ≤ 59)
        let r = gauss_laguerre(30).unwrap();
        assert_relative_eq!(r.integrate(|x| x.powi(5)), 120.0, max_relative = 1e-10);
    }

    #[test]
    fn moment_conditions_across_orders() {
        for &k in &[2usize, 5, 10, 30, 60, 200] {
            let r = gauss_laguerre(k).unwrap();
            let w_sum: f64 = r.weights().iter().sum();
            let wx_sum: f64 = r.integrate(|x| x);
            assert!((w_sum - 1.0).abs() < 1e-12, "K={k}: Σw = {w_sum}");
            assert!((wx_sum - 1.0).abs() < 1e-10, "K={k}: Σwx = {wx_sum}");
        }
    }

    #[test]
    fn exactness_up_to_degree_2k_minus_1() {
        for &k in &[2usize, 5, 10, 30] {
            let r = gauss_laguerre(k).unwrap();
            // moments of e^{-x}: ∫ x^p e^{-x} dx = p!
            let mut factorial = 1.0f64;
            for p in 1..=(2 * k - 1) {
                factorial *= p as f64;
                let got = r.integrate(|x| x.powi(p as i32));
                assert_relative_eq!(got, factorial, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn nodes_strictly_increasing_positive() {
        for &k in &[1usize, 7, 30, 100, 200] {
            let r = gauss_laguerre(k).unwrap();
            let mut prev = 0.0;
            for (&x, &w) in r.nodes().iter().zip(r.weights()) {
                assert!(x > prev);
                assert!(w >= 0.0);
                prev = x;
            }
        }
    }

    #[test]
    fn exp_weights_match_weights() {
        let r = gauss_laguerre(40).unwrap();
        for ((&x, &w), &ew) in r.nodes().iter().zip(r.weights()).zip(r.exp_weights()) {
            assert_relative_eq!(ew, w * x.exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_orders() {
        assert!(gauss_laguerre(0).is_err());
        assert!(gauss_laguerre(201).is_err());
    }
}
