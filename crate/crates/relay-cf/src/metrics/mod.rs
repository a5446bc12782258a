//! Closed-form average consumption factor (CF) and ergodic capacity for AF
//! and DF chains, the Rayleigh special case, the instantaneous CF, and the
//! exact gradients of all of them with respect to the transmit powers.
//!
//! Capacities are reported in bits (bandwidth-normalized, multiplied by B);
//! CF is capacity divided by total consumed power.

mod af;
mod df;

pub(crate) use af::ln_fraction_moment;

use crate::channel::{e2e_snr_af_unchecked, total_power, unit_power_gain, Protocol, RelayChain};
use crate::error::{Error, Result};
use crate::specfun::{exp_scaled_e1, gauss_laguerre, QuadratureRule};

/// ln 2, used to convert nats to bits.
pub(crate) const LN_2: f64 = std::f64::consts::LN_2;

/// Truncation and tolerance controls for the AF capacity series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesControl {
    /// Maximum number of series terms J (≥ 10).
    pub max_terms: usize,
    /// Early-exit threshold on a term's relative contribution.
    pub rel_tol: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            max_terms: 200,
            rel_tol: 1e-12,
        }
    }
}

impl SeriesControl {
    fn validate(&self) -> Result<()> {
        if self.max_terms < 10 {
            return Err(Error::config(
                "SeriesControl",
                format!("max_terms = {} must be >= 10", self.max_terms),
            ));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::config("SeriesControl", "rel_tol must be > 0"));
        }
        Ok(())
    }
}

/// Average CF together with its numerator and denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct CfResult {
    /// Average consumption factor, bits per unit consumed power.
    pub cf: f64,
    /// Ergodic end-to-end capacity in bits (B-normalized).
    pub ergodic_capacity: f64,
    /// Total consumed power in watts.
    pub total_power: f64,
    /// Series terms (AF) or rule order (DF) used.
    pub terms_used: usize,
}

impl CfResult {
    fn from_capacity(capacity_bits: f64, power: f64, terms_used: usize) -> Self {
        CfResult {
            cf: capacity_bits / power,
            ergodic_capacity: capacity_bits,
            total_power: power,
            terms_used,
        }
    }
}

/// Numeric controls for both protocols, bundled for the allocation
/// strategies.
#[derive(Debug, Clone)]
pub struct CfControls {
    pub series: SeriesControl,
    pub quad: QuadratureRule,
}

impl Default for CfControls {
    fn default() -> Self {
        CfControls {
            series: SeriesControl::default(),
            quad: gauss_laguerre(30).expect("default rule order is valid"),
        }
    }
}

fn require_protocol(chain: &RelayChain, p: Protocol, op: &'static str) -> Result<()> {
    if chain.protocol() != p {
        return Err(Error::config(
            op,
            format!("chain protocol is {}, expected {}", chain.protocol(), p),
        ));
    }
    Ok(())
}

/// Instantaneous CF: B·log₂(1+γ_e2e)/P_tot for the chain's protocol, at the
/// given instantaneous per-hop SNRs.
pub fn instantaneous_cf(chain: &RelayChain, pt: &[f64], gammas: &[f64]) -> Result<f64> {
    if gammas.len() != chain.n_hops() {
        return Err(Error::config(
            "instantaneous_cf",
            format!("{} SNRs for {} hops", gammas.len(), chain.n_hops()),
        ));
    }
    if gammas.iter().any(|&g| !(g >= 0.0)) {
        return Err(Error::domain("instantaneous_cf", "SNRs must be >= 0"));
    }
    let power = total_power(chain, pt)?;
    let gamma_e2e = if gammas.iter().any(|&g| g == 0.0) {
        0.0
    } else {
        match chain.protocol() {
            Protocol::Af => e2e_snr_af_unchecked(gammas),
            Protocol::Df => gammas.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    };
    Ok(chain.bandwidth() * gamma_e2e.ln_1p() / LN_2 / power)
}

/// Average CF of an AF chain via the capacity series.
pub fn cf_af(chain: &RelayChain, pt: &[f64], ctrl: &SeriesControl) -> Result<CfResult> {
    require_protocol(chain, Protocol::Af, "cf_af")?;
    ctrl.validate()?;
    let power = total_power(chain, pt)?;
    let gbars = chain.avg_snrs(pt)?;
    if gbars.iter().any(|&g| g == 0.0) {
        return Ok(CfResult::from_capacity(0.0, power, 0));
    }
    let ms: Vec<u32> = chain.hops().iter().map(|h| h.m).collect();
    let eval = af::af_capacity_nats(&ms, &gbars, ctrl, false, true)?;
    let capacity = chain.bandwidth() * eval.capacity_nats / LN_2;
    Ok(CfResult::from_capacity(capacity, power, eval.terms_used))
}

/// The rejected coefficient variant of [`cf_af`] (per-hop factor normalized
/// by mᵢ! instead of Γ(mᵢ)). Kept as a diagnostic negative control: for any
/// hop with mᵢ ≥ 2 it disagrees with Monte-Carlo estimates.
pub fn cf_af_factorial_variant(
    chain: &RelayChain,
    pt: &[f64],
    ctrl: &SeriesControl,
) -> Result<CfResult> {
    require_protocol(chain, Protocol::Af, "cf_af_factorial_variant")?;
    ctrl.validate()?;
    let power = total_power(chain, pt)?;
    let gbars = chain.avg_snrs(pt)?;
    if gbars.iter().any(|&g| g == 0.0) {
        return Ok(CfResult::from_capacity(0.0, power, 0));
    }
    let ms: Vec<u32> = chain.hops().iter().map(|h| h.m).collect();
    let eval = af::af_capacity_nats(&ms, &gbars, ctrl, false, false)?;
    let capacity = chain.bandwidth() * eval.capacity_nats / LN_2;
    Ok(CfResult::from_capacity(capacity, power, eval.terms_used))
}

/// Average CF of a DF chain via the Gauss-Laguerre capacity quadrature.
pub fn cf_df(chain: &RelayChain, pt: &[f64], rule: &QuadratureRule) -> Result<CfResult> {
    require_protocol(chain, Protocol::Df, "cf_df")?;
    if rule.order() < 10 {
        return Err(Error::config(
            "cf_df",
            format!("rule order {} must be >= 10", rule.order()),
        ));
    }
    let power = total_power(chain, pt)?;
    let gbars = chain.avg_snrs(pt)?;
    if gbars.iter().any(|&g| g == 0.0) {
        return Ok(CfResult::from_capacity(0.0, power, rule.order()));
    }
    let ms: Vec<u32> = chain.hops().iter().map(|h| h.m).collect();
    let eval = df::df_capacity_nats(&ms, &gbars, rule, false)?;
    let capacity = chain.bandwidth() * eval.capacity_nats / LN_2;
    Ok(CfResult::from_capacity(capacity, power, rule.order()))
}

/// Closed-form Rayleigh (all mᵢ = 1) DF CF: capacity = e^λ E₁(λ)·B/ln 2 with
/// λ = Σ 1/γ̄ᵢ.
pub fn cf_df_rayleigh(chain: &RelayChain, pt: &[f64]) -> Result<CfResult> {
    require_protocol(chain, Protocol::Df, "cf_df_rayleigh")?;
    if let Some(h) = chain.hops().iter().find(|h| h.m != 1) {
        return Err(Error::domain(
            "cf_df_rayleigh",
            format!("requires Rayleigh hops (m = 1), found m = {}", h.m),
        ));
    }
    let power = total_power(chain, pt)?;
    let gbars = chain.avg_snrs(pt)?;
    if gbars.iter().any(|&g| g == 0.0) {
        return Ok(CfResult::from_capacity(0.0, power, 0));
    }
    let lambda: f64 = gbars.iter().map(|g| 1.0 / g).sum();
    let capacity = chain.bandwidth() * exp_scaled_e1(lambda)? / LN_2;
    Ok(CfResult::from_capacity(capacity, power, 0))
}

/// Ergodic capacity of an AF chain (the CF numerator), in bits.
pub fn capacity_af(chain: &RelayChain, pt: &[f64], ctrl: &SeriesControl) -> Result<f64> {
    Ok(cf_af(chain, pt, ctrl)?.ergodic_capacity)
}

/// Ergodic capacity of a DF chain (the CF numerator), in bits.
pub fn capacity_df(chain: &RelayChain, pt: &[f64], rule: &QuadratureRule) -> Result<f64> {
    Ok(cf_df(chain, pt, rule)?.ergodic_capacity)
}

/// Average CF for the chain's protocol with bundled controls.
pub fn cf(chain: &RelayChain, pt: &[f64], controls: &CfControls) -> Result<CfResult> {
    match chain.protocol() {
        Protocol::Af => cf_af(chain, pt, &controls.series),
        Protocol::Df => cf_df(chain, pt, &controls.quad),
    }
}

fn capacity_nats_and_grad(
    chain: &RelayChain,
    pt: &[f64],
    controls: &CfControls,
) -> Result<(f64, Vec<f64>, usize)> {
    if pt.len() != chain.n_hops() {
        return Err(Error::config(
            "cf_grad",
            format!("{} powers for {} hops", pt.len(), chain.n_hops()),
        ));
    }
    if pt.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::domain(
            "cf_grad",
            "gradients require strictly positive transmit powers",
        ));
    }
    let gbars = chain.avg_snrs(pt)?;
    let ms: Vec<u32> = chain.hops().iter().map(|h| h.m).collect();
    let (nats, d_dgbar, terms) = match chain.protocol() {
        Protocol::Af => {
            controls.series.validate()?;
            let e = af::af_capacity_nats(&ms, &gbars, &controls.series, true, true)?;
            (e.capacity_nats, e.d_dgbar.unwrap(), e.terms_used)
        }
        Protocol::Df => {
            let e = df::df_capacity_nats(&ms, &gbars, &controls.quad, true)?;
            (e.capacity_nats, e.d_dgbar.unwrap(), controls.quad.order())
        }
    };
    // chain rule through γ̄ᵢ = gᵢ·Pᵢ
    let grad = chain
        .hops()
        .iter()
        .zip(&d_dgbar)
        .map(|(h, &d)| d * unit_power_gain(h, chain.n0()))
        .collect();
    Ok((nats, grad, terms))
}

/// Average CF and its exact gradient with respect to the transmit powers,
/// by forward-mode differentiation of the closed forms.
pub fn cf_grad(
    chain: &RelayChain,
    pt: &[f64],
    controls: &CfControls,
) -> Result<(CfResult, Vec<f64>)> {
    let (nats, dnats, terms) = capacity_nats_and_grad(chain, pt, controls)?;
    let power = total_power(chain, pt)?;
    let scale = chain.bandwidth() / LN_2;
    let capacity = scale * nats;
    let result = CfResult::from_capacity(capacity, power, terms);
    let inv_eps = 1.0 / chain.power_model().epsilon;
    let grad = dnats
        .iter()
        .map(|&dn| scale * dn / power - capacity * inv_eps / (power * power))
        .collect();
    Ok((result, grad))
}

/// Ergodic capacity and its exact gradient with respect to the transmit
/// powers.
pub fn capacity_grad(
    chain: &RelayChain,
    pt: &[f64],
    controls: &CfControls,
) -> Result<(f64, Vec<f64>)> {
    let (nats, dnats, _) = capacity_nats_and_grad(chain, pt, controls)?;
    let scale = chain.bandwidth() / LN_2;
    Ok((scale * nats, dnats.iter().map(|&d| scale * d).collect()))
}
