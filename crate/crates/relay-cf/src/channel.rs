//! Physical model of an N-hop relay chain: per-hop fading and geometry,
//! circuit/amplifier power consumption, and the end-to-end SNR and CDF
//! formulas for both relaying protocols.

use crate::error::{Error, Result};
use crate::specfun::reg_lower_gamma;

/// Relaying protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Amplify-and-forward: the relay scales and retransmits the analog
    /// signal; the end-to-end SNR is [Π(1+1/γᵢ) − 1]⁻¹.
    Af,
    /// Decode-and-forward: the relay re-encodes; the end-to-end SNR is the
    /// minimum per-hop SNR.
    Df,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::Af => write!(f, "af"),
            Protocol::Df => write!(f, "df"),
        }
    }
}

/// Fading and geometry of a single hop.
#[derive(Debug, Clone, PartialEq)]
pub struct HopProfile {
    /// Nakagami fading parameter m ≥ 1 (integer).
    pub m: u32,
    /// Hop length in normalized units, > 0.
    pub d: f64,
    /// Pathloss exponent ν > 0.
    pub nu: f64,
    /// Mean channel power gain Ω = E[|α|²], > 0 (1 when normalized).
    pub omega: f64,
}

impl HopProfile {
    /// A hop with unit mean channel gain.
    pub fn new(m: u32, d: f64, nu: f64) -> Self {
        HopProfile {
            m,
            d,
            nu,
            omega: 1.0,
        }
    }

    fn validate(&self, idx: usize) -> Result<()> {
        if self.m < 1 {
            return Err(Error::config(
                "HopProfile",
                format!("hop {idx}: m = {} must be >= 1", self.m),
            ));
        }
        if !(self.d > 0.0) || !(self.nu > 0.0) || !(self.omega > 0.0) {
            return Err(Error::config(
                "HopProfile",
                format!(
                    "hop {idx}: d, nu, omega must be positive (got {}, {}, {})",
                    self.d, self.nu, self.omega
                ),
            ));
        }
        Ok(())
    }
}

/// Per-node circuit powers and amplifier efficiency.
///
/// Circuit vectors hold one entry per node R₀…R_N (length N+1). The chain
/// charges transmit power to R₀…R_{N−1}, receive power to R₁…R_N, and idle
/// power to R₀…R_{N−1}.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerModel {
    /// Power amplifier efficiency ε ∈ (0, 1].
    pub epsilon: f64,
    /// Circuit power in transmit mode, per node (W).
    pub p_ct: Vec<f64>,
    /// Circuit power in receive mode, per node (W).
    pub p_cr: Vec<f64>,
    /// Circuit power in idle mode, per node (W).
    pub p_ci: Vec<f64>,
    /// Additional aggregate processing power for AF amplification (W).
    pub p_proc_af: f64,
    /// Additional aggregate processing power for DF decoding (W).
    pub p_proc_df: f64,
}

impl PowerModel {
    /// Uniform per-node circuit powers for a chain with `n_hops` hops
    /// (`n_hops + 1` nodes).
    pub fn uniform(n_hops: usize, epsilon: f64, p_ct: f64, p_cr: f64, p_ci: f64) -> Self {
        PowerModel {
            epsilon,
            p_ct: vec![p_ct; n_hops + 1],
            p_cr: vec![p_cr; n_hops + 1],
            p_ci: vec![p_ci; n_hops + 1],
            p_proc_af: 0.0,
            p_proc_df: 0.0,
        }
    }

    /// The reference evaluation model: ε = 0.35 and per-node circuit powers
    /// of 0.1 W in each mode, so that the aggregate circuit power is 0.3N
    /// for AF and 0.4N for DF (the extra 0.1N being DF decoding power).
    pub fn reference(n_hops: usize) -> Self {
        let mut pm = PowerModel::uniform(n_hops, 0.35, 0.1, 0.1, 0.1);
        pm.p_proc_df = 0.1 * n_hops as f64;
        pm
    }

    fn validate(&self, n_hops: usize) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config(
                "PowerModel",
                format!("epsilon = {} outside (0, 1]", self.epsilon),
            ));
        }
        for (name, v) in [
            ("p_ct", &self.p_ct),
            ("p_cr", &self.p_cr),
            ("p_ci", &self.p_ci),
        ] {
            if v.len() != n_hops + 1 {
                return Err(Error::config(
                    "PowerModel",
                    format!("{name} has {} entries, expected {}", v.len(), n_hops + 1),
                ));
            }
            if v.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::config(
                    "PowerModel",
                    format!("{name} has a negative entry"),
                ));
            }
        }
        if !(self.p_proc_af >= 0.0) || !(self.p_proc_df >= 0.0) {
            return Err(Error::config(
                "PowerModel",
                "processing powers must be >= 0",
            ));
        }
        Ok(())
    }
}

/// An ordered chain of hops with its noise level, bandwidth, and power model.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayChain {
    hops: Vec<HopProfile>,
    protocol: Protocol,
    bandwidth: f64,
    n0: f64,
    power: PowerModel,
}

impl RelayChain {
    /// Validating constructor. `hops` must be nonempty and the power model
    /// sized for `hops.len() + 1` nodes.
    pub fn new(
        hops: Vec<HopProfile>,
        protocol: Protocol,
        bandwidth: f64,
        n0: f64,
        power: PowerModel,
    ) -> Result<Self> {
        if hops.is_empty() {
            return Err(Error::config("RelayChain", "at least one hop required"));
        }
        for (i, h) in hops.iter().enumerate() {
            h.validate(i)?;
        }
        if !(bandwidth > 0.0) {
            return Err(Error::config(
                "RelayChain",
                format!("bandwidth = {bandwidth} must be > 0"),
            ));
        }
        if !(n0 > 0.0) {
            return Err(Error::config(
                "RelayChain",
                format!("n0 = {n0} must be > 0"),
            ));
        }
        power.validate(hops.len())?;
        Ok(RelayChain {
            hops,
            protocol,
            bandwidth,
            n0,
            power,
        })
    }

    /// The reference evaluation chain: N hops uniformly spaced over a unit
    /// source-destination distance, pathloss exponent 4, unit bandwidth and
    /// noise, and the reference power model.
    pub fn reference(n_hops: usize, m: u32, protocol: Protocol) -> Result<Self> {
        let d = 1.0 / n_hops as f64;
        let hops = (0..n_hops).map(|_| HopProfile::new(m, d, 4.0)).collect();
        RelayChain::new(hops, protocol, 1.0, 1.0, PowerModel::reference(n_hops))
    }

    /// Number of hops N.
    pub fn n_hops(&self) -> usize {
        self.hops.len()
    }

    pub fn hops(&self) -> &[HopProfile] {
        &self.hops
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    /// Same chain under the other protocol.
    pub fn with_protocol(&self, protocol: Protocol) -> Self {
        let mut c = self.clone();
        c.protocol = protocol;
        c
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn power_model(&self) -> &PowerModel {
        &self.power
    }

    /// Aggregate circuit power P_c: transmit for R₀…R_{N−1}, receive for
    /// R₁…R_N, idle for R₀…R_{N−1}.
    pub fn circuit_power(&self) -> f64 {
        let n = self.n_hops();
        let tx: f64 = self.power.p_ct[..n].iter().sum();
        let rx: f64 = self.power.p_cr[1..=n].iter().sum();
        let idle: f64 = self.power.p_ci[..n].iter().sum();
        tx + rx + idle
    }

    /// Protocol processing power (P_c^AF or P_c^DF).
    pub fn processing_power(&self) -> f64 {
        match self.protocol {
            Protocol::Af => self.power.p_proc_af,
            Protocol::Df => self.power.p_proc_df,
        }
    }

    /// Average per-hop SNRs γ̄ᵢ = gᵢ·P^t_{i} for the transmit powers `pt`
    /// (one entry per transmitting node R₀…R_{N−1}).
    pub fn avg_snrs(&self, pt: &[f64]) -> Result<Vec<f64>> {
        if pt.len() != self.n_hops() {
            return Err(Error::config(
                "avg_snrs",
                format!("{} powers for {} hops", pt.len(), self.n_hops()),
            ));
        }
        if pt.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::domain("avg_snrs", "transmit powers must be >= 0"));
        }
        Ok(self
            .hops
            .iter()
            .zip(pt)
            .map(|(h, &p)| unit_power_gain(h, self.n0) * p)
            .collect())
    }
}

/// Average SNR per unit transmit power: g = Ω/(N₀ d^ν), so γ̄ = g·P^t.
pub fn unit_power_gain(hop: &HopProfile, n0: f64) -> f64 {
    hop.omega / (n0 * hop.d.powf(hop.nu))
}

/// AF end-to-end SNR [Π(1+1/γᵢ) − 1]⁻¹.
///
/// Evaluated through ln/expm1 so that very small and very large per-hop
/// SNRs keep full precision.
pub fn e2e_snr_af(gammas: &[f64]) -> Result<f64> {
    if gammas.is_empty() {
        return Err(Error::domain("e2e_snr_af", "empty SNR sequence"));
    }
    if gammas.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::domain("e2e_snr_af", "all per-hop SNRs must be > 0"));
    }
    Ok(e2e_snr_af_unchecked(gammas))
}

#[inline]
pub(crate) fn e2e_snr_af_unchecked(gammas: &[f64]) -> f64 {
    let s: f64 = gammas.iter().map(|&g| (1.0 / g).ln_1p()).sum();
    1.0 / s.exp_m1()
}

/// DF end-to-end SNR: the minimum per-hop SNR.
pub fn e2e_snr_df(gammas: &[f64]) -> Result<f64> {
    if gammas.is_empty() {
        return Err(Error::domain("e2e_snr_df", "empty SNR sequence"));
    }
    Ok(gammas.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Total consumed power (1/ε)ΣP^t + P_c + P_c^{AF|DF}.
pub fn total_power(chain: &RelayChain, pt: &[f64]) -> Result<f64> {
    if pt.len() != chain.n_hops() {
        return Err(Error::config(
            "total_power",
            format!("{} powers for {} hops", pt.len(), chain.n_hops()),
        ));
    }
    let tx: f64 = pt.iter().sum();
    Ok(tx / chain.power_model().epsilon + chain.circuit_power() + chain.processing_power())
}

/// CDF of the DF end-to-end SNR: 1 − Πᵢ(1 − F_{γᵢ}(x)) with per-hop CDF
/// F_{γᵢ}(x) = P(mᵢ, mᵢ x/γ̄ᵢ).
pub fn df_e2e_cdf(x: f64, avg_snrs: &[f64], ms: &[u32]) -> Result<f64> {
    if avg_snrs.len() != ms.len() || avg_snrs.is_empty() {
        return Err(Error::config(
            "df_e2e_cdf",
            format!("{} SNRs for {} fading parameters", avg_snrs.len(), ms.len()),
        ));
    }
    if !(x >= 0.0) {
        return Err(Error::domain("df_e2e_cdf", format!("x = {x} must be >= 0")));
    }
    if avg_snrs.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::domain("df_e2e_cdf", "average SNRs must be > 0"));
    }
    let mut survival = 1.0;
    for (&gbar, &m) in avg_snrs.iter().zip(ms) {
        survival *= 1.0 - reg_lower_gamma(m as f64, m as f64 * x / gbar)?;
    }
    Ok(1.0 - survival)
}

/// DF outage probability: the end-to-end CDF evaluated at the SNR threshold.
pub fn df_outage(chain: &RelayChain, pt: &[f64], gamma_th: f64) -> Result<f64> {
    if !(gamma_th > 0.0) {
        return Err(Error::domain(
            "df_outage",
            format!("gamma_th = {gamma_th} must be > 0"),
        ));
    }
    let gbars = chain.avg_snrs(pt)?;
    let ms: Vec<u32> = chain.hops().iter().map(|h| h.m).collect();
    df_e2e_cdf(gamma_th, &gbars, &ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_power_gain_examples() {
        let h = |d: f64, nu: f64, omega: f64| HopProfile { m: 1, d, nu, omega };
        assert_relative_eq!(unit_power_gain(&h(1.0, 4.0, 1.0), 1.0), 1.0);
        assert_relative_eq!(unit_power_gain(&h(0.5, 4.0, 1.0), 1.0), 16.0);
        assert_relative_eq!(unit_power_gain(&h(1.0, 4.0, 2.0), 0.1), 20.0);
    }

    #[test]
    fn af_snr_collapses_for_single_hop() {
        assert_relative_eq!(e2e_snr_af(&[3.7]).unwrap(), 3.7, max_relative = 1e-12);
    }

    #[test]
    fn af_snr_two_equal_hops() {
        // [(1+1)(1+1) − 1]⁻¹ = 1/3
        assert_relative_eq!(
            e2e_snr_af(&[1.0, 1.0]).unwrap(),
            1.0 / 3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn af_snr_bounded_by_min() {
        let v = e2e_snr_af(&[10.0, 0.1]).unwrap();
        assert!(v < 0.1);
    }

    #[test]
    fn af_snr_rejects_nonpositive() {
        assert!(e2e_snr_af(&[1.0, 0.0]).is_err());
        assert!(e2e_snr_af(&[]).is_err());
    }

    #[test]
    fn df_snr_is_minimum() {
        assert_eq!(e2e_snr_df(&[0.5, 2.0, 1.0]).unwrap(), 0.5);
        assert_eq!(e2e_snr_df(&[4.2]).unwrap(), 4.2);
        assert!(e2e_snr_df(&[]).is_err());
    }

    #[test]
    fn total_power_reference_af_df() {
        let af = RelayChain::reference(2, 1, Protocol::Af).unwrap();
        assert_relative_eq!(
            total_power(&af, &[1.0, 1.0]).unwrap(),
            2.0 / 0.35 + 0.6,
            max_relative = 1e-12
        );
        let df = af.with_protocol(Protocol::Df);
        assert_relative_eq!(
            total_power(&df, &[1.0, 1.0]).unwrap(),
            2.0 / 0.35 + 0.8,
            max_relative = 1e-12
        );
    }

    #[test]
    fn total_power_has_circuit_floor() {
        let chain = RelayChain::reference(3, 1, Protocol::Af).unwrap();
        let p = total_power(&chain, &[0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(p, 0.9, max_relative = 1e-12);
        assert!(total_power(&chain, &[0.0]).is_err());
    }

    #[test]
    fn df_cdf_rayleigh_example() {
        // m = {1,1}, γ̄ = {1,1}, x = 1 → 1 − e^{−2}
        let v = df_e2e_cdf(1.0, &[1.0, 1.0], &[1, 1]).unwrap();
        assert_relative_eq!(v, 1.0 - (-2.0f64).exp(), max_relative = 1e-12);
        assert_eq!(df_e2e_cdf(0.0, &[1.0, 1.0], &[1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn df_cdf_matches_survival_composition() {
        let gbars = [0.7, 2.2, 5.0];
        let ms = [2u32, 1, 3];
        for i in 0..=40 {
            let x = 0.25 * i as f64;
            let direct = df_e2e_cdf(x, &gbars, &ms).unwrap();
            let mut surv = 1.0;
            for (&g, &m) in gbars.iter().zip(&ms) {
                surv *= 1.0 - reg_lower_gamma(m as f64, m as f64 * x / g).unwrap();
            }
            assert_relative_eq!(direct, 1.0 - surv, epsilon = 1e-12);
        }
    }

    #[test]
    fn df_outage_limits() {
        let chain = RelayChain::reference(2, 1, Protocol::Df).unwrap();
        let pt = [1.0, 1.0];
        assert!(df_outage(&chain, &pt, 1e-12).unwrap() < 1e-9);
        assert!(df_outage(&chain, &pt, 1e6).unwrap() > 1.0 - 1e-9);
        assert!(df_outage(&chain, &pt, 0.0).is_err());
    }

    #[test]
    fn avg_snr_indexing_follows_transmitters() {
        let hops = vec![HopProfile::new(1, 0.5, 4.0), HopProfile::new(2, 1.0, 4.0)];
        let chain =
            RelayChain::new(hops, Protocol::Df, 1.0, 1.0, PowerModel::reference(2)).unwrap();
        let g = chain.avg_snrs(&[2.0, 3.0]).unwrap();
        assert_relative_eq!(g[0], 32.0); // 16 · 2
        assert_relative_eq!(g[1], 3.0); // 1 · 3
    }

    #[test]
    fn chain_validation() {
        assert!(RelayChain::new(vec![], Protocol::Af, 1.0, 1.0, PowerModel::reference(0)).is_err());
        let bad_hop = HopProfile::new(0, 1.0, 4.0);
        assert!(RelayChain::new(
            vec![bad_hop],
            Protocol::Af,
            1.0,
            1.0,
            PowerModel::reference(1)
        )
        .is_err());
        let mut pm = PowerModel::reference(1);
        pm.epsilon = 1.5;
        assert!(RelayChain::new(
            vec![HopProfile::new(1, 1.0, 4.0)],
            Protocol::Af,
            1.0,
            1.0,
            pm
        )
        .is_err());
    }
}
