//! Statistical oracle: samples Nakagami-m fading chains and estimates CF,
//! capacity, and outage empirically.
//!
//! Sampling is deterministic for a fixed `(seed, streams, samples)` triple
//! regardless of how many threads execute it: each stream owns a
//! counter-based ChaCha generator selected by its stream index, and partial
//! moments are reduced in stream order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::channel::{total_power, Protocol, RelayChain};
use crate::error::{Error, Result};
use crate::metrics::LN_2;

/// Sampling configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    /// Number of fading draws.
    pub samples: u64,
    /// Master seed.
    pub seed: u64,
    /// Number of independent sub-streams the draws are split across.
    pub streams: u32,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 1_000_000,
            seed: 0x00C0FFEE,
            streams: 16,
        }
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.samples < 1000 {
            return Err(Error::config(
                "McConfig",
                format!(
                    "samples = {} too few for a valid confidence interval (need >= 1000)",
                    self.samples
                ),
            ));
        }
        if self.streams == 0 {
            return Err(Error::config("McConfig", "streams must be positive"));
        }
        Ok(())
    }
}

/// An empirical mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Draw one per-hop SNR: Gamma with shape m and scale γ̄/m.
pub fn sample_hop_snr<R: Rng + ?Sized>(m: u32, avg_snr: f64, rng: &mut R) -> f64 {
    debug_assert!(m >= 1 && avg_snr > 0.0);
    let gamma = Gamma::new(m as f64, avg_snr / m as f64).expect("valid Gamma parameters");
    gamma.sample(rng)
}

/// (count, mean, M2) running moments per stream, merged pairwise.
#[derive(Clone, Copy)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn new() -> Self {
        Moments {
            n: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        Moments { n, mean, m2 }
    }

    fn estimate(self) -> McEstimate {
        let std_error = if self.n > 1 {
            (self.m2 / (self.n as f64 - 1.0)).sqrt() / (self.n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            std_error,
            samples: self.n,
        }
    }
}

/// Split `samples` across `streams` (first streams take the remainder).
fn stream_counts(samples: u64, streams: u32) -> Vec<u64> {
    let base = samples / streams as u64;
    let rem = samples % streams as u64;
    (0..streams as u64)
        .map(|s| base + if s < rem { 1 } else { 0 })
        .collect()
}

fn run_streams<F>(cfg: &McConfig, per_sample: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let counts = stream_counts(cfg.samples, cfg.streams);
    let partials: Vec<Moments> = counts
        .par_iter()
        .enumerate()
        .map(|(s, &count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s as u64);
            let mut mom = Moments::new();
            for _ in 0..count {
                mom.push(per_sample(&mut rng));
            }
            mom
        })
        .collect();
    partials
        .into_iter()
        .fold(Moments::new(), Moments::merge)
        .estimate()
}

/// Empirical mean of the instantaneous CF over fading draws.
pub fn estimate_cf(chain: &RelayChain, pt: &[f64], cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    let power = total_power(chain, pt)?;
    let gbars = chain.avg_snrs(pt)?;
    if gbars.iter().any(|&g| g == 0.0) {
        return Ok(McEstimate {
            mean: 0.0,
            std_error: 0.0,
            samples: cfg.samples,
        });
    }
    let ms: Vec<u32> = chain.hops().iter().map(|h| h.m).collect();
    let protocol = chain.protocol();
    let scale = chain.bandwidth() / (LN_2 * power);
    let est = run_streams(cfg, |rng| {
        let gamma_e2e = sample_e2e(&ms, &gbars, protocol, rng);
        scale * gamma_e2e.ln_1p()
    });
    Ok(est)
}

#[inline]
fn sample_e2e<R: Rng + ?Sized>(ms: &[u32], gbars: &[f64], protocol: Protocol, rng: &mut R) -> f64 {
    match protocol {
        Protocol::Af => {
            let mut s = 0.0;
            for (&m, &g) in ms.iter().zip(gbars) {
                s += (1.0 / sample_hop_snr(m, g, rng)).ln_1p();
            }
            1.0 / s.exp_m1()
        }
        Protocol::Df => {
            let mut min = f64::INFINITY;
            for (&m, &g) in ms.iter().zip(gbars) {
                min = min.min(sample_hop_snr(m, g, rng));
            }
            min
        }
    }
}

/// Empirical outage frequency: the protocol's end-to-end SNR falling below
/// the threshold.
pub fn estimate_outage(
    chain: &RelayChain,
    pt: &[f64],
    gamma_th: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    if !(gamma_th > 0.0) {
        return Err(Error::domain(
            "estimate_outage",
            format!("gamma_th = {gamma_th} must be > 0"),
        ));
    }
    let gbars = chain.avg_snrs(pt)?;
    if gbars.iter().any(|&g| g == 0.0) {
        return Ok(McEstimate {
            mean: 1.0,
            std_error: 0.0,
            samples: cfg.samples,
        });
    }
    let ms: Vec<u32> = chain.hops().iter().map(|h| h.m).collect();
    let protocol = chain.protocol();
    let mut est = run_streams(cfg, |rng| {
        if sample_e2e(&ms, &gbars, protocol, rng) < gamma_th {
            1.0
        } else {
            0.0
        }
    });
    // binomial standard error
    let p = est.mean;
    est.std_error = (p * (1.0 - p) / cfg.samples as f64).sqrt();
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{df_e2e_cdf, HopProfile, PowerModel};
    use approx::assert_relative_eq;

    fn chain(ms: &[u32], gbars: &[f64], protocol: Protocol) -> RelayChain {
        let hops: Vec<HopProfile> = ms
            .iter()
            .zip(gbars)
            .map(|(&m, &g)| HopProfile {
                m,
                d: 1.0,
                nu: 4.0,
                omega: g,
            })
            .collect();
        let n = hops.len();
        RelayChain::new(hops, protocol, 1.0, 1.0, PowerModel::reference(n)).unwrap()
    }

    #[test]
    fn gamma_sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let (m, gbar) = (2u32, 2.0);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = sample_hop_snr(m, gbar, &mut rng);
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // mean γ̄ = 2, variance γ̄²/m = 2
        assert_relative_eq!(mean, 2.0, max_relative = 0.02);
        assert_relative_eq!(var, 2.0, max_relative = 0.05);
    }

    #[test]
    fn sampler_is_deterministic() {
        let mk = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..32)
                .map(|_| sample_hop_snr(1, 1.0, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn estimate_is_reproducible_and_stream_invariant_layout() {
        let c = chain(&[1, 1], &[1.0, 1.0], Protocol::Df);
        let cfg = McConfig {
            samples: 50_000,
            seed: 9,
            streams: 8,
        };
        let a = estimate_cf(&c, &[1.0, 1.0], &cfg).unwrap();
        let b = estimate_cf(&c, &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn df_outage_matches_cdf() {
        let c = chain(&[1, 1], &[1.0, 1.0], Protocol::Df);
        let cfg = McConfig {
            samples: 200_000,
            seed: 3,
            streams: 8,
        };
        let est = estimate_outage(&c, &[1.0, 1.0], 1.0, &cfg).unwrap();
        let exact = df_e2e_cdf(1.0, &[1.0, 1.0], &[1, 1]).unwrap();
        assert!((est.mean - exact).abs() < 4.0 * est.std_error);
    }

    #[test]
    fn af_outage_dominates_df_outage() {
        let cfg = McConfig {
            samples: 100_000,
            seed: 5,
            streams: 8,
        };
        let caf = chain(&[1, 2], &[2.0, 3.0], Protocol::Af);
        let cdf = chain(&[1, 2], &[2.0, 3.0], Protocol::Df);
        let pt = [1.0, 1.0];
        let oa = estimate_outage(&caf, &pt, 0.8, &cfg).unwrap();
        let od = estimate_outage(&cdf, &pt, 0.8, &cfg).unwrap();
        assert!(oa.mean >= od.mean - 3.0 * (oa.std_error + od.std_error));
    }

    #[test]
    fn zero_power_cf_is_exactly_zero() {
        let c = chain(&[1], &[1.0], Protocol::Df);
        let cfg = McConfig {
            samples: 1000,
            seed: 1,
            streams: 4,
        };
        let est = estimate_cf(&c, &[0.0], &cfg).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        let c = chain(&[1], &[1.0], Protocol::Df);
        let cfg = McConfig {
            samples: 999,
            seed: 1,
            streams: 4,
        };
        assert!(estimate_cf(&c, &[1.0], &cfg).is_err());
    }

    #[test]
    fn estimates_identical_across_thread_counts() {
        let c = chain(&[1, 2], &[1.0, 3.0], Protocol::Af);
        let cfg = McConfig {
            samples: 40_000,
            seed: 21,
            streams: 16,
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate_cf(&c, &[1.0, 1.0], &cfg).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| estimate_cf(&c, &[1.0, 1.0], &cfg).unwrap());
        assert_eq!(single, many);
    }

    #[test]
    fn std_error_shrinks_with_sample_count() {
        let c = chain(&[1], &[1.0], Protocol::Df);
        let se = |n: u64| {
            estimate_cf(
                &c,
                &[1.0],
                &McConfig {
                    samples: n,
                    seed: 11,
                    streams: 8,
                },
            )
            .unwrap()
            .std_error
        };
        let (s4, s5, s6) = (se(10_000), se(100_000), se(1_000_000));
        assert_relative_eq!(s4 / s5, 10f64.sqrt(), max_relative = 0.15);
        assert_relative_eq!(s5 / s6, 10f64.sqrt(), max_relative = 0.15);
    }
}
