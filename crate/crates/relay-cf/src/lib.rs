//! Energy efficiency of N-hop relay chains over Nakagami-m fading.
//!
//! The consumption factor (CF) — Shannon rate divided by total consumed
//! power — is computed in closed form for amplify-and-forward and
//! decode-and-forward relaying, validated against Monte-Carlo simulation,
//! and maximized over the per-node transmit powers under a total power
//! budget by five allocation strategies.
//!
//! Modules:
//! * [`specfun`] — Gamma family, Tricomi U, scaled E₁, Gauss-Laguerre rules.
//! * [`channel`] — hop/chain model, end-to-end SNR and CDF, power totals.
//! * [`metrics`] — closed-form average CF and capacity, with exact
//!   forward-mode gradients.
//! * [`montecarlo`] — deterministic sampling oracle.
//! * [`optimizer`] — the allocation strategies and the KKT diagnostic.

pub mod channel;
pub mod error;
pub mod metrics;
pub mod montecarlo;
pub mod optimizer;
pub mod scalar;
pub mod specfun;

pub use error::{Error, Result};
