//! Special functions behind the closed-form consumption-factor expressions:
//! the Gamma family, the Tricomi confluent hypergeometric function U, the
//! scaled exponential integral, and Gauss-Laguerre quadrature rules.
//!
//! All operations are pure; [`QuadratureRule`] is immutable after
//! construction and freely shareable across threads.

mod expint;
mod gamma;
mod laguerre;
mod tricomi;

pub use expint::exp_scaled_e1;
pub use gamma::{ln_gamma, reg_lower_gamma};
pub use laguerre::{gauss_laguerre, QuadratureRule};
pub use tricomi::tricomi_u;

pub(crate) use gamma::{alternating_poincare_sum, ln_gamma_raw, ln_reg_upper_gamma_int};
