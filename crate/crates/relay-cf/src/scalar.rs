//! Forward-mode automatic differentiation via dual numbers.
//!
//! The closed-form consumption-factor expressions are smooth in the per-hop
//! average SNRs, so their gradients are obtained by evaluating the same code
//! path with [`Dual`] in place of `f64`. Every numeric kernel that must be
//! differentiated is generic over [`Scalar`].

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// The arithmetic surface required by the differentiable kernels.
///
/// Implemented by `f64` (plain evaluation) and by [`Dual`] (value plus first
/// derivative with respect to a single seed variable).
pub trait Scalar:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Lift a constant.
    fn from_f64(x: f64) -> Self;
    /// The primal (value) part.
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    /// Integer power by repeated multiplication (exact derivative rule).
    fn powi(self, n: i32) -> Self;
    fn recip(self) -> Self {
        Self::from_f64(1.0) / self
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline(always)]
    fn value(self) -> f64 {
        self
    }
    #[inline(always)]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline(always)]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline(always)]
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline(always)]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline(always)]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// A first-order dual number `v + d·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    /// Value part.
    pub v: f64,
    /// Derivative part.
    pub d: f64,
}

impl Dual {
    /// A constant (zero derivative).
    #[inline(always)]
    pub fn constant(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }

    /// The seed variable (unit derivative).
    #[inline(always)]
    pub fn variable(v: f64) -> Self {
        Dual { v, d: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline(always)]
    fn add(self, rhs: Dual) -> Dual {
        Dual {
            v: self.v + rhs.v,
            d: self.d + rhs.d,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline(always)]
    fn sub(self, rhs: Dual) -> Dual {
        Dual {
            v: self.v - rhs.v,
            d: self.d - rhs.d,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline(always)]
    fn mul(self, rhs: Dual) -> Dual {
        Dual {
            v: self.v * rhs.v,
            d: self.v * rhs.d + self.d * rhs.v,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline(always)]
    fn div(self, rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.v;
        Dual {
            v: self.v * inv,
            d: (self.d - self.v * rhs.d * inv) * inv,
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline(always)]
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: -self.d,
        }
    }
}

impl Scalar for Dual {
    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }
    #[inline(always)]
    fn value(self) -> f64 {
        self.v
    }
    #[inline(always)]
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual {
            v: e,
            d: self.d * e,
        }
    }
    #[inline(always)]
    fn ln(self) -> Self {
        Dual {
            v: self.v.ln(),
            d: self.d / self.v,
        }
    }
    #[inline(always)]
    fn ln_1p(self) -> Self {
        Dual {
            v: self.v.ln_1p(),
            d: self.d / (1.0 + self.v),
        }
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual {
            v: s,
            d: self.d / (2.0 * s),
        }
    }
    #[inline(always)]
    fn abs(self) -> Self {
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Dual::constant(1.0),
            _ if n < 0 => Scalar::powi(self, -n).recip(),
            _ => {
                let mut acc = self;
                for _ in 1..n {
                    acc = acc * self;
                }
                acc
            }
        }
    }
}
