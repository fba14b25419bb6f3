//! Forward-mode automatic differentiation with fixed-width dual numbers.
//!
//! A [`Dual<N>`] carries a value together with its partial derivatives with
//! respect to `N` independent inputs. The IDM equations are written once,
//! generic over [`Scalar`], and evaluated either on plain `f64` or on duals
//! when a gradient is needed.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed to evaluate the IDM and the normal log-density.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;

    fn square(self) -> Self {
        self * self
    }

    /// `base^exponent` for `base >= 0`. A zero base yields an exact zero with
    /// zero derivative, which is the limit of `exp(e * ln b)` for `e > 0`.
    fn pow_nonneg(base: Self, exponent: Self) -> Self {
        if base.value() <= 0.0 {
            Self::constant(0.0)
        } else {
            (exponent * base.ln()).exp()
        }
    }

    /// Square root guarded at zero the same way as [`Scalar::pow_nonneg`].
    fn sqrt_nonneg(self) -> Self {
        if self.value() <= 0.0 {
            Self::constant(0.0)
        } else {
            self.sqrt()
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn pow_nonneg(base: Self, exponent: Self) -> Self {
        if base <= 0.0 {
            0.0
        } else {
            base.powf(exponent)
        }
    }
}

/// Value plus gradient with respect to `N` seeded inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub eps: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(re: f64) -> Self {
        Self { re, eps: [0.0; N] }
    }

    /// An input variable: derivative 1 in slot `index`.
    pub fn variable(re: f64, index: usize) -> Self {
        let mut eps = [0.0; N];
        eps[index] = 1.0;
        Self { re, eps }
    }

    /// Seeds every entry of `values` as its own input.
    pub fn variables(values: [f64; N]) -> [Self; N] {
        let mut out = [Self::constant(0.0); N];
        for (i, v) in values.into_iter().enumerate() {
            out[i] = Self::variable(v, i);
        }
        out
    }

    #[inline]
    fn chain(self, re: f64, d: f64) -> Self {
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e *= d;
        }
        Self { re, eps }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let mut eps = self.eps;
        for (e, r) in eps.iter_mut().zip(rhs.eps) {
            *e += r;
        }
        Self { re: self.re + rhs.re, eps }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let mut eps = self.eps;
        for (e, r) in eps.iter_mut().zip(rhs.eps) {
            *e -= r;
        }
        Self { re: self.re - rhs.re, eps }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = self.eps[i] * rhs.re + self.re * rhs.eps[i];
        }
        Self { re: self.re * rhs.re, eps }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.re;
        let re = self.re * inv;
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = (self.eps[i] - re * rhs.eps[i]) * inv;
        }
        Self { re, eps }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.chain(-self.re, -1.0)
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: f64) -> Self {
        Self { re: self.re + rhs, eps: self.eps }
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: f64) -> Self {
        Self { re: self.re - rhs, eps: self.eps }
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.chain(self.re * rhs, rhs)
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        let inv = 1.0 / rhs;
        self.chain(self.re * inv, inv)
    }
}

impl<const N: usize> Scalar for Dual<N> {
    #[inline]
    fn constant(v: f64) -> Self {
        Dual::constant(v)
    }
    #[inline]
    fn value(&self) -> f64 {
        self.re
    }
    #[inline]
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.chain(r, 0.5 / r)
    }
    #[inline]
    fn ln(self) -> Self {
        self.chain(self.re.ln(), 1.0 / self.re)
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
}
