//! Truncated Taylor series arithmetic.
//!
//! A `Series<N>` holds the normalized coefficients `f^(k)(x)/k!` for
//! `k < N`. Composing elementary operations on series yields exact
//! derivatives (up to rounding) without finite differences.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Series<const N: usize>(pub [Complex64; N]);

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl<const N: usize> Series<N> {
    pub fn zero() -> Self {
        Series([ZERO; N])
    }

    pub fn constant(c: Complex64) -> Self {
        let mut s = Self::zero();
        s.0[0] = c;
        s
    }

    /// Series from real normalized coefficients; missing entries are zero.
    pub fn from_real(coeffs: &[f64]) -> Self {
        let mut s = Self::zero();
        for (dst, &c) in s.0.iter_mut().zip(coeffs) {
            *dst = Complex64::new(c, 0.0);
        }
        s
    }

    /// Series from derivatives `f, f', f'', ...`.
    pub fn from_derivatives(d: &[Complex64]) -> Self {
        let mut s = Self::zero();
        let mut fact = 1.0;
        for (k, dst) in s.0.iter_mut().enumerate().take(d.len()) {
            if k > 0 {
                fact *= k as f64;
            }
            *dst = d[k] / fact;
        }
        s
    }

    /// Derivatives `f, f', ..., f^(N-1)`.
    pub fn derivatives(&self) -> [Complex64; N] {
        let mut out = self.0;
        let mut fact = 1.0;
        for (k, v) in out.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *v *= fact;
        }
        out
    }

    pub fn value(&self) -> Complex64 {
        self.0[0]
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut s = *self;
        for v in s.0.iter_mut() {
            *v *= c;
        }
        s
    }

    /// d/dh; the top coefficient becomes zero (it is unknown at this order).
    pub fn derivative(&self) -> Self {
        let mut s = Self::zero();
        for k in 1..N {
            s.0[k - 1] = self.0[k] * k as f64;
        }
        s
    }

    /// Antiderivative vanishing at h = 0; the top input coefficient is dropped.
    pub fn integral(&self) -> Self {
        let mut s = Self::zero();
        for k in 1..N {
            s.0[k] = self.0[k - 1] / k as f64;
        }
        s
    }

    pub fn recip(&self) -> Self {
        Self::constant(Complex64::new(1.0, 0.0)).div(self)
    }

    pub fn div(&self, other: &Self) -> Self {
        let b0 = other.0[0];
        let mut q = Self::zero();
        for k in 0..N {
            let mut acc = self.0[k];
            for j in 1..=k {
                acc -= other.0[j] * q.0[k - j];
            }
            q.0[k] = acc / b0;
        }
        q
    }

    /// Principal square root of the constant term, continued analytically.
    pub fn sqrt(&self) -> Self {
        let mut g = Self::zero();
        g.0[0] = self.0[0].sqrt();
        for k in 1..N {
            let mut acc = self.0[k];
            for j in 1..k {
                acc -= g.0[j] * g.0[k - j];
            }
            g.0[k] = acc / (g.0[0] * 2.0);
        }
        g
    }

    pub fn exp(&self) -> Self {
        let mut g = Self::zero();
        g.0[0] = self.0[0].exp();
        for k in 1..N {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += self.0[j] * g.0[k - j] * j as f64;
            }
            g.0[k] = acc / k as f64;
        }
        g
    }

    /// Principal logarithm of the constant term, continued analytically.
    pub fn ln(&self) -> Self {
        let mut g = Self::zero();
        g.0[0] = self.0[0].ln();
        for k in 1..N {
            let mut acc = self.0[k];
            for j in 1..k {
                acc -= g.0[j] * self.0[k - j] * (j as f64 / k as f64);
            }
            g.0[k] = acc / self.0[0];
        }
        g
    }

    /// Drop the constant term.
    pub fn without_constant(&self) -> Self {
        let mut s = *self;
        s.0[0] = ZERO;
        s
    }
}

impl<const N: usize> Add for Series<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for k in 0..N {
            self.0[k] += rhs.0[k];
        }
        self
    }
}

impl<const N: usize> Sub for Series<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for k in 0..N {
            self.0[k] -= rhs.0[k];
        }
        self
    }
}

impl<const N: usize> Neg for Series<N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for v in self.0.iter_mut() {
            *v = -*v;
        }
        self
    }
}

impl<const N: usize> Mul for Series<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for i in 0..N {
            for j in 0..N - i {
                out.0[i + j] += self.0[i] * rhs.0[j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn exp_of_linear_matches_closed_form() {
        // exp(2 + 3h): derivatives are 3^k e^2
        let s = Series::<6>::from_real(&[2.0, 3.0]).exp();
        let d = s.derivatives();
        for (k, v) in d.iter().enumerate() {
            let want = 3f64.powi(k as i32) * 2f64.exp();
            assert!((v.re - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let f = Series::<7>::from_real(&[2.0, -1.0, 0.5, 0.25, 0.1]);
        let g = f.sqrt();
        let back = g * g;
        for k in 0..7 {
            assert!((back.0[k] - f.0[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn ln_inverts_exp() {
        let f = Series::<6>::from_real(&[0.3, 1.5, -0.7, 0.2]);
        let g = f.exp().ln();
        for k in 0..6 {
            assert!((g.0[k] - f.0[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn division_inverts_product() {
        let a = Series::<5>::from_real(&[1.0, 2.0, 3.0]);
        let b = Series::<5>::from_real(&[4.0, -1.0, 0.5, 0.1]);
        let q = (a * b).div(&b);
        for k in 0..5 {
            assert!((q.0[k] - a.0[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn sqrt_of_negative_uses_principal_branch() {
        let s = Series::<3>::from_real(&[-4.0]).sqrt();
        assert!((s.0[0] - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        let _ = c(0.0);
    }

    #[test]
    fn derivative_and_integral_round_trip() {
        let f = Series::<5>::from_real(&[0.0, 1.0, 2.0, 3.0, 0.0]);
        let g = f.derivative().integral();
        for k in 0..5 {
            assert!((g.0[k] - f.0[k]).norm() < 1e-15);
        }
    }
}
