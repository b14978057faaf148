//! Forward-mode automatic differentiation with multi-component dual numbers.
//!
//! `Dual<N>` carries a value and its gradient with respect to `N` seeded
//! inputs. Code written against [`Scalar`] runs unchanged on `f64` and on
//! `Dual<N>`, which is how the guidance laws obtain exact partial derivatives
//! of their Lyapunov functions.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Minimal real-number interface shared by `f64` and [`Dual`].
pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn cst(v: f64) -> Self;
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn acos(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn exp(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn abs(self) -> Self;
    fn cbrt(self) -> Self {
        if self.re() >= 0.0 {
            self.powf(1.0 / 3.0)
        } else {
            -((-self).powf(1.0 / 3.0))
        }
    }
    fn powi(self, n: i32) -> Self {
        let mut acc = Self::cst(1.0);
        for _ in 0..n.unsigned_abs() {
            acc *= self;
        }
        if n < 0 {
            Self::cst(1.0) / acc
        } else {
            acc
        }
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn acos(self) -> Self {
        f64::acos(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn cbrt(self) -> Self {
        f64::cbrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Value plus gradient with respect to `N` inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub eps: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(re: f64) -> Self {
        Self { re, eps: [0.0; N] }
    }

    /// Independent variable number `i`.
    pub fn variable(re: f64, i: usize) -> Self {
        let mut eps = [0.0; N];
        eps[i] = 1.0;
        Self { re, eps }
    }

    /// Seeds `values` as variables 0..N.
    pub fn variables(values: [f64; N]) -> [Self; N] {
        std::array::from_fn(|i| Self::variable(values[i], i))
    }

    fn chain(self, re: f64, d: f64) -> Self {
        Self {
            re,
            eps: self.eps.map(|e| e * d),
        }
    }
}

impl<const N: usize> PartialOrd for Dual<N> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.re.partial_cmp(&other.re)
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            eps: std::array::from_fn(|i| self.eps[i] + o.eps[i]),
        }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            re: self.re - o.re,
            eps: std::array::from_fn(|i| self.eps[i] - o.eps[i]),
        }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re,
            eps: std::array::from_fn(|i| self.eps[i] * o.re + self.re * o.eps[i]),
        }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.re;
        let re = self.re * inv;
        Self {
            re,
            eps: std::array::from_fn(|i| (self.eps[i] - re * o.eps[i]) * inv),
        }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            re: -self.re,
            eps: self.eps.map(|e| -e),
        }
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Self {
            re: self.re + o,
            eps: self.eps,
        }
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        Self {
            re: self.re - o,
            eps: self.eps,
        }
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        Self {
            re: self.re * o,
            eps: self.eps.map(|e| e * o),
        }
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        self * (1.0 / o)
    }
}

impl<const N: usize> AddAssign for Dual<N> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<const N: usize> SubAssign for Dual<N> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<const N: usize> MulAssign for Dual<N> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<const N: usize> Scalar for Dual<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn re(&self) -> f64 {
        self.re
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn acos(self) -> Self {
        self.chain(self.re.acos(), -1.0 / (1.0 - self.re * self.re).sqrt())
    }
    fn atan2(self, x: Self) -> Self {
        let d = self.re * self.re + x.re * x.re;
        Self {
            re: self.re.atan2(x.re),
            eps: std::array::from_fn(|i| (x.re * self.eps[i] - self.re * x.eps[i]) / d),
        }
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn powf(self, p: f64) -> Self {
        let v = self.re.powf(p);
        self.chain(v, p * self.re.powf(p - 1.0))
    }
    fn abs(self) -> Self {
        if self.re < 0.0 {
            -self
        } else {
            self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-6 * x.abs().max(1.0);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn check<F, G>(f: F, g: G, x: f64)
    where
        F: Fn(f64) -> f64,
        G: Fn(Dual<1>) -> Dual<1>,
    {
        let d = g(Dual::variable(x, 0));
        assert!((d.re - f(x)).abs() < 1e-14 * f(x).abs().max(1.0));
        let want = fd(&f, x);
        assert!(
            (d.eps[0] - want).abs() < 1e-7 * want.abs().max(1.0),
            "x={x}: dual {} vs fd {want}",
            d.eps[0]
        );
    }

    #[test]
    fn elementary_derivatives() {
        check(f64::sqrt, Scalar::sqrt, 2.3);
        check(f64::sin, Scalar::sin, 0.7);
        check(f64::cos, Scalar::cos, -1.1);
        check(f64::acos, Scalar::acos, 0.3);
        check(f64::exp, Scalar::exp, 0.4);
        check(|x| x.powf(2.5), |x| x.powf(2.5), 1.7);
        check(|x| x.cbrt(), Scalar::cbrt, -0.4);
        check(|x| 1.0 / (x * x + 1.0), |x| Dual::cst(1.0) / (x * x + 1.0), 0.9);
        check(|x| x.powi(-3), |x| Scalar::powi(x, -3), 1.3);
    }

    #[test]
    fn atan2_partials() {
        let [y, x] = Dual::<2>::variables([0.4, -0.8]);
        let a = y.atan2(x);
        let d = 0.4f64 * 0.4 + 0.8 * 0.8;
        assert!((a.eps[0] - (-0.8 / d)).abs() < 1e-15);
        assert!((a.eps[1] - (-0.4 / d)).abs() < 1e-15);
    }

    #[test]
    fn multivariate_product_rule() {
        let [x, y, z] = Dual::<3>::variables([1.5, -2.0, 0.5]);
        let f = x * y * z + y.sin();
        assert!((f.eps[0] - (-2.0 * 0.5)).abs() < 1e-15);
        assert!((f.eps[1] - (1.5 * 0.5 + (-2.0f64).cos())).abs() < 1e-15);
        assert!((f.eps[2] - (1.5 * -2.0)).abs() < 1e-15);
    }
}
