//! Second-order forward-mode differentiation.
//!
//! [`HyperDual`] carries a value together with its full gradient and Hessian
//! with respect to up to [`MAX_DIM`] seeded variables. Arithmetic and the
//! elementary functions propagate both orders through the exact chain rule,
//! so a single evaluation pass yields truncation-free second derivatives.
//!
//! Everything that builds metrics is written against the [`Scalar`] trait, so
//! the same closed form can be evaluated on plain `f64`, on a `HyperDual<f64>`
//! (2-jets), or on a nested `HyperDual<HyperDual<f64>>` when derivatives of
//! first-derivative quantities are needed.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::MAX_DIM;

/// Numeric type usable inside metric and expression evaluation.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Whether the type carries derivative information.
    const HAS_DERIVATIVES: bool;

    fn cst(value: f64) -> Self;
    /// Primal (undifferentiated) value.
    fn re(&self) -> f64;

    fn recip(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn exp_m1(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn asinh(self) -> Self;
    /// `self^p` for a constant real exponent.
    fn powf(self, p: f64) -> Self;
    fn powi(self, k: i32) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }
}

impl Scalar for f64 {
    const HAS_DERIVATIVES: bool = false;

    fn cst(value: f64) -> Self {
        value
    }
    fn re(&self) -> f64 {
        *self
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn asinh(self) -> Self {
        f64::asinh(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
}

/// Value, gradient and Hessian of a function of `n` variables.
#[derive(Clone, Copy, Debug)]
pub struct HyperDual<T: Scalar = f64> {
    pub n: usize,
    pub value: T,
    pub grad: [T; MAX_DIM],
    pub hess: [[T; MAX_DIM]; MAX_DIM],
}

impl<T: Scalar> HyperDual<T> {
    pub fn constant(n: usize, value: T) -> Self {
        Self {
            n,
            value,
            grad: [T::zero(); MAX_DIM],
            hess: [[T::zero(); MAX_DIM]; MAX_DIM],
        }
    }

    /// Independent variable number `index` with the given value.
    pub fn variable(n: usize, index: usize, value: T) -> Self {
        let mut out = Self::constant(n, value);
        out.grad[index] = T::one();
        out
    }

    /// Applies a scalar function given its value and first two derivatives at
    /// `self.value`.
    fn chain(self, f0: T, f1: T, f2: T) -> Self {
        let n = self.n;
        let mut out = Self::constant(n, f0);
        for i in 0..n {
            out.grad[i] = f1 * self.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                let h = f1 * self.hess[i][j] + f2 * self.grad[i] * self.grad[j];
                out.hess[i][j] = h;
                out.hess[j][i] = h;
            }
        }
        out
    }

    fn dim(&self, other: &Self) -> usize {
        // Constants built through `Scalar::cst` carry n = 0.
        self.n.max(other.n)
    }
}

impl<T: Scalar> Add for HyperDual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let n = self.dim(&rhs);
        let mut out = Self::constant(n, self.value + rhs.value);
        for i in 0..n {
            out.grad[i] = self.grad[i] + rhs.grad[i];
            for j in 0..n {
                out.hess[i][j] = self.hess[i][j] + rhs.hess[i][j];
            }
        }
        out
    }
}

impl<T: Scalar> Sub for HyperDual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let n = self.dim(&rhs);
        let mut out = Self::constant(n, self.value - rhs.value);
        for i in 0..n {
            out.grad[i] = self.grad[i] - rhs.grad[i];
            for j in 0..n {
                out.hess[i][j] = self.hess[i][j] - rhs.hess[i][j];
            }
        }
        out
    }
}

impl<T: Scalar> Mul for HyperDual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let n = self.dim(&rhs);
        let (a, b) = (self.value, rhs.value);
        let mut out = Self::constant(n, a * b);
        for i in 0..n {
            out.grad[i] = a * rhs.grad[i] + b * self.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                let h = a * rhs.hess[i][j]
                    + b * self.hess[i][j]
                    + self.grad[i] * rhs.grad[j]
                    + rhs.grad[i] * self.grad[j];
                out.hess[i][j] = h;
                out.hess[j][i] = h;
            }
        }
        out
    }
}

impl<T: Scalar> Div for HyperDual<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<T: Scalar> Neg for HyperDual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut out = self;
        out.value = -self.value;
        for i in 0..self.n {
            out.grad[i] = -self.grad[i];
            for j in 0..self.n {
                out.hess[i][j] = -self.hess[i][j];
            }
        }
        out
    }
}

impl<T: Scalar> Scalar for HyperDual<T> {
    const HAS_DERIVATIVES: bool = true;

    fn cst(value: f64) -> Self {
        Self::constant(0, T::cst(value))
    }

    fn re(&self) -> f64 {
        self.value.re()
    }

    fn recip(self) -> Self {
        let inv = self.value.recip();
        let inv2 = inv * inv;
        self.chain(inv, -inv2, (inv2 * inv).scale(2.0))
    }

    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        let d1 = s.recip().scale(0.5);
        let d2 = -(d1 / self.value).scale(0.5);
        self.chain(s, d1, d2)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    fn exp_m1(self) -> Self {
        let e = self.value.exp();
        self.chain(self.value.exp_m1(), e, e)
    }

    fn ln(self) -> Self {
        let inv = self.value.recip();
        self.chain(self.value.ln(), inv, -(inv * inv))
    }

    fn ln_1p(self) -> Self {
        let inv = (T::one() + self.value).recip();
        self.chain(self.value.ln_1p(), inv, -(inv * inv))
    }

    fn sin(self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(s, c, -s)
    }

    fn cos(self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(c, -s, -c)
    }

    fn tan(self) -> Self {
        let t = self.value.tan();
        let sec2 = T::one() + t * t;
        self.chain(t, sec2, (sec2 * t).scale(2.0))
    }

    fn sinh(self) -> Self {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(s, c, s)
    }

    fn cosh(self) -> Self {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(c, s, c)
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        let sech2 = T::one() - t * t;
        self.chain(t, sech2, -(sech2 * t).scale(2.0))
    }

    fn asinh(self) -> Self {
        let q = (T::one() + self.value * self.value).sqrt().recip();
        let d2 = -(self.value * q * q * q);
        self.chain(self.value.asinh(), q, d2)
    }

    fn powf(self, p: f64) -> Self {
        let x = self.value;
        self.chain(
            x.powf(p),
            x.powf(p - 1.0).scale(p),
            x.powf(p - 2.0).scale(p * (p - 1.0)),
        )
    }

    fn powi(self, k: i32) -> Self {
        let x = self.value;
        let kf = k as f64;
        let d1 = if k == 0 { T::zero() } else { x.powi(k - 1).scale(kf) };
        let d2 = if k == 0 || k == 1 {
            T::zero()
        } else {
            x.powi(k - 2).scale(kf * (kf - 1.0))
        };
        self.chain(x.powi(k), d1, d2)
    }
}

/// Seeds `n` independent variables at `point`.
pub fn seed<T: Scalar>(point: &[T]) -> Vec<HyperDual<T>> {
    let n = point.len();
    point
        .iter()
        .enumerate()
        .map(|(i, &v)| HyperDual::variable(n, i, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn product_rule_second_order() {
        let v = seed(&[2.0, 3.0]);
        let f = v[0] * v[0] * v[1];
        assert!(close(f.value, 12.0));
        assert!(close(f.grad[0], 12.0));
        assert!(close(f.grad[1], 4.0));
        assert!(close(f.hess[0][0], 6.0));
        assert!(close(f.hess[0][1], 4.0));
        assert!(close(f.hess[1][1], 0.0));
    }

    #[test]
    fn elementary_functions_match_textbook_derivatives() {
        let x = HyperDual::variable(1, 0, 0.7);
        let cases: Vec<(HyperDual, f64, f64, f64)> = vec![
            (x.sinh(), 0.7f64.sinh(), 0.7f64.cosh(), 0.7f64.sinh()),
            (x.cosh(), 0.7f64.cosh(), 0.7f64.sinh(), 0.7f64.cosh()),
            (x.ln(), 0.7f64.ln(), 1.0 / 0.7, -1.0 / 0.49),
            (x.sqrt(), 0.7f64.sqrt(), 0.5 / 0.7f64.sqrt(), -0.25 * 0.7f64.powf(-1.5)),
            (x.powf(2.5), 0.7f64.powf(2.5), 2.5 * 0.7f64.powf(1.5), 3.75 * 0.7f64.sqrt()),
            (x.tan(), 0.7f64.tan(), 1.0 / 0.7f64.cos().powi(2), 2.0 * 0.7f64.tan() / 0.7f64.cos().powi(2)),
        ];
        for (f, v, d1, d2) in cases {
            assert!(close(f.value, v), "{f:?}");
            assert!(close(f.grad[0], d1), "{f:?}");
            assert!(close(f.hess[0][0], d2), "{f:?}");
        }
    }

    #[test]
    fn nested_duals_give_third_derivatives() {
        // f = x^4: d/dx of (f') should be 12 x^2 and its derivative 24 x.
        let inner = HyperDual::variable(1, 0, 1.5);
        let outer = HyperDual::variable(1, 0, inner);
        let f = outer.powi(4);
        let fp = f.grad[0];
        assert!(close(fp.value, 4.0 * 1.5f64.powi(3)));
        assert!(close(fp.grad[0], 12.0 * 1.5f64.powi(2)));
        assert!(close(fp.hess[0][0], 24.0 * 1.5));
    }
}
