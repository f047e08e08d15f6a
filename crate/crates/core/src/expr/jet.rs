//! Second-order forward-mode dual numbers.
//!
//! A [`Jet2`] carries a value together with its full gradient and Hessian
//! with respect to up to [`MAX_VARS`] independent variables. Arithmetic on
//! jets propagates both derivative orders exactly, so composing expression
//! evaluation, matrix inversion, and contraction yields exact first and
//! second derivatives of the composite (up to floating-point rounding).

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Largest number of independent variables a jet can track.
pub const MAX_VARS: usize = 8;
const TRI: usize = MAX_VARS * (MAX_VARS + 1) / 2;

#[inline]
fn tri(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    // row-major packed upper triangle for an MAX_VARS x MAX_VARS matrix
    a * MAX_VARS - a * (a + 1) / 2 + b
}

#[derive(Clone, Copy, PartialEq)]
pub struct Jet2 {
    n: usize,
    value: f64,
    grad: [f64; MAX_VARS],
    hess: [f64; TRI],
}

impl fmt::Debug for Jet2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet2")
            .field("value", &self.value)
            .field("gradient", &self.gradient())
            .field("hessian", &self.hessian())
            .finish()
    }
}

impl Jet2 {
    pub fn constant(n: usize, value: f64) -> Self {
        debug_assert!(n <= MAX_VARS);
        Jet2 {
            n,
            value,
            grad: [0.0; MAX_VARS],
            hess: [0.0; TRI],
        }
    }

    /// The `index`-th coordinate function evaluated at `value`.
    pub fn variable(n: usize, index: usize, value: f64) -> Self {
        let mut j = Jet2::constant(n, value);
        j.grad[index] = 1.0;
        j
    }

    pub fn from_parts(value: f64, gradient: &[f64], hessian: &[Vec<f64>]) -> Self {
        let n = gradient.len();
        let mut j = Jet2::constant(n, value);
        j.grad[..n].copy_from_slice(gradient);
        for (a, row) in hessian.iter().enumerate().take(n) {
            for (b, &v) in row.iter().enumerate().take(n).skip(a) {
                j.hess[tri(a, b)] = v;
            }
        }
        j
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn d(&self, i: usize) -> f64 {
        self.grad[i]
    }

    #[inline]
    pub fn dd(&self, i: usize, j: usize) -> f64 {
        self.hess[tri(i, j)]
    }

    pub fn gradient(&self) -> Vec<f64> {
        self.grad[..self.n].to_vec()
    }

    pub fn hessian(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.dd(i, j)).collect())
            .collect()
    }

    /// Raises the tracked variable count to `n`; derivatives for the new
    /// variables are zero.
    pub fn widen(mut self, n: usize) -> Self {
        debug_assert!(n <= MAX_VARS);
        self.n = self.n.max(n);
        self
    }

    /// Re-expresses a jet over `self.n` variables as one over `total`
    /// variables, placing the original variables at `offset..offset+n`.
    pub fn embed(&self, offset: usize, total: usize) -> Self {
        debug_assert!(offset + self.n <= total && total <= MAX_VARS);
        let mut out = Jet2::constant(total, self.value);
        for i in 0..self.n {
            out.grad[offset + i] = self.grad[i];
            for j in i..self.n {
                out.hess[tri(offset + i, offset + j)] = self.hess[tri(i, j)];
            }
        }
        out
    }

    /// Applies a scalar function given its value and first two derivatives at
    /// `self.value`.
    #[inline]
    fn chain(&self, f: f64, df: f64, ddf: f64) -> Self {
        let mut out = Jet2::constant(self.n, f);
        for i in 0..self.n {
            out.grad[i] = df * self.grad[i];
        }
        for i in 0..self.n {
            for j in i..self.n {
                let k = tri(i, j);
                out.hess[k] = df * self.hess[k] + ddf * self.grad[i] * self.grad[j];
            }
        }
        out
    }

    pub fn recip(&self) -> Self {
        let v = self.value;
        let r = 1.0 / v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn tan(&self) -> Self {
        let t = self.value.tan();
        let sec2 = 1.0 + t * t;
        self.chain(t, sec2, 2.0 * t * sec2)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.value))
    }

    pub fn sinh(&self) -> Self {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(&self) -> Self {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(c, s, c)
    }

    pub fn tanh(&self) -> Self {
        let t = self.value.tanh();
        let d = 1.0 - t * t;
        self.chain(t, d, -2.0 * t * d)
    }

    /// Integer power by repeated multiplication (binary exponentiation).
    pub fn powi(&self, exp: i32) -> Self {
        if exp < 0 {
            return self.powi(-exp).recip();
        }
        let mut base = *self;
        let mut acc = Jet2::constant(self.n, 1.0);
        let mut e = exp as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad[..self.n].iter().all(|x| x.is_finite())
            && (0..self.n).all(|i| (i..self.n).all(|j| self.dd(i, j).is_finite()))
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    #[inline]
    fn add(mut self, rhs: Jet2) -> Jet2 {
        self += rhs;
        self
    }
}

impl AddAssign for Jet2 {
    #[inline]
    fn add_assign(&mut self, rhs: Jet2) {
        let n = self.n.max(rhs.n);
        self.n = n;
        self.value += rhs.value;
        for i in 0..n {
            self.grad[i] += rhs.grad[i];
            for j in i..n {
                self.hess[tri(i, j)] += rhs.hess[tri(i, j)];
            }
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    #[inline]
    fn sub(mut self, rhs: Jet2) -> Jet2 {
        self -= rhs;
        self
    }
}

impl SubAssign for Jet2 {
    #[inline]
    fn sub_assign(&mut self, rhs: Jet2) {
        let n = self.n.max(rhs.n);
        self.n = n;
        self.value -= rhs.value;
        for i in 0..n {
            self.grad[i] -= rhs.grad[i];
            for j in i..n {
                self.hess[tri(i, j)] -= rhs.hess[tri(i, j)];
            }
        }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    #[inline]
    fn neg(mut self) -> Jet2 {
        self.value = -self.value;
        for i in 0..self.n {
            self.grad[i] = -self.grad[i];
            for j in i..self.n {
                let k = tri(i, j);
                self.hess[k] = -self.hess[k];
            }
        }
        self
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    #[inline]
    fn mul(self, rhs: Jet2) -> Jet2 {
        let n = self.n.max(rhs.n);
        let (a, b) = (self.value, rhs.value);
        let mut out = Jet2::constant(n, a * b);
        for i in 0..n {
            out.grad[i] = a * rhs.grad[i] + b * self.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                let k = tri(i, j);
                out.hess[k] = a * rhs.hess[k]
                    + b * self.hess[k]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
            }
        }
        out
    }
}

impl MulAssign for Jet2 {
    fn mul_assign(&mut self, rhs: Jet2) {
        *self = *self * rhs;
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet2) -> Jet2 {
        self * rhs.recip()
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    #[inline]
    fn mul(mut self, rhs: f64) -> Jet2 {
        self.value *= rhs;
        for i in 0..self.n {
            self.grad[i] *= rhs;
            for j in i..self.n {
                self.hess[tri(i, j)] *= rhs;
            }
        }
        self
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    #[inline]
    fn add(mut self, rhs: f64) -> Jet2 {
        self.value += rhs;
        self
    }
}

/// Scalar arithmetic shared by `f64` and [`Jet2`], so the expression
/// evaluator and small matrix routines can run on either.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant carrying no derivative information.
    fn from_f64(c: f64) -> Self;
    fn val(&self) -> f64;
    /// True when the value and every derivative part are exactly zero.
    fn is_exact_zero(&self) -> bool;
    fn s_sin(&self) -> Self;
    fn s_cos(&self) -> Self;
    fn s_tan(&self) -> Self;
    fn s_exp(&self) -> Self;
    fn s_ln(&self) -> Self;
    fn s_sqrt(&self) -> Self;
    fn s_sinh(&self) -> Self;
    fn s_cosh(&self) -> Self;
    fn s_tanh(&self) -> Self;
    fn s_powi(&self, e: i32) -> Self;
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn val(&self) -> f64 {
        *self
    }
    fn is_exact_zero(&self) -> bool {
        *self == 0.0
    }
    fn s_sin(&self) -> Self {
        self.sin()
    }
    fn s_cos(&self) -> Self {
        self.cos()
    }
    fn s_tan(&self) -> Self {
        self.tan()
    }
    fn s_exp(&self) -> Self {
        self.exp()
    }
    fn s_ln(&self) -> Self {
        self.ln()
    }
    fn s_sqrt(&self) -> Self {
        self.sqrt()
    }
    fn s_sinh(&self) -> Self {
        self.sinh()
    }
    fn s_cosh(&self) -> Self {
        self.cosh()
    }
    fn s_tanh(&self) -> Self {
        self.tanh()
    }
    fn s_powi(&self, e: i32) -> Self {
        // repeated multiplication, matching the jet path
        if e < 0 {
            return 1.0 / self.s_powi(-e);
        }
        let (mut base, mut acc, mut e) = (*self, 1.0, e as u32);
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            e >>= 1;
            if e > 0 {
                base *= base;
            }
        }
        acc
    }
}

impl Scalar for Jet2 {
    fn from_f64(c: f64) -> Self {
        // zero-variable jets combine with any jet through max(n)
        Jet2::constant(0, c)
    }
    fn val(&self) -> f64 {
        self.value
    }
    fn is_exact_zero(&self) -> bool {
        self.value == 0.0
            && self.grad[..self.n].iter().all(|&g| g == 0.0)
            && self.hess.iter().all(|&h| h == 0.0)
    }
    fn s_sin(&self) -> Self {
        self.sin()
    }
    fn s_cos(&self) -> Self {
        self.cos()
    }
    fn s_tan(&self) -> Self {
        self.tan()
    }
    fn s_exp(&self) -> Self {
        self.exp()
    }
    fn s_ln(&self) -> Self {
        self.ln()
    }
    fn s_sqrt(&self) -> Self {
        self.sqrt()
    }
    fn s_sinh(&self) -> Self {
        self.sinh()
    }
    fn s_cosh(&self) -> Self {
        self.cosh()
    }
    fn s_tanh(&self) -> Self {
        self.tanh()
    }
    fn s_powi(&self, e: i32) -> Self {
        self.powi(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_hessian() {
        let x = Jet2::variable(2, 0, 3.0);
        let y = Jet2::variable(2, 1, 5.0);
        let p = x * y;
        assert_eq!(p.value(), 15.0);
        assert_eq!(p.gradient(), vec![5.0, 3.0]);
        assert_eq!(p.hessian(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn quotient_matches_hand_derivatives() {
        // f = x / y at (2, 4): f_x = 1/y, f_y = -x/y^2, f_xy = -1/y^2, f_yy = 2x/y^3
        let x = Jet2::variable(2, 0, 2.0);
        let y = Jet2::variable(2, 1, 4.0);
        let q = x / y;
        assert!((q.d(0) - 0.25).abs() < 1e-15);
        assert!((q.d(1) + 0.125).abs() < 1e-15);
        assert!((q.dd(0, 1) + 1.0 / 16.0).abs() < 1e-15);
        assert!((q.dd(1, 1) - 4.0 / 64.0).abs() < 1e-15);
        assert_eq!(q.dd(0, 0), 0.0);
    }

    #[test]
    fn embed_places_block() {
        let x = Jet2::variable(1, 0, 2.0).powi(3);
        let e = x.embed(2, 4);
        assert_eq!(e.value(), 8.0);
        assert_eq!(e.gradient(), vec![0.0, 0.0, 12.0, 0.0]);
        assert_eq!(e.dd(2, 2), 12.0);
        assert_eq!(e.dd(0, 2), 0.0);
    }

    #[test]
    fn negative_powi_is_reciprocal() {
        let x = Jet2::variable(1, 0, 2.0);
        let a = x.powi(-2);
        let b = (x * x).recip();
        assert!((a.value() - b.value()).abs() < 1e-15);
        assert!((a.d(0) - b.d(0)).abs() < 1e-15);
        assert!((a.dd(0, 0) - b.dd(0, 0)).abs() < 1e-15);
    }
}
