//! Truncated complex Taylor series on the unit disk.
//!
//! A [`TaylorSeries`] of order `N` stores the coefficients `c_0..=c_N` of
//! `sum c_k z^k`. Every operation truncates its result back to order `N`,
//! so the low coefficients of a result are exact whenever the inputs are
//! exact to the same order.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficient magnitude above which a result is considered ill-conditioned.
pub const COEFF_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorSeries {
    coeffs: Vec<C64>,
}

impl TaylorSeries {
    /// Builds a series from coefficients; an empty vector becomes the order-0 zero.
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(C64::new(0.0, 0.0));
        }
        TaylorSeries { coeffs }
    }

    pub fn zeros(order: usize) -> Self {
        TaylorSeries { coeffs: vec![C64::new(0.0, 0.0); order + 1] }
    }

    pub fn constant(c: C64, order: usize) -> Self {
        let mut s = Self::zeros(order);
        s.coeffs[0] = c;
        s
    }

    pub fn one(order: usize) -> Self {
        Self::constant(C64::new(1.0, 0.0), order)
    }

    /// `c z^k`, truncated (zero if `k > order`).
    pub fn monomial(k: usize, c: C64, order: usize) -> Self {
        let mut s = Self::zeros(order);
        if k <= order {
            s.coeffs[k] = c;
        }
        s
    }

    /// The identity symbol `z`.
    pub fn identity(order: usize) -> Self {
        Self::monomial(1, C64::new(1.0, 0.0), order)
    }

    /// Polynomial from coefficients, padded or truncated to `order`.
    pub fn from_poly(poly: &[C64], order: usize) -> Self {
        let mut s = Self::zeros(order);
        for (k, &c) in poly.iter().enumerate().take(order + 1) {
            s.coeffs[k] = c;
        }
        s
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    #[inline]
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    #[inline]
    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    /// Same function at a different truncation order (zero padded).
    pub fn with_order(&self, order: usize) -> Self {
        Self::from_poly(&self.coeffs, order)
    }

    /// Index of the last nonzero coefficient, if any.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| *c != C64::new(0.0, 0.0))
    }

    /// Horner evaluation of the stored polynomial.
    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Flags coefficient blow-up relative to `scale` (use 1.0 for O(1) data).
    pub fn ensure_conditioned(&self, scale: f64, what: &str) -> Result<()> {
        let m = self.max_abs();
        if !m.is_finite() || m > COEFF_LIMIT * scale.max(1.0) {
            return Err(Error::IllConditioned(format!(
                "{what}: max |c_k| = {m:e} exceeds {:e}",
                COEFF_LIMIT * scale.max(1.0)
            )));
        }
        Ok(())
    }

    pub fn scale(&self, c: C64) -> Self {
        TaylorSeries { coeffs: self.coeffs.iter().map(|&x| x * c).collect() }
    }

    /// Coefficientwise maximum difference over indices `0..=upto`.
    pub fn max_diff(&self, other: &Self, upto: usize) -> f64 {
        (0..=upto).map(|k| (self.coeff(k) - other.coeff(k)).norm()).fold(0.0, f64::max)
    }

    /// Cauchy product truncated to the larger of the two orders.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.order().max(other.order());
        let mut out = vec![C64::new(0.0, 0.0); n + 1];
        let da = self.degree();
        let db = other.degree();
        let (Some(da), Some(db)) = (da, db) else {
            return Self::zeros(n);
        };
        for (i, &a) in self.coeffs[..=da].iter().enumerate() {
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            let top = db.min(n - i);
            for (j, &b) in other.coeffs[..=top].iter().enumerate() {
                out[i + j] += a * b;
            }
            if i == n {
                break;
            }
        }
        TaylorSeries { coeffs: out }
    }

    /// Multiplies by `p0 + p1 z` in place, O(N).
    pub fn mul_linear(&mut self, p0: C64, p1: C64) {
        for k in (0..self.coeffs.len()).rev() {
            let prev = if k > 0 { self.coeffs[k - 1] } else { C64::new(0.0, 0.0) };
            self.coeffs[k] = self.coeffs[k] * p0 + prev * p1;
        }
    }

    /// Divides by `q0 + q1 z` in place, O(N). Requires `q0 != 0`.
    pub fn div_linear(&mut self, q0: C64, q1: C64) {
        let inv = q0.inv();
        for k in 0..self.coeffs.len() {
            let prev = if k > 0 { self.coeffs[k - 1] } else { C64::new(0.0, 0.0) };
            self.coeffs[k] = (self.coeffs[k] - q1 * prev) * inv;
        }
    }

    /// Multiplicative inverse; fails when the constant term vanishes.
    pub fn recip(&self) -> Result<Self> {
        let c0 = self.coeffs[0];
        if c0.norm() == 0.0 {
            return Err(Error::DivisionByZero);
        }
        let n = self.order();
        let inv0 = c0.inv();
        let mut out = vec![C64::new(0.0, 0.0); n + 1];
        out[0] = inv0;
        let deg = self.degree().unwrap_or(0);
        for k in 1..=n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 1..=k.min(deg) {
                acc += self.coeffs[j] * out[k - j];
            }
            out[k] = -acc * inv0;
        }
        Ok(TaylorSeries { coeffs: out })
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.recip()?))
    }

    /// Term-by-term derivative; the result has order `N - 1` (order 0 stays 0).
    pub fn derivative(&self) -> Self {
        let n = self.order();
        if n == 0 {
            return Self::zeros(0);
        }
        TaylorSeries {
            coeffs: (1..=n).map(|k| self.coeffs[k] * k as f64).collect(),
        }
    }

    /// Antiderivative vanishing at zero; the top coefficient is dropped to keep the order.
    pub fn integral(&self) -> Self {
        let n = self.order();
        let mut out = vec![C64::new(0.0, 0.0); n + 1];
        for (k, o) in out.iter_mut().enumerate().skip(1) {
            *o = self.coeffs[k - 1] / k as f64;
        }
        TaylorSeries { coeffs: out }
    }

    /// `exp(f)`: `e^{f(0)}` times the formal exponential of `f - f(0)`.
    pub fn exp(&self) -> Self {
        let n = self.order();
        let mut g = vec![C64::new(0.0, 0.0); n + 1];
        g[0] = self.coeffs[0].exp();
        // n g_n = sum_{k=1}^{n} k f_k g_{n-k}
        let deg = self.degree().unwrap_or(0);
        let kf: Vec<C64> = self.coeffs.iter().enumerate().map(|(k, &c)| c * k as f64).collect();
        for m in 1..=n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 1..=m.min(deg) {
                acc += kf[k] * g[m - k];
            }
            g[m] = acc / m as f64;
        }
        TaylorSeries { coeffs: g }
    }

    /// `log(f)` with the principal value at zero, continued holomorphically.
    pub fn log(&self) -> Result<Self> {
        let c0 = self.coeffs[0];
        if c0.norm() == 0.0 {
            return Err(Error::LogAtZero);
        }
        // (log f)' = f'/f
        let n = self.order();
        let df = self.derivative().with_order(n);
        let q = df.div(self)?;
        let mut out = q.integral();
        out.coeffs[0] = c0.ln();
        Ok(out)
    }

    /// `f^s` with the principal branch at zero: `f(0)^s exp(s log(f/f(0)))`.
    pub fn powc(&self, s: C64) -> Result<Self> {
        let c0 = self.coeffs[0];
        if c0.norm() == 0.0 {
            return Err(Error::LogAtZero);
        }
        let mut l = self.scale(c0.inv()).log()?;
        l.coeffs[0] = C64::new(0.0, 0.0);
        Ok(l.scale(s).exp().scale(principal_pow(c0, s)))
    }

    /// Non-negative integer power by repeated squaring.
    pub fn powi(&self, mut e: u32) -> Self {
        let n = self.order();
        let mut base = self.clone();
        let mut acc = Self::one(n);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// `f ∘ phi` by Horner's scheme; requires `|phi(0)| < 1`.
    pub fn compose(&self, phi: &Self) -> Result<Self> {
        let p0 = phi.coeffs[0].norm();
        if p0 >= 1.0 {
            return Err(Error::DivergentComposition(p0));
        }
        let n = self.order().max(phi.order());
        let phi = phi.with_order(n);
        let Some(deg) = self.degree() else {
            return Ok(Self::zeros(n));
        };
        let mut acc = Self::constant(self.coeffs[deg], n);
        for k in (0..deg).rev() {
            acc = acc.mul(&phi);
            acc.coeffs[0] += self.coeffs[k];
        }
        Ok(acc)
    }

    /// `f ∘ M` for the Möbius map `M(z) = (alpha z + beta)/(gamma z + delta)`.
    ///
    /// Horner's scheme where each step multiplies by a linear numerator and
    /// divides by a linear denominator, O(N) per step.
    pub fn compose_mobius(&self, alpha: C64, beta: C64, gamma: C64, delta: C64) -> Self {
        let n = self.order();
        let Some(deg) = self.degree() else {
            return Self::zeros(n);
        };
        // g_deg = c_deg, g_k = c_k + M g_{k+1}
        let mut acc = Self::constant(self.coeffs[deg], n);
        for k in (0..deg).rev() {
            acc.mul_linear(beta, alpha);
            acc.div_linear(delta, gamma);
            acc.coeffs[0] += self.coeffs[k];
        }
        acc
    }
}

/// Principal branch `c^s = exp(s Log c)`; `0^s` is 0 for `Re s > 0` and 1 for `s = 0`.
pub fn principal_pow(c: C64, s: C64) -> C64 {
    if s == C64::new(0.0, 0.0) {
        return C64::new(1.0, 0.0);
    }
    if c.norm() == 0.0 {
        return C64::new(0.0, 0.0);
    }
    (s * c.ln()).exp()
}

/// Series of `Log(1 + q z)` (principal), valid on the disk for `|q| <= 1`.
pub fn log1p_linear(q: C64, order: usize) -> TaylorSeries {
    let mut out = TaylorSeries::zeros(order);
    let mut qk = C64::new(1.0, 0.0);
    for k in 1..=order {
        qk *= q;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        out.coeffs[k] = qk * (sign / k as f64);
        if qk.norm() == 0.0 {
            break;
        }
    }
    out
}

/// Series of `(c - z)^s = c^s exp(s Log(1 - z/c))`, principal branches, `|c| >= 1`.
pub fn fractional_power(c: C64, s: C64, order: usize) -> TaylorSeries {
    let l = log1p_linear(-c.inv(), order);
    l.scale(s).exp().scale(principal_pow(c, s))
}

impl Add for &TaylorSeries {
    type Output = TaylorSeries;
    fn add(self, rhs: &TaylorSeries) -> TaylorSeries {
        let n = self.order().max(rhs.order());
        let coeffs = (0..=n).map(|k| self.coeff(k) + rhs.coeff(k)).collect();
        TaylorSeries { coeffs }
    }
}

impl Sub for &TaylorSeries {
    type Output = TaylorSeries;
    fn sub(self, rhs: &TaylorSeries) -> TaylorSeries {
        let n = self.order().max(rhs.order());
        let coeffs = (0..=n).map(|k| self.coeff(k) - rhs.coeff(k)).collect();
        TaylorSeries { coeffs }
    }
}

impl Mul for &TaylorSeries {
    type Output = TaylorSeries;
    fn mul(self, rhs: &TaylorSeries) -> TaylorSeries {
        TaylorSeries::mul(self, rhs)
    }
}

impl Neg for &TaylorSeries {
    type Output = TaylorSeries;
    fn neg(self) -> TaylorSeries {
        TaylorSeries { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl AddAssign<&TaylorSeries> for TaylorSeries {
    fn add_assign(&mut self, rhs: &TaylorSeries) {
        if rhs.order() > self.order() {
            self.coeffs.resize(rhs.order() + 1, C64::new(0.0, 0.0));
        }
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a += b;
        }
    }
}

impl SubAssign<&TaylorSeries> for TaylorSeries {
    fn sub_assign(&mut self, rhs: &TaylorSeries) {
        if rhs.order() > self.order() {
            self.coeffs.resize(rhs.order() + 1, C64::new(0.0, 0.0));
        }
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a -= b;
        }
    }
}
