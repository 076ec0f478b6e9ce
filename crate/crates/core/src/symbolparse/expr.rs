use std::fmt;
use std::ops;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::mobius::Mobius;
use crate::series::{log1p_linear, principal_pow, TaylorSeries};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Largest integer exponent expanded by repeated linear products.
const INT_POW_FAST: f64 = 64.0;

/// Holomorphic function of `z` on the disk.
///
/// Besides the parsed grammar, the tree carries two internal nodes:
/// `Compose` (precomposition with a Möbius map) and `Poly` (a polynomial
/// given by coefficients). Both expand exactly, so operator iterates
/// `u_n (f ∘ psi_n)` can be built as trees and expanded once at the end.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(C64),
    Z,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    PowInt(Box<Expr>, i32),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    /// `(p0 + p1 z)^s := p0^s exp(s Log(1 + (p1/p0) z))`, with `|p1| <= |p0|`.
    Pow { p0: C64, p1: C64, s: C64 },
    Compose(Box<Expr>, Mobius),
    Poly(Vec<C64>),
}

/// Argument at which an expression is expanded.
#[derive(Debug, Clone, Copy)]
pub enum Arg<'a> {
    /// `z -> M(z)`; expansions of boundary powers use the fixed-point form.
    Map(&'a Mobius),
    Series(&'a TaylorSeries),
}

impl Expr {
    pub fn c(re: f64) -> Expr {
        Expr::Const(C64::new(re, 0.0))
    }

    /// `(c - z)^s` with the principal branch convention.
    pub fn boundary_pow(c: C64, s: C64) -> Expr {
        Expr::Pow { p0: c, p1: -ONE, s }
    }

    pub fn compose(self, m: Mobius) -> Expr {
        Expr::Compose(Box::new(self), m)
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }

    pub fn recip(self) -> Expr {
        Expr::Div(Box::new(Expr::c(1.0)), Box::new(self))
    }

    /// Product of factors (`1` for an empty list).
    pub fn product<I: IntoIterator<Item = Expr>>(it: I) -> Expr {
        it.into_iter().reduce(|a, b| a * b).unwrap_or(Expr::c(1.0))
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(it: I) -> Expr {
        it.into_iter().reduce(|a, b| a + b).unwrap_or(Expr::c(0.0))
    }

    /// True when the tree does not depend on `z`.
    pub fn is_const(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Z => false,
            Expr::Neg(e) | Expr::PowInt(e, _) | Expr::Exp(e) | Expr::Log(e) => e.is_const(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_const() && b.is_const()
            }
            Expr::Pow { p1, .. } => *p1 == ZERO,
            Expr::Compose(e, _) => e.is_const(),
            Expr::Poly(c) => c.iter().skip(1).all(|x| *x == ZERO),
        }
    }

    /// `(p0 + p1 z)^k` for affine subtrees and their integer powers.
    fn affine_power(&self) -> Option<(C64, C64, i32)> {
        match self {
            Expr::Const(_) | Expr::Z | Expr::Pow { .. } | Expr::Compose(..) => None,
            Expr::PowInt(e, k) => {
                let (p0, p1) = super::parser::as_affine(e)?;
                Some((p0, p1, *k))
            }
            Expr::Add(..) | Expr::Sub(..) | Expr::Neg(_) | Expr::Mul(..) | Expr::Div(..) | Expr::Poly(_) => {
                let (p0, p1) = super::parser::as_affine(self)?;
                Some((p0, p1, 1))
            }
            Expr::Exp(_) | Expr::Log(_) => None,
        }
    }

    /// Pointwise value. `log` uses the principal branch at the point.
    pub fn eval(&self, z: C64) -> C64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Z => z,
            Expr::Neg(e) => -e.eval(z),
            Expr::Add(a, b) => a.eval(z) + b.eval(z),
            Expr::Sub(a, b) => a.eval(z) - b.eval(z),
            Expr::Mul(a, b) => a.eval(z) * b.eval(z),
            Expr::Div(a, b) => a.eval(z) / b.eval(z),
            Expr::PowInt(e, k) => e.eval(z).powi(*k),
            Expr::Exp(e) => e.eval(z).exp(),
            Expr::Log(e) => e.eval(z).ln(),
            Expr::Pow { p0, p1, s } => {
                if *p1 == ZERO {
                    return principal_pow(*p0, *s);
                }
                let t = ONE + (p1 / p0) * z;
                if s.im == 0.0 && s.re.fract() == 0.0 && s.re.abs() <= INT_POW_FAST {
                    return (p0 * t).powi(s.re as i32);
                }
                principal_pow(*p0, *s) * (s * t.ln()).exp()
            }
            Expr::Compose(e, m) => e.eval(m.eval(z)),
            Expr::Poly(c) => c.iter().rev().fold(ZERO, |acc, &x| acc * z + x),
        }
    }

    /// Taylor expansion of `self(z)` at order `n`.
    pub fn series(&self, n: usize) -> Result<TaylorSeries> {
        self.expand(Arg::Map(&Mobius::identity()), n)
    }

    /// Taylor expansion of `self(X(z))` at order `n`, exact to truncation.
    ///
    /// At a Möbius argument, affine factors and their integer powers go through
    /// the fixed-point form of [`Mobius::affine_image`], so `(1 - z)^2` stays
    /// accurate under deep iterates where `1 - M(z)` would cancel.
    pub fn expand(&self, arg: Arg<'_>, n: usize) -> Result<TaylorSeries> {
        if let Arg::Map(_) = arg {
            if let Some((p0, p1, k)) = self.affine_power() {
                if p1 != ZERO && p0 != ZERO && (k.unsigned_abs() <= 64 || p0.norm() >= p1.norm()) {
                    return expand_pow(p0, p1, C64::new(k as f64, 0.0), arg, n);
                }
            }
        }
        Ok(match self {
            Expr::Const(c) => TaylorSeries::constant(*c, n),
            Expr::Z => match arg {
                Arg::Map(m) => m.to_series(n),
                Arg::Series(x) => x.with_order(n),
            },
            Expr::Neg(e) => -&e.expand(arg, n)?,
            Expr::Add(a, b) => &a.expand(arg, n)? + &b.expand(arg, n)?,
            Expr::Sub(a, b) => &a.expand(arg, n)? - &b.expand(arg, n)?,
            Expr::Mul(a, b) => match (a.as_ref(), b.as_ref()) {
                (Expr::Const(c), e) | (e, Expr::Const(c)) => e.expand(arg, n)?.scale(*c),
                _ => match self.log_form(arg, n)? {
                    Some((l, true)) => l.exp(),
                    _ => a.expand(arg, n)?.mul(&b.expand(arg, n)?),
                },
            },
            Expr::Div(a, b) => match b.as_ref() {
                Expr::Const(c) => a.expand(arg, n)?.scale(c.inv()),
                _ => match self.log_form(arg, n)? {
                    Some((l, true)) => l.exp(),
                    _ => a.expand(arg, n)?.div(&b.expand(arg, n)?)?,
                },
            },
            Expr::PowInt(e, k) => {
                let base = e.expand(arg, n)?;
                if *k >= 0 {
                    base.powi(*k as u32)
                } else {
                    base.recip()?.powi(k.unsigned_abs())
                }
            }
            Expr::Exp(e) => e.expand(arg, n)?.exp(),
            Expr::Log(e) => e.expand(arg, n)?.log()?,
            Expr::Pow { p0, p1, s } => expand_pow(*p0, *p1, *s, arg, n)?,
            Expr::Compose(e, inner) => match arg {
                Arg::Map(m) => e.expand(Arg::Map(&inner.compose(m)), n)?,
                Arg::Series(x) => {
                    let y = inner.apply_to_series(&x.with_order(n))?;
                    e.expand(Arg::Series(&y), n)?
                }
            },
            Expr::Poly(c) => {
                let m = n.max(c.len().saturating_sub(1));
                let p = TaylorSeries::from_poly(c, m);
                match arg {
                    Arg::Map(mb) => {
                        p.compose_mobius(mb.alpha, mb.beta, mb.gamma, mb.delta).with_order(n)
                    }
                    Arg::Series(x) => p.compose(&x.with_order(m))?.with_order(n),
                }
            }
        })
    }

    /// `L` with `self(M(z)) = exp(L)` for products and quotients of power atoms and constants.
    ///
    /// Summing logarithms before exponentiating avoids cancellation between factors of
    /// very different size. The flag records whether a non-integer power is involved.
    fn log_form(&self, arg: Arg<'_>, n: usize) -> Result<Option<(TaylorSeries, bool)>> {
        let Arg::Map(m) = arg else { return Ok(None) };
        Ok(match self {
            Expr::Const(c) if *c != ZERO => Some((TaylorSeries::constant(c.ln(), n), false)),
            Expr::Pow { p0, p1, s } if *p1 != ZERO && *p0 != ZERO => {
                let (q0, q1) = m.affine_image(*p0, *p1);
                if q0 == ZERO || q1.norm() > q0.norm() {
                    return Ok(None);
                }
                let mut l = &log1p_linear(q1 / q0, n) - &log1p_linear(m.gamma / m.delta, n);
                l.coeffs_mut()[0] = (q0 / (p0 * m.delta)).ln();
                let mut l = l.scale(*s);
                l.coeffs_mut()[0] += principal_pow(*p0, *s).ln();
                Some((l, is_small_int(*s).is_none()))
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.log_form(arg, n)?, b.log_form(arg, n)?) {
                    (Some((la, fa)), Some((lb, fb))) => {
                        let l = if matches!(self, Expr::Mul(..)) { &la + &lb } else { &la - &lb };
                        Some((l, fa || fb))
                    }
                    _ => None,
                }
            }
            Expr::Compose(e, inner) => e.log_form(Arg::Map(&inner.compose(m)), n)?,
            _ => match self.affine_power() {
                Some((p0, p1, k)) if k != 0 => {
                    Expr::Pow { p0, p1, s: C64::new(k as f64, 0.0) }.log_form(arg, n)?
                }
                _ => None,
            },
        })
    }

    /// Boundary points where a power atom makes `|u|` discontinuous or unbounded.
    pub fn boundary_singularities(&self) -> Vec<C64> {
        let mut out = Vec::new();
        self.collect_singularities(&Mobius::identity(), &mut out);
        out
    }

    fn collect_singularities(&self, inner: &Mobius, out: &mut Vec<C64>) {
        match self {
            Expr::Const(_) | Expr::Z | Expr::Poly(_) => {}
            Expr::Neg(e) | Expr::PowInt(e, _) | Expr::Exp(e) | Expr::Log(e) => {
                e.collect_singularities(inner, out)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_singularities(inner, out);
                b.collect_singularities(inner, out);
            }
            Expr::Pow { p0, p1, s } => {
                let smooth = s.im == 0.0 && s.re >= 0.0 && s.re.fract() == 0.0;
                if *p1 != ZERO && !smooth {
                    let root = -p0 / p1;
                    if (root.norm() - 1.0).abs() < 1e-9 {
                        // the atom sees M(z); its singular point in z is M^{-1}(root)
                        out.push(inner.inverse().eval(root));
                    }
                }
            }
            Expr::Compose(e, m) => e.collect_singularities(&m.compose(inner), out),
        }
    }
}

fn is_small_int(s: C64) -> Option<i32> {
    (s.im == 0.0 && s.re.fract() == 0.0 && s.re.abs() <= INT_POW_FAST).then_some(s.re as i32)
}

fn expand_pow(p0: C64, p1: C64, s: C64, arg: Arg<'_>, n: usize) -> Result<TaylorSeries> {
    if p1 == ZERO {
        return Ok(TaylorSeries::constant(principal_pow(p0, s), n));
    }
    match arg {
        Arg::Map(m) => {
            // p0 + p1 M(z) = (q0 + q1 z) / (gamma z + delta)
            let (q0, q1) = m.affine_image(p0, p1);
            if let Some(k) = is_small_int(s) {
                let mut out = TaylorSeries::one(n);
                let (num, den) = if k >= 0 {
                    ((q0, q1), (m.delta, m.gamma))
                } else {
                    ((m.delta, m.gamma), (q0, q1))
                };
                for _ in 0..k.unsigned_abs() {
                    out.mul_linear(num.0, num.1);
                    out.div_linear(den.0, den.1);
                }
                return Ok(out);
            }
            let mut l = &log1p_linear(q1 / q0, n) - &log1p_linear(m.gamma / m.delta, n);
            l.coeffs_mut()[0] = (q0 / (p0 * m.delta)).ln();
            Ok(l.scale(s).exp().scale(principal_pow(p0, s)))
        }
        Arg::Series(x) => {
            let y = &TaylorSeries::one(n) + &x.with_order(n).scale(p1 / p0);
            if let Some(k) = is_small_int(s) {
                let base = y.scale(p0);
                return Ok(if k >= 0 {
                    base.powi(k as u32)
                } else {
                    base.recip()?.powi(k.unsigned_abs())
                });
            }
            if y.coeff(0).norm() == 0.0 {
                return Err(Error::LogAtZero);
            }
            Ok(y.log()?.scale(s).exp().scale(principal_pow(p0, s)))
        }
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $v:ident) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$v(Box::new(self), Box::new(rhs))
            }
        }
    };
}
binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

pub(crate) fn fmt_real(x: f64) -> String {
    // `{:?}` keeps the exponent form for very large/small values and round-trips
    let s = format!("{x:?}");
    s
}

pub(crate) fn fmt_complex(c: C64) -> String {
    if c.im == 0.0 {
        if c.re < 0.0 || (c.re == 0.0 && c.re.is_sign_negative()) {
            format!("({})", fmt_real(c.re))
        } else {
            fmt_real(c.re)
        }
    } else if c.re == 0.0 && !c.re.is_sign_negative() {
        if c.im < 0.0 {
            format!("(-{}i)", fmt_real(-c.im))
        } else {
            format!("{}i", fmt_real(c.im))
        }
    } else {
        let sign = if c.im < 0.0 { '-' } else { '+' };
        format!("({}{}{}i)", fmt_real(c.re), sign, fmt_real(c.im.abs()))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{}", fmt_complex(*c)),
            Expr::Z => f.write_str("z"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::PowInt(e, k) => write!(f, "({e})^{k}"),
            Expr::Exp(e) => write!(f, "exp({e})"),
            Expr::Log(e) => write!(f, "log({e})"),
            Expr::Pow { p0, p1, s } => {
                if *p1 == -ONE {
                    write!(f, "pow({} - z, {})", fmt_complex(*p0), fmt_complex(*s))
                } else {
                    write!(f, "pow({} + {}*z, {})", fmt_complex(*p0), fmt_complex(*p1), fmt_complex(*s))
                }
            }
            Expr::Compose(e, m) => write!(
                f,
                "compose({e}, {}, {}, {}, {})",
                fmt_complex(m.alpha),
                fmt_complex(m.beta),
                fmt_complex(m.gamma),
                fmt_complex(m.delta)
            ),
            Expr::Poly(c) => {
                f.write_str("poly(")?;
                for (k, x) in c.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(&fmt_complex(*x))?;
                }
                f.write_str(")")
            }
        }
    }
}
