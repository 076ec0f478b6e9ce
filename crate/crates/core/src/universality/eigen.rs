use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobius::Automorphism;
use crate::series::TaylorSeries;
use crate::spectra::predict_annuli;
use crate::symbolparse::Expr;
use crate::wco::{guard_band, WCOperator};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Relative singular-value threshold for the numerical rank of a Gram matrix.
pub const RANK_TOL: f64 = 1e-8;
/// Largest accepted relative eigen-residual for a base eigenvector.
pub const EIGEN_TOL: f64 = 1e-6;

/// Branch used for `log((b - z)/(a - z))`: continuous in the disk, principal at `z = 0`.
pub const BRANCH_CONVENTION: &str =
    "log((b-z)/(a-z)) = Log(b/a) + Log(1 - z/b) - Log(1 - z/a), principal Log; continuous on the disk";

/// `e_w(z) = ((b - z)/(a - z))^w` as an expression.
pub fn eigenfunction_expr(psi: &Automorphism, w: C64) -> Expr {
    let c = (w * (psi.b / psi.a).ln()).exp();
    Expr::Const(c)
        * Expr::Pow { p0: ONE, p1: -psi.b.inv(), s: w }
        * Expr::Pow { p0: ONE, p1: -psi.a.inv(), s: -w }
}

/// Series of `e_w`; `C_psi e_w = e^{delta w} e_w`.
pub fn eigenfunction(psi: &Automorphism, w: C64, n: usize) -> Result<TaylorSeries> {
    if (psi.a - psi.b).norm() == 0.0 {
        return Err(Error::InvalidFixedPoints("a = b leaves the branch undefined".into()));
    }
    let l = &crate::series::log1p_linear(-psi.b.inv(), n) - &crate::series::log1p_linear(-psi.a.inv(), n);
    let mut l = l;
    l.coeffs_mut()[0] = (psi.b / psi.a).ln();
    Ok(l.scale(w).exp())
}

/// `w_k = 2 pi i k / delta`.
pub fn gk_exponent(psi: &Automorphism, k: i64) -> C64 {
    C64::new(0.0, TAU * k as f64 / psi.delta)
}

/// `g_k = e_{w_k}` for `|k| <= K`, in the order `-K..=K`.
pub fn gk_family(psi: &Automorphism, k_max: usize, n: usize) -> Result<Vec<(i64, TaylorSeries)>> {
    let k = k_max as i64;
    (-k..=k).map(|j| Ok((j, eigenfunction(psi, gk_exponent(psi, j), n)?))).collect()
}

fn rel_diff(x: &TaylorSeries, y: &TaylorSeries, upto: usize) -> f64 {
    let num: f64 = (0..=upto).map(|k| (x.coeff(k) - y.coeff(k)).norm_sqr()).sum();
    let den: f64 = (0..=upto).map(|k| y.coeff(k).norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// `||C_psi e_w - e^{delta w} e_w|| / ||e^{delta w} e_w||` on coefficients `0..=upto`.
///
/// `C_psi e_w` is expanded exactly, so the band is limited only by `n`.
pub fn eigen_relation_residual(psi: &Automorphism, w: C64, n: usize, upto: usize) -> Result<f64> {
    let composed = eigenfunction_expr(psi, w).compose(psi.map).series(n)?;
    let target = eigenfunction(psi, w, n)?.scale((psi.delta * w).exp());
    Ok(rel_diff(&composed, &target, upto.min(n)))
}

/// Relative residual of `omega_{1,1} g_k' = (2 pi k (b - a) i / delta) g_k` on `0..=n/2`.
pub fn generator_check(psi: &Automorphism, k: i64, n: usize) -> Result<f64> {
    let g = eigenfunction(psi, gk_exponent(psi, k), n)?;
    let mut lhs = g.derivative().with_order(n);
    // (a - z)(b - z)
    lhs.mul_linear(psi.a, -ONE);
    lhs.mul_linear(psi.b, -ONE);
    let rhs = g.scale(generator_eigenvalue(psi, k));
    if k == 0 {
        return Ok(lhs.max_abs());
    }
    Ok(rel_diff(&lhs, &rhs, n / 2))
}

pub fn generator_eigenvalue(psi: &Automorphism, k: i64) -> C64 {
    C64::new(0.0, TAU * k as f64 / psi.delta) * (psi.b - psi.a)
}

/// `max |g_k|` on the circle `|z| = rho`.
pub fn gk_sup(psi: &Automorphism, k: i64, rho: f64, samples: usize) -> f64 {
    let e = eigenfunction_expr(psi, gk_exponent(psi, k));
    (0..samples)
        .map(|j| e.eval(C64::from_polar(rho, TAU * j as f64 / samples as f64)).norm())
        .fold(0.0, f64::max)
}

/// Where the base eigenvector of a kernel probe came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenSource {
    Catalog,
    InverseIteration,
}

/// A function `f` with `T f ~ lambda f`.
#[derive(Debug, Clone)]
pub struct BaseEigenvector {
    pub expr: Option<Expr>,
    pub series: TaylorSeries,
    pub w: C64,
    pub residual: f64,
    pub source: EigenSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelProbe {
    pub k: usize,
    pub gram_rank: usize,
    pub singular_values: Vec<f64>,
    pub min_singular_value: f64,
    /// `sigma_{2K+1} / max(sigma_{2K+2}, eps sigma_1)`; the Gram matrix has no `(2K+2)`-th value.
    pub gap: f64,
    pub eigenvector_residuals: Vec<f64>,
    pub base_residual: f64,
    pub base_source: EigenSource,
    pub base_exponent_re: f64,
    pub base_exponent_im: f64,
    pub tail_fraction: f64,
}

/// `prod_{j=1}^{J} u(b) / u(psi_{-j}(z))`, which satisfies `s∘psi = (u(b)/u) s`.
fn correction_product(t: &WCOperator, psi: &Automorphism, n: usize) -> Expr {
    let ub = t.weight.eval(psi.b);
    let steps = ((16.0 * 10f64.ln() + (n.max(2) as f64).ln()) / psi.delta).ceil() as i64;
    let inv = psi.map.inverse();
    Expr::product((1..=steps).map(|j| Expr::Const(ub) / t.weight.clone().compose(inv.pow(j))))
}

fn eigen_residual_expr(t: &WCOperator, f: &Expr, lambda: C64, n: usize, upto: usize) -> Result<f64> {
    let tf = t.apply_expr(f).series(n)?;
    let lf = f.series(n)?.scale(lambda);
    Ok(rel_diff(&tf, &lf, upto))
}

/// Base eigenvector for `lambda`.
///
/// When `|u|` extends continuously to `a` and `b`, `f = s e_w` with
/// `e^{delta w} = lambda / u(b)` and `s` the correction product; `f` lies in the space
/// exactly when `lambda` is in the open inclusion annulus. Otherwise inverse iteration
/// on the finite section is tried, seeded with `e_w`.
pub fn base_eigenvector(t: &WCOperator, lambda: C64) -> Result<BaseEigenvector> {
    let psi = *t.require_automorphism()?;
    let sym = t.symbol.as_ref().ok_or_else(|| Error::NoEigenvectorFound("operator has no symbol analysis".into()))?;
    let pred = predict_annuli(sym, &psi, &t.space);
    if !(lambda.norm() > pred.inclusion_inner && lambda.norm() < pred.inclusion_outer) {
        return Err(Error::NoEigenvectorFound(format!(
            "|lambda| = {} outside the open inclusion annulus ({}, {})",
            lambda.norm(),
            pred.inclusion_inner,
            pred.inclusion_outer
        )));
    }
    let n = t.order;
    let upto = guard_band(n, psi.lambda_a);
    let ub = t.weight.eval(psi.b);
    let w = (lambda / ub).ln() / psi.delta;
    let ew = eigenfunction_expr(&psi, w);
    if !sym.heuristic {
        let s = correction_product(t, &psi, n);
        let f = s * ew.clone();
        let series = f.series(n)?;
        let residual = eigen_residual_expr(t, &f, lambda, n, upto)?;
        if residual < EIGEN_TOL && series.is_finite() {
            return Ok(BaseEigenvector { expr: Some(f), series, w, residual, source: EigenSource::Catalog });
        }
    }
    inverse_iteration(t, lambda, &ew.series(n)?, w, upto)
}

fn inverse_iteration(t: &WCOperator, lambda: C64, seed: &TaylorSeries, w: C64, upto: usize) -> Result<BaseEigenvector> {
    let g = t.galerkin()?;
    let dim = g.dim();
    let shifted = &g.entries - DMatrix::<C64>::identity(dim, dim) * lambda;
    let lu = shifted.lu();
    let mut x = g.coords(seed);
    let mut best: Option<(f64, TaylorSeries)> = None;
    for _ in 0..4 {
        x = lu.solve(&x).ok_or_else(|| Error::NoEigenvectorFound("shifted section is singular".into()))?;
        let nx = x.norm();
        if !(nx > 0.0 && nx.is_finite()) {
            break;
        }
        x /= C64::new(nx, 0.0);
        let f = g.series_from(&x);
        let tf = t.apply(&f)?;
        let r = rel_diff(&tf, &f.scale(lambda), upto);
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, f));
        }
    }
    match best {
        Some((r, f)) if r < EIGEN_TOL => {
            Ok(BaseEigenvector { expr: None, series: f, w, residual: r, source: EigenSource::InverseIteration })
        }
        Some((r, _)) => Err(Error::NoEigenvectorFound(format!("inverse iteration stalled at residual {r:e}"))),
        None => Err(Error::NoEigenvectorFound("inverse iteration produced no vector".into())),
    }
}

/// Checks `T (g_k f) = lambda g_k f` for `|k| <= K` and the rank of their Gram matrix.
pub fn kernel_probe(t: &WCOperator, lambda: C64, k_max: usize) -> Result<KernelProbe> {
    let psi = *t.require_automorphism()?;
    let base = base_eigenvector(t, lambda)?;
    let n = t.order;
    let upto = guard_band(n, psi.lambda_a);
    let mut vectors = Vec::with_capacity(2 * k_max + 1);
    let mut residuals = Vec::with_capacity(2 * k_max + 1);
    let mut tail: f64 = 0.0;
    for (k, gk) in gk_family(&psi, k_max, n)? {
        let fk = gk.mul(&base.series);
        let r = match &base.expr {
            Some(e) => {
                let ek = eigenfunction_expr(&psi, gk_exponent(&psi, k)) * e.clone();
                eigen_residual_expr(t, &ek, lambda, n, upto)?
            }
            None => rel_diff(&t.apply(&fk)?, &fk.scale(lambda), upto),
        };
        residuals.push(r);
        let est = t.space.norm_checked(&fk)?;
        tail = tail.max(est.tail_fraction);
        vectors.push(fk.scale(C64::new(1.0 / est.value, 0.0)));
    }
    let m = vectors.len();
    let gram = DMatrix::from_fn(m, m, |i, j| t.space.inner(&vectors[j], &vectors[i]).unwrap_or(ZERO));
    let sv = gram.singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    let top = s[0];
    let rank = s.iter().filter(|&&v| v > RANK_TOL * top).count();
    let next = s.get(m).copied().unwrap_or(0.0).max(f64::EPSILON * top);
    Ok(KernelProbe {
        k: k_max,
        gram_rank: rank,
        min_singular_value: s[m - 1],
        gap: s[m - 1] / next,
        singular_values: s,
        eigenvector_residuals: residuals,
        base_residual: base.residual,
        base_source: base.source,
        base_exponent_re: base.w.re,
        base_exponent_im: base.w.im,
        tail_fraction: tail,
    })
}

/// `|e^{delta w}|` against `e^{delta Re w}`; exact for the unweighted operator.
pub fn eigenvalue_modulus_gap(psi: &Automorphism, w: C64) -> f64 {
    ((psi.delta * w).exp().norm() - (psi.delta * w.re).exp()).abs()
}
