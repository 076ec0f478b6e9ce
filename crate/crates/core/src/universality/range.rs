use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobius::Automorphism;
use crate::series::TaylorSeries;
use crate::spectra::{predict_annuli, resolvent_backward, resolvent_forward, residual, AnnulusPrediction, ResolventFlag};
use crate::symbolparse::{analyze, Expr, WeightSymbol};
use crate::wco::WCOperator;

const ONE: C64 = C64::new(1.0, 0.0);
/// Rate the split tries to reach for each half.
const TARGET_RATE: f64 = 0.6;
const MAX_SPLIT_POWER: u32 = 24;
const MAX_TERMS: usize = 400;

/// `omega_{mu,nu}(z) = (a - z)^mu (b - z)^nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaWeight {
    pub mu: f64,
    pub nu: f64,
}

impl OmegaWeight {
    pub fn new(mu: f64, nu: f64) -> Self {
        OmegaWeight { mu, nu }
    }

    pub fn expr(&self, psi: &Automorphism) -> Expr {
        Expr::Pow { p0: psi.a, p1: -ONE, s: self.mu.into() } * Expr::Pow { p0: psi.b, p1: -ONE, s: self.nu.into() }
    }

    pub fn series(&self, psi: &Automorphism, n: usize) -> Result<TaylorSeries> {
        self.expr(psi).series(n)
    }

    /// `omega∘psi / omega`, analytic and zero-free on the closed disk.
    pub fn ratio_expr(&self, psi: &Automorphism) -> Expr {
        let w = self.expr(psi);
        w.clone().compose(psi.map) / w
    }
}

/// Samples of `omega∘psi / omega` approaching each fixed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioLimits {
    #[serde(with = "crate::report::cplx")]
    pub at_a: C64,
    #[serde(with = "crate::report::cplx")]
    pub at_b: C64,
    pub expected_a: f64,
    pub expected_b: f64,
    pub path_a: Vec<f64>,
    pub path_b: Vec<f64>,
}

/// Ratio along `z = c (1 - 2^{-j})`, `j = 1..=20`, for `c = a, b`; the limits are
/// `psi'(a)^mu` and `psi'(b)^nu`.
pub fn omega_ratio_limits(psi: &Automorphism, mu: f64, nu: f64) -> RatioLimits {
    let r = OmegaWeight::new(mu, nu).ratio_expr(psi);
    let path = |c: C64| -> Vec<C64> { (1..=20).map(|j| r.eval(c * (1.0 - 0.5f64.powi(j)))).collect() };
    let pa = path(psi.a);
    let pb = path(psi.b);
    RatioLimits {
        at_a: *pa.last().expect("nonempty"),
        at_b: *pb.last().expect("nonempty"),
        expected_a: psi.lambda_a.powf(mu),
        expected_b: psi.lambda_b.powf(nu),
        path_a: pa.iter().map(|v| v.norm()).collect(),
        path_b: pb.iter().map(|v| v.norm()).collect(),
    }
}

/// Symbol of `u · omega∘psi / omega`, the weight of `T` conjugated by multiplication with `omega`.
pub fn twisted_weight(u: &Expr, psi: &Automorphism, mu: f64, nu: f64, n: usize) -> Result<WeightSymbol> {
    analyze(&twisted_expr(u, psi, mu, nu), psi, n)
}

pub fn twisted_expr(u: &Expr, psi: &Automorphism, mu: f64, nu: f64) -> Expr {
    u.clone() * OmegaWeight::new(mu, nu).ratio_expr(psi)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Splits `1 = ((a - z) - (b - z))^{m+n} / (a - b)^{m+n}`: terms with `(a - z)^j`, `j >= m`,
/// form the first expression, the rest (divisible by `(b - z)^{n+1}`) the second.
pub fn split_exprs(psi: &Automorphism, m: u32, n: u32) -> (Expr, Expr) {
    let total = m + n;
    let norm = (psi.a - psi.b).powi(-(total as i32));
    let term = |j: u32| {
        let sign = if (total - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        Expr::Const(norm * sign * binomial(total, j))
            * Expr::Pow { p0: psi.a, p1: -ONE, s: (j as f64).into() }
            * Expr::Pow { p0: psi.b, p1: -ONE, s: ((total - j) as f64).into() }
    };
    (Expr::sum((m..=total).map(term)), Expr::sum((0..m).map(term)))
}

fn split_polys(psi: &Automorphism, m: u32, n: u32) -> (Vec<C64>, Vec<C64>) {
    let total = m + n;
    let norm = (psi.a - psi.b).powi(-(total as i32));
    let mut p1 = vec![C64::new(0.0, 0.0); total as usize + 1];
    let mut p2 = p1.clone();
    for j in 0..=total {
        let sign = if (total - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut t = TaylorSeries::constant(norm * sign * binomial(total, j), total as usize);
        for _ in 0..j {
            t.mul_linear(psi.a, -ONE);
        }
        for _ in j..total {
            t.mul_linear(psi.b, -ONE);
        }
        let dst = if j >= m { &mut p1 } else { &mut p2 };
        for (d, c) in dst.iter_mut().zip(t.coeffs()) {
            *d += c;
        }
    }
    (p1, p2)
}

/// `f = f1 + f2` with `f1 / omega_{mu,0}` and `f2 / omega_{0,nu}` analytic across the fixed points.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    #[serde(skip)]
    pub f1: TaylorSeries,
    #[serde(skip)]
    pub f2: TaylorSeries,
    pub m: u32,
    pub n: u32,
    /// `max_k |f1_k + f2_k - f_k|`.
    pub sum_error: f64,
    pub quotient_norms: [f64; 2],
    pub truncation_suspect: bool,
}

pub fn decompose(f: &TaylorSeries, psi: &Automorphism, mu: f64, nu: f64, space: &crate::spaces::SpaceSpec) -> Result<Decomposition> {
    if !(mu >= 0.0 && nu >= 0.0 && mu.is_finite() && nu.is_finite()) {
        return Err(Error::Config(format!("decomposition exponents must be finite and >= 0, got ({mu}, {nu})")));
    }
    let m = mu.ceil() as u32;
    let n = nu.ceil() as u32;
    let order = f.order();
    let (p1, p2) = split_polys(psi, m, n);
    let f1 = f.mul(&TaylorSeries::from_poly(&p1, order));
    let f2 = f.mul(&TaylorSeries::from_poly(&p2, order));
    let sum_error = (&f1 + &f2).max_diff(f, order);
    let q1 = f1.mul(&OmegaWeight::new(-mu, 0.0).series(psi, order)?);
    let q2 = f2.mul(&OmegaWeight::new(0.0, -nu).series(psi, order)?);
    let e1 = space.norm_checked(&q1)?;
    let e2 = space.norm_checked(&q2)?;
    Ok(Decomposition {
        f1,
        f2,
        m,
        n,
        sum_error,
        quotient_norms: [e1.value, e2.value],
        truncation_suspect: e1.truncation_suspect || e2.truncation_suspect,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStrategy {
    Forward,
    Backward,
    Split,
    LeastSquares,
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetSolve {
    pub label: String,
    pub strategy: SolveStrategy,
    pub residual: f64,
    pub forward_terms: usize,
    pub backward_terms: usize,
    pub flags: Vec<ResolventFlag>,
    #[serde(skip)]
    pub solution: TaylorSeries,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurjectivityProbe {
    pub split_m: u32,
    pub split_n: u32,
    pub forward_rate: f64,
    pub backward_rate: f64,
    pub targets: Vec<TargetSolve>,
    pub max_residual: f64,
}

fn terms_for(rate: f64, tol: f64) -> usize {
    if !(rate > 0.0) {
        return 8;
    }
    ((tol * 1e-4).ln() / rate.ln()).ceil().clamp(8.0, MAX_TERMS as f64) as usize + 10
}

/// Smallest power bringing `base * q^k` to the target rate (or below 1), with `q < 1`.
fn split_power(floor: f64, base: f64, q: f64) -> Option<u32> {
    let goal = floor.max(TARGET_RATE);
    (0..=MAX_SPLIT_POWER)
        .find(|&k| base * q.powi(k as i32) <= goal)
        .or_else(|| (0..=MAX_SPLIT_POWER).find(|&k| base * q.powi(k as i32) < 1.0))
}

struct Plan {
    strategy: SolveStrategy,
    m: u32,
    n: u32,
    forward_rate: f64,
    backward_rate: f64,
}

fn plan(pred: &AnnulusPrediction, r: f64) -> Plan {
    let g = pred.gamma;
    if r > pred.outer_upper {
        return Plan { strategy: SolveStrategy::Forward, m: 0, n: 0, forward_rate: pred.outer_upper / r, backward_rate: f64::NAN };
    }
    if r < pred.inner_lower {
        return Plan { strategy: SolveStrategy::Backward, m: 0, n: 0, forward_rate: f64::NAN, backward_rate: r / pred.inner_lower };
    }
    // forward on (a - z)^m h: max(B+/lb^g, A+ la^(m-g)) / r
    let f_floor = pred.inclusion_inner / r;
    let m = split_power(f_floor, pred.a_plus * pred.lambda_a.powf(-g) / r, pred.lambda_a);
    // backward on (b - z)^n h: r max(la^g/A-, lb^(g-n)/B-)
    let b_floor = r / pred.inclusion_outer;
    let n = split_power(b_floor, r * pred.lambda_b.powf(g) / pred.b_minus, 1.0 / pred.lambda_b);
    match (m, n) {
        (Some(m), Some(n)) if f_floor < 1.0 && b_floor < 1.0 => Plan {
            strategy: SolveStrategy::Split,
            m,
            n,
            forward_rate: f_floor.max(pred.a_plus * pred.lambda_a.powf(m as f64 - g) / r),
            backward_rate: b_floor.max(r * pred.lambda_b.powf(g - n as f64) / pred.b_minus),
        },
        _ => Plan { strategy: SolveStrategy::LeastSquares, m: 0, n: 0, forward_rate: f64::NAN, backward_rate: f64::NAN },
    }
}

/// Solves `(lambda - T) x = y` for each target and records the guard-band residual.
///
/// Outside the annuli a plain Neumann series is used. Inside, `y` is split so that the
/// forward series acts on the part vanishing at `a` and the backward series on the part
/// vanishing at `b`. A truncated least-squares solve is the last resort.
pub fn surjectivity_probe(t: &WCOperator, lambda: C64, targets: &[(String, Expr)], tol: f64) -> Result<SurjectivityProbe> {
    let psi = *t.require_automorphism()?;
    let sym = t.symbol.as_ref().ok_or_else(|| Error::Config("operator has no symbol analysis".into()))?;
    let pred = predict_annuli(sym, &psi, &t.space);
    let p = plan(&pred, lambda.norm());
    let (e1, e2) = split_exprs(&psi, p.m, p.n);
    let mut lsq: Option<LeastSquares> = None;
    let mut out = Vec::with_capacity(targets.len());
    for (label, y) in targets {
        let attempt = match p.strategy {
            SolveStrategy::Forward => resolvent_forward(t, y, lambda, terms_for(p.forward_rate, tol)).map(|s| {
                (s.solution, s.residual, s.terms, 0, s.flags)
            }),
            SolveStrategy::Backward => resolvent_backward(t, y, lambda, terms_for(p.backward_rate, tol)).map(|s| {
                (s.solution, s.residual, 0, s.terms, s.flags)
            }),
            SolveStrategy::Split => split_solve(t, lambda, y, &e1, &e2, &p, tol),
            SolveStrategy::LeastSquares => Err(Error::Config("no convergent split".into())),
        };
        let solve = match attempt {
            Ok((x, r, nf, nb, flags)) if r < tol => {
                TargetSolve { label: label.clone(), strategy: p.strategy, residual: r, forward_terms: nf, backward_terms: nb, flags, solution: x }
            }
            _ => {
                if lsq.is_none() {
                    lsq = Some(LeastSquares::new(t, lambda)?);
                }
                let ls = lsq.as_ref().expect("just built");
                let rhs = y.series(t.order)?;
                let x = ls.solve(&rhs);
                let r = residual(t, lambda, &x, &rhs)?;
                TargetSolve { label: label.clone(), strategy: SolveStrategy::LeastSquares, residual: r, forward_terms: 0, backward_terms: 0, flags: vec![], solution: x }
            }
        };
        out.push(solve);
    }
    let max_residual = out.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok(SurjectivityProbe {
        split_m: p.m,
        split_n: p.n,
        forward_rate: p.forward_rate,
        backward_rate: p.backward_rate,
        targets: out,
        max_residual,
    })
}

type Solved = (TaylorSeries, f64, usize, usize, Vec<ResolventFlag>);

fn split_solve(t: &WCOperator, lambda: C64, y: &Expr, e1: &Expr, e2: &Expr, p: &Plan, tol: f64) -> Result<Solved> {
    let y1 = y.clone() * e1.clone();
    let y2 = y.clone() * e2.clone();
    let f = resolvent_forward(t, &y1, lambda, terms_for(p.forward_rate, tol))?;
    let g = resolvent_backward(t, &y2, lambda, terms_for(p.backward_rate, tol))?;
    let x = &f.solution + &g.solution;
    let r = residual(t, lambda, &x, &y.series(t.order)?)?;
    let mut flags = f.flags;
    for fl in g.flags {
        if !flags.contains(&fl) {
            flags.push(fl);
        }
    }
    Ok((x, r, f.terms, g.terms, flags))
}

/// Truncated SVD solve of the finite section `(lambda - G) x = y`.
struct LeastSquares {
    svd: nalgebra::SVD<C64, nalgebra::Dyn, nalgebra::Dyn>,
    galerkin: crate::wco::GalerkinMatrix,
}

impl LeastSquares {
    fn new(t: &WCOperator, lambda: C64) -> Result<Self> {
        let g = t.galerkin()?;
        let dim = g.dim();
        let a = nalgebra::DMatrix::<C64>::identity(dim, dim) * lambda - &g.entries;
        let svd = a.svd(true, true);
        Ok(LeastSquares { svd, galerkin: g })
    }

    fn solve(&self, y: &TaylorSeries) -> TaylorSeries {
        let b: DVector<C64> = self.galerkin.coords(y);
        let top = self.svd.singular_values.max();
        let x = self.svd.solve(&b, 1e-10 * top).unwrap_or_else(|_| DVector::zeros(b.len()));
        self.galerkin.series_from(&x)
    }
}
