//! Annulus predictions, Gelfand-type growth rates, finite-section eigenvalues and resolvent series.

use nalgebra::linalg::Schur;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobius::Automorphism;
use crate::series::TaylorSeries;
use crate::spaces::SpaceSpec;
use crate::symbolparse::{Arg, Expr, WeightSymbol};
use crate::wco::{guard_band, GalerkinMatrix, Scaled, WCOperator};

/// Consecutive growing terms that mark a resolvent series as divergent.
pub const DIVERGENCE_RUN: usize = 5;
/// Observed term ratio above which convergence is flagged as slow.
pub const SLOW_RATIO: f64 = 0.8;

/// The four radii built from `A±`, `B±`, `psi'(a)`, `psi'(b)` and `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusPrediction {
    pub outer_upper: f64,
    pub inner_lower: f64,
    pub inclusion_inner: f64,
    pub inclusion_outer: f64,
    pub universality_window_nonempty: bool,
    pub gamma: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub b_plus: f64,
    pub b_minus: f64,
}

impl AnnulusPrediction {
    pub fn from_moduli(a: (f64, f64), b: (f64, f64), lambda_a: f64, lambda_b: f64, gamma: f64) -> Self {
        let (a_plus, a_minus) = a;
        let (b_plus, b_minus) = b;
        let la = lambda_a.powf(gamma);
        let lb = lambda_b.powf(gamma);
        let inclusion_inner = b_plus / lb;
        let inclusion_outer = a_minus / la;
        AnnulusPrediction {
            outer_upper: (a_plus / la).max(b_plus / lb),
            inner_lower: (a_minus / la).min(b_minus / lb),
            inclusion_inner,
            inclusion_outer,
            universality_window_nonempty: inclusion_inner < inclusion_outer,
            gamma,
            lambda_a,
            lambda_b,
            a_plus,
            a_minus,
            b_plus,
            b_minus,
        }
    }

    /// Prediction for the inverse operator: the roles of `a` and `b` swap and moduli invert.
    pub fn inverse(&self) -> Self {
        Self::from_moduli(
            (1.0 / self.b_minus, 1.0 / self.b_plus),
            (1.0 / self.a_minus, 1.0 / self.a_plus),
            1.0 / self.lambda_b,
            1.0 / self.lambda_a,
            self.gamma,
        )
    }

    pub fn in_window(&self, lambda: C64) -> bool {
        let r = lambda.norm();
        self.universality_window_nonempty && self.inclusion_inner < r && r < self.inclusion_outer
    }
}

pub fn predict_annuli(u: &WeightSymbol, psi: &Automorphism, space: &SpaceSpec) -> AnnulusPrediction {
    AnnulusPrediction::from_moduli(
        (u.a_plus, u.a_minus),
        (u.b_plus, u.b_minus),
        psi.lambda_a,
        psi.lambda_b,
        space.gamma,
    )
}

/// `(||T^n f|| / ||f||)^{1/n}` for `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GelfandSequence {
    pub values: Vec<f64>,
    /// Share of `||T^n f||^2` in the last coefficients of the expansion.
    pub tail_fractions: Vec<f64>,
    pub truncation_suspect: bool,
}

impl GelfandSequence {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("n_max >= 1")
    }
}

/// Iterates `T^n f = u_n (f ∘ psi_n)` exactly and records the growth rate.
pub fn gelfand_radius(t: &WCOperator, f: &Expr, n_max: usize) -> Result<GelfandSequence> {
    if n_max == 0 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    let n = t.order;
    let f0 = f.series(n)?;
    let base = t.space.norm(&f0)?;
    if !(base > 0.0) || !base.is_finite() {
        return Err(Error::IllConditioned("test function has zero or non-finite norm".into()));
    }
    let mut u = Scaled { series: TaylorSeries::one(n), log_scale: 0.0 };
    let mut values = Vec::with_capacity(n_max);
    let mut tails = Vec::with_capacity(n_max);
    for k in 1..=n_max {
        let map = t.map.pow((k - 1) as i64);
        let factor = t.weight.expand(Arg::Map(&map), n)?;
        u = Scaled::normalized(u.series.mul(&factor), u.log_scale);
        let g = f.expand(Arg::Map(&t.map.pow(k as i64)), n)?;
        let term = u.series.mul(&g);
        let est = t.space.norm_checked(&term)?;
        if !est.value.is_finite() || est.value == 0.0 {
            return Err(Error::IllConditioned(format!("iterate {k} has norm {}", est.value)));
        }
        values.push(((est.value.ln() + u.log_scale - base.ln()) / k as f64).exp());
        tails.push(est.tail_fraction);
    }
    let truncation_suspect = tails.iter().any(|&t| t > crate::spaces::TAIL_LIMIT);
    Ok(GelfandSequence { values, tail_fractions: tails, truncation_suspect })
}

/// Eigenvalues of a finite section.
///
/// Diagnostic only: finite sections of non-normal operators can show spurious
/// eigenvalues far from the spectrum of the operator itself.
pub fn truncated_eigenvalues(m: &GalerkinMatrix) -> Result<Vec<C64>> {
    let schur = Schur::try_new(m.entries.clone(), 1e-14, 10_000 * m.dim().max(1))
        .ok_or_else(|| Error::EigSolverFailure("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let ev: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    if ev.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigSolverFailure("non-finite eigenvalue".into()));
    }
    Ok(ev)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventFlag {
    SlowConvergence,
    TruncationSuspect,
}

/// A partial sum of a resolvent series with its residual trail.
#[derive(Debug, Clone, Serialize)]
pub struct ResolventSeries {
    #[serde(skip)]
    pub solution: TaylorSeries,
    pub terms: usize,
    pub term_norms: Vec<f64>,
    /// `||(lambda - T) S_m - f|| / ||f||` on the guard band after each term.
    pub residual_history: Vec<f64>,
    pub residual: f64,
    /// Mean ratio of consecutive term norms over the last terms.
    pub observed_rate: f64,
    /// `inclusion_inner / |lambda|` (forward) or `|lambda| / inclusion_outer` (backward).
    pub predicted_rate: Option<f64>,
    pub flags: Vec<ResolventFlag>,
}

/// `||(lambda - T) x - y|| / ||y||` on the guard band of `T`.
pub fn residual(t: &WCOperator, lambda: C64, x: &TaylorSeries, y: &TaylorSeries) -> Result<f64> {
    let lam = t.automorphism.map(|a| a.lambda_a).unwrap_or(1.0);
    let g = guard_band(t.order, lam);
    let r = &(&x.scale(lambda) - &t.apply(x)?) - &y.with_order(t.order);
    let ny = t.space.norm(&y.with_order(g))?;
    Ok(t.space.norm(&r.with_order(g))? / ny.max(f64::MIN_POSITIVE))
}

/// `F = sum_{n<M} T^n f / lambda^{n+1}`.
pub fn resolvent_forward(t: &WCOperator, f: &Expr, lambda: C64, m: usize) -> Result<ResolventSeries> {
    neumann(t, t, f, lambda, m, Direction::Forward)
}

/// `G = -sum_{n<M} lambda^n T^{-(n+1)} f`, so that `(lambda - T) G = f` like the forward series.
pub fn resolvent_backward(t: &WCOperator, f: &Expr, lambda: C64, m: usize) -> Result<ResolventSeries> {
    let inv = t.inverse_operator()?;
    neumann(t, &inv, f, lambda, m, Direction::Backward)
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Backward,
}

fn neumann(t: &WCOperator, step: &WCOperator, f: &Expr, lambda: C64, mut m: usize, dir: Direction) -> Result<ResolventSeries> {
    if m == 0 {
        return Err(Error::Config("resolvent needs at least one term".into()));
    }
    if lambda.norm() == 0.0 {
        match dir {
            Direction::Forward => return Err(Error::Config("forward resolvent needs lambda != 0".into())),
            Direction::Backward => m = 1,
        }
    }
    let n = t.order;
    let y = f.series(n)?;
    let fnorm = t.space.norm(&y)?;
    if !(fnorm > 0.0) {
        return Err(Error::Config("right-hand side is zero".into()));
    }
    let mut sum = TaylorSeries::zeros(n);
    let mut u = Scaled { series: TaylorSeries::one(n), log_scale: 0.0 };
    let mut term_norms = Vec::new();
    let mut history = Vec::new();
    let mut growth = 0;
    let ln_lam = lambda.norm().ln();
    let phase = lambda / lambda.norm();
    let mut terms = 0;
    for k in 0..m {
        // power of `step` applied to f: Forward uses T^k, Backward T^{-(k+1)}
        let p = match dir {
            Direction::Forward => k,
            Direction::Backward => k + 1,
        };
        if p > 0 {
            let factor = step.weight.expand(Arg::Map(&step.map.pow((p - 1) as i64)), n)?;
            u = Scaled::normalized(u.series.mul(&factor), u.log_scale);
        }
        let g = f.expand(Arg::Map(&step.map.pow(p as i64)), n)?;
        let raw = u.series.mul(&g);
        // coefficient lambda^{-(k+1)} or lambda^k, applied in log form
        let (log_c, ph) = match dir {
            Direction::Forward => (-(k as f64 + 1.0) * ln_lam, phase.powi(-(k as i32 + 1))),
            Direction::Backward if k == 0 => (0.0, C64::new(-1.0, 0.0)),
            Direction::Backward => (k as f64 * ln_lam, -phase.powi(k as i32)),
        };
        let scale = (u.log_scale + log_c).exp();
        if !scale.is_finite() {
            return Err(Error::SeriesDiverging { terms: k, last_norm: f64::INFINITY });
        }
        let term = raw.scale(ph * scale);
        let tn = t.space.norm(&term)? / fnorm;
        if let Some(&prev) = term_norms.last() {
            growth = if tn > prev { growth + 1 } else { 0 };
        }
        term_norms.push(tn);
        if growth >= DIVERGENCE_RUN {
            return Err(Error::SeriesDiverging { terms: k + 1, last_norm: tn });
        }
        sum += &term;
        terms = k + 1;
        history.push(residual(t, lambda, &sum, &y)?);
        if tn < 1e-17 {
            break;
        }
    }
    let tail = term_norms.len().saturating_sub(10).max(1);
    let ratios: Vec<f64> = term_norms[tail - 1..].windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect();
    let observed_rate = if ratios.is_empty() {
        0.0
    } else {
        (ratios.iter().map(|r| r.max(1e-300).ln()).sum::<f64>() / ratios.len() as f64).exp()
    };
    let predicted_rate = match (&t.symbol, t.automorphism) {
        (Some(sym), Some(psi)) => {
            let p = predict_annuli(sym, &psi, &t.space);
            Some(match dir {
                Direction::Forward => p.inclusion_inner / lambda.norm(),
                Direction::Backward => lambda.norm() / p.inclusion_outer,
            })
        }
        _ => None,
    };
    let mut flags = Vec::new();
    if observed_rate > SLOW_RATIO || predicted_rate.is_some_and(|r| r > SLOW_RATIO) {
        flags.push(ResolventFlag::SlowConvergence);
    }
    if t.space.norm_checked(&sum)?.truncation_suspect {
        flags.push(ResolventFlag::TruncationSuspect);
    }
    Ok(ResolventSeries {
        residual: *history.last().expect("at least one term"),
        solution: sum,
        terms,
        term_norms,
        residual_history: history,
        observed_rate,
        predicted_rate,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobius::Mobius;
    use crate::symbolparse::parse;
    use crate::wco::normalized_isometry;

    fn half() -> Automorphism {
        Automorphism::canonical(0.5).unwrap()
    }

    fn op(u: &str, n: usize) -> WCOperator {
        WCOperator::from_text(u, half(), SpaceSpec::hardy(), n).unwrap()
    }

    #[test]
    fn annulus_examples() {
        let s3 = 3f64.sqrt();
        let t = op("1", 16);
        let p = predict_annuli(t.symbol.as_ref().unwrap(), &half(), &t.space);
        for (v, want) in [(p.inner_lower, 1.0 / s3), (p.inclusion_inner, 1.0 / s3), (p.outer_upper, s3), (p.inclusion_outer, s3)] {
            assert!((v - want).abs() < 1e-12);
        }
        let t = op("2+z", 16);
        let p = predict_annuli(t.symbol.as_ref().unwrap(), &half(), &t.space);
        assert!((p.inclusion_inner - 1.0 / s3).abs() < 1e-4);
        assert!((p.inclusion_outer - 3.0 * s3).abs() < 1e-3);
        assert!(p.universality_window_nonempty);
        let b = WCOperator::from_text("2+z", half(), SpaceSpec::bergman(0.0).unwrap(), 16).unwrap();
        let p = predict_annuli(b.symbol.as_ref().unwrap(), &half(), &b.space);
        assert!((p.inclusion_inner - 1.0 / 3.0).abs() < 1e-4 && (p.inclusion_outer - 9.0).abs() < 1e-3);
    }

    #[test]
    fn inverse_symmetry() {
        let t = op("exp(0.3*z)/(1 - 0.2*z)", 16);
        let p = predict_annuli(t.symbol.as_ref().unwrap(), &half(), &t.space);
        let q = p.inverse();
        assert!((q.outer_upper - 1.0 / p.inner_lower).abs() < 1e-10 * q.outer_upper);
        assert!((q.inner_lower - 1.0 / p.outer_upper).abs() < 1e-10 * q.inner_lower);
        // the sampled prediction of the inverse operator agrees with the algebraic swap
        let inv = t.inverse_operator().unwrap();
        let s = predict_annuli(inv.symbol.as_ref().unwrap(), inv.automorphism.as_ref().unwrap(), &inv.space);
        assert!((s.outer_upper - q.outer_upper).abs() < 1e-3 * q.outer_upper);
        assert!((s.inner_lower - q.inner_lower).abs() < 1e-3 * q.inner_lower);
    }

    #[test]
    fn rescaling_equivariance() {
        let t = op("2+z", 64);
        let c = C64::new(0.0, 2.5);
        let s = t.scaled(c).unwrap();
        let p = predict_annuli(t.symbol.as_ref().unwrap(), &half(), &t.space);
        let q = predict_annuli(s.symbol.as_ref().unwrap(), &half(), &s.space);
        for (x, y) in [(p.outer_upper, q.outer_upper), (p.inner_lower, q.inner_lower), (p.inclusion_inner, q.inclusion_inner), (p.inclusion_outer, q.inclusion_outer)] {
            assert!((2.5 * x - y).abs() < 1e-12 * y);
        }
        let f = Expr::c(1.0) + Expr::Z;
        let g1 = gelfand_radius(&t, &f, 6).unwrap();
        let g2 = gelfand_radius(&s, &f, 6).unwrap();
        for (x, y) in g1.values.iter().zip(&g2.values) {
            assert!((2.5 * x - y).abs() < 1e-12 * y);
        }
    }

    #[test]
    fn gelfand_scaled_isometry_is_constant() {
        let c = C64::new(0.6, 0.8) * 1.7;
        let v = normalized_isometry(Mobius::identity(), SpaceSpec::hardy(), 32).unwrap().scaled(c).unwrap();
        let g = gelfand_radius(&v, &Expr::c(1.0), 10).unwrap();
        assert!(g.values.iter().all(|x| (x - 1.7).abs() < 1e-13));
    }

    #[test]
    fn gelfand_unweighted_bounded_by_outer_radius() {
        let t = op("1", 256);
        let g = gelfand_radius(&t, &Expr::c(1.0), 40).unwrap();
        assert!(g.last() <= 3f64.sqrt() + 0.1);
        let g = gelfand_radius(&t.inverse_operator().unwrap(), &Expr::c(1.0), 40).unwrap();
        assert!(g.last() <= 3f64.sqrt() + 0.1);
    }

    #[test]
    fn eigenvalue_examples() {
        let id = WCOperator::identity(SpaceSpec::hardy(), 8).unwrap().galerkin().unwrap();
        assert!(truncated_eigenvalues(&id).unwrap().iter().all(|e| (e - 1.0).norm() < 1e-14));
        let c = C64::new(-0.4, 1.1);
        let v = normalized_isometry(Mobius::identity(), SpaceSpec::bergman(0.0).unwrap(), 8).unwrap().scaled(c).unwrap();
        let ev = truncated_eigenvalues(&v.galerkin().unwrap()).unwrap();
        assert!(ev.iter().all(|e| (e - c).norm() < 1e-13));
    }

    #[test]
    fn forward_geometric() {
        let c = C64::new(0.3, -0.9);
        let v = normalized_isometry(Mobius::canonical(0.5), SpaceSpec::hardy(), 128).unwrap().scaled(c).unwrap();
        let r = resolvent_forward(&v, &Expr::c(1.0), 2.0 * c, 60).unwrap();
        assert!(r.residual < 1e-10, "{}", r.residual);
    }

    #[test]
    fn forward_weighted() {
        let t = op("2+z", 512);
        let r = resolvent_forward(&t, &Expr::c(1.0), C64::new(4.0, 0.0), 80).unwrap();
        assert!(r.residual < 1e-4, "{}", r.residual);
        assert!(r.residual_history.windows(10).all(|w| w[9] < w[0]));
        let e = resolvent_forward(&t, &Expr::c(1.0), C64::new(0.3, 0.0), 80).unwrap_err();
        assert!(matches!(e, Error::SeriesDiverging { .. }));
    }

    #[test]
    fn backward_weighted() {
        let t = op("2+z", 512);
        let f = parse("(1 - z)^2 * (1 + z)^2").unwrap();
        let r = resolvent_backward(&t, &f, C64::new(0.0, 0.0), 1).unwrap();
        assert!(r.residual < 1e-8, "{}", r.residual);
        let r = resolvent_backward(&t, &f, C64::new(1.0, 0.0), 80).unwrap();
        assert!(r.residual < 1e-4, "{}", r.residual);
        let outer = predict_annuli(t.symbol.as_ref().unwrap(), &half(), &t.space).inclusion_outer;
        // (1 + z)^3 does not vanish at a, so the rate there is |lambda| / inclusion_outer
        let g = parse("(1 + z)^3").unwrap();
        let r = resolvent_backward(&t, &g, C64::new(0.9 * outer, 0.0), 80).unwrap();
        assert!(r.residual_history.last() < r.residual_history.first());
        assert!(r.flags.contains(&ResolventFlag::SlowConvergence));
        assert!((r.predicted_rate.unwrap() - 0.9).abs() < 1e-3);
    }
}
