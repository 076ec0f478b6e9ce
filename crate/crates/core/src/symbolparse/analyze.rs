use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::error::{Error, Result};
use crate::mobius::Automorphism;
use crate::series::TaylorSeries;

/// Circle ladder and fan parameters used to estimate moduli of a weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    /// Circles `rho_j = 1 - 2^-j`, `j = 1..=rungs`.
    pub rungs: u32,
    pub angles: usize,
    /// Fan points `c (1 - 2^-j e^{i theta_k})` near each fixed point.
    pub fan_angles: usize,
    /// limsup/liminf are taken over this many outermost rungs.
    pub tail_rungs: u32,
    pub invertibility_threshold: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            rungs: 20,
            angles: 4096,
            fan_angles: 64,
            tail_rungs: 5,
            invertibility_threshold: 1e-8,
        }
    }
}

/// A parsed weight together with its expansion and modulus estimates.
#[derive(Debug, Clone, Serialize)]
pub struct WeightSymbol {
    #[serde(skip)]
    pub expr: Expr,
    #[serde(skip)]
    pub series: TaylorSeries,
    pub expr_text: String,
    pub sup_norm_est: f64,
    pub inf_modulus_est: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    /// Per-rung `(max, min)` of `|u|` on the fan at `a`, innermost first.
    pub a_fan: Vec<(f64, f64)>,
    pub b_fan: Vec<(f64, f64)>,
    /// Largest change of the fan max/min over the tail rungs, relative to `|u|`.
    pub fan_drift: f64,
    /// Set when `|u|` may fail to extend continuously to `a` or `b`.
    pub heuristic: bool,
    #[serde(with = "crate::report::cplx::vec")]
    pub boundary_singularities: Vec<C64>,
    pub sampling: SamplingParams,
}

/// Winding number of `u` around 0 along `|z| = rho`.
pub fn winding_check(expr: &Expr, rho: f64) -> Result<i64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Config(format!("winding radius {rho} outside (0, 1)")));
    }
    let mut m = 4096usize;
    loop {
        let vals: Vec<C64> =
            (0..m).into_par_iter().map(|k| expr.eval(C64::from_polar(rho, TAU * k as f64 / m as f64))).collect();
        if let Some(v) = vals.iter().find(|v| !(v.norm() >= 1e-12)) {
            let _ = v;
            return Err(Error::ZeroOnCircle(rho));
        }
        let mut total = 0.0;
        let mut coarse = false;
        for k in 0..m {
            let step = (vals[(k + 1) % m] / vals[k]).arg();
            coarse |= step.abs() > PI / 4.0;
            total += step;
        }
        if !coarse || m >= 1 << 22 {
            return Ok((total / TAU).round() as i64);
        }
        m *= 4;
    }
}

fn circle_extremes(expr: &Expr, rho: f64, angles: usize) -> (f64, f64) {
    (0..angles)
        .into_par_iter()
        .map(|k| {
            let v = expr.eval(C64::from_polar(rho, TAU * k as f64 / angles as f64)).norm();
            (v, v)
        })
        .reduce(|| (f64::NEG_INFINITY, f64::INFINITY), |x, y| (x.0.max(y.0), x.1.min(y.1)))
}

/// `(max, min)` of `|u|` on the fan at `c` for each rung.
fn fan(expr: &Expr, c: C64, p: &SamplingParams) -> Vec<(f64, f64)> {
    (1..=p.rungs)
        .map(|j| {
            let eps = 0.5f64.powi(j as i32);
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for k in 0..p.fan_angles {
                let theta = -PI / 2.0 + PI * (k as f64 + 0.5) / p.fan_angles as f64;
                let z = c * (1.0 - eps * C64::from_polar(1.0, theta));
                if z.norm() >= 1.0 {
                    continue;
                }
                let v = expr.eval(z).norm();
                hi = hi.max(v);
                lo = lo.min(v);
            }
            (hi, lo)
        })
        .collect()
}

fn tail_limits(rungs: &[(f64, f64)], tail: usize) -> (f64, f64, f64) {
    let t = &rungs[rungs.len().saturating_sub(tail)..];
    let hi = t.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let lo = t.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let drift = |sel: fn(&(f64, f64)) -> f64| {
        let first = sel(&t[0]);
        let last = sel(&t[t.len() - 1]);
        (last - first).abs() / first.abs().max(last.abs()).max(f64::MIN_POSITIVE)
    };
    (hi, lo, drift(|r| r.0).max(drift(|r| r.1)))
}

/// Expands `u` to order `n` and estimates `||u||_inf`, `inf |u|` and `A±`, `B±`.
pub fn analyze(expr: &Expr, psi: &Automorphism, n: usize) -> Result<WeightSymbol> {
    analyze_with(expr, psi, n, &SamplingParams::default())
}

pub fn analyze_with(expr: &Expr, psi: &Automorphism, n: usize, p: &SamplingParams) -> Result<WeightSymbol> {
    let series = expr.series(n)?;
    if !series.is_finite() {
        return Err(Error::IllConditioned("weight expansion overflowed".into()));
    }

    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for j in 1..=p.rungs {
        let (hi, lo) = circle_extremes(expr, 1.0 - 0.5f64.powi(j as i32), p.angles);
        sup = sup.max(hi);
        inf = inf.min(lo);
    }
    let a_fan = fan(expr, psi.a, p);
    let b_fan = fan(expr, psi.b, p);
    for r in a_fan.iter().chain(b_fan.iter()) {
        sup = sup.max(r.0);
        inf = inf.min(r.1);
    }
    if !sup.is_finite() || inf.is_nan() {
        return Err(Error::IllConditioned("weight is not finite on the sampling ladder".into()));
    }
    if inf < p.invertibility_threshold {
        return Err(Error::NotInvertible(format!(
            "inf |u| estimate {inf:e} is below the threshold {:e}",
            p.invertibility_threshold
        )));
    }
    let rho = 1.0 - 0.5f64.powi(p.rungs.min(12) as i32);
    let w = winding_check(expr, rho)?;
    if w != 0 {
        return Err(Error::NotInvertible(format!("u has {w} zero(s) in |z| < {rho}")));
    }

    let tail = p.tail_rungs as usize;
    let (a_plus, a_minus, da) = tail_limits(&a_fan, tail);
    let (b_plus, b_minus, db) = tail_limits(&b_fan, tail);
    let sing = expr.boundary_singularities();
    let near = |c: C64| sing.iter().any(|s| (s - c).norm() < 1e-9);
    Ok(WeightSymbol {
        expr: expr.clone(),
        series,
        expr_text: expr.to_string(),
        sup_norm_est: sup,
        inf_modulus_est: inf,
        a_plus,
        a_minus,
        b_plus,
        b_minus,
        a_fan,
        b_fan,
        fan_drift: da.max(db),
        heuristic: near(psi.a) || near(psi.b),
        boundary_singularities: sing,
        sampling: *p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolparse::parse;

    fn half() -> Automorphism {
        Automorphism::canonical(0.5).unwrap()
    }

    #[test]
    fn unimodular_constant() {
        let s = analyze(&parse("1").unwrap(), &half(), 16).unwrap();
        for v in [s.a_plus, s.a_minus, s.b_plus, s.b_minus, s.sup_norm_est, s.inf_modulus_est] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn two_plus_z() {
        let s = analyze(&parse("2+z").unwrap(), &half(), 64).unwrap();
        assert!((s.a_plus - 3.0).abs() < 1e-4 && (s.a_minus - 3.0).abs() < 1e-4);
        assert!((s.b_plus - 1.0).abs() < 1e-4 && (s.b_minus - 1.0).abs() < 1e-4);
        assert!((s.sup_norm_est - 3.0).abs() < 1e-4);
        assert!((s.inf_modulus_est - 1.0).abs() < 1e-4);
        assert!(!s.heuristic);
        assert!(s.a_minus <= s.a_plus && s.b_minus <= s.b_plus);
    }

    #[test]
    fn vanishing_weight_rejected() {
        let e = analyze(&parse("z").unwrap(), &half(), 16).unwrap_err();
        assert!(matches!(e, Error::NotInvertible(_)));
        let e = analyze(&parse("z - 0.3").unwrap(), &half(), 16).unwrap_err();
        assert!(matches!(e, Error::NotInvertible(_)));
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding_check(&parse("2+z").unwrap(), 0.99).unwrap(), 0);
        assert_eq!(winding_check(&parse("z").unwrap(), 0.5).unwrap(), 1);
        assert_eq!(winding_check(&parse("exp(z)").unwrap(), 0.99).unwrap(), 0);
        assert_eq!(winding_check(&parse("(z - 0.2)^3/(z+0.1i)").unwrap(), 0.9).unwrap(), 2);
        assert!(matches!(winding_check(&parse("z - 0.5").unwrap(), 0.5), Err(Error::ZeroOnCircle(_))));
    }

    #[test]
    fn singular_atoms_are_flagged() {
        let s = analyze(&parse("pow(1 - z, 0.5i)").unwrap(), &half(), 32).unwrap();
        assert!(s.heuristic);
        assert_eq!(s.boundary_singularities.len(), 1);
    }

    #[test]
    fn deterministic() {
        let e = parse("exp(0.3*z)/(1 - 0.2*z)").unwrap();
        let x = analyze(&e, &half(), 64).unwrap();
        let y = analyze(&e, &half(), 64).unwrap();
        assert_eq!(serde_json::to_string(&x).unwrap(), serde_json::to_string(&y).unwrap());
        assert_eq!(x.series, y.series);
    }
}
