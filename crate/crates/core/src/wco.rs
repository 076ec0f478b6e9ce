//! The weighted composition operator `f -> u (f ∘ psi)`.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobius::{Automorphism, Mobius};
use crate::series::TaylorSeries;
use crate::spaces::SpaceSpec;
use crate::symbolparse::{analyze, parse, Expr, SamplingParams, WeightSymbol};

const ONE: C64 = C64::new(1.0, 0.0);

/// Highest coefficient index trusted after one truncated application.
///
/// Composition with `psi` moves coefficient mass from index `j` down to about
/// `j psi'(a)` with a spread of order `sqrt(j)`, so indices near `N psi'(a)` are
/// polluted by the truncated tail.
pub fn guard_band(order: usize, lambda_a: f64) -> usize {
    let half = order / 2;
    if !(lambda_a > 0.0 && lambda_a < 1.0) {
        return half.max(1);
    }
    let centre = order as f64 * lambda_a;
    let g = (centre - 4.0 * centre.sqrt()).floor().max(1.0) as usize;
    g.min(half).max(1)
}

/// `u C_M` on a space of holomorphic functions, truncated at order `N`.
#[derive(Debug, Clone)]
pub struct WCOperator {
    pub weight: Expr,
    pub map: Mobius,
    /// Present when `map` is hyperbolic.
    pub automorphism: Option<Automorphism>,
    /// Modulus estimates; present for operators built from a hyperbolic symbol.
    pub symbol: Option<WeightSymbol>,
    pub space: SpaceSpec,
    pub order: usize,
    u_series: TaylorSeries,
}

/// A scalar multiple `exp(log_scale) * series`, used for iterates that grow geometrically.
#[derive(Debug, Clone)]
pub struct Scaled {
    pub series: TaylorSeries,
    pub log_scale: f64,
}

impl Scaled {
    pub fn normalized(series: TaylorSeries, log_scale: f64) -> Scaled {
        let m = series.max_abs();
        if m > 0.0 && m.is_finite() {
            Scaled { series: series.scale(C64::new(1.0 / m, 0.0)), log_scale: log_scale + m.ln() }
        } else {
            Scaled { series, log_scale }
        }
    }

    /// Back to a plain series; fails when the scale overflows.
    pub fn into_series(self) -> Result<TaylorSeries> {
        let s = self.series.scale(C64::new(self.log_scale.exp(), 0.0));
        if !s.is_finite() {
            return Err(Error::IllConditioned(format!("iterate overflows (log scale {:.1})", self.log_scale)));
        }
        Ok(s)
    }
}

/// Running `(sup |u_n|)^{1/n}` and `(inf |u_n|)^{1/n}` on the sampling ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGrowth {
    pub sup: Vec<f64>,
    pub inf: Vec<f64>,
}

impl WCOperator {
    /// Operator with a hyperbolic automorphism; the weight is analyzed for invertibility.
    pub fn new(weight: Expr, psi: Automorphism, space: SpaceSpec, order: usize) -> Result<Self> {
        let symbol = analyze(&weight, &psi, order)?;
        Ok(WCOperator {
            u_series: symbol.series.clone(),
            weight,
            map: psi.map,
            automorphism: Some(psi),
            symbol: Some(symbol),
            space,
            order,
        })
    }

    pub fn from_text(symbol: &str, psi: Automorphism, space: SpaceSpec, order: usize) -> Result<Self> {
        Self::new(parse(symbol)?, psi, space, order)
    }

    /// Operator for any disk automorphism; no modulus analysis is run.
    pub fn with_map(weight: Expr, map: Mobius, space: SpaceSpec, order: usize) -> Result<Self> {
        map.check_disk_automorphism()?;
        let u_series = weight.series(order)?;
        if !u_series.is_finite() {
            return Err(Error::IllConditioned("weight expansion overflowed".into()));
        }
        Ok(WCOperator {
            weight,
            automorphism: Automorphism::from_mobius(map).ok(),
            map,
            symbol: None,
            space,
            order,
            u_series,
        })
    }

    /// `c T`.
    pub fn scaled(&self, c: C64) -> Result<Self> {
        let weight = Expr::Const(c) * self.weight.clone();
        match (self.automorphism, &self.symbol) {
            (Some(psi), Some(_)) => Self::new(weight, psi, self.space, self.order),
            _ => Self::with_map(weight, self.map, self.space, self.order),
        }
    }

    pub fn weight_series(&self) -> &TaylorSeries {
        &self.u_series
    }

    pub fn require_automorphism(&self) -> Result<&Automorphism> {
        self.automorphism
            .as_ref()
            .ok_or_else(|| Error::NotHyperbolic("operator map is not a hyperbolic automorphism".into()))
    }

    /// `u (f ∘ M)` truncated at `N`.
    pub fn apply(&self, f: &TaylorSeries) -> Result<TaylorSeries> {
        let m = &self.map;
        let g = f.with_order(self.order).compose_mobius(m.alpha, m.beta, m.gamma, m.delta);
        let out = self.u_series.mul(&g);
        if !out.is_finite() {
            return Err(Error::IllConditioned("operator application overflowed".into()));
        }
        Ok(out)
    }

    /// `u (f ∘ M)` as an expression; expands without truncation loss.
    pub fn apply_expr(&self, f: &Expr) -> Expr {
        self.weight.clone() * f.clone().compose(self.map)
    }

    /// `T^n f = u_n (f ∘ M_n)` with `u_n = prod_{j<n} u ∘ M_j`.
    pub fn power_expr(&self, f: &Expr, n: usize) -> Expr {
        let factors = (0..n).map(|j| self.weight.clone().compose(self.map.pow(j as i64)));
        Expr::product(factors) * f.clone().compose(self.map.pow(n as i64))
    }

    /// Expansion of `u_n` with its scale split off.
    pub fn iterated_weight_scaled(&self, n: usize) -> Result<Scaled> {
        let mut acc = Scaled { series: TaylorSeries::one(self.order), log_scale: 0.0 };
        for j in 0..n {
            let factor = self.weight.expand(crate::symbolparse::Arg::Map(&self.map.pow(j as i64)), self.order)?;
            acc = Scaled::normalized(acc.series.mul(&factor), acc.log_scale);
            if !acc.series.is_finite() {
                return Err(Error::IllConditioned(format!("iterated weight u_{} overflowed", j + 1)));
            }
        }
        Ok(acc)
    }

    /// `u_n`; `1` for `n = 0`.
    pub fn iterated_weight(&self, n: usize) -> Result<TaylorSeries> {
        self.iterated_weight_scaled(n)?.into_series()
    }

    /// Expansion of `T^n f` with its scale split off.
    pub fn power_scaled(&self, f: &Expr, n: usize) -> Result<Scaled> {
        let u = self.iterated_weight_scaled(n)?;
        let g = f.expand(crate::symbolparse::Arg::Map(&self.map.pow(n as i64)), self.order)?;
        Ok(Scaled::normalized(u.series.mul(&g), u.log_scale))
    }

    /// Relative distance between `n` truncated applications and `u_n (f ∘ M_n)`,
    /// measured on the guard band.
    pub fn iterate_consistency(&self, n: usize, f: &TaylorSeries) -> Result<f64> {
        let mut x = f.with_order(self.order);
        for _ in 0..n {
            x = self.apply(&x)?;
        }
        let direct = self
            .iterated_weight(n)?
            .mul(&Expr::Poly(f.coeffs().to_vec()).expand(crate::symbolparse::Arg::Map(&self.map.pow(n as i64)), self.order)?);
        let lam = self.automorphism.map(|a| a.lambda_a).unwrap_or(1.0);
        let g = guard_band(self.order, lam);
        let diff = (&x - &direct).with_order(g);
        Ok(self.space.norm(&diff)? / self.space.norm(f)?.max(f64::MIN_POSITIVE))
    }

    /// `(max |u_n|)^{1/n}` and `(min |u_n|)^{1/n}` over the circle ladder, `n = 1..=n_max`.
    pub fn gelfand_sup_weight(&self, n_max: usize) -> Result<WeightGrowth> {
        if n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        let p = self.symbol.as_ref().map(|s| s.sampling).unwrap_or_default();
        let points: Vec<C64> = (1..=p.rungs)
            .flat_map(|j| {
                let rho = 1.0 - 0.5f64.powi(j as i32);
                (0..p.angles).map(move |k| C64::from_polar(rho, TAU * k as f64 / p.angles as f64))
            })
            .collect();
        let map = self.map;
        let weight = &self.weight;
        let (hi, lo) = points
            .par_iter()
            .fold(
                || (vec![f64::NEG_INFINITY; n_max], vec![f64::INFINITY; n_max]),
                |(mut hi, mut lo), &z0| {
                    let mut z = z0;
                    let mut s = 0.0;
                    for n in 0..n_max {
                        s += weight.eval(z).norm().ln();
                        z = map.eval(z);
                        hi[n] = hi[n].max(s);
                        lo[n] = lo[n].min(s);
                    }
                    (hi, lo)
                },
            )
            .reduce(
                || (vec![f64::NEG_INFINITY; n_max], vec![f64::INFINITY; n_max]),
                |(a, b), (c, d)| {
                    (
                        a.iter().zip(&c).map(|(x, y)| x.max(*y)).collect(),
                        b.iter().zip(&d).map(|(x, y)| x.min(*y)).collect(),
                    )
                },
            );
        if hi.iter().chain(&lo).any(|v| !v.is_finite()) {
            return Err(Error::IllConditioned("iterated weight not finite on the sampling ladder".into()));
        }
        let root = |v: Vec<f64>| v.iter().enumerate().map(|(n, s)| (s / (n + 1) as f64).exp()).collect();
        Ok(WeightGrowth { sup: root(hi), inf: root(lo) })
    }

    /// `(u ∘ M^{-1})^{-1} C_{M^{-1}}`.
    pub fn inverse_operator(&self) -> Result<Self> {
        let inv = self.map.inverse();
        let weight = self.weight.clone().compose(inv).recip();
        match self.automorphism {
            Some(psi) if self.symbol.is_some() => Self::new(weight, psi.inverse(), self.space, self.order),
            _ => {
                let w0 = weight.eval(C64::new(0.0, 0.0));
                if !w0.is_finite() {
                    return Err(Error::NotInvertible("weight vanishes".into()));
                }
                Self::with_map(weight, inv, self.space, self.order)
            }
        }
    }

    /// Finite section in the orthonormal monomial basis.
    pub fn galerkin(&self) -> Result<GalerkinMatrix> {
        let n = self.order;
        let norms = self.space.monomial_norms(n)?;
        let m = &self.map;
        // columns M^k, k = 0..=N, by repeated multiplication with (alpha z + beta)/(gamma z + delta)
        let mut powers = Vec::with_capacity(n + 1);
        let mut cur = TaylorSeries::one(n);
        for _ in 0..=n {
            powers.push(cur.clone());
            cur.mul_linear(m.beta, m.alpha);
            cur.div_linear(m.delta, m.gamma);
        }
        let cols: Vec<Vec<C64>> = powers
            .par_iter()
            .enumerate()
            .map(|(k, pk)| {
                let col = self.u_series.mul(pk);
                col.coeffs().iter().zip(&norms).map(|(c, w)| c * (w / norms[k])).collect()
            })
            .collect();
        let entries = DMatrix::from_fn(n + 1, n + 1, |i, j| cols[j][i]);
        if entries.iter().any(|c| !c.is_finite()) {
            return Err(Error::IllConditioned("Galerkin matrix has non-finite entries".into()));
        }
        Ok(GalerkinMatrix { entries, norms, space: self.space })
    }

    pub fn default_sampling(&self) -> SamplingParams {
        self.symbol.as_ref().map(|s| s.sampling).unwrap_or_default()
    }
}

/// `(psi')^gamma C_psi`.
pub fn normalized_isometry(map: Mobius, space: SpaceSpec, order: usize) -> Result<WCOperator> {
    if space.p != 2.0 {
        return Err(Error::UnsupportedExponent(space.p));
    }
    WCOperator::with_map(isometry_factor(&map, space.gamma, 1.0), map, space, order)
}

/// `(M')^(sign * gamma) = (gamma z + delta)^(-2 sign gamma)` for a determinant-1 map.
pub fn isometry_factor(map: &Mobius, gamma: f64, sign: f64) -> Expr {
    let s = C64::new(-2.0 * sign * gamma, 0.0);
    if map.gamma == C64::new(0.0, 0.0) {
        Expr::Const(crate::series::principal_pow(map.delta, s))
    } else {
        Expr::Pow { p0: map.delta, p1: map.gamma, s }
    }
}

/// Dense `(N+1) x (N+1)` section; column `m` holds `T e_m` in `{e_n}`, `e_n = z^n / ||z^n||`.
#[derive(Debug, Clone)]
pub struct GalerkinMatrix {
    pub entries: DMatrix<C64>,
    pub norms: Vec<f64>,
    pub space: SpaceSpec,
}

impl GalerkinMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Orthonormal-basis coordinates of a series.
    pub fn coords(&self, f: &TaylorSeries) -> nalgebra::DVector<C64> {
        nalgebra::DVector::from_fn(self.dim(), |k, _| f.coeff(k) * self.norms[k])
    }

    pub fn series_from(&self, v: &nalgebra::DVector<C64>) -> TaylorSeries {
        TaylorSeries::new(v.iter().zip(&self.norms).map(|(c, w)| c / w).collect())
    }

    /// Matrix action on a series.
    pub fn apply(&self, f: &TaylorSeries) -> TaylorSeries {
        self.series_from(&(&self.entries * self.coords(f)))
    }

    /// Row-major `re,im` pairs, one matrix row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| {
                    let c = self.entries[(i, j)];
                    format!("{:?},{:?}", c.re, c.im)
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

impl WCOperator {
    /// Identity on the space, as `1 C_id`.
    pub fn identity(space: SpaceSpec, order: usize) -> Result<Self> {
        Self::with_map(Expr::Const(ONE), Mobius::identity(), space, order)
    }
}
