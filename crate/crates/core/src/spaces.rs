//! Hardy and weighted Bergman spaces: monomial norms, series norms, p-means.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::graded_panels;
use crate::series::TaylorSeries;

/// Number of trailing coefficients inspected by [`SpaceSpec::norm_checked`].
pub const TAIL_WINDOW: usize = 16;
pub const TAIL_LIMIT: f64 = 1e-6;
pub const CIRCLE_NODES: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    Hardy,
    Bergman { sigma: f64 },
}

/// `H^p` or `A^p_sigma` with its isometry exponent `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    pub p: f64,
    pub gamma: f64,
}

/// A norm together with the share of the squared norm carried by the last coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub tail_fraction: f64,
    pub truncation_suspect: bool,
}

impl SpaceSpec {
    pub fn hardy() -> Self {
        SpaceSpec { kind: SpaceKind::Hardy, p: 2.0, gamma: 0.5 }
    }

    pub fn bergman(sigma: f64) -> Result<Self> {
        if !(sigma > -1.0) || !sigma.is_finite() {
            return Err(Error::InvalidSpace(format!("Bergman weight sigma = {sigma} must exceed -1")));
        }
        Ok(SpaceSpec { kind: SpaceKind::Bergman { sigma }, p: 2.0, gamma: (sigma + 2.0) / 2.0 })
    }

    /// Same space with exponent `p`; `gamma` is rescaled accordingly.
    pub fn with_p(self, p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidSpace(format!("p = {p} must be a finite number >= 1")));
        }
        let gamma = match self.kind {
            SpaceKind::Hardy => 1.0 / p,
            SpaceKind::Bergman { sigma } => (sigma + 2.0) / p,
        };
        Ok(SpaceSpec { p, gamma, ..self })
    }

    fn require_p2(&self) -> Result<()> {
        if self.p == 2.0 {
            Ok(())
        } else {
            Err(Error::UnsupportedExponent(self.p))
        }
    }

    /// `||z^n||`.
    pub fn monomial_norm(&self, n: usize) -> Result<f64> {
        Ok(*self.monomial_norms(n)?.last().expect("nonempty"))
    }

    /// `||z^k||` for `k = 0..=n`.
    ///
    /// For Bergman spaces `||z^k||^2 = pi k! Gamma(sigma+1) / Gamma(k+sigma+2)`,
    /// evaluated as `pi/(sigma+1) prod_{j<=k} j/(sigma+1+j)`.
    pub fn monomial_norms(&self, n: usize) -> Result<Vec<f64>> {
        self.require_p2()?;
        Ok(match self.kind {
            SpaceKind::Hardy => vec![1.0; n + 1],
            SpaceKind::Bergman { sigma } => {
                let mut sq = PI / (sigma + 1.0);
                let mut out = Vec::with_capacity(n + 1);
                out.push(sq.sqrt());
                for k in 1..=n {
                    sq *= k as f64 / (sigma + 1.0 + k as f64);
                    out.push(sq.sqrt());
                }
                out
            }
        })
    }

    pub fn norm(&self, f: &TaylorSeries) -> Result<f64> {
        Ok(self.norm_checked(f)?.value)
    }

    /// Coefficient norm with the tail diagnostic.
    pub fn norm_checked(&self, f: &TaylorSeries) -> Result<NormEstimate> {
        let w = self.monomial_norms(f.order())?;
        let terms: Vec<f64> = f.coeffs().iter().zip(&w).map(|(c, w)| (c.norm() * w).powi(2)).collect();
        let total: f64 = terms.iter().sum();
        // short series use the last quarter
        let window = TAIL_WINDOW.min(f.order() / 4).max(1);
        let start = f.order() + 1 - window;
        let tail: f64 = terms[start..].iter().sum();
        let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
        Ok(NormEstimate {
            value: total.sqrt(),
            tail_fraction,
            truncation_suspect: f.order() >= 4 && tail_fraction > TAIL_LIMIT,
        })
    }

    /// `<f, g>` in the space.
    pub fn inner(&self, f: &TaylorSeries, g: &TaylorSeries) -> Result<C64> {
        let n = f.order().min(g.order());
        let w = self.monomial_norms(n)?;
        Ok((0..=n).map(|k| f.coeff(k) * g.coeff(k).conj() * w[k] * w[k]).sum())
    }

    /// The p-norm integral restricted to radius `rho`.
    ///
    /// Hardy: `(mean_theta |f(rho e^{i theta})|^p)^{1/p}` by the trapezoid rule.
    /// Bergman: `(int_{|z|<rho} |f|^p (1-|z|^2)^sigma dA)^{1/p}`.
    /// `rho = 1` is accepted and treats `f` as the polynomial it stores.
    pub fn pnorm_quadrature(&self, f: &TaylorSeries, rho: f64) -> f64 {
        let deg = f.degree().unwrap_or(0);
        let p = self.p;
        match self.kind {
            SpaceKind::Hardy => circle_mean(f, deg, rho, p, CIRCLE_NODES).powf(1.0 / p),
            SpaceKind::Bergman { sigma } => {
                let nodes = (4 * (deg + 1)).clamp(256, 2048);
                // t = 1 - r^2, u = t^(sigma+1):  pi/(sigma+1) int M(r(u)) du
                let u0 = (1.0 - rho * rho).max(0.0).powf(sigma + 1.0);
                let rule = graded_panels(u0, 1.0, 48, 16);
                let total: f64 = rule
                    .par_iter()
                    .map(|&(u, w)| {
                        let t = u.powf(1.0 / (sigma + 1.0));
                        let r = (1.0 - t).max(0.0).sqrt();
                        w * circle_mean(f, deg, r, p, nodes)
                    })
                    .sum();
                (PI / (sigma + 1.0) * total).powf(1.0 / p)
            }
        }
    }
}

fn circle_mean(f: &TaylorSeries, deg: usize, r: f64, p: f64, nodes: usize) -> f64 {
    let c = &f.coeffs()[..=deg];
    let sum: f64 = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let z = C64::from_polar(r, TAU * k as f64 / nodes as f64);
            c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &x| acc * z + x).norm().powf(p)
        })
        .sum();
    sum / nodes as f64
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SpaceKind::Hardy => write!(f, "hardy")?,
            SpaceKind::Bergman { sigma } => write!(f, "bergman:{sigma}")?,
        }
        if self.p != 2.0 {
            write!(f, " (p = {})", self.p)?;
        }
        Ok(())
    }
}

impl FromStr for SpaceSpec {
    type Err = Error;

    /// `hardy` or `bergman:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("hardy") {
            return Ok(SpaceSpec::hardy());
        }
        if let Some(rest) = s.strip_prefix("bergman:") {
            let sigma: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpace(format!("cannot read sigma from `{rest}`")))?;
            return SpaceSpec::bergman(sigma);
        }
        Err(Error::InvalidSpace(format!("unknown space `{s}`; use `hardy` or `bergman:<sigma>`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolparse::parse;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gamma_exponents() {
        assert_eq!(SpaceSpec::hardy().gamma, 0.5);
        assert_eq!(SpaceSpec::bergman(0.0).unwrap().gamma, 1.0);
        assert_eq!(SpaceSpec::hardy().with_p(4.0).unwrap().gamma, 0.25);
        assert_eq!(SpaceSpec::bergman(1.0).unwrap().with_p(3.0).unwrap().gamma, 1.0);
        assert!(SpaceSpec::bergman(-1.0).is_err());
        assert!(SpaceSpec::hardy().with_p(0.5).is_err());
    }

    #[test]
    fn monomial_norms() {
        assert_eq!(SpaceSpec::hardy().monomial_norm(7).unwrap(), 1.0);
        let b = SpaceSpec::bergman(0.0).unwrap();
        assert!((b.monomial_norm(0).unwrap() - PI.sqrt()).abs() < 1e-15);
        // sigma = 0: ||z^n||^2 = pi/(n+1)
        assert!((b.monomial_norm(5).unwrap().powi(2) - PI / 6.0).abs() < 1e-15);
        let w = SpaceSpec::bergman(0.7).unwrap().monomial_norms(64).unwrap();
        assert!(w.windows(2).all(|p| p[1] < p[0]));
        assert!(matches!(
            SpaceSpec::hardy().with_p(3.0).unwrap().monomial_norm(1),
            Err(Error::UnsupportedExponent(_))
        ));
    }

    #[test]
    fn series_norms() {
        let h = SpaceSpec::hardy();
        let f = TaylorSeries::from_poly(&[c(1.0, 0.0), c(1.0, 0.0)], 8);
        assert!((h.norm(&f).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(h.norm(&TaylorSeries::zeros(8)).unwrap(), 0.0);
        let slow = parse("pow(1 - z, -0.45)").unwrap().series(256).unwrap();
        assert!(h.norm_checked(&slow).unwrap().truncation_suspect);
        let fast = parse("1/(3 - z)").unwrap().series(256).unwrap();
        assert!(!h.norm_checked(&fast).unwrap().truncation_suspect);
    }

    #[test]
    fn hardy_pmeans() {
        let h4 = SpaceSpec::hardy().with_p(4.0).unwrap();
        let one = TaylorSeries::one(4);
        assert!((h4.pnorm_quadrature(&one, 0.5) - 1.0).abs() < 1e-14);
        let f = TaylorSeries::from_poly(&[c(1.0, 0.0), c(1.0, 0.0)], 4);
        // mean of |1 + rho e^{it}|^4 is 1 + 4 rho^2 + rho^4
        let rho: f64 = 0.999;
        let exact = (1.0 + 4.0 * rho * rho + rho.powi(4)).powf(0.25);
        assert!((h4.pnorm_quadrature(&f, rho) - exact).abs() < 1e-12);
        assert!((h4.pnorm_quadrature(&f, 1.0) - 6f64.powf(0.25)).abs() < 1e-12);
        let g = parse("exp(2*z) + 1/(1.5 - z)").unwrap().series(64).unwrap();
        let means: Vec<f64> = (1..=10).map(|k| h4.pnorm_quadrature(&g, k as f64 / 10.5)).collect();
        assert!(means.windows(2).all(|m| m[1] >= m[0]));
    }

    #[test]
    fn parse_spaces() {
        assert_eq!("hardy".parse::<SpaceSpec>().unwrap(), SpaceSpec::hardy());
        assert_eq!("bergman:0.5".parse::<SpaceSpec>().unwrap(), SpaceSpec::bergman(0.5).unwrap());
        assert!("bergman:-2".parse::<SpaceSpec>().is_err());
        assert!("dirichlet".parse::<SpaceSpec>().is_err());
    }
}
