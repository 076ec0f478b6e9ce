//! Möbius self-maps of the unit disk and hyperbolic automorphisms.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TaylorSeries;

/// Tolerance on `|tr^2 - 4|` separating parabolic maps from the rest.
pub const CLASSIFY_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// `z -> (alpha z + beta) / (gamma z + delta)`, stored with determinant 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobius {
    pub alpha: C64,
    pub beta: C64,
    pub gamma: C64,
    pub delta: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Hyperbolic,
    Parabolic,
    Elliptic,
    Identity,
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MapKind::Hyperbolic => "hyperbolic",
            MapKind::Parabolic => "parabolic",
            MapKind::Elliptic => "elliptic",
            MapKind::Identity => "identity",
        };
        f.write_str(s)
    }
}

impl Mobius {
    /// Normalizes the coefficients to determinant 1.
    pub fn new(alpha: C64, beta: C64, gamma: C64, delta: C64) -> Result<Self> {
        let det = alpha * delta - beta * gamma;
        let scale = [alpha, beta, gamma, delta].iter().map(|c| c.norm()).fold(0.0, f64::max);
        if !(det.norm() > 1e-300 && det.norm() > 1e-24 * scale * scale) {
            return Err(Error::NotAutomorphism("singular coefficient matrix".into()));
        }
        let s = det.sqrt().inv();
        Ok(Mobius { alpha: alpha * s, beta: beta * s, gamma: gamma * s, delta: delta * s })
    }

    pub fn identity() -> Self {
        Mobius { alpha: ONE, beta: ZERO, gamma: ZERO, delta: ONE }
    }

    /// `z -> e^{i theta} z`.
    pub fn rotation(theta: f64) -> Self {
        Mobius::new(C64::from_polar(1.0, theta), ZERO, ZERO, ONE).expect("rotation is regular")
    }

    /// `z -> (r + z) / (1 + r z)`.
    pub fn canonical(r: f64) -> Self {
        Mobius::new(ONE, C64::new(r, 0.0), C64::new(r, 0.0), ONE).expect("|r| < 1")
    }

    #[inline]
    pub fn eval(&self, z: C64) -> C64 {
        (self.alpha * z + self.beta) / (self.gamma * z + self.delta)
    }

    #[inline]
    pub fn det(&self) -> C64 {
        self.alpha * self.delta - self.beta * self.gamma
    }

    /// `M'(z) = 1 / (gamma z + delta)^2`.
    #[inline]
    pub fn derivative(&self, z: C64) -> C64 {
        let d = self.gamma * z + self.delta;
        (d * d).inv()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Mobius) -> Mobius {
        let (a, b, c, d) = (self.alpha, self.beta, self.gamma, self.delta);
        let (e, f, g, h) = (other.alpha, other.beta, other.gamma, other.delta);
        Mobius {
            alpha: a * e + b * g,
            beta: a * f + b * h,
            gamma: c * e + d * g,
            delta: c * f + d * h,
        }
    }

    pub fn inverse(&self) -> Mobius {
        Mobius { alpha: self.delta, beta: -self.beta, gamma: -self.gamma, delta: self.alpha }
    }

    /// `n`-fold iterate; negative `n` iterates the inverse.
    pub fn pow(&self, n: i64) -> Mobius {
        let mut base = if n < 0 { self.inverse() } else { *self };
        let mut e = n.unsigned_abs();
        let mut acc = Mobius::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.compose(&base);
            }
        }
        acc
    }

    /// Projective equality up to `tol` (relative to the coefficient scale).
    pub fn approx_eq(&self, other: &Mobius, tol: f64) -> bool {
        let a = [self.alpha, self.beta, self.gamma, self.delta];
        let b = [other.alpha, other.beta, other.gamma, other.delta];
        let scale = a.iter().chain(b.iter()).map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        // det-1 normalization fixes the scale up to a sign
        [1.0, -1.0].iter().any(|&s| {
            a.iter().zip(b.iter()).all(|(x, y)| (x - y * s).norm() <= tol * scale)
        })
    }

    /// Checks that the map preserves the unit circle and sends 0 into the disk.
    pub fn check_disk_automorphism(&self) -> Result<()> {
        let w0 = self.eval(ZERO);
        if !(w0.norm() < 1.0) {
            return Err(Error::NotAutomorphism(format!("|M(0)| = {} >= 1", w0.norm())));
        }
        for k in 0..8 {
            let z = C64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.25) / 8.0);
            let w = self.eval(z);
            if (w.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::NotAutomorphism(format!(
                    "unit circle not preserved: |M(z)| = {} at z = {z}",
                    w.norm()
                )));
            }
        }
        Ok(())
    }

    /// Square of the trace of the determinant-1 matrix.
    pub fn trace_squared(&self) -> f64 {
        let t = self.alpha + self.delta;
        (t * t).re
    }

    pub fn classify(&self) -> Result<MapKind> {
        self.check_disk_automorphism()?;
        let scale = self.alpha.norm().max(self.delta.norm());
        if self.beta.norm() <= 1e-12 * scale
            && self.gamma.norm() <= 1e-12 * scale
            && (self.alpha - self.delta).norm() <= 1e-12 * scale
        {
            return Ok(MapKind::Identity);
        }
        let t = self.trace_squared();
        Ok(if (t - 4.0).abs() <= CLASSIFY_TOL {
            MapKind::Parabolic
        } else if t < 4.0 {
            MapKind::Elliptic
        } else {
            MapKind::Hyperbolic
        })
    }

    /// Finite fixed points, from `gamma z^2 + (delta - alpha) z - beta = 0`.
    pub fn fixed_points(&self) -> Vec<C64> {
        let (qa, qb, qc) = (self.gamma, self.delta - self.alpha, -self.beta);
        let scale = self.alpha.norm().max(self.delta.norm()).max(1e-300);
        if qa.norm() <= 1e-14 * scale {
            if qb.norm() <= 1e-14 * scale {
                return Vec::new();
            }
            return vec![-qc / qb];
        }
        let sq = (qb * qb - qa * qc * 4.0).sqrt();
        let q = if (qb.conj() * sq).re >= 0.0 { -(qb + sq) * 0.5 } else { -(qb - sq) * 0.5 };
        if q.norm() == 0.0 {
            return vec![ZERO];
        }
        vec![q / qa, qc / q]
    }

    /// Taylor series of the map: `beta/delta + sum_k det/delta^2 (-gamma/delta)^{k-1} z^k`.
    pub fn to_series(&self, order: usize) -> TaylorSeries {
        let mut s = TaylorSeries::zeros(order);
        let c = s.coeffs_mut();
        c[0] = self.beta / self.delta;
        let mut t = (self.delta * self.delta).inv();
        let q = -self.gamma / self.delta;
        for ck in c.iter_mut().skip(1) {
            *ck = t;
            t *= q;
        }
        s
    }

    /// `(alpha X + beta) / (gamma X + delta)` for a series argument.
    pub fn apply_to_series(&self, x: &TaylorSeries) -> Result<TaylorSeries> {
        let n = x.order();
        let num = &x.scale(self.alpha) + &TaylorSeries::constant(self.beta, n);
        let den = &x.scale(self.gamma) + &TaylorSeries::constant(self.delta, n);
        num.div(&den)
    }

    /// Rewrites `p0 + p1 M(z)` as `(q0 + q1 z) / (gamma z + delta)`.
    ///
    /// When the root `-p0/p1` is a fixed point `c` of the map the numerator
    /// is `(p0 + p1 z) / (gamma c + delta)`, which avoids the cancellation in
    /// `p0 delta + p1 beta` for deep iterates.
    pub fn affine_image(&self, p0: C64, p1: C64) -> (C64, C64) {
        if p1.norm() > 0.0 {
            let c = -p0 / p1;
            let mc = self.eval(c);
            if (mc - c).norm() <= 1e-11 * c.norm().max(1.0) {
                let k = (self.gamma * c + self.delta).inv();
                return (p0 * k, p1 * k);
            }
        }
        (p0 * self.delta + p1 * self.beta, p0 * self.gamma + p1 * self.alpha)
    }
}

/// A hyperbolic automorphism with its boundary fixed-point data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Automorphism {
    pub map: Mobius,
    /// Attractive fixed point.
    pub a: C64,
    /// Repulsive fixed point.
    pub b: C64,
    /// `psi'(a)`, in (0, 1).
    pub lambda_a: f64,
    /// `psi'(b) = 1 / psi'(a)`.
    pub lambda_b: f64,
    /// `-log psi'(a)`.
    pub delta: f64,
    pub r_canonical: f64,
}

impl Automorphism {
    /// `psi(z) = ((b l - a) z + a b (1 - l)) / ((l - 1) z + b - a l)` with `l = psi'(a)`.
    pub fn from_fixed_points(a: C64, b: C64, lambda_a: f64) -> Result<Self> {
        if (a.norm() - 1.0).abs() > 1e-10 || (b.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidFixedPoints(format!(
                "fixed points must lie on the unit circle (|a| = {}, |b| = {})",
                a.norm(),
                b.norm()
            )));
        }
        if (a - b).norm() <= 1e-10 {
            return Err(Error::InvalidFixedPoints("a and b coincide".into()));
        }
        if !(lambda_a > 0.0 && lambda_a < 1.0) {
            return Err(Error::InvalidMultiplier(lambda_a));
        }
        let l = C64::new(lambda_a, 0.0);
        let map = Mobius::new(b * l - a, a * b * (ONE - l), l - ONE, b - a * l)?;
        Ok(Self::assemble(map, a, b))
    }

    /// `z -> (r + z) / (1 + r z)`, fixed points `a = 1`, `b = -1`.
    pub fn canonical(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidMultiplier((1.0 - r) / (1.0 + r)));
        }
        Ok(Self::assemble(Mobius::canonical(r), ONE, -ONE))
    }

    /// Recovers the fixed-point data of a hyperbolic disk automorphism.
    pub fn from_mobius(map: Mobius) -> Result<Self> {
        let kind = map.classify()?;
        if kind != MapKind::Hyperbolic {
            return Err(Error::NotHyperbolic(kind.to_string()));
        }
        let fps = map.fixed_points();
        if fps.len() != 2 {
            return Err(Error::NotHyperbolic("fixed points not found".into()));
        }
        let (p, q) = (fps[0] / fps[0].norm(), fps[1] / fps[1].norm());
        let (a, b) = if map.derivative(p).norm() < 1.0 { (p, q) } else { (q, p) };
        Ok(Self::assemble(map, a, b))
    }

    fn assemble(map: Mobius, a: C64, b: C64) -> Self {
        let lambda_a = map.derivative(a).re;
        let lambda_b = map.derivative(b).re;
        Automorphism {
            map,
            a,
            b,
            lambda_a,
            lambda_b,
            delta: -lambda_a.ln(),
            r_canonical: (1.0 - lambda_a) / (1.0 + lambda_a),
        }
    }

    /// The unique `r` with `psi` conjugate to `z -> (r + z)/(1 + r z)`.
    pub fn canonical_r(&self) -> f64 {
        self.r_canonical
    }

    pub fn iterate(&self, n: i64) -> Mobius {
        self.map.pow(n)
    }

    /// The inverse map; its attractive fixed point is `b`.
    pub fn inverse(&self) -> Automorphism {
        let map = self.map.inverse();
        Automorphism {
            map,
            a: self.b,
            b: self.a,
            lambda_a: 1.0 / self.lambda_b,
            lambda_b: 1.0 / self.lambda_a,
            delta: self.delta,
            r_canonical: self.r_canonical,
        }
    }

    pub fn to_series(&self, order: usize) -> TaylorSeries {
        self.map.to_series(order)
    }
}

impl FromStr for Automorphism {
    type Err = Error;

    /// `canonical:r` or `fixed:a,b;deriv:lambda_a` (a, b constant expressions).
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(rest) = text.strip_prefix("canonical:") {
            let r = crate::symbolparse::parse_constant(rest)?;
            if r.im.abs() > 1e-15 {
                return Err(Error::Config(format!("canonical r must be real, got {r}")));
            }
            return Automorphism::canonical(r.re);
        }
        if let Some(rest) = text.strip_prefix("fixed:") {
            let (pts, deriv) = rest
                .split_once(';')
                .ok_or_else(|| Error::Config("expected `fixed:a,b;deriv:lambda_a`".into()))?;
            let deriv = deriv
                .trim()
                .strip_prefix("deriv:")
                .ok_or_else(|| Error::Config("expected `deriv:` after `;`".into()))?;
            let (a, b) = pts
                .split_once(',')
                .ok_or_else(|| Error::Config("expected two fixed points `a,b`".into()))?;
            let a = crate::symbolparse::parse_constant(a)?;
            let b = crate::symbolparse::parse_constant(b)?;
            let l = crate::symbolparse::parse_constant(deriv)?;
            if l.im.abs() > 1e-15 {
                return Err(Error::InvalidMultiplier(f64::NAN));
            }
            return Automorphism::from_fixed_points(a, b, l.re);
        }
        Err(Error::Config(format!(
            "unrecognized automorphism `{text}`; use `canonical:r` or `fixed:a,b;deriv:l`"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eq_example_matches_canonical_half() {
        let psi = Automorphism::from_fixed_points(c(1.0, 0.0), c(-1.0, 0.0), 1.0 / 3.0).unwrap();
        assert!(psi.map.approx_eq(&Mobius::canonical(0.5), 1e-14));
        // finite-difference derivative at the fixed points
        let h = 1e-6;
        let fd = |z: C64| (psi.map.eval(z + h) - psi.map.eval(z - h)) / (2.0 * h);
        assert!((fd(c(1.0, 0.0)) - 1.0 / 3.0).norm() < 1e-8);
        assert!((fd(c(-1.0, 0.0)) - 3.0).norm() < 1e-8);
        assert!((psi.map.eval(c(1.0, 0.0)) - 1.0).norm() < 1e-14);
        assert!((psi.map.eval(c(-1.0, 0.0)) + 1.0).norm() < 1e-14);
    }

    #[test]
    fn multiplier_one_rejected() {
        let e = Automorphism::from_fixed_points(c(1.0, 0.0), c(-1.0, 0.0), 1.0).unwrap_err();
        assert!(matches!(e, Error::InvalidMultiplier(_)));
        let e = Automorphism::from_fixed_points(c(1.0, 0.0), c(1.0, 0.0), 0.5).unwrap_err();
        assert!(matches!(e, Error::InvalidFixedPoints(_)));
        let e = Automorphism::from_fixed_points(c(1.1, 0.0), c(-1.0, 0.0), 0.5).unwrap_err();
        assert!(matches!(e, Error::InvalidFixedPoints(_)));
    }

    #[test]
    fn imaginary_axis_fixed_points() {
        let psi = Automorphism::from_fixed_points(c(0.0, 1.0), c(0.0, -1.0), 0.5).unwrap();
        assert!((psi.map.eval(c(0.0, 1.0)) - c(0.0, 1.0)).norm() < 1e-12);
        assert!((psi.map.eval(c(0.0, -1.0)) - c(0.0, -1.0)).norm() < 1e-12);
        assert!((psi.canonical_r() - 1.0 / 3.0).abs() < 1e-15);
        // conjugating by the rotation z -> i z gives the canonical map with r = 1/3
        let rot = Mobius::rotation(PI / 2.0);
        let conj = rot.inverse().compose(&psi.map).compose(&rot);
        assert!(conj.approx_eq(&Mobius::canonical(1.0 / 3.0), 1e-12));
        assert!((psi.lambda_a * psi.lambda_b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classification() {
        assert_eq!(Mobius::canonical(0.5).classify().unwrap(), MapKind::Hyperbolic);
        assert_eq!(Mobius::identity().classify().unwrap(), MapKind::Identity);
        assert_eq!(Mobius::rotation(PI / 3.0).classify().unwrap(), MapKind::Elliptic);
        // parabolic: conjugate of a real translation of the upper half-plane, fixed point 1
        let par = Mobius::new(c(-1.0, 2.0), c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 2.0)).unwrap();
        assert_eq!(par.classify().unwrap(), MapKind::Parabolic);
        let bad = Mobius::new(c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(matches!(bad.classify(), Err(Error::NotAutomorphism(_))));
    }

    #[test]
    fn iterates_attract_to_a() {
        let psi = Automorphism::canonical(0.5).unwrap();
        assert!(psi.iterate(0).approx_eq(&Mobius::identity(), 0.0));
        assert!(psi.iterate(1).approx_eq(&psi.map, 1e-15));
        assert!((psi.iterate(20).eval(C64::new(0.0, 0.0)) - 1.0).norm() < 1e-6);
        assert!((psi.iterate(-20).eval(C64::new(0.0, 0.0)) + 1.0).norm() < 1e-6);
    }

    #[test]
    fn inverse_of_canonical() {
        let psi = Automorphism::canonical(0.5).unwrap();
        let inv = psi.inverse();
        assert!(inv.map.approx_eq(&Mobius::canonical(-0.5), 1e-14));
        assert_eq!(inv.a, psi.b);
        let h = 1e-6;
        let z = c(1.0, 0.0);
        let fd = (inv.map.eval(z + h) - inv.map.eval(z - h)) / (2.0 * h);
        assert!((fd - 3.0).norm() < 1e-7);
        assert!(inv.inverse().map.approx_eq(&psi.map, 1e-15));
    }

    #[test]
    fn canonical_r_limits() {
        let psi = Automorphism::from_fixed_points(c(1.0, 0.0), c(-1.0, 0.0), 1.0 / 3.0).unwrap();
        assert!((psi.canonical_r() - 0.5).abs() < 1e-15);
        let near = Automorphism::from_fixed_points(c(1.0, 0.0), c(-1.0, 0.0), 1.0 - 1e-9).unwrap();
        assert!(near.canonical_r() < 1e-9);
    }

    #[test]
    fn series_of_map() {
        assert_eq!(Mobius::identity().to_series(4), TaylorSeries::identity(4));
        let m = Mobius::canonical(0.5);
        let s = m.to_series(128);
        assert!((s.coeff(0) - 0.5).norm() < 1e-15);
        let z = c(0.3, 0.0);
        assert!((s.eval(z) - m.eval(z)).norm() < 1e-12);
    }

    #[test]
    fn affine_image_at_fixed_point_is_stable() {
        let psi = Automorphism::canonical(0.5).unwrap();
        let m = psi.iterate(40);
        // 1 - psi_40(z) at z = 0, exactly (1 - r_40) with r_40 = tanh(40 atanh 0.5)
        let (q0, _q1) = m.affine_image(c(1.0, 0.0), c(-1.0, 0.0));
        let val = q0 / m.delta;
        let expected = 2.0 / (1.0 + (80.0 * 0.5f64.atanh()).exp());
        assert!((val.re - expected).abs() < 1e-12 * expected, "{val} vs {expected}");
    }

    #[test]
    fn parse_specs() {
        let a: Automorphism = "canonical:0.5".parse().unwrap();
        assert!((a.lambda_a - 1.0 / 3.0).abs() < 1e-15);
        let b: Automorphism = "fixed:i,-i;deriv:0.5".parse().unwrap();
        assert!((b.a - c(0.0, 1.0)).norm() < 1e-15);
        assert!("fixed:1,-1".parse::<Automorphism>().is_err());
        assert!("spiral:2".parse::<Automorphism>().is_err());
    }
}
