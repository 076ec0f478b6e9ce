//! Run configuration echoed into every JSON report, and the complex-number encoding.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::mobius::Automorphism;
use crate::symbolparse::SamplingParams;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Complex numbers as `{"re": .., "im": ..}`.
pub mod cplx {
    use num_complex::Complex64 as C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        Repr { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let r = Repr::deserialize(d)?;
        Ok(C64::new(r.re, r.im))
    }

    pub mod vec {
        use super::Repr;
        use num_complex::Complex64 as C64;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|z| Repr { re: z.re, im: z.im }).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
            Ok(Vec::<Repr>::deserialize(d)?.into_iter().map(|r| C64::new(r.re, r.im)).collect())
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub command: String,
    pub symbol: String,
    pub automorphism: String,
    pub space: String,
    pub p: f64,
    #[serde(with = "cplx")]
    pub lambda: C64,
    /// Truncation order `N`.
    pub order: usize,
    /// Largest `|k|` in the kernel probe.
    pub k: usize,
    pub tol: f64,
    pub mu: f64,
    pub nu: f64,
    pub out: Option<String>,
    pub seed: u64,
    pub random_targets: usize,
    pub branch_convention: String,
    pub sampling: SamplingParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: VERSION.to_string(),
            command: "certify".into(),
            symbol: "1".into(),
            automorphism: "canonical:0.5".into(),
            space: "hardy".into(),
            p: 2.0,
            lambda: C64::new(1.0, 0.0),
            order: 512,
            k: 5,
            tol: 1e-3,
            mu: 1.0,
            nu: 1.0,
            out: None,
            seed: 0x5eed,
            random_targets: 3,
            branch_convention: crate::universality::BRANCH_CONVENTION.into(),
            sampling: SamplingParams::default(),
        }
    }
}

/// Fixed points and multipliers of the resolved automorphism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutomorphismInfo {
    #[serde(with = "cplx")]
    pub a: C64,
    #[serde(with = "cplx")]
    pub b: C64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub delta: f64,
    #[serde(with = "cplx::vec")]
    pub matrix: Vec<C64>,
}

impl From<&Automorphism> for AutomorphismInfo {
    fn from(p: &Automorphism) -> Self {
        let m = p.map;
        AutomorphismInfo {
            a: p.a,
            b: p.b,
            lambda_a: p.lambda_a,
            lambda_b: p.lambda_b,
            delta: p.delta,
            matrix: vec![m.alpha, m.beta, m.gamma, m.delta],
        }
    }
}

/// One named threshold test inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl SubCheck {
    /// Passes when `value < threshold`.
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        SubCheck { name: name.into(), value, threshold, pass: value < threshold }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        SubCheck { name: name.into(), value, threshold, pass: value >= threshold }
    }
}
