//! Eigenvector families, range decompositions and the universality certificate.

mod eigen;
mod range;

pub use eigen::{
    base_eigenvector, eigen_relation_residual, eigenfunction, eigenfunction_expr, eigenvalue_modulus_gap,
    generator_check, generator_eigenvalue, gk_exponent, gk_family, gk_sup, kernel_probe, BaseEigenvector,
    EigenSource, KernelProbe, BRANCH_CONVENTION, EIGEN_TOL, RANK_TOL,
};
pub use range::{
    decompose, omega_ratio_limits, split_exprs, surjectivity_probe, twisted_expr, twisted_weight, Decomposition,
    OmegaWeight, RatioLimits, SolveStrategy, SurjectivityProbe, TargetSolve,
};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mobius::Automorphism;
use crate::report::{AutomorphismInfo, RunConfig, SubCheck};
use crate::spaces::SpaceSpec;
use crate::spectra::{predict_annuli, AnnulusPrediction};
use crate::symbolparse::{Expr, WeightSymbol};
use crate::wco::WCOperator;

/// Smallest accepted gap between the `(2K+1)`-th singular value and the noise floor.
pub const GAP_MIN: f64 = 1e6;
pub const GENERATOR_TOL: f64 = 1e-6;
pub const TARGET_DEGREE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedAtScale,
    WindowEmpty,
    Failed,
}

impl Verdict {
    /// Process exit code used by `certify`.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::CertifiedAtScale => 0,
            Verdict::WindowEmpty => 2,
            Verdict::Failed => 3,
        }
    }
}

/// Result of [`caradus_report`]; partial results are kept when a stage fails.
#[derive(Debug, Clone, Serialize)]
pub struct CaradusReport {
    pub config: RunConfig,
    pub automorphism: Option<AutomorphismInfo>,
    pub symbol: Option<WeightSymbol>,
    pub annuli: Option<AnnulusPrediction>,
    pub window_check: bool,
    pub generator_residuals: Vec<f64>,
    pub kernel: Option<KernelProbe>,
    pub surjectivity: Option<SurjectivityProbe>,
    pub checks: Vec<SubCheck>,
    pub errors: Vec<String>,
    pub verdict: Verdict,
}

impl CaradusReport {
    pub fn all_checks_pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }
}

/// Right-hand sides `z^0..z^8` followed by `count` seeded random polynomials of degree 8.
pub fn target_battery(seed: u64, count: usize) -> Vec<(String, Expr)> {
    let mut out: Vec<(String, Expr)> = (0..=TARGET_DEGREE as i32)
        .map(|j| (format!("z^{j}"), if j == 0 { Expr::c(1.0) } else { Expr::PowInt(Box::new(Expr::Z), j) }))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..count {
        let c: Vec<C64> = (0..=TARGET_DEGREE)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        out.push((format!("random[{r}]"), Expr::Poly(c)));
    }
    out
}

fn resolve(cfg: &RunConfig) -> Result<(Automorphism, SpaceSpec)> {
    let psi: Automorphism = cfg.automorphism.parse()?;
    let space = cfg.space.parse::<SpaceSpec>()?.with_p(cfg.p)?;
    Ok((psi, space))
}

/// Runs every probe for `lambda` and decides whether universality is certified at this truncation.
pub fn caradus_report(cfg: &RunConfig) -> CaradusReport {
    let mut rep = CaradusReport {
        config: cfg.clone(),
        automorphism: None,
        symbol: None,
        annuli: None,
        window_check: false,
        generator_residuals: vec![],
        kernel: None,
        surjectivity: None,
        checks: vec![],
        errors: vec![],
        verdict: Verdict::Failed,
    };
    let (psi, space) = match resolve(cfg) {
        Ok(v) => v,
        Err(e) => {
            rep.errors.push(e.to_string());
            return rep;
        }
    };
    rep.automorphism = Some((&psi).into());
    let t = match WCOperator::from_text(&cfg.symbol, psi, space, cfg.order) {
        Ok(t) => t,
        Err(e) => {
            rep.errors.push(e.to_string());
            return rep;
        }
    };
    let sym = t.symbol.clone().expect("analyzed");
    let pred = predict_annuli(&sym, &psi, &space);
    rep.symbol = Some(sym);
    rep.annuli = Some(pred);
    rep.window_check = pred.in_window(cfg.lambda);
    if !pred.universality_window_nonempty {
        rep.verdict = Verdict::WindowEmpty;
        rep.errors.push(format!(
            "inclusion annulus is empty: inner {} >= outer {}",
            pred.inclusion_inner, pred.inclusion_outer
        ));
        return rep;
    }
    rep.checks.push(SubCheck {
        name: "lambda_in_window".into(),
        value: cfg.lambda.norm(),
        threshold: pred.inclusion_outer,
        pass: rep.window_check,
    });

    for k in 1..=cfg.k.clamp(1, 3) as i64 {
        match generator_check(&psi, k, cfg.order) {
            Ok(r) => rep.generator_residuals.push(r),
            Err(e) => rep.errors.push(e.to_string()),
        }
    }
    let worst_gen = rep.generator_residuals.iter().copied().fold(0.0, f64::max);
    rep.checks.push(SubCheck::below("generator_residual", worst_gen, GENERATOR_TOL));

    match kernel_probe(&t, cfg.lambda, cfg.k) {
        Ok(kp) => {
            let worst = kp.eigenvector_residuals.iter().copied().fold(0.0, f64::max);
            rep.checks.push(SubCheck::at_least("gram_rank", kp.gram_rank as f64, (2 * cfg.k + 1) as f64));
            rep.checks.push(SubCheck::at_least("gram_gap", kp.gap, GAP_MIN));
            rep.checks.push(SubCheck::below("eigenvector_residual", worst, EIGEN_TOL));
            rep.kernel = Some(kp);
        }
        Err(e) => {
            rep.errors.push(format!("kernel probe: {e}"));
            rep.checks.push(SubCheck::at_least("gram_rank", 0.0, (2 * cfg.k + 1) as f64));
        }
    }

    let targets = target_battery(cfg.seed, cfg.random_targets);
    match surjectivity_probe(&t, cfg.lambda, &targets, cfg.tol) {
        Ok(sp) => {
            rep.checks.push(SubCheck::below("surjectivity_residual", sp.max_residual, cfg.tol));
            rep.surjectivity = Some(sp);
        }
        Err(e) => {
            rep.errors.push(format!("surjectivity probe: {e}"));
            rep.checks.push(SubCheck::below("surjectivity_residual", f64::INFINITY, cfg.tol));
        }
    }
    if rep.all_checks_pass() {
        rep.verdict = Verdict::CertifiedAtScale;
    }
    rep
}
