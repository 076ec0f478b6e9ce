//! Invariant battery behind `wcospec selftest`.

use std::io::Write;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::mobius::{Automorphism, Mobius};
use crate::series::TaylorSeries;
use crate::spaces::SpaceSpec;
use crate::spectra::predict_annuli;
use crate::symbolparse::analyze;
use crate::symbolparse::parse;
use crate::universality::{decompose, eigen_relation_residual, generator_check, gk_exponent, omega_ratio_limits};
use crate::wco::normalized_isometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub status: Status,
    pub note: String,
}

impl Row {
    fn new(name: impl Into<String>, value: f64, threshold: f64, suspect: bool) -> Row {
        let ok = value < threshold;
        let (status, note) = match (ok, suspect) {
            (true, _) => (Status::Pass, String::new()),
            (false, true) => (Status::Warn, "tail mass above limit; raise N".into()),
            (false, false) => (Status::Fail, String::new()),
        };
        Row { name: name.into(), value, threshold, status, note }
    }

    fn error(name: impl Into<String>, e: crate::Error) -> Row {
        Row { name: name.into(), value: f64::NAN, threshold: f64::NAN, status: Status::Fail, note: e.to_string() }
    }
}

fn random_poly(rng: &mut ChaCha8Rng, deg: usize, order: usize) -> TaylorSeries {
    let c: Vec<C64> = (0..=deg).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    TaylorSeries::from_poly(&c, order.max(deg))
}

fn push(rows: &mut Vec<Row>, name: String, r: Result<Row>) {
    rows.push(r.unwrap_or_else(|e| Row::error(name, e)));
}

/// Runs the battery at order `n`; `quick` keeps one case per family.
pub fn battery(n: usize, quick: bool, seed: u64) -> Vec<Row> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let radii: &[f64] = if quick { &[0.5] } else { &[0.3, 0.5, 0.7] };
    let spaces: Vec<SpaceSpec> = if quick {
        vec![SpaceSpec::hardy()]
    } else {
        vec![SpaceSpec::hardy(), SpaceSpec::bergman(0.0).expect("valid"), SpaceSpec::bergman(1.0).expect("valid")]
    };
    let polys = if quick { 3 } else { 10 };
    let deg = 32.min(n / 2);
    for &r in radii {
        for space in &spaces {
            let name = format!("isometry r={r} {space}");
            let res = (|| {
                let v = normalized_isometry(Mobius::canonical(r), *space, n)?;
                let mut worst: f64 = 0.0;
                let mut suspect = false;
                for _ in 0..polys {
                    let f = random_poly(&mut rng, deg, n);
                    let g = v.apply(&f)?;
                    let est = space.norm_checked(&g)?;
                    let b = space.norm(&f)?;
                    worst = worst.max((est.value - b).abs() / b);
                    suspect |= est.truncation_suspect;
                }
                Ok(Row::new(name.clone(), worst, 1e-6, suspect))
            })();
            push(&mut rows, name, res);
        }
    }

    let psi = Automorphism::canonical(0.5).expect("valid");
    let ks: Vec<i64> = if quick { vec![-1, 1] } else { (-5..=5).collect() };
    for &k in &ks {
        let name = format!("eigen relation k={k}");
        let res = eigen_relation_residual(&psi, gk_exponent(&psi, k), n, n / 2).map(|v| Row::new(name.clone(), v, 1e-7, false));
        push(&mut rows, name, res);
        let name = format!("generator k={k}");
        let res = generator_check(&psi, k, n).map(|v| Row::new(name.clone(), v, 1e-6, false));
        push(&mut rows, name, res);
    }

    let exps: &[f64] = if quick { &[1.0] } else { &[0.5, 1.0, 1.5, 2.0] };
    for &mu in exps {
        for &nu in exps {
            let name = format!("decomposition mu={mu} nu={nu}");
            let res = (|| {
                let mut worst: f64 = 0.0;
                for _ in 0..polys {
                    let f = random_poly(&mut rng, deg, n);
                    worst = worst.max(decompose(&f, &psi, mu, nu, &SpaceSpec::hardy())?.sum_error);
                }
                Ok(Row::new(name.clone(), worst, 1e-12, false))
            })();
            push(&mut rows, name, res);
        }
    }

    let lims: &[f64] = if quick { &[1.0] } else { &[0.0, 1.0, 2.0] };
    for &mu in lims {
        for &nu in lims {
            let l = omega_ratio_limits(&psi, mu, nu);
            let err = ((l.at_a.norm() - l.expected_a).abs() / l.expected_a)
                .max((l.at_b.norm() - l.expected_b).abs() / l.expected_b);
            rows.push(Row::new(format!("ratio limits mu={mu} nu={nu}"), err, 1e-3, false));
        }
    }

    let name = "annulus u=1".to_string();
    let res = (|| {
        let sym = analyze(&parse("1")?, &psi, n.min(128))?;
        let p = predict_annuli(&sym, &psi, &SpaceSpec::hardy());
        let err = (p.inclusion_inner - 3f64.sqrt().recip()).abs().max((p.inclusion_outer - 3f64.sqrt()).abs());
        Ok(Row::new(name.clone(), err, 1e-10, false))
    })();
    push(&mut rows, name, res);
    rows
}

pub fn table(rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
    let mut s = format!("{:<width$}  {:>12}  {:>9}  status\n", "check", "value", "threshold");
    for r in rows {
        let st = match r.status {
            Status::Pass => "pass",
            Status::Warn => "warn",
            Status::Fail => "FAIL",
        };
        s.push_str(&format!("{:<width$}  {:>12.3e}  {:>9.0e}  {st}", r.name, r.value, r.threshold));
        if !r.note.is_empty() {
            s.push_str(&format!("  ({})", r.note));
        }
        s.push('\n');
    }
    s
}

/// Prints the table; exit code 1 when any row failed.
pub fn run(n: usize, quick: bool, seed: u64) -> i32 {
    if n < 4 {
        eprintln!("selftest needs N >= 4");
        return crate::cli::EXIT_USAGE;
    }
    let rows = battery(n, quick, seed);
    let failed: Vec<&Row> = rows.iter().filter(|r| r.status == Status::Fail).collect();
    let warned = rows.iter().filter(|r| r.status == Status::Warn).count();
    let mut out = std::io::stdout().lock();
    // a closed pipe is not a test failure
    let _ = write!(out, "{}", table(&rows));
    let _ = writeln!(out, "{} checks, {} failed, {} warnings", rows.len(), failed.len(), warned);
    if failed.is_empty() {
        0
    } else {
        for r in failed {
            eprintln!("failed: {}", r.name);
        }
        crate::cli::EXIT_FAILURE
    }
}
