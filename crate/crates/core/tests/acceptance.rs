//! Acceptance suite: one line per criterion, tolerances pinned below.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wcospec::mobius::{Automorphism, Mobius};
use wcospec::series::TaylorSeries;
use wcospec::spaces::SpaceSpec;
use wcospec::spectra::{gelfand_radius, resolvent_backward, resolvent_forward};
use wcospec::symbolparse::{parse, Expr};
use wcospec::universality::{
    decompose, eigen_relation_residual, eigenfunction, gk_exponent, kernel_probe, omega_ratio_limits,
    surjectivity_probe,
};
use wcospec::wco::{normalized_isometry, WCOperator};

const N: usize = 512;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_poly(rng: &mut ChaCha8Rng, deg: usize, order: usize) -> TaylorSeries {
    let cs: Vec<C64> = (0..=deg).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    TaylorSeries::from_poly(&cs, order)
}

// ---- oracles written against the closed forms, not the library ----

/// `psi_r(z) = (z + r)/(1 + r z)`.
fn psi_r(r: f64, z: C64) -> C64 {
    (z + r) / (r * z + 1.0)
}

/// `g(z) = exp(w [Log(b/a) + Log(1 - z/b) - Log(1 - z/a)])` with `a = 1`, `b = -1`.
fn g_point(w: C64, z: C64) -> C64 {
    let a = c(1.0, 0.0);
    let b = c(-1.0, 0.0);
    (w * ((b / a).ln() + (1.0 - z / b).ln() - (1.0 - z / a).ln())).exp()
}

/// Taylor coefficients `0..=upto` of `h` from samples on `|z| = rho`.
fn dft_coeffs(h: &dyn Fn(C64) -> C64, rho: f64, m: usize, upto: usize) -> Vec<C64> {
    let vals: Vec<C64> = (0..m).map(|j| h(C64::from_polar(rho, TAU * j as f64 / m as f64))).collect();
    (0..=upto)
        .map(|n| {
            let s: C64 = vals
                .iter()
                .enumerate()
                .map(|(j, v)| v * C64::from_polar(1.0, -TAU * (j * n % m) as f64 / m as f64))
                .sum();
            s / (m as f64 * rho.powi(n as i32))
        })
        .collect()
}

/// Adaptive Simpson on `[lo, hi]`.
fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, lo, hi, fa, fm, fb, whole, tol, 50)
}

/// `int_D |z^n|^2 (1 - |z|^2)^sigma dA`: adaptive in the radius, trapezoid in the angle.
fn bergman_moment(n: usize, sigma: f64) -> f64 {
    let angles = 64;
    let ring = |r: f64| -> f64 {
        let mean: f64 = (0..angles)
            .map(|j| C64::from_polar(r, TAU * j as f64 / angles as f64).powu(n as u32).norm_sqr())
            .sum::<f64>()
            / angles as f64;
        TAU * mean * (1.0 - r * r).max(0.0).powf(sigma) * r
    };
    simpson(&ring, 0.0, 1.0, 1e-16)
}

// ---- criteria ----

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c01_isometry() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let spaces = [SpaceSpec::hardy(), SpaceSpec::bergman(0.0).unwrap(), SpaceSpec::bergman(1.0).unwrap()];
    let mut worst: f64 = 0.0;
    for r in [0.3, 0.5, 0.7] {
        for space in spaces {
            let v = normalized_isometry(Mobius::canonical(r), space, N).unwrap();
            for _ in 0..100 {
                let deg = rng.random_range(0..=32);
                let f = random_poly(&mut rng, deg, N);
                let (a, b) = (space.norm(&v.apply(&f).unwrap()).unwrap(), space.norm(&f).unwrap());
                worst = worst.max((a - b).abs() / b);
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(worst < 1e-6 && secs < 30.0, format!("max rel err {worst:.2e} (< 1e-6), {secs:.1}s (< 30s)"))
}

fn c02_eigen_relation() -> Outcome {
    let psi = Automorphism::canonical(0.5).unwrap();
    let mut lib: f64 = 0.0;
    let mut oracle: f64 = 0.0;
    for k in -5..=5 {
        let w = gk_exponent(&psi, k);
        lib = lib.max(eigen_relation_residual(&psi, w, N, 256).unwrap());
        // sampled C_psi g_k - g_k, independent of the series layer
        let w_ref = c(0.0, TAU * k as f64 / 3f64.ln());
        let diff = dft_coeffs(&|z| g_point(w_ref, psi_r(0.5, z)) - g_point(w_ref, z), 0.98, 4096, 256);
        let base = dft_coeffs(&|z| g_point(w_ref, z), 0.98, 4096, 256);
        let num: f64 = diff.iter().map(|v| v.norm_sqr()).sum();
        let den: f64 = base.iter().map(|v| v.norm_sqr()).sum();
        oracle = oracle.max((num / den).sqrt());
    }
    outcome(lib < 1e-7 && oracle < 1e-7, format!("relative residual {lib:.2e}, sampled oracle {oracle:.2e} (< 1e-7)"))
}

fn c03_kernel_probe() -> Outcome {
    let psi = Automorphism::canonical(0.5).unwrap();
    let t = WCOperator::from_text("1", psi, SpaceSpec::hardy(), N).unwrap();
    match kernel_probe(&t, c(1.0, 0.0), 10) {
        Ok(kp) => outcome(
            kp.gram_rank == 21 && kp.gap >= 1e6,
            format!(
                "rank {} (= 21), gap {:.2e} (>= 1e6), sigma_min/sigma_max {:.3}",
                kp.gram_rank,
                kp.gap,
                kp.min_singular_value / kp.singular_values[0]
            ),
        ),
        Err(e) => outcome(false, format!("probe failed: {e}")),
    }
}

fn c04_generator() -> Outcome {
    let psi = Automorphism::canonical(0.5).unwrap();
    let delta = 3f64.ln();
    let (a, b) = (c(1.0, 0.0), c(-1.0, 0.0));
    let mut worst: f64 = 0.0;
    for k in -5..=5i64 {
        let g = eigenfunction(&psi, gk_exponent(&psi, k), N).unwrap();
        let lam = c(0.0, TAU * k as f64 / delta) * (b - a);
        // (a - z)(b - z) g'(z) coefficientwise
        let d: Vec<C64> = (0..N).map(|n| g.coeff(n + 1) * (n + 1) as f64).collect();
        let at = |n: usize| if n < d.len() { d[n] } else { C64::new(0.0, 0.0) };
        let band = N / 2;
        let mut num = 0.0;
        let mut den = 0.0;
        for n in 0..=band {
            let mut lhs = a * b * at(n);
            if n >= 1 {
                lhs -= (a + b) * at(n - 1);
            }
            if n >= 2 {
                lhs += at(n - 2);
            }
            num += (lhs - lam * g.coeff(n)).norm_sqr();
            den += g.coeff(n).norm_sqr();
        }
        worst = worst.max((num / den).sqrt());
    }
    outcome(worst < 1e-6, format!("max relative residual {worst:.2e} (< 1e-6)"))
}

fn c05_spectral_radius() -> Outcome {
    let t0 = Instant::now();
    let psi = Automorphism::canonical(0.5).unwrap();
    let t = WCOperator::from_text("2+z", psi, SpaceSpec::hardy(), N).unwrap();
    let inv = t.inverse_operator().unwrap();
    let fwd = gelfand_radius(&t, &parse("pow(1 - z, -0.49)").unwrap(), 40).unwrap().last();
    let bwd = gelfand_radius(&inv, &parse("pow(-1 - z, -0.49)").unwrap(), 40).unwrap().last();
    let (ef, eb) = ((fwd / (3.0 * 3f64.sqrt()) - 1.0).abs(), (bwd / 3f64.sqrt() - 1.0).abs());
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        ef < 0.05 && eb < 0.05 && secs < 120.0,
        format!("outer {fwd:.4} vs 5.1962 ({:.1}%), inverse {bwd:.4} vs 1.7321 ({:.1}%), {secs:.1}s", 100.0 * ef, 100.0 * eb),
    )
}

fn c06_iterated_weight() -> Outcome {
    let psi = Automorphism::canonical(0.5).unwrap();
    let t = WCOperator::from_text("2+z", psi, SpaceSpec::hardy(), 64).unwrap();
    let g = t.gelfand_sup_weight(64).unwrap();
    let v = g.sup[63];
    outcome((2.8..=3.05).contains(&v), format!("(sup |u_64|)^(1/64) = {v:.4} in [2.8, 3.05]"))
}

fn c07_resolvents() -> Outcome {
    let psi = Automorphism::canonical(0.5).unwrap();
    let t = WCOperator::from_text("2+z", psi, SpaceSpec::hardy(), N).unwrap();
    let f = resolvent_forward(&t, &Expr::c(1.0), c(4.0, 0.0), 80);
    // the backward series acts on right-hand sides vanishing at b = -1
    let g = resolvent_backward(&t, &parse("(1 - z)^2 * (1 + z)^2").unwrap(), c(1.0, 0.0), 80);
    match (f, g) {
        (Ok(f), Ok(g)) => outcome(
            f.residual < 1e-4 && g.residual < 1e-4,
            format!(
                "F(4) on 1: {:.2e} after {} terms, G(1) on (1-z)^2 (1+z)^2: {:.2e} after {} terms (< 1e-4, <= 80)",
                f.residual, f.terms, g.residual, g.terms
            ),
        ),
        (f, g) => outcome(false, format!("forward {:?}, backward {:?}", f.err(), g.err())),
    }
}

fn c08_surjectivity() -> Outcome {
    let psi = Automorphism::canonical(0.5).unwrap();
    let targets: Vec<(String, Expr)> =
        (0..=8).map(|j| (format!("z^{j}"), parse(&format!("z^{j}")).unwrap())).collect();
    let mut worst: f64 = 0.0;
    let mut pointwise: f64 = 0.0;
    for (sym, u) in [("1", &(|_z: C64| c(1.0, 0.0)) as &dyn Fn(C64) -> C64), ("2+z", &|z: C64| z + 2.0)] {
        let t = WCOperator::from_text(sym, psi, SpaceSpec::hardy(), N).unwrap();
        let p = surjectivity_probe(&t, c(1.0, 0.0), &targets, 1e-3).unwrap();
        worst = worst.max(p.max_residual);
        // (1 - T) x = y at sample points inside the disk
        for (s, (_, y)) in p.targets.iter().zip(&targets) {
            for k in 0..16 {
                let z = C64::from_polar(0.5, TAU * k as f64 / 16.0);
                let x = &s.solution;
                let lhs = x.eval(z) - u(z) * x.eval(psi_r(0.5, z));
                let want = y.eval(z);
                pointwise = pointwise.max((lhs - want).norm() / want.norm().max(0.5f64.powi(8)));
            }
        }
    }
    outcome(worst < 1e-3, format!("max residual {worst:.2e} (< 1e-3), pointwise at |z|=1/2 {pointwise:.2e}"))
}

fn c09_decomposition() -> Outcome {
    let psi = Automorphism::canonical(0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let grid = [0.5, 1.0, 1.5, 2.0];
    let mut worst: f64 = 0.0;
    let mut pointwise: f64 = 0.0;
    for mu in grid {
        for nu in grid {
            for _ in 0..100 {
                let deg = rng.random_range(0..=16);
                let f = random_poly(&mut rng, deg, 64);
                let d = decompose(&f, &psi, mu, nu, &SpaceSpec::hardy()).unwrap();
                let coeff = (0..=64).map(|k| (d.f1.coeff(k) + d.f2.coeff(k) - f.coeff(k)).norm()).fold(0.0, f64::max);
                worst = worst.max(coeff);
                let z = c(0.3, -0.4);
                pointwise = pointwise.max((d.f1.eval(z) + d.f2.eval(z) - f.eval(z)).norm());
            }
        }
    }
    outcome(worst < 1e-12, format!("max coefficient error {worst:.2e} (< 1e-12), pointwise {pointwise:.2e}"))
}

fn c10_limit_ratios() -> Outcome {
    let psi = Automorphism::canonical(0.5).unwrap();
    let r: f64 = 0.5;
    let (da, db) = ((1.0 - r) / (1.0 + r), (1.0 + r) / (1.0 - r));
    let mut worst: f64 = 0.0;
    for mu in [0.0, 1.0, 2.0] {
        for nu in [0.0, 1.0, 2.0] {
            let l = omega_ratio_limits(&psi, mu, nu);
            worst = worst.max((l.at_a - da.powf(mu)).norm()).max((l.at_b - db.powf(nu)).norm());
        }
    }
    outcome(worst < 1e-3, format!("max deviation {worst:.2e} (< 1e-3)"))
}

fn c11_bergman_norms() -> Outcome {
    let mut worst: f64 = 0.0;
    for sigma in [0.0, 1.0, 2.5] {
        let space = SpaceSpec::bergman(sigma).unwrap();
        let w = space.monomial_norms(16).unwrap();
        for (n, wn) in w.iter().enumerate() {
            let oracle = bergman_moment(n, sigma);
            worst = worst.max((wn * wn - oracle).abs() / oracle);
        }
    }
    // closed form at n = 0 is pi / (sigma + 1)
    let sanity = (bergman_moment(0, 1.0) - PI / 2.0).abs();
    outcome(worst < 1e-8 && sanity < 1e-10, format!("max relative error {worst:.2e} (< 1e-8)"))
}

fn c12_end_to_end() -> Outcome {
    let t0 = Instant::now();
    let dir = std::env::temp_dir().join(format!("wcospec-acceptance-{}", std::process::id()));
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_wcospec"))
        .args(["certify", "--symbol", "1", "--auto", "canonical:0.5", "--space", "hardy", "--lambda", "1", "--out"])
        .arg(&dir)
        .status()
        .expect("binary runs");
    let secs = t0.elapsed().as_secs_f64();
    let text = std::fs::read_to_string(dir.join("certify.json")).unwrap_or_default();
    let _ = std::fs::remove_dir_all(&dir);
    let report: serde_json::Value = serde_json::from_str(&text).unwrap_or(serde_json::Value::Null);
    let checks = report["checks"].as_array().cloned().unwrap_or_default();
    let all = !checks.is_empty() && checks.iter().all(|c| c["pass"] == true);
    outcome(
        status.code() == Some(0) && all && secs < 180.0,
        format!(
            "exit {:?}, verdict {}, {} sub-checks all pass: {all}, {secs:.1}s (< 180s)",
            status.code(),
            report["verdict"],
            checks.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 12] = [
        ("1 isometry", c01_isometry),
        ("2 eigen-relation", c02_eigen_relation),
        ("3 kernel probe", c03_kernel_probe),
        ("4 generator", c04_generator),
        ("5 spectral radius", c05_spectral_radius),
        ("6 iterated weight", c06_iterated_weight),
        ("7 resolvents", c07_resolvents),
        ("8 surjectivity", c08_surjectivity),
        ("9 decomposition", c09_decomposition),
        ("10 limit ratios", c10_limit_ratios),
        ("11 Bergman norms", c11_bergman_norms),
        ("12 end-to-end", c12_end_to_end),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let o = run();
        println!("criterion {name:<20} {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
