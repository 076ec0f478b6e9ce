//! The `wcospec` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mobius::Automorphism;
use crate::report::{AutomorphismInfo, RunConfig};
use crate::spaces::SpaceSpec;
use crate::spectra::{gelfand_radius, predict_annuli, truncated_eigenvalues, AnnulusPrediction, GelfandSequence};
use crate::symbolparse::{parse, parse_constant, Expr, WeightSymbol};
use crate::universality::{caradus_report, decompose, Decomposition};
use crate::wco::WCOperator;

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_FAILURE: i32 = 1;
pub const THREADS_ENV: &str = "WCOSPEC_THREADS";

#[derive(Parser, Debug)]
#[command(name = "wcospec", version, about = "Spectra and universality probes for weighted composition operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Symbol diagnostics, annulus prediction and Gelfand estimates.
    Analyze(AnalyzeArgs),
    /// Finite-section eigenvalues and Gelfand sequences, with CSV/SVG dumps.
    Spectrum(AnalyzeArgs),
    /// Kernel and surjectivity probes for `T - lambda`.
    Certify(CertifyArgs),
    /// Splits a function into parts vanishing at each fixed point.
    Decompose(DecomposeArgs),
    /// Invariant battery at reduced order.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Weight expression, e.g. "2+z".
    #[arg(long)]
    symbol: String,
    /// `canonical:<r>` or `fixed:<a>,<b>;deriv:<lambda_a>`.
    #[arg(long, default_value = "canonical:0.5")]
    auto: String,
    /// `hardy` or `bergman:<sigma>`.
    #[arg(long, default_value = "hardy")]
    space: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Truncation order.
    #[arg(long = "N", default_value_t = 512)]
    n: usize,
    /// Output directory; the report goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Length of the Gelfand sequences.
    #[arg(long, default_value_t = 40)]
    steps: usize,
}

#[derive(Args, Debug, Clone)]
struct CertifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    lambda: String,
    #[arg(long = "K", default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct DecomposeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
}

#[derive(Args, Debug, Clone)]
struct SelftestArgs {
    #[arg(long = "N", default_value_t = 256)]
    n: usize,
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    config: Option<&'a RunConfig>,
    error: String,
    kind: &'static str,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Syntax { .. } | Error::Arity { .. } | Error::InvalidSpace(_) | Error::Config(_) => "usage",
        Error::InvalidFixedPoints(_) | Error::InvalidMultiplier(_) | Error::NotAutomorphism(_) => "usage",
        Error::NotHyperbolic(_) | Error::NotInvertible(_) | Error::ZeroOnCircle(_) => "usage",
        Error::UnsupportedExponent(_) => "usage",
        _ => "numerical",
    }
}

fn fail(cfg: Option<&RunConfig>, e: &Error) -> i32 {
    let kind = error_kind(e);
    let rep = ErrorReport { config: cfg, error: e.to_string(), kind };
    eprintln!("{}", serde_json::to_string_pretty(&rep).expect("serializable"));
    if kind == "usage" {
        EXIT_USAGE
    } else {
        EXIT_FAILURE
    }
}

fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_threads();
    match cli.command {
        Command::Analyze(a) => cmd_analyze(&a, "analyze"),
        Command::Spectrum(a) => cmd_analyze(&a, "spectrum"),
        Command::Certify(a) => cmd_certify(&a),
        Command::Decompose(a) => cmd_decompose(&a),
        Command::Selftest(a) => crate::selftest::run(a.n, a.quick, a.seed),
    }
}

fn base_config(c: &Common, command: &str) -> RunConfig {
    RunConfig {
        command: command.into(),
        symbol: c.symbol.clone(),
        automorphism: c.auto.clone(),
        space: c.space.clone(),
        p: c.p,
        order: c.n,
        out: c.out.as_ref().map(|p| p.display().to_string()),
        ..RunConfig::default()
    }
}

fn resolve(cfg: &RunConfig) -> Result<(Automorphism, SpaceSpec)> {
    let psi: Automorphism = cfg.automorphism.parse()?;
    let space = cfg.space.parse::<SpaceSpec>()?.with_p(cfg.p)?;
    if cfg.order < 2 {
        return Err(Error::Config(format!("truncation order {} is too small", cfg.order)));
    }
    Ok((psi, space))
}

fn emit<T: Serialize>(out: Option<&Path>, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    match out {
        Some(dir) => write_file(dir, name, &text),
        None => {
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            Ok(())
        }
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Forward and inverse Gelfand sequences with their test functions.
#[derive(Debug, Clone, Serialize)]
pub struct GelfandPair {
    pub forward_test_function: String,
    pub forward: GelfandSequence,
    pub inverse_test_function: String,
    pub inverse: GelfandSequence,
}

/// `(a - z)^{-gamma + 0.01}` and `(b - z)^{-gamma + 0.01}`: barely in the space and
/// concentrated where the forward and inverse iterates grow fastest.
pub fn gelfand_pair(t: &WCOperator, steps: usize) -> Result<GelfandPair> {
    let psi = *t.require_automorphism()?;
    let s = C64::new(-(t.space.gamma - 0.01), 0.0);
    let one = C64::new(1.0, 0.0);
    let fa = Expr::Pow { p0: psi.a, p1: -one, s };
    let fb = Expr::Pow { p0: psi.b, p1: -one, s };
    let inv = t.inverse_operator()?;
    Ok(GelfandPair {
        forward_test_function: fa.to_string(),
        forward: gelfand_radius(t, &fa, steps)?,
        inverse_test_function: fb.to_string(),
        inverse: gelfand_radius(&inv, &fb, steps)?,
    })
}

#[derive(Serialize)]
struct AnalyzeReport {
    config: RunConfig,
    automorphism: AutomorphismInfo,
    symbol: WeightSymbol,
    annuli: AnnulusPrediction,
    inverse_annuli: AnnulusPrediction,
    gelfand: GelfandPair,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigenvalues: Option<Eigenvalues>,
}

#[derive(Serialize)]
struct Eigenvalues {
    diagnostic_only: bool,
    #[serde(with = "crate::report::cplx::vec")]
    values: Vec<C64>,
}

fn cmd_analyze(a: &AnalyzeArgs, command: &str) -> i32 {
    let cfg = base_config(&a.common, command);
    match analyze_inner(a, &cfg) {
        Ok(()) => 0,
        Err(e) => fail(Some(&cfg), &e),
    }
}

fn analyze_inner(a: &AnalyzeArgs, cfg: &RunConfig) -> Result<()> {
    let (psi, space) = resolve(cfg)?;
    let t = WCOperator::from_text(&cfg.symbol, psi, space, cfg.order)?;
    let symbol = t.symbol.clone().expect("analyzed");
    let annuli = predict_annuli(&symbol, &psi, &space);
    let gelfand = gelfand_pair(&t, a.steps)?;
    let spectrum = cfg.command == "spectrum";
    let eigen = if spectrum {
        let g = t.galerkin()?;
        let ev = truncated_eigenvalues(&g)?;
        if let Some(dir) = a.common.out.as_deref() {
            write_file(dir, "galerkin.csv", &g.to_csv())?;
            write_file(dir, "eigenvalues.csv", &eigen_csv(&ev))?;
            write_file(dir, "gelfand.csv", &gelfand_csv(&gelfand))?;
        }
        Some(ev)
    } else {
        None
    };
    if let Some(dir) = a.common.out.as_deref() {
        write_file(dir, "annulus.svg", &annulus_svg(&annuli, eigen.as_deref().unwrap_or(&[])))?;
    }
    let report = AnalyzeReport {
        config: cfg.clone(),
        automorphism: (&psi).into(),
        symbol,
        annuli,
        inverse_annuli: annuli.inverse(),
        gelfand,
        eigenvalues: eigen.map(|values| Eigenvalues { diagnostic_only: true, values }),
    };
    emit(a.common.out.as_deref(), &format!("{}.json", cfg.command), &report)
}

pub fn eigen_csv(ev: &[C64]) -> String {
    let mut s = String::from("re,im\n");
    for z in ev {
        let _ = writeln!(s, "{:e},{:e}", z.re, z.im);
    }
    s
}

pub fn gelfand_csv(g: &GelfandPair) -> String {
    let mut s = String::from("n,forward,inverse\n");
    for (i, (f, b)) in g.forward.values.iter().zip(&g.inverse.values).enumerate() {
        let _ = writeln!(s, "{},{:e},{:e}", i + 1, f, b);
    }
    s
}

/// Predicted circles and eigenvalue points in a square plot around the origin.
pub fn annulus_svg(p: &AnnulusPrediction, ev: &[C64]) -> String {
    let size = 480.0;
    let c = size / 2.0;
    let extent = ev.iter().map(|z| z.norm()).fold(p.outer_upper.max(p.inclusion_outer), f64::max) * 1.1;
    let k = (c - 10.0) / extent.max(f64::MIN_POSITIVE);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<circle cx="{c}" cy="{c}" r="{:.3}" fill="#e3ecf7" stroke="#33557f"/>"##,
        p.outer_upper * k
    );
    let _ = writeln!(
        s,
        r##"<circle cx="{c}" cy="{c}" r="{:.3}" fill="white" stroke="#33557f"/>"##,
        p.inner_lower * k
    );
    for (r, dash) in [(p.inclusion_inner, "4 3"), (p.inclusion_outer, "4 3")] {
        let _ = writeln!(
            s,
            r##"<circle cx="{c}" cy="{c}" r="{:.3}" fill="none" stroke="#b3402a" stroke-dasharray="{dash}"/>"##,
            r * k
        );
    }
    let _ = writeln!(s, r##"<line x1="0" y1="{c}" x2="{size}" y2="{c}" stroke="#999" stroke-width="0.5"/>"##);
    let _ = writeln!(s, r##"<line x1="{c}" y1="0" x2="{c}" y2="{size}" stroke="#999" stroke-width="0.5"/>"##);
    for z in ev {
        let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="1.5" fill="black"/>"#, c + z.re * k, c - z.im * k);
    }
    s.push_str("</svg>\n");
    s
}

fn cmd_certify(a: &CertifyArgs) -> i32 {
    let mut cfg = base_config(&a.common, "certify");
    cfg.k = a.k;
    cfg.tol = a.tol;
    cfg.seed = a.seed;
    match parse_constant(&a.lambda) {
        Ok(l) => cfg.lambda = l,
        Err(e) => return fail(Some(&cfg), &e),
    }
    if let Err(e) = resolve(&cfg).and_then(|_| parse(&cfg.symbol).map(|_| ())) {
        return fail(Some(&cfg), &e);
    }
    let rep = caradus_report(&cfg);
    if let Err(e) = emit(a.common.out.as_deref(), "certify.json", &rep) {
        return fail(Some(&cfg), &e);
    }
    rep.verdict.exit_code()
}

#[derive(Serialize)]
struct DecomposeReport {
    config: RunConfig,
    decomposition: Decomposition,
}

fn cmd_decompose(a: &DecomposeArgs) -> i32 {
    let mut cfg = base_config(&a.common, "decompose");
    cfg.mu = a.mu;
    cfg.nu = a.nu;
    let run = || -> Result<()> {
        let (psi, space) = resolve(&cfg)?;
        let f = parse(&cfg.symbol)?.series(cfg.order)?;
        let d = decompose(&f, &psi, cfg.mu, cfg.nu, &space)?;
        if let Some(dir) = a.common.out.as_deref() {
            let mut s = String::from("k,f1_re,f1_im,f2_re,f2_im\n");
            for k in 0..=cfg.order {
                let (x, y) = (d.f1.coeff(k), d.f2.coeff(k));
                let _ = writeln!(s, "{k},{:e},{:e},{:e},{:e}", x.re, x.im, y.re, y.im);
            }
            write_file(dir, "decompose.csv", &s)?;
        }
        emit(a.common.out.as_deref(), "decompose.json", &DecomposeReport { config: cfg.clone(), decomposition: d })
    };
    match run() {
        Ok(()) => 0,
        Err(e) => fail(Some(&cfg), &e),
    }
}
