//! Weight expressions: parsing, evaluation, exact expansion and boundary moduli.

mod analyze;
mod expr;
mod parser;

pub use analyze::{analyze, analyze_with, winding_check, SamplingParams, WeightSymbol};
pub use expr::{Arg, Expr};
pub use parser::{parse, parse_constant};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobius::Mobius;
    use num_complex::Complex64 as C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points(seed: u64, n: usize, radius: f64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| C64::from_polar(radius * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU)))
            .collect()
    }

    #[test]
    fn series_matches_evaluator() {
        for text in [
            "1",
            "2+z",
            "exp(0.3*z)/(1 - 0.2*z)",
            "pow(1 - z, 0.5) * pow(-1 - z, -0.3)",
            "log(3 + z) * (1 + i*z)^2",
            "pow(i - z, 0.2+0.7i) + z^3",
            "1/(2 - z)^4",
        ] {
            let e = parse(text).unwrap();
            let s = e.series(256).unwrap();
            for z in points(7, 20, 0.9) {
                let err = (s.eval(z) - e.eval(z)).norm();
                assert!(err < 1e-9, "{text} at {z}: {err:e}");
            }
        }
    }

    #[test]
    fn composition_expands_exactly() {
        // u ∘ psi_n for a deep iterate of the canonical map
        let e = parse("pow(1 - z, -0.49) * pow(-1 - z, 0.3) + exp(z)").unwrap();
        let m = Mobius::canonical(0.5).pow(9);
        let c = e.clone().compose(m);
        let s = c.series(512).unwrap();
        for z in points(11, 20, 0.6) {
            let want = e.eval(m.eval(z));
            assert!((s.eval(z) - want).norm() < 1e-9 * want.norm().max(1.0));
        }
        // series argument path agrees with the Möbius path
        let x = m.to_series(64);
        let via_series = e.expand(Arg::Series(&x), 64).unwrap();
        assert!(via_series.max_diff(&c.series(64).unwrap(), 64) < 1e-8 * via_series.max_abs());
    }
}
