//! Gauss–Legendre rules.

/// Nodes and weights of the `n`-point rule on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (t * pn - pm) / (t * t - 1.0);
            let dt = pn / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite rule on `[lo, hi]` with panels graded geometrically towards `lo`.
pub fn graded_panels(lo: f64, hi: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let mut edges = vec![lo];
    for j in (0..panels).rev() {
        edges.push(lo + (hi - lo) * 0.5f64.powi(j as i32));
    }
    let mut out = Vec::with_capacity(panels * order);
    for e in edges.windows(2) {
        let (m, h) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        for (xi, wi) in x.iter().zip(&w) {
            out.push((m + h * xi, h * wi));
        }
    }
    out
}
