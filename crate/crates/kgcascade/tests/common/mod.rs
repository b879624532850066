//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

/// Gauss-Legendre nodes and weights on `[−1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `∫_{r0}^{r1} ∫_0^{2π} f(r, θ) r dθ dr` with composite 16-point Gauss in `r`
/// (`n_r` nodes in total) and the `n_t`-point trapezoid rule in `θ`.
/// Returns the value and `∫|f|`.
pub fn brute_polar<F>(f: F, r0: f64, r1: f64, n_r: usize, n_t: usize) -> (Complex64, f64)
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let gl = gauss_legendre(16);
    let panels = n_r / 16;
    let h = (r1 - r0) / panels as f64;
    let dt = 2.0 * PI / n_t as f64;
    let (v, a) = (0..panels)
        .into_par_iter()
        .map(|p| {
            let mid = r0 + h * (p as f64 + 0.5);
            let mut v = Complex64::new(0.0, 0.0);
            let mut a = 0.0;
            for &(x, w) in &gl {
                let r = mid + 0.5 * h * x;
                let mut row = Complex64::new(0.0, 0.0);
                let mut arow = 0.0;
                for j in 0..n_t {
                    let z = f(r, j as f64 * dt);
                    row += z;
                    arow += z.norm();
                }
                let k = 0.5 * h * w * r * dt;
                v += row * k;
                a += arow * k;
            }
            (v, a)
        })
        .reduce(|| (Complex64::new(0.0, 0.0), 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    (v, a)
}

/// `C^∞` bump equal to 1 on `[0, a]` and 0 beyond `b`.
pub fn plateau(r: f64, a: f64, b: f64) -> f64 {
    if r <= a {
        return 1.0;
    }
    if r >= b {
        return 0.0;
    }
    let x = (r - a) / (b - a);
    let f = |y: f64| if y <= 0.0 { 0.0 } else { (-1.0 / y).exp() };
    f(1.0 - x) / (f(1.0 - x) + f(x))
}
