//! Critical points of the degenerate phase in `η`.
//!
//! For `ξ = a e₁` the stationary equation `∇_ηΦ = 0` forces `η ∥ ξ`, and for
//! the `f₄` triple it reduces to `h(b) + g-terms = 0`, i.e.
//! `a = f(b) = b − √(2b²/(b²+2))`. The solver here works on the generic
//! reduced function `F(b) = ⟨∇_ηΦ(ξ, bξ̂), ξ̂⟩`, so it applies to any
//! degenerate triple.

use rayon::prelude::*;
use thiserror::Error;

use crate::phase::{
    det2, grad_eta_phi, hess_eta_phi, phi, signature2, DegenerateModel, InteractionTriple, RescaleParams,
};
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticalError {
    #[error("derivative order {0} not available (supported: 0, 1, 3, 4)")]
    Order(u32),
    #[error("λ = {0} outside [0, 0.99]")]
    Lambda(f64),
    #[error("|ξ| = {got:e} outside the shell [{lo:e}, {hi:e}]")]
    Shell { got: f64, lo: f64, hi: f64 },
    #[error("no sign change of the reduced gradient after bracket expansion (a = {0:e})")]
    NoBracket(f64),
    #[error("scale out of range: {0}")]
    Range(String),
}

/// Largest admissible `λ`: the gradient bound needs `λ ≤ 1 − δ` with `δ = 0.01`.
pub const LAMBDA_MAX: f64 = 0.99;

/// `h(b) = −2b/√(2b²+4) + b/√(b²+1)` and its derivatives of order 1, 3, 4.
pub fn h_eval(b: f64, order: u32) -> Result<f64, CriticalError> {
    let p = b * b + 2.0;
    let q = b * b + 1.0;
    let s2 = std::f64::consts::SQRT_2;
    Ok(match order {
        0 => -2.0 * b / (2.0 * b * b + 4.0).sqrt() + b / q.sqrt(),
        1 => -2.0 * s2 / p.powf(1.5) + 1.0 / q.powf(1.5),
        3 => -12.0 * s2 * (2.0 * b * b - 1.0) / p.powf(3.5) - 3.0 * (1.0 - 4.0 * b * b) / q.powf(3.5),
        4 => 60.0 * s2 * b * (2.0 * b * b - 3.0) / p.powf(4.5) + 15.0 * b * (3.0 - 4.0 * b * b) / q.powf(4.5),
        o => return Err(CriticalError::Order(o)),
    })
}

/// `f(b) = b − √(2b²/(b²+2))`, so that `a = f(b)` at the critical point.
pub fn f_of_b(b: f64) -> f64 {
    b - (2.0 * b * b / (b * b + 2.0)).sqrt()
}

/// `f′(b) = 1 − 2√2/(b²+2)^{3/2}` for `b > 0`.
pub fn f_prime(b: f64) -> f64 {
    1.0 - 2.0 * std::f64::consts::SQRT_2 / (b * b + 2.0).powf(1.5)
}

/// Minimum of `|h‴|` on a uniform grid of `(0, b_max]`, with its location.
pub fn h3_abs_min(b_max: f64, n: usize) -> (f64, f64) {
    (1..=n)
        .map(|i| {
            let b = b_max * i as f64 / n as f64;
            (h_eval(b, 3).expect("order 3").abs(), b)
        })
        .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc })
}

/// Grid lower bound for `|∇_{η′}Φ̃_λ|` on the product of annuli.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusBound {
    pub l: u32,
    pub lambda: f64,
    /// Grid minimum minus the Lipschitz slack.
    pub min_grad: f64,
    /// Raw smallest sampled value.
    pub grid_min: f64,
    /// Largest cell half-diagonal (in the scanned variables).
    pub grid_resolution: f64,
    /// `(|ξ′|, |η′|, angle)` of the smallest sample.
    pub argmin: [f64; 3],
}

impl AnnulusBound {
    pub fn corroborates(&self) -> bool {
        self.min_grad > 0.0
    }
}

const SHELL: (f64, f64) = (0.55, 1.2);

/// Scans `|∇_{η′}Φ̃_λ(ξ′,η′)|` over `|ξ′|, |η′| ∈ [0.55, 1.2]`.
///
/// By rotation invariance `ξ′ = (a, 0)` and `η′ = r(cos θ, sin θ)` with
/// `θ ∈ [0, π]`. A 256 × 256 × 64 grid is refined 16× around the coarse
/// minimizer; the Lipschitz constants are estimated from neighbouring samples.
pub fn min_grad_on_annulus(l: u32, lambda: f64, triple: &InteractionTriple) -> Result<AnnulusBound, CriticalError> {
    min_grad_on_annulus_with(l, lambda, triple, [256, 256, 64])
}

pub fn min_grad_on_annulus_with(
    l: u32,
    lambda: f64,
    triple: &InteractionTriple,
    n: [usize; 3],
) -> Result<AnnulusBound, CriticalError> {
    if !(0.0..=LAMBDA_MAX).contains(&lambda) {
        return Err(CriticalError::Lambda(lambda));
    }
    let rs = RescaleParams::new(l, lambda, 3).map_err(|e| CriticalError::Range(e.to_string()))?;
    let pi = std::f64::consts::PI;
    let box_lo = [SHELL.0, SHELL.0, 0.0];
    let box_hi = [SHELL.1, SHELL.1, pi];
    let coarse = scan_box(&rs, triple, box_lo, box_hi, n);
    let fine_lo: Vec<f64> = (0..3)
        .map(|d| (coarse.argmin[d] - coarse.step[d]).max(box_lo[d]))
        .collect();
    let fine_hi: Vec<f64> = (0..3)
        .map(|d| (coarse.argmin[d] + coarse.step[d]).min(box_hi[d]))
        .collect();
    let fine = scan_box(
        &rs,
        triple,
        [fine_lo[0], fine_lo[1], fine_lo[2]],
        [fine_hi[0], fine_hi[1], fine_hi[2]],
        [33, 33, 33],
    );
    // away from the refined box the coarse bound applies; inside it the fine one
    let slack = |lip: [f64; 3], step: [f64; 3]| (0..3).map(|d| lip[d] * 0.5 * step[d]).sum::<f64>();
    let lip = [
        coarse.lip[0].max(fine.lip[0]),
        coarse.lip[1].max(fine.lip[1]),
        coarse.lip[2].max(fine.lip[2]),
    ];
    let coarse_bound = coarse.second_min - slack(lip, coarse.step);
    let fine_bound = fine.min - slack(lip, fine.step);
    let resolution = (0..3).map(|d| (0.5 * coarse.step[d]).powi(2)).sum::<f64>().sqrt();
    Ok(AnnulusBound {
        l,
        lambda,
        min_grad: coarse_bound.min(fine_bound),
        grid_min: coarse.min.min(fine.min),
        grid_resolution: resolution,
        argmin: if fine.min <= coarse.min { fine.argmin } else { coarse.argmin },
    })
}

struct Scan {
    min: f64,
    /// Smallest value outside the 3×3×3 block around the minimizer.
    second_min: f64,
    argmin: [f64; 3],
    step: [f64; 3],
    lip: [f64; 3],
}

fn scan_box(rs: &RescaleParams, t: &InteractionTriple, lo: [f64; 3], hi: [f64; 3], n: [usize; 3]) -> Scan {
    let step = [0, 1, 2].map(|d| (hi[d] - lo[d]) / (n[d] - 1).max(1) as f64);
    let coord = |d: usize, i: usize| lo[d] + step[d] * i as f64;
    let eval = |ia: usize, ir: usize, it: usize| {
        let a = coord(0, ia);
        let r = coord(1, ir);
        let th = coord(2, it);
        let g = crate::phase::rescaled_grad_eta(rs, t, [a, 0.0], [r * th.cos(), r * th.sin()]);
        g[0].hypot(g[1])
    };
    let vals: Vec<f64> = (0..n[0] * n[1] * n[2])
        .into_par_iter()
        .map(|idx| {
            let it = idx % n[2];
            let ir = (idx / n[2]) % n[1];
            let ia = idx / (n[1] * n[2]);
            eval(ia, ir, it)
        })
        .collect();
    let at = |ia: usize, ir: usize, it: usize| vals[(ia * n[1] + ir) * n[2] + it];
    let (imin, &vmin) = vals
        .iter()
        .enumerate()
        .fold((0, &f64::INFINITY), |acc, (i, v)| if *v < *acc.1 { (i, v) } else { acc });
    let it0 = imin % n[2];
    let ir0 = (imin / n[2]) % n[1];
    let ia0 = imin / (n[1] * n[2]);
    let mut second = f64::INFINITY;
    let mut lip = [0.0f64; 3];
    for ia in 0..n[0] {
        for ir in 0..n[1] {
            for it in 0..n[2] {
                let v = at(ia, ir, it);
                let near = ia.abs_diff(ia0) <= 1 && ir.abs_diff(ir0) <= 1 && it.abs_diff(it0) <= 1;
                if !near && v < second {
                    second = v;
                }
                if ia + 1 < n[0] {
                    lip[0] = lip[0].max((at(ia + 1, ir, it) - v).abs() / step[0]);
                }
                if ir + 1 < n[1] {
                    lip[1] = lip[1].max((at(ia, ir + 1, it) - v).abs() / step[1]);
                }
                if it + 1 < n[2] {
                    lip[2] = lip[2].max((at(ia, ir, it + 1) - v).abs() / step[2]);
                }
            }
        }
    }
    // difference quotients underestimate the true constant by O(step); pad by 2×
    let lip = lip.map(|x| 2.0 * x);
    Scan {
        min: vmin,
        second_min: second,
        argmin: [coord(0, ia0), coord(1, ir0), coord(2, it0)],
        step,
        lip,
    }
}

/// The stationary point `η(ξ)` and its local data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub eta: Point,
    pub phi_value: f64,
    pub hess_det: f64,
    /// (positive, negative) eigenvalue counts of `∇_ηηΦ`.
    pub hess_signature: (i32, i32),
    pub residual: f64,
}

impl CriticalPoint {
    pub fn radius(&self) -> f64 {
        self.eta[0].hypot(self.eta[1])
    }
}

/// Solves for the critical point at `|ξ| ∼ 2^{−3l}`, checking the shell.
pub fn solve_critical_point(xi: Point, l: u32, triple: &InteractionTriple) -> Result<CriticalPoint, CriticalError> {
    let a = xi[0].hypot(xi[1]);
    let s = (-3.0 * l as f64).exp2();
    let (lo, hi) = (0.55 * s, 1.2 * s);
    if !(lo..=hi).contains(&a) {
        return Err(CriticalError::Shell { got: a, lo, hi });
    }
    solve_critical_point_at(xi, triple)
}

/// Reduced gradient `F(b) = ⟨∇_ηΦ(ξ, b ξ̂), ξ̂⟩`.
pub fn reduced_gradient(xi: Point, b: f64, triple: &InteractionTriple) -> f64 {
    let a = xi[0].hypot(xi[1]);
    let u = [xi[0] / a, xi[1] / a];
    let g = grad_eta_phi(triple, xi, [b * u[0], b * u[1]]);
    g[0] * u[0] + g[1] * u[1]
}

/// Number of sign changes of `F` on a geometric grid of `[lo·b₀, hi·b₀]`.
pub fn sign_changes(xi: Point, triple: &InteractionTriple, lo: f64, hi: f64, n: usize) -> usize {
    let a = xi[0].hypot(xi[1]);
    let b0 = DegenerateModel::of(triple).critical_radius(a);
    let ratio = (hi / lo).ln();
    let signs: Vec<bool> = (0..=n)
        .map(|i| reduced_gradient(xi, b0 * lo * (ratio * i as f64 / n as f64).exp(), triple) > 0.0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Bisection to `1e−15` relative width, then two Newton steps.
pub fn solve_critical_point_at(xi: Point, triple: &InteractionTriple) -> Result<CriticalPoint, CriticalError> {
    let a = xi[0].hypot(xi[1]);
    let u = [xi[0] / a, xi[1] / a];
    let f = |b: f64| reduced_gradient(xi, b, triple);
    let b0 = DegenerateModel::of(triple).critical_radius(a);
    let (mut lo, mut hi) = (0.5 * b0, 2.0 * b0);
    let mut tries = 0;
    while !(f(lo) > 0.0 && f(hi) < 0.0) {
        tries += 1;
        if tries > 40 {
            return Err(CriticalError::NoBracket(a));
        }
        lo *= 0.5;
        hi *= 2.0;
    }
    while (hi - lo) > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut b = 0.5 * (lo + hi);
    for _ in 0..2 {
        let h = hess_eta_phi(triple, xi, [b * u[0], b * u[1]]);
        let d = u[0] * (h[0][0] * u[0] + h[0][1] * u[1]) + u[1] * (h[1][0] * u[0] + h[1][1] * u[1]);
        if d != 0.0 {
            let next = b - f(b) / d;
            if next.is_finite() && (next - b).abs() <= 1e-3 * b {
                b = next;
            }
        }
    }
    let eta = [b * u[0], b * u[1]];
    let g = grad_eta_phi(triple, xi, eta);
    let h = hess_eta_phi(triple, xi, eta);
    Ok(CriticalPoint {
        eta,
        phi_value: phi(triple, xi, eta),
        hess_det: det2(h),
        hess_signature: signature2(h),
        residual: g[0].hypot(g[1]),
    })
}

/// `α = Φ̃(ξ′, η′(ξ′)) = 2^{4l} Φ(ξ, η(ξ))`.
pub fn phi_at_critical(cp: &CriticalPoint, xi: Point, l: u32, triple: &InteractionTriple) -> f64 {
    (4.0 * l as f64).exp2() * phi(triple, xi, cp.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn h_constants() {
        assert_eq!(h_eval(0.0, 3).unwrap(), -1.5);
        assert_eq!(h_eval(0.0, 0).unwrap(), 0.0);
        assert_eq!(h_eval(0.0, 1).unwrap(), 0.0);
        let v = -h_eval(0.1375, 0).unwrap();
        assert!(v > 0.0006 && v < 0.0007, "{v}");
        assert!(h_eval(0.1, 2).is_err());
    }

    fn deriv(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn h_derivatives_match_finite_differences() {
        let h0 = |b: f64| h_eval(b, 0).unwrap();
        let h1 = |b: f64| h_eval(b, 1).unwrap();
        let h3 = |b: f64| h_eval(b, 3).unwrap();
        let h2 = |b: f64| deriv(h1, b, 1e-4);
        for i in -20..=20 {
            let b = 0.1 * i as f64;
            assert!((deriv(h0, b, 1e-4) - h1(b)).abs() < 1e-9);
            assert!((deriv(h2, b, 1e-3) - h3(b)).abs() < 1e-5, "b={b}");
            assert!((deriv(h3, b, 1e-4) - h_eval(b, 4).unwrap()).abs() < 1e-8, "b={b}");
        }
        assert!(h2(0.0).abs() < 1e-9);
    }

    #[test]
    fn h_parities_and_signs() {
        for i in 0..=400 {
            let b = -2.0 + 0.01 * i as f64;
            let h = h_eval(b, 0).unwrap();
            assert!((h + h_eval(-b, 0).unwrap()).abs() < 1e-15);
            assert_eq!(h_eval(b, 3).unwrap(), h_eval(-b, 3).unwrap());
            if b >= 0.0 {
                assert!(h <= 0.0);
            }
            assert!(h_eval(b, 1).unwrap() <= 1e-15);
        }
    }

    #[test]
    fn fourth_derivative_nonnegative_near_zero() {
        for i in 0..10_000 {
            let b = 0.3 * i as f64 / 9_999.0;
            assert!(h_eval(b, 4).unwrap() >= 0.0);
        }
    }

    #[test]
    fn third_derivative_minimum_on_small_interval() {
        let (m, at) = h3_abs_min(0.3, 3000);
        assert!((m - h_eval(0.3, 3).unwrap().abs()).abs() < 1e-12);
        assert_eq!(at, 0.3);
        assert!(m < 1.0, "the constant 1 claimed for this minimum is not reached: {m}");
    }

    #[test]
    fn lagrange_remainder_window() {
        for i in 1..=300 {
            let b = 0.001 * i as f64;
            let ratio = h_eval(b, 0).unwrap() / (b * b * b);
            let lo = h_eval(0.0, 3).unwrap() / 6.0;
            let hi = h_eval(b, 3).unwrap() / 6.0;
            assert!(ratio >= lo - 1e-9 && ratio <= hi + 1e-9, "b={b}");
        }
    }

    #[test]
    fn f_is_increasing() {
        for i in 1..10_000 {
            let b = 0.001 + 0.001 * i as f64;
            assert!(f_prime(b) > 0.0);
            let fd = deriv(f_of_b, b, 1e-5);
            assert!((fd - f_prime(b)).abs() < 1e-8);
        }
    }

    #[test]
    fn critical_point_small_a() {
        let t = InteractionTriple::f4();
        let a = (-12f64).exp2();
        let cp = solve_critical_point([a, 0.0], 4, &t).unwrap();
        let b = cp.radius();
        let b0 = (4.0 * a).cbrt();
        assert!(((b - b0) / b0).abs() < b * b, "{b} vs {b0}");
        assert_relative_eq!(f_of_b(b), a, max_relative = 1e-10);
        assert!(cp.residual < 1e-13);
        assert_eq!(cp.hess_signature, (0, 2));
        assert_relative_eq!(cp.hess_det, 3.0 * b.powi(4) / 16.0, max_relative = 0.02);
    }

    #[test]
    fn critical_point_moderate_a() {
        let t = InteractionTriple::f4();
        let cp = solve_critical_point_at([0.2, 0.0], &t).unwrap();
        assert!((f_of_b(cp.radius()) - 0.2).abs() < 1e-12);
        assert!(solve_critical_point([0.2, 0.0], 4, &t).is_err());
    }

    #[test]
    fn eta_scales_like_two_to_minus_l() {
        let t = InteractionTriple::f4();
        let pts: Vec<(f64, f64)> = (4..=10)
            .map(|l| {
                let xi = [(-3.0 * l as f64).exp2(), 0.0];
                (l as f64, solve_critical_point(xi, l, &t).unwrap().radius().log2())
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope + 1.0).abs() < 0.02, "{slope}");
    }

    #[test]
    fn alpha_is_stable_and_symmetric() {
        let t = InteractionTriple::f4();
        let alphas: Vec<f64> = (4..=9)
            .map(|l| {
                let xi = [(-3.0 * l as f64).exp2(), 0.0];
                let cp = solve_critical_point(xi, l, &t).unwrap();
                let alpha = phi_at_critical(&cp, xi, l, &t);
                let neg = solve_critical_point([-xi[0], 0.0], l, &t).unwrap();
                assert_relative_eq!(phi_at_critical(&neg, [-xi[0], 0.0], l, &t), alpha, max_relative = 1e-12);
                alpha
            })
            .collect();
        // model value 3ab/4 with b = 4^{1/3}
        let model = 0.75 * 4f64.cbrt();
        for a in alphas {
            assert!((a - model).abs() < 0.01, "{a}");
        }
    }

    #[test]
    fn annulus_scan_domain() {
        let t = InteractionTriple::f4();
        assert!(matches!(min_grad_on_annulus(20, 1.0, &t), Err(CriticalError::Lambda(_))));
        let b = min_grad_on_annulus_with(20, 0.5, &t, [64, 64, 32]).unwrap();
        assert!(b.corroborates(), "{b:?}");
        let b = min_grad_on_annulus_with(20, 0.0, &t, [64, 64, 32]).unwrap();
        assert!(b.corroborates(), "{b:?}");
    }

    proptest! {
        #[test]
        fn unique_root_in_wide_bracket(e in 4.0f64..40.0, th in 0.0f64..6.28) {
            let a = (-e).exp2();
            let xi = [a * th.cos(), a * th.sin()];
            prop_assert_eq!(sign_changes(xi, &InteractionTriple::f4(), 0.1, 10.0, 400), 1);
        }

        #[test]
        fn solver_residual(e in 4.0f64..40.0) {
            let a = (-e).exp2();
            let cp = solve_critical_point_at([a, 0.0], &InteractionTriple::f4()).unwrap();
            prop_assert!(cp.residual <= 1e-13);
            prop_assert!(cp.eta[1] == 0.0);
        }
    }
}
