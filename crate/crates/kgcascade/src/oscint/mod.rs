//! Oscillatory integrals `∫ A(η) e^{isΦ(η)} dη` over annuli.
//!
//! Three evaluation paths are provided and cross-checked in the tests:
//! adaptive polar quadrature ([`integrate_annulus`]), integration-by-parts
//! bounds for stationary-point-free regions ([`nonstationary_tail_bound`]),
//! and the leading stationary-phase term ([`stationary_phase_eval`]).
//! The bilinear Duhamel integrals built on top of them live in [`bilinear`].

pub mod bilinear;
pub mod cells;
pub mod special;

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::phase::{det2, signature2};
use crate::Point;
pub use cells::{gl8_nodes, CVec, CellValue, PolarOptions, PolarSum};
pub use special::{ci_si, diff_ci, exp_over_s, si, SpecialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OscError {
    #[error("minimum phase gradient {0} is not positive; the region may contain a stationary point")]
    Stationary(f64),
    #[error("degenerate Hessian (det = {0}); the stationary-phase formula does not apply")]
    DegenerateHessian(f64),
    #[error("s = {s} is below the stationary-phase threshold {s_min}")]
    BelowThreshold { s: f64, s_min: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("no stationary point found for the time tail")]
    NoCriticalPoint,
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Closed annulus `r_min ≤ |η| ≤ r_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    pub r_min: f64,
    pub r_max: f64,
}

impl Annulus {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self, OscError> {
        if !(r_min >= 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(OscError::Argument(format!("bad annulus [{r_min}, {r_max}]")));
        }
        Ok(Self { r_min, r_max })
    }

    pub fn area(&self) -> f64 {
        PI * (self.r_max * self.r_max - self.r_min * self.r_min)
    }

    pub fn contains(&self, eta: Point) -> bool {
        let r = eta[0].hypot(eta[1]);
        r >= self.r_min && r <= self.r_max
    }
}

/// Phase, amplitude and domain of an oscillatory integral.
///
/// The Hessian and amplitude gradient default to central differences of the
/// supplied gradient and amplitude.
pub trait OscIntegrand: Sync {
    fn phase(&self, eta: Point) -> f64;
    fn phase_grad(&self, eta: Point) -> Point;
    fn amplitude(&self, eta: Point) -> Complex64;
    fn domain(&self) -> Annulus;

    fn phase_hessian(&self, eta: Point) -> [[f64; 2]; 2] {
        let h = 1e-5 * (1.0 + eta[0].hypot(eta[1]));
        let gx = |d: f64| self.phase_grad([eta[0] + d, eta[1]]);
        let gy = |d: f64| self.phase_grad([eta[0], eta[1] + d]);
        let (xp, xm, yp, ym) = (gx(h), gx(-h), gy(h), gy(-h));
        let hxx = (xp[0] - xm[0]) / (2.0 * h);
        let hyy = (yp[1] - ym[1]) / (2.0 * h);
        let hxy = 0.5 * ((xp[1] - xm[1]) + (yp[0] - ym[0])) / (2.0 * h);
        [[hxx, hxy], [hxy, hyy]]
    }

    fn amplitude_grad(&self, eta: Point) -> [Complex64; 2] {
        let h = 1e-5 * (1.0 + eta[0].hypot(eta[1]));
        [
            (self.amplitude([eta[0] + h, eta[1]]) - self.amplitude([eta[0] - h, eta[1]])) / (2.0 * h),
            (self.amplitude([eta[0], eta[1] + h]) - self.amplitude([eta[0], eta[1] - h])) / (2.0 * h),
        ]
    }

    /// Radii where the amplitude is not smooth or changes character; used as
    /// initial cell edges.
    fn radial_breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Engine tolerances. The field names follow the configuration keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub tol: f64,
    pub cell_budget: usize,
    pub ibp_order: u32,
    /// Smallest `s` at which the stationary-phase leading term is trusted.
    pub s_min: f64,
    /// Rescaled time beyond which the time integral switches to its
    /// stationary-phase tail.
    pub s_cut: f64,
    pub phase_per_cell: f64,
    pub l1_floor: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            cell_budget: 1_000_000,
            ibp_order: 3,
            s_min: 20.0,
            s_cut: 32.0,
            phase_per_cell: 4.0,
            l1_floor: 1e-3,
        }
    }
}

impl QuadConfig {
    pub fn polar_options(&self) -> PolarOptions {
        PolarOptions {
            tol: self.tol,
            abs_tol: 0.0,
            l1_floor: self.l1_floor,
            cell_budget: self.cell_budget,
            phase_per_cell: self.phase_per_cell,
            max_rounds: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    StationaryPhase,
    TailOnly,
}

/// Tag attached to each piece of a split computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Whole support integrated directly.
    Whole,
    /// Windowed inner disc `|η′| ≲ R(s′)`.
    Core,
    /// Static (time-integrated) part outside the core.
    Outer,
    /// Time tail past the cut-off, from stationary points.
    TimeTail,
    /// Bound on the effect of time-dependent inputs replaced by their limits.
    InputTransient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionContribution {
    pub region: Region,
    pub value: Complex64,
    pub error: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub cells_evaluated: usize,
    pub tail_bound: f64,
    pub method: Method,
    pub budget_exhausted: bool,
    pub regions: Vec<RegionContribution>,
}

/// Adaptive quadrature of `∫ A e^{isΦ}` over the integrand's annulus.
pub fn integrate_annulus<I: OscIntegrand + ?Sized>(ig: &I, s: f64, cfg: &QuadConfig) -> Result<QuadratureResult, OscError> {
    if !(s >= 0.0 && s.is_finite()) || !(cfg.tol > 0.0) {
        return Err(OscError::Argument(format!("s = {s}, tol = {}", cfg.tol)));
    }
    let dom = ig.domain();
    let mut edges = vec![dom.r_min];
    let mut breaks: Vec<f64> = ig
        .radial_breaks()
        .into_iter()
        .filter(|&r| r > dom.r_min && r < dom.r_max)
        .collect();
    breaks.sort_by(f64::total_cmp);
    edges.extend(breaks);
    edges.push(dom.r_max);
    let f = |r: f64, t: f64| {
        let eta = [r * t.cos(), r * t.sin()];
        let p = s * ig.phase(eta);
        ig.amplitude(eta) * Complex64::new(p.cos(), p.sin())
    };
    let rate = |r: f64, t: f64| {
        let (c, sn) = (t.cos(), t.sin());
        let g = ig.phase_grad([r * c, r * sn]);
        (s * (g[0] * c + g[1] * sn).abs(), s * r * (-g[0] * sn + g[1] * c).abs())
    };
    let sum = cells::integrate_polar(&f, &rate, &edges, (0.0, 2.0 * PI), 8, &cfg.polar_options());
    Ok(QuadratureResult {
        value: sum.value,
        error_estimate: sum.error,
        cells_evaluated: sum.cells_evaluated,
        tail_bound: 0.0,
        method: Method::Direct,
        budget_exhausted: sum.budget_exhausted,
        regions: vec![RegionContribution {
            region: Region::Whole,
            value: sum.value,
            error: sum.error,
            cells: sum.cells,
        }],
    })
}

/// Sup-norm data consumed by [`nonstationary_tail_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivBounds {
    /// `amplitude[j] ≥ sup |D^j A|` for `j = 0..=N`.
    pub amplitude: Vec<f64>,
    /// Bound on the operator norm of the phase Hessian.
    pub phase_hessian: f64,
}

/// Integration-by-parts bound for a region free of stationary points.
///
/// With `L = (∇Φ·∇)/(is|∇Φ|²)`, `N` transposed applications give
/// `area · N! · (s g)^{−N} · Σ_j C(N,j) D_j (4NK)^{N−j}`, where `g` is the
/// minimum gradient, `K = H/g` and `D_j` the amplitude derivative bounds.
/// The amplitude must vanish to order `N` on the boundary.
pub fn nonstationary_tail_bound<I: OscIntegrand + ?Sized>(
    ig: &I,
    s: f64,
    min_grad: f64,
    bounds: &DerivBounds,
    order: u32,
) -> Result<f64, OscError> {
    tail_bound_raw(ig.domain().area(), s, min_grad, bounds, order)
}

pub(crate) fn tail_bound_raw(area: f64, s: f64, min_grad: f64, bounds: &DerivBounds, order: u32) -> Result<f64, OscError> {
    if !(min_grad > 0.0) {
        return Err(OscError::Stationary(min_grad));
    }
    if !(s > 0.0) {
        return Err(OscError::Argument(format!("s = {s} must be positive")));
    }
    let n = order as usize;
    if bounds.amplitude.len() <= n {
        return Err(OscError::Argument(format!(
            "need {} amplitude derivative bounds, got {}",
            n + 1,
            bounds.amplitude.len()
        )));
    }
    let k = bounds.phase_hessian.max(0.0) / min_grad;
    let mut binom = 1.0;
    let mut sum = 0.0;
    for j in 0..=n {
        sum += binom * bounds.amplitude[j] * (4.0 * n as f64 * k).powi((n - j) as i32);
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    Ok(area * fact * (s * min_grad).powi(-(n as i32)) * sum)
}

fn sample_points(dom: Annulus, n: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity(n * 4 * n);
    for i in 0..=n {
        let r = dom.r_min + (dom.r_max - dom.r_min) * i as f64 / n as f64;
        for j in 0..4 * n {
            let t = 2.0 * PI * j as f64 / (4 * n) as f64;
            pts.push([r * t.cos(), r * t.sin()]);
        }
    }
    pts
}

/// Smallest sampled `|∇Φ|` on the domain, reduced by a Lipschitz margin from
/// the sampled Hessian.
pub fn sample_min_grad<I: OscIntegrand + ?Sized>(ig: &I, n: usize) -> f64 {
    let dom = ig.domain();
    let pts = sample_points(dom, n.max(4));
    let spacing = ((dom.r_max - dom.r_min) / n as f64).max(2.0 * PI * dom.r_max / (4 * n) as f64);
    let mut gmin = f64::INFINITY;
    let mut hmax = 0.0f64;
    for p in &pts {
        let g = ig.phase_grad(*p);
        gmin = gmin.min(g[0].hypot(g[1]));
        hmax = hmax.max(op_norm(ig.phase_hessian(*p)));
    }
    gmin - 0.5 * spacing * hmax
}

fn op_norm(h: [[f64; 2]; 2]) -> f64 {
    let (a, b, d) = (h[0][0], h[0][1], h[1][1]);
    let m = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (m + r).abs().max((m - r).abs())
}

/// Sampled amplitude and Hessian bounds up to derivative order `order`.
///
/// Directional `j`-th central differences in eight directions are maximised
/// over a polar sample grid and inflated by a factor 2.
pub fn estimate_deriv_bounds<I: OscIntegrand + ?Sized>(ig: &I, order: u32, n: usize) -> DerivBounds {
    let dom = ig.domain();
    let pts = sample_points(dom, n.max(4));
    let h = 0.02 * (dom.r_max - dom.r_min).max(1e-3);
    let dirs: Vec<Point> = (0..8).map(|k| {
        let t = PI * k as f64 / 8.0;
        [t.cos(), t.sin()]
    }).collect();
    let mut amp = vec![0.0f64; order as usize + 1];
    let mut hess = 0.0f64;
    for p in &pts {
        amp[0] = amp[0].max(ig.amplitude(*p).norm());
        hess = hess.max(op_norm(ig.phase_hessian(*p)));
        for j in 1..=order as usize {
            for d in &dirs {
                // j-th central difference with binomial weights
                let mut acc = Complex64::new(0.0, 0.0);
                let mut binom = 1.0;
                for i in 0..=j {
                    let off = (i as f64 - 0.5 * j as f64) * h;
                    let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += ig.amplitude([p[0] + off * d[0], p[1] + off * d[1]]) * (sign * binom);
                    binom = binom * (j - i) as f64 / (i + 1) as f64;
                }
                amp[j] = amp[j].max(acc.norm() / h.powi(j as i32));
            }
        }
    }
    DerivBounds {
        amplitude: amp.into_iter().map(|a| 2.0 * a).collect(),
        phase_hessian: 1.5 * hess,
    }
}

/// Data of a nondegenerate stationary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPhaseData {
    pub critical_point: Point,
    pub phi_star: f64,
    pub hess_det: f64,
    /// Number of positive minus number of negative Hessian eigenvalues.
    pub hess_signature: i32,
    pub amplitude_star: Complex64,
}

impl StationaryPhaseData {
    /// Reads the data off an integrand at a known critical point.
    pub fn at<I: OscIntegrand + ?Sized>(ig: &I, eta: Point) -> Self {
        let h = ig.phase_hessian(eta);
        let (p, n) = signature2(h);
        Self {
            critical_point: eta,
            phi_star: ig.phase(eta),
            hess_det: det2(h),
            hess_signature: p - n,
            amplitude_star: ig.amplitude(eta),
        }
    }

    /// `2π |det H|^{−1/2} e^{iπσ/4} A*`, so that the leading term is this
    /// constant times `e^{isΦ*}/s`.
    pub fn constant(&self) -> Result<Complex64, OscError> {
        if self.hess_det == 0.0 || !self.hess_det.is_finite() {
            return Err(OscError::DegenerateHessian(self.hess_det));
        }
        let ang = PI * self.hess_signature as f64 / 4.0;
        Ok(self.amplitude_star * Complex64::new(ang.cos(), ang.sin()) * (2.0 * PI / self.hess_det.abs().sqrt()))
    }
}

/// Leading stationary-phase term `(2π/s)|det H|^{−1/2} e^{iπσ/4} A* e^{isΦ*}`.
pub fn stationary_phase_eval(sp: &StationaryPhaseData, s: f64, cfg: &QuadConfig) -> Result<Complex64, OscError> {
    let c = sp.constant()?;
    if !(s >= cfg.s_min) {
        return Err(OscError::BelowThreshold { s, s_min: cfg.s_min });
    }
    let p = s * sp.phi_star;
    Ok(c * Complex64::new(p.cos(), p.sin()) / s)
}
