//! Bilinear Duhamel integrals with time-independent radial inputs,
//!
//! ```text
//! f̂(ξ, t) = ∫₀ᵗ ∫ e^{isΦ(ξ,η)} m(|ξ−η|) n(|η|) dη ds,
//! ```
//!
//! evaluated in the rescaled frame `η′ = 2^L η`, `s′ = 2^{−4L} s`,
//! `Φ̃ = 2^{4L} Φ`, so that `f̂ = 2^{2L} ∫ A · F_{S}(Φ̃) dη′` with
//! `F_S(p) = ∫₀^S e^{is′p} ds′` integrated exactly.
//!
//! The `η′` plane is split by a smooth window at radius `R(S)`. Inside, the
//! exact time kernel is integrated by quadrature. Outside, the phase has no
//! zeros or critical points, so the time integral is its static part
//! `i/Φ̃` plus a remainder oscillating at rate `S|∇Φ̃|`, which is bounded by
//! integration by parts on dyadic shells and reported as `tail_bound`.
//! Past `s′ = s_cut` the time integrand is replaced by its stationary-phase
//! expansion and integrated in closed form.
//!
//! The inputs are radial, so `f̂` depends on `|ξ|` only. The engine places
//! `ξ` on the first axis and integrates the upper half-plane twice.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::cells::{integrate_polar, CVec, PolarSum};
use super::special::{exp_over_s, time_kernel, time_kernel_dp};
use super::{tail_bound_raw, DerivBounds, Method, OscError, QuadConfig, QuadratureResult, Region, RegionContribution, StationaryPhaseData};
use crate::phase::{det2, grad_eta_phi, grad_xi_phi, hess_eta_phi, phi, signature2, InteractionTriple};
use crate::Point;

/// A radial profile `r ↦ m(r)` used as one factor of the amplitude.
pub trait RadialInput: Sync {
    fn value(&self, r: f64) -> Complex64;
    /// `dm/dr`.
    fn deriv(&self, r: f64) -> Complex64;
    /// Radius beyond which the profile vanishes.
    fn support(&self) -> f64;
    /// Radii where the profile changes character (ends of ramps).
    fn breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Radial weight on `|η|` (unscaled), e.g. a dyadic window.
pub trait EtaWeight: Sync {
    fn weight(&self, r: f64) -> f64;
    fn breaks(&self) -> Vec<f64>;
    /// Smallest and largest radius where the weight may be nonzero.
    fn support(&self) -> (f64, f64);
}

const R_MIN: f64 = 4.0;

/// Core radius `R(S)`: the `S^{−1/3−0.01}` law with constant 8,
/// capped so that `S·R⁴/16` stays near 10³ radians, and never below `R_MIN`.
pub fn core_radius(s: f64) -> f64 {
    if !(s > 0.0) {
        return f64::INFINITY;
    }
    (8.0 * s.powf(-1.0 / 3.0 - 0.01)).min(11.3 * s.powf(-0.25)).max(R_MIN)
}

/// `C^∞` step from 0 at `x ≤ 0` to 1 at `x ≥ 1`.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let f = |y: f64| (-1.0 / y).exp();
        let (a, b) = (f(x), f(1.0 - x));
        a / (a + b)
    }
}

fn window(r: f64, big_r: f64) -> f64 {
    if big_r.is_infinite() {
        1.0
    } else {
        1.0 - smooth_step((r - 0.75 * big_r) / (0.25 * big_r))
    }
}

#[inline]
fn cexp(x: f64) -> Complex64 {
    let (s, c) = x.sin_cos();
    Complex64::new(c, s)
}

/// Rescaling data for one output frequency `ξ = a e₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub a: f64,
    /// Scale exponent `L`.
    pub l: f64,
    /// `2^{−L}`.
    pub scale: f64,
    /// Outer radius of the amplitude support in `η′`.
    pub b_max: f64,
    /// Inner radius of the amplitude support in `η′`.
    pub b_min: f64,
}

impl Frame {
    fn xi(&self) -> Point {
        [self.a, 0.0]
    }
    fn p4(&self) -> f64 {
        2f64.powf(4.0 * self.l)
    }
}

/// Default scale exponent: `|ξ| = 2^{−3L}` for small `ξ`, no rescaling otherwise.
pub fn default_scale(a: f64) -> f64 {
    (-a.log2() / 3.0).max(0.0)
}

/// First-iteration style integral `∫∫ e^{isΦ} m(|ξ−η|) n(|η|) w(|η|)`.
pub struct Bilinear<'a> {
    pub triple: InteractionTriple,
    pub mu: &'a dyn RadialInput,
    pub nu: &'a dyn RadialInput,
    pub eta_weight: Option<&'a dyn EtaWeight>,
    pub cfg: QuadConfig,
}

/// Output of [`Bilinear::window`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    /// `f̂` over the time window.
    pub value: QuadratureResult,
    /// `ξ̂·∇_ξ f̂`, split into the `is∇_ξΦ` term and the `∇_ξ m` term.
    pub gradient: Option<[QuadratureResult; 2]>,
    pub core_radius: f64,
    pub stationary_points: Vec<StationaryPhaseData>,
}

/// Stationary points of one frame and the size of the neglected
/// next-order term, measured at `s_cut`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailData {
    pub points: Vec<StationaryPhaseData>,
    pub skipped: usize,
    pub s_cut: f64,
    /// `|G̃(s_cut) − leading term|` plus its quadrature error.
    pub residual: f64,
    /// Outer-region bound of the slice at `s_cut`, carried into `tail_bound`.
    pub outer: f64,
}

impl TailData {
    /// Error of `∫_a^b G̃` from the leading term alone, assuming the
    /// remainder decays like `s⁻²`.
    pub fn error(&self, a: f64, b: f64) -> f64 {
        let c2 = self.residual * self.s_cut * self.s_cut;
        let mut e = c2 * (1.0 / a - if b.is_infinite() { 0.0 } else { 1.0 / b });
        if self.skipped > 0 {
            let size: f64 = self.points.iter().filter_map(|p| p.constant().ok()).map(|c| c.norm()).sum();
            e += 10.0 * size.max(1.0) / a;
        }
        e
    }

    /// The outer bound at `s_cut` propagated like [`TailData::error`].
    pub fn outer_error(&self, a: f64, b: f64) -> f64 {
        self.outer * self.s_cut * self.s_cut * (1.0 / a - if b.is_infinite() { 0.0 } else { 1.0 / b })
    }

    /// Leading-order `∫_a^b G̃(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> Result<Complex64, OscError> {
        let mut v = Complex64::new(0.0, 0.0);
        for sp in &self.points {
            v += sp.constant()? * exp_over_s(sp.phi_star, a, b)?;
        }
        Ok(v)
    }
}

#[derive(Clone, Copy)]
enum Kernel {
    /// `∫_{s1}^{s2} e^{isp} ds` and its `p`-derivative, windowed to the core.
    Window { s1: f64, s2: f64 },
    /// Static outer part for windows starting at zero.
    Static,
    /// `e^{isp}` at one time, windowed to the core.
    Slice { s: f64 },
}

struct Acc {
    vals: [Complex64; 3],
    errs: [f64; 3],
    cells: usize,
    budget: bool,
    regions: Vec<RegionContribution>,
    tail: [f64; 3],
}

impl<'a> Bilinear<'a> {
    pub fn new(triple: InteractionTriple, mu: &'a dyn RadialInput, nu: &'a dyn RadialInput, cfg: QuadConfig) -> Self {
        Self { triple, mu, nu, eta_weight: None, cfg }
    }

    pub fn with_weight(mut self, w: &'a dyn EtaWeight) -> Self {
        self.eta_weight = Some(w);
        self
    }

    /// Frame with an explicit scale exponent.
    pub fn frame_with(&self, a: f64, l: f64) -> Frame {
        let scale = 2f64.powf(-l);
        let mut hi = self.nu.support().min(a + self.mu.support());
        let mut lo = (a - self.mu.support()).max(0.0);
        if let Some(w) = self.eta_weight {
            let (wl, wh) = w.support();
            hi = hi.min(wh);
            lo = lo.max(wl);
        }
        Frame {
            a,
            l,
            scale,
            b_max: hi / scale,
            b_min: lo.min(hi) / scale,
        }
    }

    pub fn frame(&self, a: f64) -> Frame {
        self.frame_with(a, default_scale(a))
    }

    #[inline]
    fn eta(fr: &Frame, r: f64, c: f64, s: f64) -> (Point, Point) {
        let e = [fr.scale * r * c, fr.scale * r * s];
        (e, [fr.a - e[0], -e[1]])
    }

    /// `Φ̃` at `η′ = (r cos θ, r sin θ)`.
    pub fn phase_t(&self, fr: &Frame, eta_p: Point) -> f64 {
        fr.p4() * phi(&self.triple, fr.xi(), [fr.scale * eta_p[0], fr.scale * eta_p[1]])
    }

    pub fn grad_t(&self, fr: &Frame, eta_p: Point) -> Point {
        let g = grad_eta_phi(&self.triple, fr.xi(), [fr.scale * eta_p[0], fr.scale * eta_p[1]]);
        let k = fr.p4() * fr.scale;
        [k * g[0], k * g[1]]
    }

    pub fn hess_t(&self, fr: &Frame, eta_p: Point) -> [[f64; 2]; 2] {
        let h = hess_eta_phi(&self.triple, fr.xi(), [fr.scale * eta_p[0], fr.scale * eta_p[1]]);
        let k = fr.p4() * fr.scale * fr.scale;
        [[k * h[0][0], k * h[0][1]], [k * h[1][0], k * h[1][1]]]
    }

    fn weight(&self, r_eta: f64) -> f64 {
        self.eta_weight.map_or(1.0, |w| w.weight(r_eta))
    }

    /// Amplitude `m(|ξ−η|) n(|η|) w(|η|)` at `η′`.
    pub fn amplitude_t(&self, fr: &Frame, eta_p: Point) -> Complex64 {
        let e = [fr.scale * eta_p[0], fr.scale * eta_p[1]];
        let rn = e[0].hypot(e[1]);
        let rm = (fr.a - e[0]).hypot(e[1]);
        self.mu.value(rm) * self.nu.value(rn) * self.weight(rn)
    }

    /// `∂_{ξ₁}` of the amplitude at `η′`.
    fn amplitude_dxi(&self, fr: &Frame, eta_p: Point) -> Complex64 {
        let e = [fr.scale * eta_p[0], fr.scale * eta_p[1]];
        let rn = e[0].hypot(e[1]);
        let d = [fr.a - e[0], -e[1]];
        let rm = d[0].hypot(d[1]);
        if rm == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.mu.deriv(rm) * (d[0] / rm) * self.nu.value(rn) * self.weight(rn)
    }

    fn radial_edges(&self, fr: &Frame, lo: f64, hi: f64, extra: &[f64]) -> Vec<f64> {
        let mut e = vec![lo, hi];
        let inv = 1.0 / fr.scale;
        for b in self.nu.breaks() {
            e.push(b * inv);
        }
        for b in self.mu.breaks() {
            e.push((b - fr.a).abs() * inv);
            e.push((b + fr.a) * inv);
        }
        if let Some(w) = self.eta_weight {
            for b in w.breaks() {
                e.push(b * inv);
            }
        }
        e.extend_from_slice(extra);
        if lo == 0.0 {
            for k in -3..=3 {
                e.push(2f64.powi(k));
            }
        }
        e.retain(|&x| x >= lo && x <= hi && x.is_finite());
        e.sort_by(f64::total_cmp);
        e.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        e
    }

    fn integrate(&self, fr: &Frame, edges: &[f64], big_r: f64, kernel: Kernel, grad: bool) -> PolarSum<CVec<3>> {
        let xi = fr.xi();
        let p4 = fr.p4();
        let inv = 1.0 / fr.scale;
        let f = |r: f64, th: f64| {
            let (s, c) = th.sin_cos();
            let (eta, _) = Self::eta(fr, r, c, s);
            let rn = eta[0].hypot(eta[1]);
            let d = [fr.a - eta[0], -eta[1]];
            let rm = d[0].hypot(d[1]);
            let zero = Complex64::new(0.0, 0.0);
            let nv = self.nu.value(rn) * self.weight(rn);
            let mv = self.mu.value(rm);
            let amp = mv * nv;
            let dxi = if grad && rm > 0.0 { self.mu.deriv(rm) * (d[0] / rm) * nv } else { zero };
            if amp == zero && dxi == zero {
                return CVec([zero; 3]);
            }
            let chi = window(r, big_r);
            let p = p4 * phi(&self.triple, xi, eta);
            // ∂_{ξ₁}Φ scaled by 2^L so all three outputs are O(1) in η′ units
            let gx = if grad { grad_xi_phi(&self.triple, xi, eta)[0] * inv } else { 0.0 };
            match kernel {
                Kernel::Window { s1, s2 } => {
                    if chi == 0.0 {
                        return CVec([zero; 3]);
                    }
                    let dt = s2 - s1;
                    let shift = cexp(s1 * p);
                    let k = shift * time_kernel(dt, p);
                    let out0 = amp * k * chi;
                    if !grad {
                        return CVec([out0, zero, zero]);
                    }
                    let kp = shift * (Complex64::new(0.0, s1) * time_kernel(dt, p) + time_kernel_dp(dt, p));
                    CVec([out0, amp * kp * (gx * chi), dxi * k * chi])
                }
                Kernel::Static => {
                    let w = 1.0 - chi;
                    if w == 0.0 {
                        return CVec([zero; 3]);
                    }
                    let ip = Complex64::new(0.0, 1.0 / p);
                    let out0 = amp * ip * w;
                    if !grad {
                        return CVec([out0, zero, zero]);
                    }
                    CVec([out0, amp * Complex64::new(0.0, -1.0 / (p * p)) * (gx * w), dxi * ip * w])
                }
                Kernel::Slice { s } => {
                    if chi == 0.0 {
                        return CVec([zero; 3]);
                    }
                    CVec([amp * cexp(s * p) * chi, zero, zero])
                }
            }
        };
        let speed = match kernel {
            Kernel::Window { s2, .. } => s2,
            Kernel::Static => 0.0,
            Kernel::Slice { s } => s,
        };
        let rate = |r: f64, th: f64| {
            if speed == 0.0 {
                return (0.0, 0.0);
            }
            let (s, c) = th.sin_cos();
            let g = self.grad_t(fr, [r * c, r * s]);
            (speed * (g[0] * c + g[1] * s).abs(), speed * r * (-g[0] * s + g[1] * c).abs())
        };
        integrate_polar(&f, &rate, edges, (0.0, PI), 8, &self.cfg.polar_options())
    }

    /// Samples of the outer region `[r0, b_max]` on dyadic shells:
    /// `(r_lo, r_hi, min|Φ̃|, same sign, min|∇Φ̃|, K·min|∇Φ̃|)` with
    /// `K = max ‖∇²Φ̃‖/|∇Φ̃|` over the samples.
    fn outer_shells(&self, fr: &Frame, r0: f64) -> Vec<(f64, f64, f64, bool, f64, f64)> {
        const NR: usize = 24;
        const NT: usize = 48;
        let mut out = Vec::new();
        let mut lo = r0.max(fr.b_min);
        while lo < fr.b_max {
            let hi = (2.0 * lo).min(fr.b_max);
            let (mut pmin, mut gmin, mut kmax) = (f64::INFINITY, f64::INFINITY, 0.0f64);
            let (mut pos, mut neg) = (false, false);
            let dr = (hi - lo) / NR as f64;
            for i in 0..=NR {
                let r = lo + dr * i as f64;
                // distance from any point of the shell to the nearest sample
                let reach = 0.5 * dr.hypot(r * PI / NT as f64);
                for j in 0..=NT {
                    let th = PI * j as f64 / NT as f64;
                    let e = [r * th.cos(), r * th.sin()];
                    let p = self.phase_t(fr, e);
                    pos |= p > 0.0;
                    neg |= p < 0.0;
                    let g = self.grad_t(fr, e);
                    let h = self.hess_t(fr, e);
                    let hn = h[0][0].abs().max(h[1][1].abs()) + h[0][1].abs();
                    let gn = g[0].hypot(g[1]);
                    // Lipschitz margins with the local Hessian, doubled
                    let gl = gn - 2.0 * reach * hn;
                    pmin = pmin.min(p.abs() - 2.0 * reach * gn);
                    gmin = gmin.min(gl);
                    kmax = kmax.max(2.0 * hn / gl.max(f64::MIN_POSITIVE));
                }
            }
            // the last entry is the Hessian bound relative to gmin, i.e. K·gmin
            out.push((lo, hi, pmin, !(pos && neg), gmin, kmax * gmin.max(0.0)));
            lo = hi;
        }
        out
    }

    /// Integration-by-parts bound on the dropped oscillatory outer remainder,
    /// given the sup of its amplitude on each shell.
    fn outer_bound(
        &self,
        fr: &Frame,
        big_r: f64,
        s: f64,
        shells: &[(f64, f64, f64, bool, f64, f64)],
        coef: &dyn Fn(Point) -> f64,
    ) -> f64 {
        let n = self.cfg.ibp_order;
        let ramp = [1.1 / fr.scale, 1.2 / fr.scale];
        let mut total = 0.0;
        for &(lo, hi, _, _, g, h) in shells {
            let mut d0 = 0.0f64;
            for i in 0..=12 {
                let r = lo + (hi - lo) * i as f64 / 12.0;
                for j in 0..=24 {
                    let th = PI * j as f64 / 24.0;
                    d0 = d0.max(coef([r * th.cos(), r * th.sin()]));
                }
            }
            if d0 == 0.0 {
                continue;
            }
            // derivative scale of the amplitude on this shell
            let mut ell = lo;
            if lo < big_r {
                ell = ell.min(0.25 * big_r);
            }
            if hi > ramp[0] * 0.9 && lo < ramp[1] * 1.1 {
                ell = ell.min(0.1 / fr.scale);
            }
            let mut amp = Vec::with_capacity(n as usize + 1);
            let mut fact = 1.0;
            for j in 0..=n as usize {
                fact *= (j + 1) as f64;
                amp.push(d0 * fact * (3.0 / ell).powi(j as i32));
            }
            let area = 0.5 * PI * (hi * hi - lo * lo);
            match tail_bound_raw(area, s, g, &DerivBounds { amplitude: amp, phase_hessian: h }, n) {
                Ok(b) => total += b,
                Err(_) => return f64::INFINITY,
            }
        }
        // both half-planes
        2.0 * total
    }

    /// Picks the core radius for oscillation speed `s_lo`, enlarging it until
    /// the outer region is free of zeros and critical points of `Φ̃`.
    fn choose_radius(&self, fr: &Frame, s_lo: f64) -> (f64, Vec<(f64, f64, f64, bool, f64, f64)>) {
        let mut r = core_radius(s_lo);
        loop {
            if r >= fr.b_max || r.is_infinite() {
                return (f64::INFINITY, Vec::new());
            }
            let shells = self.outer_shells(fr, 0.75 * r);
            let ok = shells.iter().all(|&(_, _, pmin, one_sign, g, _)| pmin > 0.0 && one_sign && g > 0.0);
            let signs_agree = {
                let mut sg = 0.0;
                let mut agree = true;
                for &(lo, _, _, _, _, _) in &shells {
                    let p = self.phase_t(fr, [lo, 0.0]).signum();
                    if sg != 0.0 && p != sg {
                        agree = false;
                    }
                    sg = p;
                }
                agree
            };
            if ok && signs_agree {
                return (r, shells);
            }
            r *= 1.5;
        }
    }

    /// Nondegenerate stationary points of `Φ̃(ξ′, ·)` on the support, found by
    /// scanning the first axis (critical points are collinear with `ξ`).
    /// The second component reports the number of skipped degenerate points.
    pub fn stationary_points(&self, fr: &Frame) -> (Vec<StationaryPhaseData>, usize) {
        let f = |b: f64| self.grad_t(fr, [b, 0.0])[0];
        let mut grid = vec![0.0];
        let lo = (1e-3f64).min(fr.b_max / 4.0);
        let n = 800;
        for i in 0..=n {
            let b = lo * (fr.b_max / lo).powf(i as f64 / n as f64);
            grid.push(b);
            grid.push(-b);
        }
        grid.sort_by(f64::total_cmp);
        let mut roots = Vec::new();
        let mut prev = (grid[0], f(grid[0]));
        for &b in &grid[1..] {
            let v = f(b);
            if v == 0.0 {
                roots.push(b);
            } else if prev.1 != 0.0 && v.signum() != prev.1.signum() {
                let (mut x0, mut x1, mut f0) = (prev.0, b, prev.1);
                for _ in 0..200 {
                    let m = 0.5 * (x0 + x1);
                    if m <= x0 || m >= x1 {
                        break;
                    }
                    let fm = f(m);
                    if fm == 0.0 {
                        x0 = m;
                        x1 = m;
                        break;
                    }
                    if fm.signum() == f0.signum() {
                        x0 = m;
                        f0 = fm;
                    } else {
                        x1 = m;
                    }
                }
                roots.push(0.5 * (x0 + x1));
            }
            prev = (b, v);
        }
        let mut pts = Vec::new();
        let mut skipped = 0;
        for b in roots {
            let e = [b, 0.0];
            let amp = self.amplitude_t(fr, e);
            if amp.norm() == 0.0 {
                continue;
            }
            let h = self.hess_t(fr, e);
            let det = det2(h);
            let scale = h[0][0].abs().max(h[1][1].abs()).max(h[0][1].abs());
            if det.abs() <= 1e-10 * scale * scale {
                skipped += 1;
                continue;
            }
            let (p, n) = signature2(h);
            pts.push(StationaryPhaseData {
                critical_point: e,
                phi_star: self.phase_t(fr, e),
                hess_det: det,
                hess_signature: p - n,
                amplitude_star: amp,
            });
        }
        (pts, skipped)
    }

    /// `f̂(a e₁)` over the rescaled time window `[s1, s2]` (`s2` may be
    /// infinite for the value alone), with the `ξ`-derivative if requested.
    pub fn window(&self, fr: &Frame, s1: f64, s2: f64, want_grad: bool) -> Result<WindowResult, OscError> {
        self.window_with(fr, s1, s2, want_grad, None)
    }

    /// [`Bilinear::window`] reusing precomputed time-tail data for this frame.
    pub fn window_with(
        &self,
        fr: &Frame,
        s1: f64,
        s2: f64,
        want_grad: bool,
        tail: Option<&TailData>,
    ) -> Result<WindowResult, OscError> {
        if !(s1 >= 0.0) || !(s2 >= s1) || s1.is_infinite() {
            return Err(OscError::Argument(format!("time window [{s1}, {s2}]")));
        }
        if want_grad && s2.is_infinite() {
            return Err(OscError::Argument("the gradient needs a finite time".into()));
        }
        let pre = [
            2f64.powf(2.0 * fr.l),
            2f64.powf(5.0 * fr.l),
            2f64.powf(2.0 * fr.l),
        ];
        let mut acc = Acc {
            vals: [Complex64::new(0.0, 0.0); 3],
            errs: [0.0; 3],
            cells: 0,
            budget: false,
            regions: Vec::new(),
            tail: [0.0; 3],
        };
        let s_cut = self.cfg.s_cut;
        let q_hi = s2.min(s_cut.max(s1));
        let mut big_r = f64::INFINITY;
        let mut method = Method::Direct;
        if q_hi > s1 && fr.b_max > fr.b_min {
            let s_lo = if s1 > 0.0 { s1 } else { q_hi };
            let (r, shells) = self.choose_radius(fr, s_lo);
            big_r = r;
            let core_hi = if r.is_infinite() { fr.b_max } else { r.min(fr.b_max) };
            let edges = self.radial_edges(fr, fr.b_min.min(core_hi), core_hi, &[0.75 * r]);
            let core = self.integrate(fr, &edges, r, Kernel::Window { s1, s2: q_hi }, want_grad);
            self.absorb(&mut acc, &core, if r.is_infinite() { Region::Whole } else { Region::Core }, pre[0]);
            if r.is_finite() {
                let edges = self.radial_edges(fr, (0.75 * r).max(fr.b_min), fr.b_max, &[r]);
                if s1 == 0.0 {
                    let outer = self.integrate(fr, &edges, r, Kernel::Static, want_grad);
                    self.absorb(&mut acc, &outer, Region::Outer, pre[0]);
                }
                // oscillatory remainders e^{i s Φ̃}(...) at s = q_hi and, if s1 > 0, at s1
                let mut times = vec![q_hi];
                if s1 > 0.0 {
                    times.push(s1);
                }
                for &s in &times {
                    let chi_out = |e: Point| 1.0 - window(e[0].hypot(e[1]), r);
                    acc.tail[0] += self.outer_bound(fr, r, s, &shells, &|e| {
                        self.amplitude_t(fr, e).norm() * chi_out(e) / self.phase_t(fr, e).abs()
                    });
                    if want_grad {
                        acc.tail[1] += self.outer_bound(fr, r, s, &shells, &|e| {
                            let p = self.phase_t(fr, e).abs();
                            let gx = grad_xi_phi(&self.triple, fr.xi(), [fr.scale * e[0], fr.scale * e[1]])[0] / fr.scale;
                            self.amplitude_t(fr, e).norm() * chi_out(e) * gx.abs() * (s / p + 1.0 / (p * p))
                        });
                        acc.tail[2] += self.outer_bound(fr, r, s, &shells, &|e| {
                            self.amplitude_dxi(fr, e).norm() * chi_out(e) / self.phase_t(fr, e).abs()
                        });
                    }
                }
            }
        }
        // halves → full plane
        for k in 0..3 {
            acc.vals[k] *= 2.0;
            acc.errs[k] *= 2.0;
        }
        let mut sps = Vec::new();
        if s2 > s_cut {
            method = if s1 >= s_cut { Method::TailOnly } else { Method::StationaryPhase };
            let ta = s1.max(s_cut);
            let owned;
            let td = match tail {
                Some(t) => t,
                None => {
                    owned = self.tail_data(fr)?;
                    &owned
                }
            };
            let mut v = [Complex64::new(0.0, 0.0); 3];
            for sp in &td.points {
                let c = sp.constant()?;
                let alpha = sp.phi_star;
                let lead = exp_over_s(alpha, ta, s2)?;
                v[0] += c * lead;
                if want_grad {
                    let e = sp.critical_point;
                    let gx = grad_xi_phi(&self.triple, fr.xi(), [fr.scale * e[0], fr.scale * e[1]])[0] / fr.scale;
                    let osc = if alpha == 0.0 {
                        Complex64::new(0.0, s2 - ta)
                    } else {
                        (cexp(alpha * s2) - cexp(alpha * ta)) / alpha
                    };
                    v[1] += c * gx * osc;
                    let ratio = self.amplitude_dxi(fr, e) / sp.amplitude_star;
                    v[2] += c * ratio * lead;
                }
            }
            let est = td.error(ta, s2);
            acc.tail[0] += td.outer_error(ta, s2);
            for k in 0..3 {
                acc.vals[k] += v[k];
            }
            acc.errs[0] += est;
            acc.errs[1] += est * ta;
            acc.errs[2] += est;
            acc.regions.push(RegionContribution {
                region: Region::TimeTail,
                value: v[0] * pre[0],
                error: est * pre[0],
                cells: 0,
            });
            sps = td.points.clone();
        }
        let mk = |k: usize, acc: &Acc, regions: Vec<RegionContribution>| QuadratureResult {
            value: acc.vals[k] * pre[k],
            error_estimate: acc.errs[k] * pre[k],
            cells_evaluated: acc.cells,
            tail_bound: acc.tail[k] * pre[k],
            method,
            budget_exhausted: acc.budget,
            regions,
        };
        let value = mk(0, &acc, acc.regions.clone());
        let gradient = if want_grad {
            Some([mk(1, &acc, Vec::new()), mk(2, &acc, Vec::new())])
        } else {
            None
        };
        Ok(WindowResult {
            value,
            gradient,
            core_radius: big_r,
            stationary_points: sps,
        })
    }

    /// `f̂` at several rescaled times from one quadrature up to `s_cut` plus
    /// closed-form tails. Times may be infinite.
    pub fn series(&self, fr: &Frame, times: &[f64]) -> Result<Vec<QuadratureResult>, OscError> {
        Ok(self.series_with_tail(fr, times)?.0)
    }

    /// [`Bilinear::series`], also returning the tail data when it was needed.
    pub fn series_with_tail(
        &self,
        fr: &Frame,
        times: &[f64],
    ) -> Result<(Vec<QuadratureResult>, Option<TailData>), OscError> {
        let s_cut = self.cfg.s_cut;
        let late = times.iter().any(|&s| s > s_cut);
        let (base, tail) = if late {
            let td = self.tail_data(fr)?;
            (Some(self.window_with(fr, 0.0, s_cut, false, Some(&td))?.value), Some(td))
        } else {
            (None, None)
        };
        let pre = 2f64.powf(2.0 * fr.l);
        times
            .iter()
            .map(|&s| match (&base, &tail) {
                (Some(b), Some(td)) if s > s_cut => {
                    let v = td.integral(s_cut, s)? * pre;
                    let e = td.error(s_cut, s) * pre;
                    let mut r = b.clone();
                    r.value += v;
                    r.error_estimate += e;
                    r.tail_bound += td.outer_error(s_cut, s) * pre;
                    r.method = Method::StationaryPhase;
                    r.regions.push(RegionContribution {
                        region: Region::TimeTail,
                        value: v,
                        error: e,
                        cells: 0,
                    });
                    Ok(r)
                }
                _ => Ok(self.window_with(fr, 0.0, s, false, tail.as_ref())?.value),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|v| (v, tail))
    }

    /// Stationary points and the residual of the leading term at `s_cut`.
    pub fn tail_data(&self, fr: &Frame) -> Result<TailData, OscError> {
        let (points, skipped) = self.stationary_points(fr);
        let g = self.slice(fr, self.cfg.s_cut)?;
        let residual = self.residual_of(&g, self.cfg.s_cut, &points)?;
        Ok(TailData {
            points,
            skipped,
            s_cut: self.cfg.s_cut,
            residual,
            outer: g.tail_bound,
        })
    }

    fn absorb(&self, acc: &mut Acc, s: &PolarSum<CVec<3>>, region: Region, pre: f64) {
        for k in 0..3 {
            acc.vals[k] += s.value.0[k];
            acc.errs[k] += s.error;
        }
        acc.cells += s.cells_evaluated;
        acc.budget |= s.budget_exhausted;
        acc.regions.push(RegionContribution {
            region,
            value: s.value.0[0] * (2.0 * pre),
            error: 2.0 * s.error * pre,
            cells: s.cells_evaluated,
        });
    }

    /// `|G̃(s) − leading term|` at one time, used to size the tail error.
    fn slice_residual(&self, fr: &Frame, s: f64, pts: &[StationaryPhaseData]) -> Result<f64, OscError> {
        let g = self.slice(fr, s)?;
        self.residual_of(&g, s, pts)
    }

    fn residual_of(&self, g: &QuadratureResult, s: f64, pts: &[StationaryPhaseData]) -> Result<f64, OscError> {
        let mut lead = Complex64::new(0.0, 0.0);
        for sp in pts {
            lead += sp.constant()? * cexp(s * sp.phi_star) / s;
        }
        Ok((g.value - lead).norm() + g.error_estimate)
    }

    /// `G̃(s) = ∫ A e^{isΦ̃} dη′` over the windowed core (whole support when
    /// the core covers it), with the outer remainder as `tail_bound`.
    pub fn slice(&self, fr: &Frame, s: f64) -> Result<QuadratureResult, OscError> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(OscError::Argument(format!("s = {s}")));
        }
        let (r, shells) = self.choose_radius(fr, s);
        let core_hi = if r.is_infinite() { fr.b_max } else { r.min(fr.b_max) };
        let edges = self.radial_edges(fr, fr.b_min.min(core_hi), core_hi, &[0.75 * r]);
        let sum = self.integrate(fr, &edges, r, Kernel::Slice { s }, false);
        let tail = if r.is_finite() {
            self.outer_bound(fr, r, s, &shells, &|e| {
                self.amplitude_t(fr, e).norm() * (1.0 - window(e[0].hypot(e[1]), r))
            })
        } else {
            0.0
        };
        let value = sum.value.0[0] * 2.0;
        Ok(QuadratureResult {
            value,
            error_estimate: 2.0 * sum.error,
            cells_evaluated: sum.cells_evaluated,
            tail_bound: tail,
            method: Method::Direct,
            budget_exhausted: sum.budget_exhausted,
            regions: vec![RegionContribution {
                region: if r.is_infinite() { Region::Whole } else { Region::Core },
                value,
                error: 2.0 * sum.error,
                cells: sum.cells_evaluated,
            }],
        })
    }

    /// `G̃(s)` for any `s > 0`: quadrature up to `8·s_cut`, the stationary-phase
    /// leading term beyond.
    pub fn slice_or_asymptotic(&self, fr: &Frame, s: f64) -> Result<QuadratureResult, OscError> {
        if s <= 8.0 * self.cfg.s_cut {
            return self.slice(fr, s);
        }
        let (pts, _) = self.stationary_points(fr);
        let mut v = Complex64::new(0.0, 0.0);
        let mut size = 0.0;
        for sp in &pts {
            let c = sp.constant()?;
            v += c * cexp(s * sp.phi_star) / s;
            size += c.norm();
        }
        let ta = 8.0 * self.cfg.s_cut;
        let resid = self.slice_residual(fr, ta, &pts)?;
        Ok(QuadratureResult {
            value: v,
            error_estimate: resid * (ta / s).powi(2) + 1e-16 * size,
            cells_evaluated: 0,
            tail_bound: 0.0,
            method: Method::StationaryPhase,
            budget_exhausted: false,
            regions: Vec::new(),
        })
    }
}

/// `∫₀^∞ G(s′) ds′` in the frame `η′ = 2^l η`, `ξ = 2^{−3l} ξ′`:
/// quadrature to `s_cut` plus the closed-form stationary-phase tail.
pub fn time_integral_g(
    triple: InteractionTriple,
    mu: &dyn RadialInput,
    nu: &dyn RadialInput,
    l: u32,
    xi_prime: Point,
    cfg: &QuadConfig,
) -> Result<QuadratureResult, OscError> {
    if !(cfg.s_cut >= 1.0) {
        return Err(OscError::Argument(format!("s_cut = {} < 1", cfg.s_cut)));
    }
    let bl = Bilinear::new(triple, mu, nu, *cfg);
    let a = xi_prime[0].hypot(xi_prime[1]) * 2f64.powi(-3 * l as i32);
    let fr = bl.frame_with(a, l as f64);
    let mut r = bl.window(&fr, 0.0, f64::INFINITY, false)?.value;
    let k = 2f64.powi(-2 * l as i32);
    r.value *= k;
    r.error_estimate *= k;
    r.tail_bound *= k;
    for reg in r.regions.iter_mut() {
        reg.value *= k;
        reg.error *= k;
    }
    Ok(r)
}
