//! Duhamel iteration for the cascade `ĝ₀ → f̂₄, f̂₅ → f̂₆`.
//!
//! The linear modes `u₁, u₂, u₃` carry the same radial data `ĝ₀`, so the
//! first iterates are single bilinear integrals of `ĝ₀` with itself and the
//! second iterate is a bilinear integral of the first two. Nothing is
//! truncated: the only error is numerical.
//!
//! First-iteration values at `|ξ| ∼ 2^{−3l}` are computed in the frame
//! `η′ = 2^l η`, `s′ = 2^{−4l} t`; the second iterate at `|ξ| ∼ 2^{−9l}` uses
//! `η′ = 2^{3l} η`, `s′ = 2^{−12l} t` with inputs read from [`ProfileGrid`]s.

mod grid;
mod second;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::dyadic::CutoffSpec;
use crate::oscint::bilinear::{default_scale, Bilinear, EtaWeight, Frame, RadialInput};
use crate::oscint::{gl8_nodes, Method, OscError, QuadConfig, QuadratureResult, RegionContribution};
use crate::phase::InteractionTriple;
use crate::Point;

pub use grid::{default_rows, support_check, GridInput, ProfileGrid, SupportReport, GRID_FORMAT};
pub use second::{NormReport, SecondInputs};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid coverage gap: {what}")]
    Coverage { what: String },
    #[error("quadrature failed in {region}: {source}")]
    Quadrature {
        region: String,
        #[source]
        source: OscError,
    },
    #[error("invalid cascade system: {0}")]
    System(String),
    #[error("grid file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn quad_err(region: &str) -> impl Fn(OscError) -> ProfileError + '_ {
    move |source| ProfileError::Quadrature {
        region: region.to_string(),
        source,
    }
}

/// Profiles of the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProfileId {
    G0,
    F4,
    F5,
    F6,
}

impl ProfileId {
    /// Power of `ε` carried by the profile.
    pub fn epsilon_power(self) -> i32 {
        match self {
            ProfileId::G0 => 1,
            ProfileId::F4 | ProfileId::F5 => 2,
            ProfileId::F6 => 4,
        }
    }

    /// Radius of the frequency support: sums of input supports.
    pub fn support_radius(self) -> f64 {
        match self {
            ProfileId::G0 => 1.2,
            ProfileId::F4 | ProfileId::F5 => 2.4,
            ProfileId::F6 => 4.8,
        }
    }
}

impl fmt::Display for ProfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileId::G0 => "g0",
            ProfileId::F4 => "f4",
            ProfileId::F5 => "f5",
            ProfileId::F6 => "f6",
        })
    }
}

impl FromStr for ProfileId {
    type Err = ProfileError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "g0" => Ok(ProfileId::G0),
            "f4" => Ok(ProfileId::F4),
            "f5" => Ok(ProfileId::F5),
            "f6" => Ok(ProfileId::F6),
            _ => Err(ProfileError::Domain(format!("unknown profile {s:?}"))),
        }
    }
}

/// `output ← inputs[0] · inputs[1]`, where `inputs[0]` sits in the `ξ−η`
/// slot and `inputs[1]` in the `η` slot; `conjugate[i]` marks `ū`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equation {
    pub output: ProfileId,
    pub inputs: [ProfileId; 2],
    pub conjugate: [bool; 2],
    pub triple: InteractionTriple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub equations: Vec<Equation>,
}

impl SystemSpec {
    /// `f₄ ← u₂ū₁`, `f₅ ← u₃ū₂`, `f₆ ← u₅ū₄`, the last with the `f₄` triple.
    pub fn cascade() -> Self {
        let eq = |output, inputs, triple| Equation {
            output,
            inputs,
            conjugate: [false, true],
            triple,
        };
        Self {
            equations: vec![
                eq(ProfileId::F4, [ProfileId::G0, ProfileId::G0], InteractionTriple::f4()),
                eq(ProfileId::F5, [ProfileId::G0, ProfileId::G0], InteractionTriple::f5()),
                eq(ProfileId::F6, [ProfileId::F5, ProfileId::F4], InteractionTriple::f4()),
            ],
        }
    }

    /// Checks that every input is defined before use, every output is
    /// defined once, and conjugated slots are exactly those with `b < 0`.
    pub fn validate(&self) -> Result<(), ProfileError> {
        let mut defined = vec![ProfileId::G0];
        for eq in &self.equations {
            for p in eq.inputs {
                if !defined.contains(&p) {
                    return Err(ProfileError::System(format!("{} uses {p} before it is defined", eq.output)));
                }
            }
            if defined.contains(&eq.output) {
                return Err(ProfileError::System(format!("{} is defined twice", eq.output)));
            }
            let bs = [eq.triple.mu.b(), eq.triple.nu.b()];
            for (slot, (&conj, b)) in eq.conjugate.iter().zip(bs).enumerate() {
                if conj != (b < 0.0) {
                    return Err(ProfileError::System(format!(
                        "{}: slot {slot} has conjugation {conj} but b = {b}",
                        eq.output
                    )));
                }
            }
            defined.push(eq.output);
        }
        Ok(())
    }

    pub fn equation(&self, output: ProfileId) -> Option<&Equation> {
        self.equations.iter().find(|e| e.output == output)
    }
}

/// `ĝ₀(ξ) = ε φ(|ξ|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialProfile {
    pub epsilon: f64,
    pub cutoff: CutoffSpec,
}

pub fn g0_init(epsilon: f64, cutoff: CutoffSpec) -> Result<InitialProfile, ProfileError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ProfileError::Domain(format!("epsilon = {epsilon}")));
    }
    Ok(InitialProfile { epsilon, cutoff })
}

impl InitialProfile {
    pub fn eval(&self, xi: Point) -> f64 {
        self.epsilon * self.cutoff.eval(xi[0].hypot(xi[1]))
    }

    /// `∫ φ²` over the plane.
    pub fn phi_sq_integral(&self) -> f64 {
        let p = self.cutoff.plateau_radius();
        let q = self.cutoff.support_radius();
        let mut ramp = 0.0;
        for i in 0..4 {
            let (a, b) = (p + (q - p) * i as f64 / 4.0, p + (q - p) * (i + 1) as f64 / 4.0);
            for (r, w) in gl8_nodes(a, b) {
                ramp += w * self.cutoff.eval(r).powi(2) * r;
            }
        }
        std::f64::consts::PI * p * p + 2.0 * std::f64::consts::PI * ramp
    }

    /// `‖g₀‖_{L²} = ‖ĝ₀‖_{L²}` (unitary Fourier transform).
    pub fn l2_norm(&self) -> f64 {
        self.epsilon * self.phi_sq_integral().sqrt()
    }
}

impl RadialInput for InitialProfile {
    fn value(&self, r: f64) -> Complex64 {
        Complex64::new(self.epsilon * self.cutoff.eval(r), 0.0)
    }
    fn deriv(&self, r: f64) -> Complex64 {
        Complex64::new(self.epsilon * self.cutoff.deriv(r), 0.0)
    }
    fn support(&self) -> f64 {
        self.cutoff.support_radius()
    }
    fn breaks(&self) -> Vec<f64> {
        vec![self.cutoff.plateau_radius(), self.cutoff.support_radius()]
    }
}

/// A computed profile value with its error budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    /// `value / ε^p` with `p` the profile's `ε`-power.
    pub normalized: Complex64,
    pub error: f64,
    /// Separately reported bound on the outer nonstationary remainder.
    pub tail_bound: f64,
    pub cells: usize,
    pub method: Method,
    pub budget_exhausted: bool,
    pub regions: Vec<RegionContribution>,
}

impl Estimate {
    pub(crate) fn from_quad(q: QuadratureResult, eps_pow: f64) -> Self {
        Self {
            value: q.value,
            normalized: q.value / eps_pow,
            error: q.error_estimate,
            tail_bound: q.tail_bound,
            cells: q.cells_evaluated,
            method: q.method,
            budget_exhausted: q.budget_exhausted,
            regions: q.regions,
        }
    }

    pub(crate) fn zero(eps_pow: f64) -> Self {
        Self::from_quad(
            QuadratureResult {
                value: Complex64::new(0.0, 0.0),
                error_estimate: 0.0,
                cells_evaluated: 0,
                tail_bound: 0.0,
                method: Method::Direct,
                budget_exhausted: false,
                regions: Vec::new(),
            },
            eps_pow,
        )
    }

    /// Error relative to the magnitude.
    pub fn relative_error(&self) -> f64 {
        self.error / self.value.norm()
    }
}

/// `∇_ξ f̂` split as the `is∇_ξΦ` term and the `∇(input)` term.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub vector: [Complex64; 2],
    /// Radial derivative `∂_{|ξ|} f̂`, the sum of the two terms.
    pub radial: Complex64,
    pub phase_term: Complex64,
    pub amplitude_term: Complex64,
    pub error: f64,
    pub epsilon_power: f64,
    pub budget_exhausted: bool,
}

impl GradientEstimate {
    pub fn magnitude_normalized(&self) -> f64 {
        self.radial.norm() / self.epsilon_power
    }
}

/// The a-priori bound on `|f̂₄|/ε²` that applies below the stabilization time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseBound {
    /// 1: `t ≤ 2^l`, 2: `2^l < t ≤ 2^{4l}`, 3: `t > 2^{4l}`.
    pub case: u8,
    pub bound: f64,
}

/// Time window `[2^{a l}, 2^{b l}]` and `η` annulus `2^{lo·l} ≲ |η| ≲ 2^{hi·l}`.
/// A zero-length time window is allowed and integrates to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub time: (f64, f64),
    pub eta: (f64, f64),
}

impl WindowSpec {
    pub fn new(time: (f64, f64), eta: (f64, f64)) -> Result<Self, ProfileError> {
        if !(time.0 <= time.1) || !(eta.0 < eta.1) {
            return Err(ProfileError::Domain(format!("window {time:?} × {eta:?} is empty")));
        }
        Ok(Self { time, eta })
    }

    /// The first-iteration main window `[3.99l, 4.05l] × [−1.03l, −0.99l]`.
    pub fn first_main() -> Self {
        Self {
            time: (3.99, 4.05),
            eta: (-1.03, -0.99),
        }
    }

    /// The second-iteration main window `[11.99l, 12.05l] × [−3.09l, −2.99l]`.
    pub fn second_main() -> Self {
        Self {
            time: (11.99, 12.05),
            eta: (-3.09, -2.99),
        }
    }
}

/// Smooth radial window `φ(r/2^{hi}) − φ(r/2^{lo−1})` with real exponents.
pub(crate) struct EtaWindow {
    pub cutoff: CutoffSpec,
    pub lo: f64,
    pub hi: f64,
}

impl EtaWeight for EtaWindow {
    fn weight(&self, r: f64) -> f64 {
        (self.cutoff.eval_scaled(r, self.hi) - self.cutoff.eval_scaled(r, self.lo - 1.0)).max(0.0)
    }
    fn breaks(&self) -> Vec<f64> {
        let (p, s) = (self.cutoff.plateau_radius(), self.cutoff.support_radius());
        vec![p * self.hi.exp2(), s * self.hi.exp2(), p * (self.lo - 1.0).exp2(), s * (self.lo - 1.0).exp2()]
    }
    fn support(&self) -> (f64, f64) {
        (
            self.cutoff.plateau_radius() * (self.lo - 1.0).exp2(),
            self.cutoff.support_radius() * self.hi.exp2(),
        )
    }
}

/// Sup of `|φ_k f̂₄|` over a shell and a set of times.
#[derive(Debug, Clone, PartialEq)]
pub struct MidFrequency {
    pub k: i32,
    /// `(t, sup over the shell)` for each requested time.
    pub per_time: Vec<(f64, f64)>,
    pub sup: f64,
    /// Sup of `|∇(φ_k f̂₄)|` at the largest time, if requested.
    pub grad_sup: Option<f64>,
    pub error: f64,
}

impl MidFrequency {
    /// Sup over times `t ≤ horizon`.
    pub fn sup_until(&self, horizon: f64) -> f64 {
        self.per_time
            .iter()
            .filter(|(t, _)| *t <= horizon)
            .map(|p| p.1)
            .fold(0.0, f64::max)
    }
}

/// The cascade with its initial data and quadrature settings.
#[derive(Debug, Clone)]
pub struct Cascade {
    pub system: SystemSpec,
    pub g0: InitialProfile,
    pub cfg: QuadConfig,
}

fn check_shell(xi: Point, depth: f64) -> Result<f64, ProfileError> {
    let a = xi[0].hypot(xi[1]);
    let unit = (-depth).exp2();
    if !(a >= 0.55 * unit && a <= 1.2 * unit) {
        return Err(ProfileError::Domain(format!(
            "|ξ| = {a:e} outside [0.55, 1.2]·2^-{depth}"
        )));
    }
    Ok(a)
}

impl Cascade {
    pub fn new(epsilon: f64, cfg: QuadConfig) -> Result<Self, ProfileError> {
        Self::with_system(SystemSpec::cascade(), g0_init(epsilon, CutoffSpec::default())?, cfg)
    }

    pub fn with_system(system: SystemSpec, g0: InitialProfile, cfg: QuadConfig) -> Result<Self, ProfileError> {
        system.validate()?;
        Ok(Self { system, g0, cfg })
    }

    pub fn epsilon(&self) -> f64 {
        self.g0.epsilon
    }

    pub(crate) fn eps_pow(&self, p: ProfileId) -> f64 {
        self.g0.epsilon.powi(p.epsilon_power())
    }

    pub(crate) fn equation(&self, out: ProfileId) -> Result<&Equation, ProfileError> {
        self.system
            .equation(out)
            .ok_or_else(|| ProfileError::System(format!("no equation for {out}")))
    }

    fn first_equation(&self, which: ProfileId) -> Result<&Equation, ProfileError> {
        let eq = self.equation(which)?;
        if eq.inputs != [ProfileId::G0, ProfileId::G0] {
            return Err(ProfileError::Domain(format!("{which} is not a first iterate")));
        }
        Ok(eq)
    }

    fn first_engine(&self, which: ProfileId) -> Result<Bilinear<'_>, ProfileError> {
        let eq = self.first_equation(which)?;
        Ok(Bilinear::new(eq.triple, &self.g0, &self.g0, self.cfg))
    }

    /// `f̂(ξ, t)` for a first iterate at `|ξ| ∼ 2^{−3l}`, `t = 2^{t_exp}`
    /// (`t_exp = −∞` gives `t = 0`).
    pub fn first_iteration(&self, which: ProfileId, l: u32, t_exp: f64, xi: Point) -> Result<Estimate, ProfileError> {
        self.first_iteration_at(which, l, t_exp.exp2(), xi)
    }

    pub fn first_iteration_at(&self, which: ProfileId, l: u32, t: f64, xi: Point) -> Result<Estimate, ProfileError> {
        Ok(self.first_iteration_series(which, l, &[t], xi)?.remove(0))
    }

    /// First iterate at several times sharing one frame.
    pub fn first_iteration_series(
        &self,
        which: ProfileId,
        l: u32,
        times: &[f64],
        xi: Point,
    ) -> Result<Vec<Estimate>, ProfileError> {
        let a = check_shell(xi, 3.0 * l as f64)?;
        let bl = self.first_engine(which)?;
        let fr = bl.frame_with(a, l as f64);
        self.series_in_frame(&bl, &fr, which, times)
    }

    fn series_in_frame(
        &self,
        bl: &Bilinear<'_>,
        fr: &Frame,
        which: ProfileId,
        times: &[f64],
    ) -> Result<Vec<Estimate>, ProfileError> {
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
            return Err(ProfileError::Domain(format!("t = {t}")));
        }
        let p4 = (4.0 * fr.l).exp2();
        let scaled: Vec<f64> = times.iter().map(|t| t / p4).collect();
        let eps = self.eps_pow(which);
        let qs = bl.series(fr, &scaled).map_err(quad_err("first iteration"))?;
        Ok(qs
            .into_iter()
            .zip(times)
            .map(|(q, &t)| if t == 0.0 { Estimate::zero(eps) } else { Estimate::from_quad(q, eps) })
            .collect())
    }

    /// `f̂(ξ, t)` for a first iterate at any `ξ`, in the frame `L = max(0, −log₂|ξ|/3)`.
    pub fn first_iterate_value(&self, which: ProfileId, xi: Point, times: &[f64]) -> Result<Vec<Estimate>, ProfileError> {
        let a = xi[0].hypot(xi[1]);
        let bl = self.first_engine(which)?;
        if a >= which.support_radius() {
            return Ok(times.iter().map(|_| Estimate::zero(self.eps_pow(which))).collect());
        }
        let fr = bl.frame_with(a, default_scale(a));
        self.series_in_frame(&bl, &fr, which, times)
    }

    /// `∇_ξ f̂` at `t = 2^{t_exp} ≥ 2^{4.05 l}`.
    pub fn first_iteration_gradient(
        &self,
        which: ProfileId,
        l: u32,
        t_exp: f64,
        xi: Point,
    ) -> Result<GradientEstimate, ProfileError> {
        let a = check_shell(xi, 3.0 * l as f64)?;
        if !(t_exp >= 4.05 * l as f64) {
            return Err(ProfileError::Domain(format!("t = 2^{t_exp} is below 2^(4.05·{l})")));
        }
        let bl = self.first_engine(which)?;
        let fr = bl.frame_with(a, l as f64);
        self.gradient_in_frame(&bl, &fr, which, t_exp.exp2(), [xi[0] / a, xi[1] / a])
    }

    fn gradient_in_frame(
        &self,
        bl: &Bilinear<'_>,
        fr: &Frame,
        which: ProfileId,
        t: f64,
        dir: Point,
    ) -> Result<GradientEstimate, ProfileError> {
        let s = t / (4.0 * fr.l).exp2();
        let w = bl.window(fr, 0.0, s, true).map_err(quad_err("gradient"))?;
        let [g1, g2] = w.gradient.expect("gradient requested");
        let radial = g1.value + g2.value;
        Ok(GradientEstimate {
            vector: [radial * dir[0], radial * dir[1]],
            radial,
            phase_term: g1.value,
            amplitude_term: g2.value,
            error: g1.error_estimate + g2.error_estimate,
            epsilon_power: self.eps_pow(which),
            budget_exhausted: g1.budget_exhausted || g2.budget_exhausted,
        })
    }

    /// `∂_t f̂(ξ, t) = ∫ e^{itΦ} ĝ₀ĝ₀ dη` for `t ≥ 2^{4.05 l}`.
    pub fn time_derivative(&self, which: ProfileId, l: u32, t: f64, xi: Point) -> Result<Estimate, ProfileError> {
        let a = check_shell(xi, 3.0 * l as f64)?;
        if !(t >= (4.05 * l as f64).exp2()) {
            return Err(ProfileError::Domain(format!("t = {t} is below 2^(4.05·{l})")));
        }
        let bl = self.first_engine(which)?;
        let fr = bl.frame_with(a, l as f64);
        let s = t / (4.0 * fr.l).exp2();
        let q = bl.slice_or_asymptotic(&fr, s).map_err(quad_err("time slice"))?;
        let k = (-2.0 * fr.l).exp2();
        let mut e = Estimate::from_quad(q, self.eps_pow(which));
        e.value *= k;
        e.normalized *= k;
        e.error *= k;
        e.tail_bound *= k;
        Ok(e)
    }

    /// The a-priori bound on `|f̂₄(ξ, t)|/ε²` at `|ξ| ∼ 2^{−3l}`.
    ///
    /// Case 1 is `t ∫φ²`. Cases 2 and 3 use `C′ = 3π/√|Q|`, the constant
    /// from the quartic model `|∫ e^{isQ|η|⁴} dη| ≤ π^{3/2}/(2√(s|Q|))`
    /// integrated in time and matched at `t = 2^{4l}`.
    pub fn case_bound(&self, which: ProfileId, l: u32, t: f64) -> Result<CaseBound, ProfileError> {
        let q = self.first_equation(which)?.triple.eta_quartic().abs();
        let c = 3.0 * std::f64::consts::PI / q.sqrt();
        let lf = l as f64;
        let m = self.g0.phi_sq_integral();
        Ok(if t <= lf.exp2() {
            CaseBound { case: 1, bound: t * m }
        } else if t <= (4.0 * lf).exp2() {
            CaseBound {
                case: 2,
                bound: c * (2.0 * lf / 3.0).exp2() * t.cbrt(),
            }
        } else {
            CaseBound {
                case: 3,
                bound: c * (2.0 * lf).exp2(),
            }
        })
    }

    /// Sup of `|φ_k f̂₄|` over `n_r` radii of shell `k` at each time.
    pub fn mid_frequency_bound(
        &self,
        which: ProfileId,
        k: i32,
        t_samples: &[f64],
        n_r: usize,
        with_gradient: bool,
    ) -> Result<MidFrequency, ProfileError> {
        let spec = self.g0.cutoff;
        let (lo, hi) = (0.5 * spec.plateau_radius() * (k as f64).exp2(), spec.support_radius() * (k as f64).exp2());
        let bl = self.first_engine(which)?;
        let mut per_time: Vec<(f64, f64)> = t_samples.iter().map(|&t| (t, 0.0)).collect();
        let mut error: f64 = 0.0;
        let mut grad_sup = None;
        let t_max = t_samples.iter().copied().fold(0.0, f64::max);
        for i in 0..n_r {
            let r = lo + (hi - lo) * (i as f64 + 0.5) / n_r as f64;
            let w = crate::dyadic::eval_phi_k(&spec, k, [r, 0.0]);
            if r >= which.support_radius() || w == 0.0 {
                continue;
            }
            let fr = bl.frame_with(r, default_scale(r));
            let vals = self.series_in_frame(&bl, &fr, which, t_samples)?;
            for (slot, v) in per_time.iter_mut().zip(&vals) {
                slot.1 = slot.1.max(w * v.value.norm());
                error = error.max(w * v.error);
            }
            if with_gradient && t_max > 0.0 {
                let g = self.gradient_in_frame(&bl, &fr, which, t_max, [1.0, 0.0])?;
                let f = vals[t_samples.iter().position(|&t| t == t_max).expect("max is a sample")].value;
                let h = 1e-6 * r;
                let dw = (crate::dyadic::eval_phi_k(&spec, k, [r + h, 0.0]) - crate::dyadic::eval_phi_k(&spec, k, [r - h, 0.0]))
                    / (2.0 * h);
                let d = (g.radial * w + f * dw).norm();
                grad_sup = Some(grad_sup.unwrap_or(0.0f64).max(d));
            }
        }
        let sup = per_time.iter().map(|p| p.1).fold(0.0, f64::max);
        Ok(MidFrequency {
            k,
            per_time,
            sup,
            grad_sup,
            error,
        })
    }

    /// The windowed integral `B̂_{window}` for any equation.
    pub fn duhamel_window(
        &self,
        out: ProfileId,
        window: WindowSpec,
        xi: Point,
        l: u32,
        inputs: Option<&SecondInputs>,
    ) -> Result<Estimate, ProfileError> {
        let eq = *self.equation(out)?;
        let lf = l as f64;
        let depth = if out == ProfileId::F6 { 3.0 * lf } else { lf };
        let a = check_shell(xi, 3.0 * depth)?;
        let w = EtaWindow {
            cutoff: self.g0.cutoff,
            lo: window.eta.0 * lf,
            hi: window.eta.1 * lf,
        };
        let (t1, t2) = ((window.time.0 * lf).exp2(), (window.time.1 * lf).exp2());
        let p4 = (4.0 * depth).exp2();
        let eps = self.eps_pow(out);
        let q = if eq.inputs == [ProfileId::G0, ProfileId::G0] {
            let bl = Bilinear::new(eq.triple, &self.g0, &self.g0, self.cfg).with_weight(&w);
            let fr = bl.frame_with(a, depth);
            bl.window(&fr, t1 / p4, t2 / p4, false).map_err(quad_err("window"))?.value
        } else {
            let inp = inputs.ok_or_else(|| ProfileError::Coverage {
                what: format!("{out} needs input grids"),
            })?;
            let (mu, nu) = inp.slots(&eq)?;
            let bl = Bilinear::new(eq.triple, &mu, &nu, self.cfg).with_weight(&w);
            let fr = bl.frame_with(a, depth);
            bl.window(&fr, t1 / p4, t2 / p4, false).map_err(quad_err("window"))?.value
        };
        Ok(Estimate::from_quad(q, eps))
    }
}

#[cfg(test)]
mod tests;
