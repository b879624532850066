//! Klein-Gordon dispersion branches and the three-wave phase family.
//!
//! `Φ(ξ,η) = ε_σ Λ_σ(ξ) − ε_μ Λ_μ(ξ−η) − ε_ν Λ_ν(η)` with `Λ(ζ) = √(c²|ζ|²+b²)`
//! and `ε_b = sgn b`.
//!
//! Near the origin the three square roots nearly cancel. [`phi_compensated`]
//! rewrites `Φ` so that every O(1) piece cancels symbolically:
//! with `S(w) = √(c²w+b²)`, `u = |ξ−η|²`, `v = |η|²`,
//!
//! ```text
//! ε S(w) = b + ε c² w / (S(w) + |b|)
//! S(u) − S(v) = c² (u − v) / (S(u) + S(v)),     u − v = |ξ|² − 2⟨ξ,η⟩
//! ```
//!
//! and the `|η|²` coefficient `κ_μ + κ_ν`, which vanishes for degenerate
//! triples, is formed from exact per-branch constants.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};
use thiserror::Error;

use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("invalid dispersion parameters: c² = {c2}, b = {b}")]
    Params { c2: f64, b: f64 },
    #[error("scale factor 2^{exponent} out of double range")]
    Range { exponent: f64 },
    #[error("triple is not degenerate at the origin: {0}")]
    NotDegenerate(String),
    #[error("cannot parse `{0}` as an exact real")]
    Parse(String),
}

/// One Klein-Gordon branch `ε_b √(c²|ξ|² + b²)`, stored through `c²` so that
/// irrational speeds such as `√2` are represented exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionParams {
    c2: f64,
    b: f64,
}

impl DispersionParams {
    /// Branch from speed `c > 0` and signed mass `b ≠ 0`.
    pub fn new(c: f64, b: f64) -> Result<Self, PhaseError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(PhaseError::Params { c2: c * c, b });
        }
        Self::from_c2(c * c, b)
    }

    /// Branch from `c²` directly.
    pub fn from_c2(c2: f64, b: f64) -> Result<Self, PhaseError> {
        if !(c2 > 0.0) || !c2.is_finite() || b == 0.0 || !b.is_finite() {
            return Err(PhaseError::Params { c2, b });
        }
        Ok(Self { c2, b })
    }

    pub fn c(&self) -> f64 {
        self.c2.sqrt()
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `ε_b = (−1)^{(sgn b + 3)/2}`.
    pub fn sign(&self) -> f64 {
        if self.b > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `√(c² w + b²)` at `w = |ζ|²`.
    #[inline]
    fn root(&self, w: f64) -> f64 {
        self.c2.mul_add(w, self.b * self.b).sqrt()
    }

    /// Quadratic coefficient `κ = ε c² / |b|` of `ε S(w) ≈ b + κ w / 2`.
    #[inline]
    pub fn kappa(&self) -> f64 {
        self.c2 / self.b
    }

    /// Quartic coefficient `q = −ε c⁴ / (8|b|³)` of `ε S(w)` in `w²`.
    pub fn quartic(&self) -> f64 {
        -self.c2 * self.c2 / (8.0 * self.b * self.b * self.b)
    }

    /// `ε c² w / (S + |b|) = ε S(w) − b`, cancellation free.
    #[inline]
    fn excess(&self, w: f64, s: f64) -> f64 {
        self.sign() * self.c2 * w / (s + self.b.abs())
    }

    /// `ε c⁴ w / (|b| S (S + |b|)) = κ − ε c² / S`, cancellation free.
    #[inline]
    fn inv_defect(&self, w: f64, s: f64) -> f64 {
        let ab = self.b.abs();
        self.sign() * self.c2 * self.c2 * w / (ab * s * (s + ab))
    }
}

/// `Λ(ξ) = √(c²|ξ|² + b²)`.
pub fn lambda_of(params: DispersionParams, xi: Point) -> f64 {
    params.root(dot(xi, xi))
}

/// The branches `(σ, μ, ν)` of one interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionTriple {
    pub sigma: DispersionParams,
    pub mu: DispersionParams,
    pub nu: DispersionParams,
}

impl InteractionTriple {
    pub fn new(sigma: DispersionParams, mu: DispersionParams, nu: DispersionParams) -> Self {
        Self { sigma, mu, nu }
    }

    /// Builds a triple from `(c², b)` pairs.
    pub fn from_c2(c2: [f64; 3], b: [f64; 3]) -> Result<Self, PhaseError> {
        Ok(Self {
            sigma: DispersionParams::from_c2(c2[0], b[0])?,
            mu: DispersionParams::from_c2(c2[1], b[1])?,
            nu: DispersionParams::from_c2(c2[2], b[2])?,
        })
    }

    /// `c² = (1, 2, 1)`, `b = (1, 2, −1)`: the `f₄` and `f₆` interaction.
    pub fn f4() -> Self {
        Self::from_c2([1.0, 2.0, 1.0], [1.0, 2.0, -1.0]).expect("valid literal")
    }

    /// `c² = (2, 4, 2)`, `b = (2, 4, −2)`: the `f₅` interaction.
    pub fn f5() -> Self {
        Self::from_c2([2.0, 4.0, 2.0], [2.0, 4.0, -2.0]).expect("valid literal")
    }

    /// `Φ(0,0) = b_σ − b_μ − b_ν`.
    pub fn mass_defect(&self) -> f64 {
        self.sigma.b - self.mu.b - self.nu.b
    }

    /// Coefficient of `⟨ξ,η⟩` in the Taylor expansion at the origin.
    pub fn bilinear_coefficient(&self) -> f64 {
        self.mu.kappa()
    }

    /// Quadratic `η`-coefficient `−(κ_μ + κ_ν)/2`; zero for degenerate triples.
    pub fn eta_quadratic(&self) -> f64 {
        -0.5 * (self.mu.kappa() + self.nu.kappa())
    }

    /// Coefficient `Q` of `|η|⁴` in the expansion at `ξ = 0`.
    pub fn eta_quartic(&self) -> f64 {
        -self.mu.quartic() - self.nu.quartic()
    }
}

/// Leading-order model `Φ ≈ κ⟨ξ,η⟩ + Q|η|⁴` of a degenerate triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateModel {
    pub kappa: f64,
    pub quartic: f64,
}

impl DegenerateModel {
    pub fn of(triple: &InteractionTriple) -> Self {
        Self {
            kappa: triple.bilinear_coefficient(),
            quartic: triple.eta_quartic(),
        }
    }

    /// Radius of the model critical point `κξ + 4Q|η|²η = 0` for `|ξ| = a`.
    pub fn critical_radius(&self, a: f64) -> f64 {
        (self.kappa * a / (-4.0 * self.quartic)).cbrt()
    }
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0].mul_add(b[0], a[1] * b[1])
}

#[inline]
fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

/// Literal evaluation of the three square roots.
pub fn phi_direct(t: &InteractionTriple, xi: Point, eta: Point) -> f64 {
    let d = sub(xi, eta);
    t.sigma.sign() * t.sigma.root(dot(xi, xi))
        - t.mu.sign() * t.mu.root(dot(d, d))
        - t.nu.sign() * t.nu.root(dot(eta, eta))
}

/// Cancellation-free evaluation; accurate in relative terms down to `|ξ|, |η| ~ 1e−100`.
pub fn phi_compensated(t: &InteractionTriple, xi: Point, eta: Point) -> f64 {
    let w = dot(xi, xi);
    let v = dot(eta, eta);
    let d = sub(xi, eta);
    let u = dot(d, d);
    let (sg, mu, nu) = (&t.sigma, &t.mu, &t.nu);
    let s_sig = sg.root(w);
    let s_mu_u = mu.root(u);
    let s_mu_v = mu.root(v);
    let s_nu_v = nu.root(v);
    // u − v without forming u or v
    let u_minus_v = w - 2.0 * dot(xi, eta);
    let quad = 0.5 * (mu.kappa() + nu.kappa());
    // ε S(v) − b − κ v/2 = v² M(v)
    let m = |p: &DispersionParams, s: f64| {
        let ab = p.b.abs();
        -p.sign() * p.c2 * p.c2 / (2.0 * ab * (s + ab) * (s + ab))
    };
    let rest = v * v * (m(mu, s_mu_v) + m(nu, s_nu_v));
    t.mass_defect() + sg.excess(w, s_sig)
        - mu.sign() * mu.c2 * u_minus_v / (s_mu_u + s_mu_v)
        - v * quad
        - rest
}

/// `Φ`, choosing the compensated path near the origin.
pub fn phi(t: &InteractionTriple, xi: Point, eta: Point) -> f64 {
    if dot(xi, xi) + dot(eta, eta) < 1.0 {
        phi_compensated(t, xi, eta)
    } else {
        phi_direct(t, xi, eta)
    }
}

/// `∇_η Φ`.
pub fn grad_eta_phi(t: &InteractionTriple, xi: Point, eta: Point) -> Point {
    let d = sub(xi, eta);
    let u = dot(d, d);
    let v = dot(eta, eta);
    let (mu, nu) = (&t.mu, &t.nu);
    let s_mu = mu.root(u);
    let s_nu = nu.root(v);
    let cm = mu.inv_defect(u, s_mu);
    let cn = nu.inv_defect(v, s_nu);
    let ks = mu.kappa() + nu.kappa();
    let km = mu.kappa();
    [
        km * xi[0] - ks * eta[0] - cm * d[0] + cn * eta[0],
        km * xi[1] - ks * eta[1] - cm * d[1] + cn * eta[1],
    ]
}

/// `∇_ξ Φ`.
pub fn grad_xi_phi(t: &InteractionTriple, xi: Point, eta: Point) -> Point {
    let d = sub(xi, eta);
    let w = dot(xi, xi);
    let u = dot(d, d);
    let (sg, mu) = (&t.sigma, &t.mu);
    let s_sg = sg.root(w);
    let s_mu = mu.root(u);
    let cs = sg.inv_defect(w, s_sg);
    let cm = mu.inv_defect(u, s_mu);
    let dk = sg.kappa() - mu.kappa();
    let km = mu.kappa();
    [
        dk * xi[0] + km * eta[0] - cs * xi[0] + cm * d[0],
        dk * xi[1] + km * eta[1] - cs * xi[1] + cm * d[1],
    ]
}

/// `∇_ηη Φ`, symmetric.
pub fn hess_eta_phi(t: &InteractionTriple, xi: Point, eta: Point) -> [[f64; 2]; 2] {
    let d = sub(xi, eta);
    let u = dot(d, d);
    let v = dot(eta, eta);
    let (mu, nu) = (&t.mu, &t.nu);
    let s_mu = mu.root(u);
    let s_nu = nu.root(v);
    let diag = -(mu.kappa() + nu.kappa()) + mu.inv_defect(u, s_mu) + nu.inv_defect(v, s_nu);
    let om = mu.sign() * mu.c2 * mu.c2 / (s_mu * s_mu * s_mu);
    let on = nu.sign() * nu.c2 * nu.c2 / (s_nu * s_nu * s_nu);
    let off = om * d[0] * d[1] + on * eta[0] * eta[1];
    [
        [diag + om * d[0] * d[0] + on * eta[0] * eta[0], off],
        [off, diag + om * d[1] * d[1] + on * eta[1] * eta[1]],
    ]
}

pub fn det2(h: [[f64; 2]; 2]) -> f64 {
    h[0][0] * h[1][1] - h[0][1] * h[1][0]
}

/// Counts of (positive, negative) eigenvalues of a symmetric 2×2 matrix.
pub fn signature2(h: [[f64; 2]; 2]) -> (i32, i32) {
    let tr = h[0][0] + h[1][1];
    let det = det2(h);
    let disc = ((h[0][0] - h[1][1]).powi(2) + 4.0 * h[0][1] * h[1][0]).max(0.0).sqrt();
    let (l1, l2) = if tr >= 0.0 {
        let l1 = 0.5 * (tr + disc);
        (l1, if l1 != 0.0 { det / l1 } else { 0.0 })
    } else {
        let l2 = 0.5 * (tr - disc);
        (if l2 != 0.0 { det / l2 } else { 0.0 }, l2)
    };
    let pos = [l1, l2].iter().filter(|x| **x > 0.0).count() as i32;
    let neg = [l1, l2].iter().filter(|x| **x < 0.0).count() as i32;
    (pos, neg)
}

/// Scale exponents of `Φ̃_λ(ξ′,η′) = 2^{4λl} Φ(2^{−x l} ξ′, 2^{−λl} η′)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleParams {
    pub l: u32,
    pub lambda: f64,
    pub xi_exponent: u32,
}

impl RescaleParams {
    pub fn new(l: u32, lambda: f64, xi_exponent: u32) -> Result<Self, PhaseError> {
        let worst = (l as f64) * (xi_exponent as f64).max(4.0 * lambda);
        if !(0.0..=3.0).contains(&lambda) || l == 0 {
            return Err(PhaseError::Range { exponent: worst });
        }
        if worst > 900.0 {
            return Err(PhaseError::Range { exponent: worst });
        }
        Ok(Self {
            l,
            lambda,
            xi_exponent,
        })
    }

    pub fn xi_scale(&self) -> f64 {
        (-((self.xi_exponent * self.l) as f64)).exp2()
    }

    pub fn eta_scale(&self) -> f64 {
        (-self.lambda * self.l as f64).exp2()
    }

    pub fn phase_scale(&self) -> f64 {
        (4.0 * self.lambda * self.l as f64).exp2()
    }
}

/// `Φ̃_λ(ξ′, η′)`.
pub fn rescaled_phi(rs: &RescaleParams, t: &InteractionTriple, xi_p: Point, eta_p: Point) -> f64 {
    let (a, e) = (rs.xi_scale(), rs.eta_scale());
    rs.phase_scale() * phi(t, [a * xi_p[0], a * xi_p[1]], [e * eta_p[0], e * eta_p[1]])
}

/// `∇_{η′} Φ̃_λ(ξ′, η′) = 2^{3λl} ∇_η Φ`.
pub fn rescaled_grad_eta(rs: &RescaleParams, t: &InteractionTriple, xi_p: Point, eta_p: Point) -> Point {
    let (a, e) = (rs.xi_scale(), rs.eta_scale());
    let g = grad_eta_phi(t, [a * xi_p[0], a * xi_p[1]], [e * eta_p[0], e * eta_p[1]]);
    let f = rs.phase_scale() * e;
    [f * g[0], f * g[1]]
}

/// Exact copy of a triple, used for the algebraic conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTriple {
    pub c2: [BigRational; 3],
    pub b: [BigRational; 3],
}

impl ExactTriple {
    /// Exact binary expansion of the stored doubles.
    pub fn from_triple(t: &InteractionTriple) -> Self {
        let r = |x: f64| BigRational::from_f64(x).expect("finite");
        Self {
            c2: [r(t.sigma.c2), r(t.mu.c2), r(t.nu.c2)],
            b: [r(t.sigma.b), r(t.mu.b), r(t.nu.b)],
        }
    }

    /// Nearest-double triple.
    pub fn to_triple(&self) -> Result<InteractionTriple, PhaseError> {
        let f = |x: &BigRational| rational_to_f64(x);
        InteractionTriple::from_c2(
            [f(&self.c2[0]), f(&self.c2[1]), f(&self.c2[2])],
            [f(&self.b[0]), f(&self.b[1]), f(&self.b[2])],
        )
    }

    /// `b_σ − b_μ − b_ν ≠ 0`.
    pub fn condition1(&self) -> bool {
        !(&self.b[0] - &self.b[1] - &self.b[2]).is_zero()
    }

    /// `(c_μ − c_ν)(c_μ² b_ν − c_ν² b_μ) ≥ 0`, using `sgn(c_μ − c_ν) = sgn(c_μ² − c_ν²)`.
    pub fn condition2(&self) -> bool {
        let s1 = sgn(&(&self.c2[1] - &self.c2[2]));
        let s2 = sgn(&(&self.c2[1] * &self.b[2] - &self.c2[2] * &self.b[1]));
        s1 * s2 >= 0
    }
}

fn sgn(x: &BigRational) -> i32 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

pub(crate) fn rational_to_f64(x: &BigRational) -> f64 {
    // exact for the modest decimal inputs used in configs; falls back to a
    // scaled division for huge numerators
    use num_traits::ToPrimitive;
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() && n.abs() < 9.0e15 && d < 9.0e15 => n / d,
        _ => {
            let shift = 64i64;
            let scaled = (x * BigRational::from_integer(BigInt::from(1u8) << shift as usize)).round();
            scaled.numer().to_f64().unwrap_or(f64::NAN) * (-(shift as f64)).exp2()
        }
    }
}

/// Parses `"1.25"`, `"-2"`, `"3/4"` or `"sqrt(2)"` (returned squared, see
/// [`ExactReal`]).
pub fn parse_exact(s: &str) -> Result<ExactReal, PhaseError> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
        let v = parse_rational(inner)?;
        if v.is_negative() {
            return Err(PhaseError::Parse(s.into()));
        }
        return Ok(ExactReal::Sqrt(v));
    }
    parse_rational(s).map(ExactReal::Rational)
}

/// A rational `r` or a square root `√r` of a nonnegative rational.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactReal {
    Rational(BigRational),
    Sqrt(BigRational),
}

impl ExactReal {
    pub fn square(&self) -> BigRational {
        match self {
            ExactReal::Rational(r) => r * r,
            ExactReal::Sqrt(r) => r.clone(),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            ExactReal::Rational(r) => Some(r),
            ExactReal::Sqrt(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExactReal::Rational(r) => rational_to_f64(r),
            ExactReal::Sqrt(r) => rational_to_f64(r).sqrt(),
        }
    }
}

fn parse_rational(s: &str) -> Result<BigRational, PhaseError> {
    let err = || PhaseError::Parse(s.into());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| err())?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10u8);
    let mut r = BigRational::from_integer(digits);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

/// Origin diagnostics and the two algebraic conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyReport {
    pub phi_at_origin: f64,
    pub grad_eta_at_origin: Point,
    pub hess_det_at_origin: f64,
    pub condition1_holds: bool,
    pub condition2_holds: bool,
}

impl DegeneracyReport {
    /// `Φ(0,0) = 0`, `∇_ηΦ(0,0) = 0` and `det ∇_ηηΦ(0,0) = 0`.
    pub fn is_degenerate(&self) -> bool {
        self.phi_at_origin.abs() <= 1e-14
            && self.grad_eta_at_origin[0].abs().max(self.grad_eta_at_origin[1].abs()) <= 1e-12
            && self.hess_det_at_origin.abs() <= 1e-12
    }
}

/// Conditions evaluated exactly on the stored doubles.
pub fn degeneracy_report(t: &InteractionTriple) -> DegeneracyReport {
    degeneracy_report_exact(t, &ExactTriple::from_triple(t))
}

/// Conditions evaluated on exact inputs (e.g. parsed from a config), origin
/// quantities on `t`.
pub fn degeneracy_report_exact(t: &InteractionTriple, exact: &ExactTriple) -> DegeneracyReport {
    let o = [0.0, 0.0];
    DegeneracyReport {
        phi_at_origin: phi(t, o, o),
        grad_eta_at_origin: grad_eta_phi(t, o, o),
        hess_det_at_origin: det2(hess_eta_phi(t, o, o)),
        condition1_holds: exact.condition1(),
        condition2_holds: exact.condition2(),
    }
}

/// Result of [`taylor_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorProbe {
    pub kappa: f64,
    pub residual_order: f64,
}

/// Measures `κ` in `Φ(tξ₀, tη₀) − Φ(tξ₀, 0) ≈ κ t² ⟨ξ₀,η₀⟩` along `ξ₀ = η₀ = e₁`
/// and the order of the remainder.
pub fn taylor_probe(t: &InteractionTriple) -> Result<TaylorProbe, PhaseError> {
    let rep = degeneracy_report(t);
    if !rep.is_degenerate() {
        return Err(PhaseError::NotDegenerate(format!(
            "Φ(0,0) = {:e}, det Hess = {:e}",
            rep.phi_at_origin, rep.hess_det_at_origin
        )));
    }
    let e = [1.0, 0.0];
    let g = |h: f64| {
        let x = [h * e[0], h * e[1]];
        (phi_compensated(t, x, x) - phi_compensated(t, x, [0.0, 0.0])) / (h * h)
    };
    // Richardson on κ(h) = κ + c₂h² + c₄h⁴ + …
    let hs: Vec<f64> = (4..=10).map(|j| (-(j as f64)).exp2()).collect();
    let mut table: Vec<f64> = hs.iter().map(|&h| g(h)).collect();
    let mut factor = 4.0;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        factor *= 4.0;
    }
    let kappa = table[0];
    let r = |h: f64| (g(h) - kappa).abs() * h * h;
    let orders: Vec<f64> = [5.0, 6.0, 7.0]
        .iter()
        .map(|&j| {
            let h = (-j as f64).exp2();
            (r(h) / r(0.5 * h)).log2()
        })
        .collect();
    let residual_order = orders.iter().sum::<f64>() / orders.len() as f64;
    Ok(TaylorProbe {
        kappa,
        residual_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fd_grad_eta(t: &InteractionTriple, xi: Point, eta: Point, h: f64) -> Point {
        let f = |e: Point| phi_direct(t, xi, e);
        [
            (f([eta[0] + h, eta[1]]) - f([eta[0] - h, eta[1]])) / (2.0 * h),
            (f([eta[0], eta[1] + h]) - f([eta[0], eta[1] - h])) / (2.0 * h),
        ]
    }

    #[test]
    fn lambda_examples() {
        let p = DispersionParams::new(1.0, 1.0).unwrap();
        assert_eq!(lambda_of(p, [0.0, 0.0]), 1.0);
        let p = DispersionParams::from_c2(2.0, 2.0).unwrap();
        assert_eq!(lambda_of(p, [0.0, 0.0]), 2.0);
        let p = DispersionParams::new(2.0, 4.0).unwrap();
        assert_relative_eq!(lambda_of(p, [1.0, 0.0]), 20f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn sign_convention() {
        let pos = DispersionParams::new(1.0, 3.0).unwrap();
        let neg = DispersionParams::new(1.0, -3.0).unwrap();
        assert_eq!(pos.sign(), 1.0);
        assert_eq!(neg.sign(), -1.0);
        assert!(DispersionParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn origin_values() {
        let t = InteractionTriple::f4();
        assert_eq!(phi(&t, [0.0; 2], [0.0; 2]), 0.0);
        let t = InteractionTriple::from_c2([1.0, 1.0, 1.0], [1.0, 3.0, -1.0]).unwrap();
        assert_eq!(phi(&t, [0.0; 2], [0.0; 2]), -1.0);
    }

    #[test]
    fn compensated_agrees_with_direct_at_moderate_scale() {
        let t = InteractionTriple::f4();
        let xi = [0.01, 0.0];
        let eta = [0.1, 0.0];
        let d = phi_direct(&t, xi, eta);
        let c = phi_compensated(&t, xi, eta);
        assert_relative_eq!(c, d, max_relative = 1e-10);
        // κ⟨ξ,η⟩ + Q|η|⁴ is the leading behaviour
        let m = DegenerateModel::of(&t);
        let model = m.kappa * 0.001 + m.quartic * 1e-4;
        assert!((c - model).abs() < 0.1 * model.abs());
    }

    #[test]
    fn compensated_is_accurate_deep_in_the_origin() {
        let t = InteractionTriple::f4();
        let xi = [1e-30, 0.0];
        let eta = [1e-10, 0.0];
        // κξη + Q η⁴ dominates: 1e-40 − 1e-40/16
        let expect = 1e-40 - 1e-40 / 16.0;
        assert_relative_eq!(phi(&t, xi, eta), expect, max_relative = 1e-12);
    }

    #[test]
    fn degeneracy_examples() {
        let r = degeneracy_report(&InteractionTriple::f4());
        assert_eq!(r.phi_at_origin, 0.0);
        assert_eq!(r.grad_eta_at_origin, [0.0, 0.0]);
        assert_eq!(r.hess_det_at_origin, 0.0);
        assert!(!r.condition1_holds);
        let r = degeneracy_report(&InteractionTriple::f5());
        assert!(r.is_degenerate());
        assert!(!r.condition1_holds);
        let t = InteractionTriple::from_c2([1.0, 1.0, 1.0], [1.0, 3.0, -1.0]).unwrap();
        let r = degeneracy_report(&t);
        assert_eq!(r.phi_at_origin, -1.0);
        assert!(r.condition1_holds);
    }

    #[test]
    fn exact_parsing() {
        assert_eq!(parse_exact("sqrt(2)").unwrap().square(), BigRational::from_integer(2.into()));
        let r = parse_exact("-1.25").unwrap();
        assert_eq!(
            r.as_rational().unwrap(),
            &BigRational::new(BigInt::from(-5), BigInt::from(4))
        );
        assert_eq!(
            parse_exact("1e-3").unwrap().to_f64(),
            0.001
        );
        assert!(parse_exact("abc").is_err());
        assert!(parse_exact("sqrt(-1)").is_err());
    }

    #[test]
    fn taylor_probe_f4_and_f5() {
        let p4 = taylor_probe(&InteractionTriple::f4()).unwrap();
        let p5 = taylor_probe(&InteractionTriple::f5()).unwrap();
        assert!((p4.kappa - 1.0).abs() < 1e-6, "{p4:?}");
        assert!((p5.kappa - p4.kappa).abs() < 1e-3);
        assert!(p4.residual_order >= 3.9, "{p4:?}");
        let nd = InteractionTriple::from_c2([1.0, 1.0, 1.0], [1.0, 3.0, -1.0]).unwrap();
        assert!(taylor_probe(&nd).is_err());
    }

    #[test]
    fn rescale_examples() {
        let t = InteractionTriple::f4();
        let l = 10;
        let rs = RescaleParams::new(l, 1.0, 3).unwrap();
        let v = rescaled_phi(&rs, &t, [1.0, 0.0], [1.0, 0.0]);
        // κ⟨ξ′,η′⟩ scaled by 2^{(3λ−3)l} = 1 plus O(2^{−2l}) and the quartic term −1/16
        assert!((v - (1.0 - 1.0 / 16.0)).abs() < 1e-3);
        let rs0 = RescaleParams::new(7, 0.0, 3).unwrap();
        let xi = [0.3, 0.2];
        let eta = [0.4, -0.1];
        let a = (-21f64).exp2();
        assert_eq!(rescaled_phi(&rs0, &t, xi, eta), phi(&t, [a * xi[0], a * xi[1]], eta));
        assert!(RescaleParams::new(200, 3.0, 9).is_err());
    }

    #[test]
    fn f5_is_a_scaled_copy_of_f4() {
        let (t4, t5) = (InteractionTriple::f4(), InteractionTriple::f5());
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for &(x, e) in &[([0.3, 0.1], [0.2, -0.4]), ([1e-5, 0.0], [0.03, 0.01])] {
            let lhs = phi(&t5, x, e);
            let rhs = 2.0 * phi(&t4, [r * x[0], r * x[1]], [r * e[0], r * e[1]]);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
        }
    }

    fn triple_strategy() -> impl Strategy<Value = InteractionTriple> {
        let p = (0.2f64..4.0, prop_oneof![0.3f64..4.0, -4.0f64..-0.3]);
        (p.clone(), p.clone(), p).prop_map(|((a, b), (c, d), (e, f))| {
            InteractionTriple::from_c2([a, c, e], [b, d, f]).unwrap()
        })
    }

    fn unit_ball() -> impl Strategy<Value = Point> {
        (0.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(r, th)| [r * th.cos(), r * th.sin()])
    }

    proptest! {
        #[test]
        fn compensated_matches_direct(t in triple_strategy(), xi in unit_ball(), eta in unit_ball()) {
            let d = phi_direct(&t, xi, eta);
            let c = phi_compensated(&t, xi, eta);
            let scale = t.sigma.b.abs() + t.mu.b.abs() + t.nu.b.abs() + 4.0;
            prop_assert!((d - c).abs() <= 1e-13 * scale);
        }

        #[test]
        fn grad_eta_matches_fd(t in triple_strategy(), xi in unit_ball(), eta in unit_ball()) {
            let g = grad_eta_phi(&t, xi, eta);
            let fd = fd_grad_eta(&t, xi, eta, 1e-5);
            let n = g[0].hypot(g[1]).max(1e-2);
            prop_assert!((g[0] - fd[0]).abs() <= 1e-6 * n);
            prop_assert!((g[1] - fd[1]).abs() <= 1e-6 * n);
        }

        #[test]
        fn grad_xi_matches_fd(t in triple_strategy(), xi in unit_ball(), eta in unit_ball()) {
            let g = grad_xi_phi(&t, xi, eta);
            let h = 1e-5;
            let f = |x: Point| phi_direct(&t, x, eta);
            let fd = [
                (f([xi[0] + h, xi[1]]) - f([xi[0] - h, xi[1]])) / (2.0 * h),
                (f([xi[0], xi[1] + h]) - f([xi[0], xi[1] - h])) / (2.0 * h),
            ];
            let n = g[0].hypot(g[1]).max(1e-2);
            prop_assert!((g[0] - fd[0]).abs() <= 1e-6 * n);
            prop_assert!((g[1] - fd[1]).abs() <= 1e-6 * n);
        }

        #[test]
        fn hess_matches_fd(t in triple_strategy(), xi in unit_ball(), eta in unit_ball()) {
            let hm = hess_eta_phi(&t, xi, eta);
            prop_assert_eq!(hm[0][1], hm[1][0]);
            let h = 1e-5;
            let gp = grad_eta_phi(&t, xi, [eta[0] + h, eta[1]]);
            let gm = grad_eta_phi(&t, xi, [eta[0] - h, eta[1]]);
            let col0 = [(gp[0] - gm[0]) / (2.0 * h), (gp[1] - gm[1]) / (2.0 * h)];
            let n = hm.iter().flatten().fold(1e-2f64, |a, b| a.max(b.abs()));
            prop_assert!((hm[0][0] - col0[0]).abs() <= 1e-6 * n);
            prop_assert!((hm[1][0] - col0[1]).abs() <= 1e-6 * n);
        }

        #[test]
        fn mass_sign_flip(c2 in 0.2f64..4.0, b in 0.3f64..4.0, xi in unit_ball(), eta in unit_ball()) {
            let mk = |s: f64| InteractionTriple::from_c2([c2, 1.0, 1.5], [s * b, 2.0, -1.0]).unwrap();
            let (p, n) = (mk(1.0), mk(-1.0));
            let lam = lambda_of(p.sigma, xi);
            prop_assert!((phi_direct(&p, xi, eta) - phi_direct(&n, xi, eta) - 2.0 * lam).abs() < 1e-12 * (1.0 + lam));
        }

        #[test]
        fn rescaling_identity(
            l in 1u32..=60,
            li in 0usize..4,
            xi in unit_ball(),
            eta in unit_ball(),
        ) {
            let lambda = [0.0, 0.5, 1.0, 3.0][li];
            let t = InteractionTriple::f4();
            let rs = RescaleParams::new(l, lambda, 3).unwrap();
            let v = rescaled_phi(&rs, &t, xi, eta);
            let a = rs.xi_scale();
            let e = rs.eta_scale();
            let direct = phi(&t, [a * xi[0], a * xi[1]], [e * eta[0], e * eta[1]]);
            prop_assert!((v / rs.phase_scale() - direct).abs() <= 1e-13 * direct.abs());
        }

        #[test]
        fn radial_symmetry_of_grad(a in 1e-6f64..0.1) {
            let g = grad_eta_phi(&InteractionTriple::f4(), [a, 0.0], [a, 0.0]);
            prop_assert_eq!(g[1], 0.0);
        }
    }
}
