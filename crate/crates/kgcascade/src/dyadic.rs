//! Littlewood-Paley cutoffs and frequency-space projectors.
//!
//! The base cutoff `φ` is radial, equal to 1 on `|x| ≤ 1.1`, zero on
//! `|x| ≥ 1.2`, with a polynomial smoothstep ramp in between. Dyadic pieces
//! `φ_k(x) = φ(|x|/2^k) − φ(|x|/2^{k−1})` telescope, so sums over integer
//! ranges collapse to at most two evaluations of `φ`.

use std::ops::Bound;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::Point;

const MAX_ORDER: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DyadicError {
    #[error("smoothness order {0} outside supported range 4..=15")]
    Order(u32),
    #[error("grid radii [{grid_lo}, {grid_hi}] do not cover shell support [{need_lo}, {need_hi}]")]
    Coverage {
        grid_lo: f64,
        grid_hi: f64,
        need_lo: f64,
        need_hi: f64,
    },
    #[error("empty integer range for interval cutoff")]
    EmptyInterval,
    #[error("clamped index {j} outside [{a}, {b}]")]
    Clamp { j: i32, a: i32, b: i32 },
    #[error("sample count {got} does not match grid size {want}")]
    Shape { got: usize, want: usize },
}

/// Radial cutoff with a `C^n` smoothstep ramp between the plateau and support radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    plateau_radius: f64,
    support_radius: f64,
    smoothness_order: u32,
    coeffs: [f64; MAX_ORDER + 1],
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self::new(4).expect("order 4 is supported")
    }
}

impl CutoffSpec {
    /// Cutoff on the standard radii 1.1 / 1.2 whose ramp is `C^order`
    /// (polynomial degree `2·order + 1`).
    pub fn new(order: u32) -> Result<Self, DyadicError> {
        if !(4..=MAX_ORDER as u32).contains(&order) {
            return Err(DyadicError::Order(order));
        }
        let n = order as usize;
        // S_n(u) = u^{n+1} Σ_{j=0}^{n} C(n+j, j) C(2n+1, n−j) (−u)^j
        let mut coeffs = [0.0; MAX_ORDER + 1];
        for (j, c) in coeffs.iter_mut().enumerate().take(n + 1) {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            *c = sign * binom(n + j, j) * binom(2 * n + 1, n - j);
        }
        Ok(Self {
            plateau_radius: 1.1,
            support_radius: 1.2,
            smoothness_order: order,
            coeffs,
        })
    }

    pub fn plateau_radius(&self) -> f64 {
        self.plateau_radius
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn smoothness_order(&self) -> u32 {
        self.smoothness_order
    }

    fn ramp_width(&self) -> f64 {
        self.support_radius - self.plateau_radius
    }

    fn smoothstep(&self, u: f64) -> f64 {
        let n = self.smoothness_order as usize;
        let mut acc = 0.0;
        for c in self.coeffs[..=n].iter().rev() {
            acc = acc * u + c;
        }
        acc * u.powi(n as i32 + 1)
    }

    fn smoothstep_deriv(&self, u: f64) -> f64 {
        let n = self.smoothness_order as usize;
        let mut acc = 0.0;
        for (j, c) in self.coeffs[..=n].iter().enumerate().rev() {
            acc = acc * u + c * (n + 1 + j) as f64;
        }
        acc * u.powi(n as i32)
    }

    /// `φ(x)` for real `x`; even in `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let r = x.abs();
        if r <= self.plateau_radius {
            1.0
        } else if r >= self.support_radius {
            0.0
        } else {
            let u = (r - self.plateau_radius) / self.ramp_width();
            (1.0 - self.smoothstep(u)).clamp(0.0, 1.0)
        }
    }

    /// Radial derivative `φ'(r)` for `r ≥ 0`.
    pub fn deriv(&self, r: f64) -> f64 {
        let r = r.abs();
        if r <= self.plateau_radius || r >= self.support_radius {
            0.0
        } else {
            let u = (r - self.plateau_radius) / self.ramp_width();
            -self.smoothstep_deriv(u) / self.ramp_width()
        }
    }

    /// `φ(|x|/2^k)` evaluated without forming `2^k` separately for huge `|k|`.
    pub fn eval_scaled(&self, r: f64, k: f64) -> f64 {
        self.eval(r * (-k).exp2())
    }
}

fn binom(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

fn norm(x: Point) -> f64 {
    x[0].hypot(x[1])
}

/// One Littlewood-Paley piece `φ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicShell {
    pub k: i32,
}

impl DyadicShell {
    pub fn new(k: i32) -> Self {
        Self { k }
    }

    pub fn eval(&self, spec: &CutoffSpec, x: Point) -> f64 {
        eval_phi_k(spec, self.k, x)
    }

    /// Closed support `[0.55·2^k, 1.2·2^k]` of `φ_k`.
    pub fn support(&self, spec: &CutoffSpec) -> (f64, f64) {
        let s = (self.k as f64).exp2();
        (0.5 * spec.plateau_radius * s, spec.support_radius * s)
    }
}

/// `φ(x)` on the real line.
pub fn eval_phi(spec: &CutoffSpec, x: f64) -> f64 {
    spec.eval(x)
}

/// `φ_k(x) = φ(|x|/2^k) − φ(|x|/2^{k−1})`.
pub fn eval_phi_k(spec: &CutoffSpec, k: i32, x: Point) -> f64 {
    let r = norm(x);
    let k = k as f64;
    spec.eval_scaled(r, k) - spec.eval_scaled(r, k - 1.0)
}

/// `φ_I = Σ_{m ∈ I∩ℤ} φ_m`, stored as the integer range `[lo, hi]` (either end may be open).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalCutoff {
    pub lo: Option<i32>,
    pub hi: Option<i32>,
}

impl IntervalCutoff {
    /// Integer range covered by a real interval with the given bounds.
    pub fn new(lo: Bound<f64>, hi: Bound<f64>) -> Result<Self, DyadicError> {
        let lo = match lo {
            Bound::Unbounded => None,
            Bound::Included(a) => Some(a.ceil() as i32),
            Bound::Excluded(a) => Some(a.floor() as i32 + 1),
        };
        let hi = match hi {
            Bound::Unbounded => None,
            Bound::Included(b) => Some(b.floor() as i32),
            Bound::Excluded(b) => Some(b.ceil() as i32 - 1),
        };
        if let (Some(a), Some(b)) = (lo, hi) {
            if a > b {
                return Err(DyadicError::EmptyInterval);
            }
        }
        Ok(Self { lo, hi })
    }

    /// `φ_{≤c}`.
    pub fn at_most(c: i32) -> Self {
        Self { lo: None, hi: Some(c) }
    }

    /// `φ_{≥c}`.
    pub fn at_least(c: i32) -> Self {
        Self { lo: Some(c), hi: None }
    }

    pub fn eval(&self, spec: &CutoffSpec, x: Point) -> f64 {
        let r = norm(x);
        if r == 0.0 {
            return if self.lo.is_none() { 1.0 } else { 0.0 };
        }
        let upper = match self.hi {
            Some(b) => spec.eval_scaled(r, b as f64),
            None => 1.0,
        };
        let lower = match self.lo {
            Some(a) => spec.eval_scaled(r, a as f64 - 1.0),
            None => 0.0,
        };
        upper - lower
    }

    /// Radial support as `(inner, outer)`; `inner = 0` for ranges unbounded below.
    pub fn support(&self, spec: &CutoffSpec) -> (f64, f64) {
        let inner = self
            .lo
            .map_or(0.0, |a| 0.5 * spec.plateau_radius * (a as f64).exp2());
        let outer = self
            .hi
            .map_or(f64::INFINITY, |b| spec.support_radius * (b as f64).exp2());
        (inner, outer)
    }
}

/// Clamped family `φ_j^{[a,b]}`: `φ_{≤a}` at `j = a`, `φ_{≥b}` at `j = b`, `φ_j` between.
pub fn clamped(spec: &CutoffSpec, j: i32, a: i32, b: i32, x: Point) -> Result<f64, DyadicError> {
    if j < a || j > b || a >= b {
        return Err(DyadicError::Clamp { j, a, b });
    }
    let cut = if j == a {
        IntervalCutoff::at_most(a)
    } else if j == b {
        IntervalCutoff::at_least(b)
    } else {
        IntervalCutoff {
            lo: Some(j),
            hi: Some(j),
        }
    };
    Ok(cut.eval(spec, x))
}

/// Frequency window selected by a projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Shell(i32),
    Interval(IntervalCutoff),
}

impl Window {
    fn cutoff(&self) -> IntervalCutoff {
        match *self {
            Window::Shell(k) => IntervalCutoff {
                lo: Some(k),
                hi: Some(k),
            },
            Window::Interval(c) => c,
        }
    }

    pub fn eval(&self, spec: &CutoffSpec, x: Point) -> f64 {
        self.cutoff().eval(spec, x)
    }
}

/// A function sampled on a polar grid: `values[i * n_angles + j]` sits at
/// radius `radii[i]` and angle `2π j / n_angles`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub radii: Vec<f64>,
    pub n_angles: usize,
    pub values: Vec<Complex64>,
}

impl SampledField {
    pub fn new(radii: Vec<f64>, n_angles: usize, values: Vec<Complex64>) -> Result<Self, DyadicError> {
        let want = radii.len() * n_angles;
        if values.len() != want {
            return Err(DyadicError::Shape {
                got: values.len(),
                want,
            });
        }
        Ok(Self {
            radii,
            n_angles,
            values,
        })
    }

    /// Samples `f` on the grid.
    pub fn from_fn(radii: Vec<f64>, n_angles: usize, f: impl Fn(Point) -> Complex64 + Sync) -> Self {
        let values = (0..radii.len() * n_angles)
            .into_par_iter()
            .map(|idx| f(polar_point(&radii, n_angles, idx)))
            .collect();
        Self {
            radii,
            n_angles,
            values,
        }
    }

    pub fn point(&self, idx: usize) -> Point {
        polar_point(&self.radii, self.n_angles, idx)
    }

    pub fn value_at(&self, i_r: usize, i_theta: usize) -> Complex64 {
        self.values[i_r * self.n_angles + i_theta]
    }
}

fn polar_point(radii: &[f64], n_angles: usize, idx: usize) -> Point {
    let r = radii[idx / n_angles];
    let th = std::f64::consts::TAU * (idx % n_angles) as f64 / n_angles as f64;
    [r * th.cos(), r * th.sin()]
}

/// Output of [`project`]: masked samples plus the window that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedField {
    pub field: SampledField,
    pub window: Window,
    pub support: (f64, f64),
}

/// `P_k` (or `P_I`) as pointwise multiplication in frequency space.
pub fn project(spec: &CutoffSpec, window: Window, field: &SampledField) -> Result<ProjectedField, DyadicError> {
    let (need_lo, need_hi) = window.cutoff().support(spec);
    let grid_lo = field.radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let grid_hi = field.radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let covers_lo = need_lo == 0.0 || grid_lo <= need_lo;
    if !covers_lo || grid_hi < need_hi || field.radii.is_empty() {
        return Err(DyadicError::Coverage {
            grid_lo,
            grid_hi,
            need_lo,
            need_hi,
        });
    }
    let values = field
        .values
        .par_iter()
        .enumerate()
        .map(|(idx, v)| v * window.eval(spec, field.point(idx)))
        .collect();
    Ok(ProjectedField {
        field: SampledField {
            radii: field.radii.clone(),
            n_angles: field.n_angles,
            values,
        },
        window,
        support: (need_lo, need_hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec() -> CutoffSpec {
        CutoffSpec::default()
    }

    #[test]
    fn plateau_and_support_values() {
        let s = spec();
        assert_eq!(eval_phi(&s, 1.0), 1.0);
        assert_eq!(eval_phi(&s, 1.25), 0.0);
        assert_eq!(eval_phi(&s, -0.5), 1.0);
        assert_eq!(eval_phi(&s, 1.1), 1.0);
        assert_eq!(eval_phi(&s, 1.2), 0.0);
    }

    #[test]
    fn shell_examples() {
        let s = spec();
        assert_eq!(eval_phi_k(&s, 0, [0.8, 0.0]), 1.0);
        assert_eq!(eval_phi_k(&s, 3, [0.8, 0.0]), 0.0);
        assert_eq!(DyadicShell::new(0).support(&s), (0.55, 1.2));
    }

    #[test]
    fn ramp_is_monotone_and_smooth_at_endpoints() {
        let s = spec();
        let mut prev = 1.0;
        for i in 0..=1000 {
            let x = 1.1 + 0.1 * i as f64 / 1000.0;
            let v = s.eval(x);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        // derivatives through order 4 tend to zero at both ends of the ramp
        for &x0 in &[1.1, 1.2] {
            for n in 1..=4 {
                let coarse = finite_diff(|x| s.eval(x), x0, 1e-3, n).abs();
                let fine = finite_diff(|x| s.eval(x), x0, 1e-4, n).abs();
                assert!(fine < 0.5 * coarse, "n={n} x0={x0}: {coarse} -> {fine}");
            }
        }
        // and stay bounded across the ramp
        for i in 0..=200 {
            let x = 1.05 + 0.2 * i as f64 / 200.0;
            for n in 1..=4 {
                let d = finite_diff(|x| s.eval(x), x, 1e-4, n).abs();
                assert!(d < 10f64.powi(2 * n as i32 + 1), "n={n} x={x} d={d}");
            }
        }
    }

    fn finite_diff(f: impl Fn(f64) -> f64, x: f64, h: f64, n: u32) -> f64 {
        // forward/backward symmetric n-th difference
        let mut acc = 0.0;
        for j in 0..=n {
            let c = binom(n as usize, j as usize) * if (n - j) % 2 == 0 { 1.0 } else { -1.0 };
            acc += c * f(x + (j as f64 - n as f64 / 2.0) * h);
        }
        acc / h.powi(n as i32)
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let s = spec();
        for i in 1..20 {
            let r = 1.1 + 0.1 * i as f64 / 20.0;
            let h = 1e-6;
            let fd = (s.eval(r + h) - s.eval(r - h)) / (2.0 * h);
            assert_abs_diff_eq!(s.deriv(r), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn higher_orders_are_supported() {
        for order in 4..=15 {
            let s = CutoffSpec::new(order).unwrap();
            assert_abs_diff_eq!(s.eval(1.15), 0.5, epsilon = 1e-9);
        }
        assert!(CutoffSpec::new(3).is_err());
    }

    #[test]
    fn interval_from_real_bounds() {
        let c = IntervalCutoff::new(Bound::Unbounded, Bound::Included(0.5)).unwrap();
        assert_eq!(c, IntervalCutoff::at_most(0));
        let c = IntervalCutoff::new(Bound::Excluded(-2.0), Bound::Excluded(1.0)).unwrap();
        assert_eq!((c.lo, c.hi), (Some(-1), Some(0)));
        assert!(IntervalCutoff::new(Bound::Included(0.2), Bound::Included(0.8)).is_err());
    }

    #[test]
    fn le_zero_is_phi_itself() {
        let s = spec();
        let c = IntervalCutoff::at_most(0);
        for i in 0..200 {
            let r = 1.5 * i as f64 / 200.0;
            assert_abs_diff_eq!(c.eval(&s, [r, 0.0]), s.eval(r), epsilon = 1e-15);
        }
    }

    #[test]
    fn project_constant_field() {
        let s = spec();
        let radii: Vec<f64> = (0..160).map(|i| 0.25 * (1.0 + i as f64 / 16.0)).collect();
        let field = SampledField::from_fn(radii.clone(), 8, |_| Complex64::new(1.0, 0.0));
        let p = project(&s, Window::Shell(0), &field).unwrap();
        let at = |target: f64| {
            let i = radii.iter().position(|&r| (r - target).abs() < 1e-12).unwrap();
            p.field.value_at(i, 3)
        };
        assert_eq!(at(0.8125), Complex64::new(1.0, 0.0));
        assert_eq!(at(2.5), Complex64::new(0.0, 0.0));
        assert!(matches!(
            project(&s, Window::Shell(3), &field),
            Err(DyadicError::Coverage { .. })
        ));
    }

    #[test]
    fn project_le_zero_reproduces_g0_shape() {
        let s = spec();
        let radii: Vec<f64> = (0..40).map(|i| 0.05 * (i + 1) as f64).collect();
        let field = SampledField::from_fn(radii, 4, |_| Complex64::new(1.0, 0.0));
        let p = project(&s, Window::Interval(IntervalCutoff::at_most(0)), &field).unwrap();
        for (idx, v) in p.field.values.iter().enumerate() {
            let x = p.field.point(idx);
            assert_abs_diff_eq!(v.re, s.eval(norm(x)), epsilon = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn phi_is_even_and_bounded(x in -3.0f64..3.0) {
            let s = spec();
            let v = s.eval(x);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, s.eval(-x));
        }

        #[test]
        fn partition_of_unity(log_r in -39.0f64..39.0, th in 0.0f64..6.3) {
            let s = spec();
            let r = log_r.exp2();
            let x = [r * th.cos(), r * th.sin()];
            let sum: f64 = (-40..=40).map(|k| eval_phi_k(&s, k, x)).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn telescoping(log_r in -10.0f64..10.0, kk in -12i32..12) {
            let s = spec();
            let r = log_r.exp2();
            let sum: f64 = (-60..=kk).map(|k| eval_phi_k(&s, k, [r, 0.0])).sum();
            prop_assert!((sum - s.eval_scaled(r, kk as f64)).abs() <= 1e-12);
        }

        #[test]
        fn shell_support_is_exact(log_r in -6.0f64..6.0, k in -4i32..4) {
            let s = spec();
            let r = log_r.exp2();
            let (lo, hi) = DyadicShell::new(k).support(&s);
            let v = eval_phi_k(&s, k, [r, 0.0]);
            if r <= lo || r >= hi {
                prop_assert_eq!(v, 0.0);
            }
            if r > lo * 1.0001 && r < hi * 0.9999 {
                prop_assert!(v > 0.0);
            }
        }

        #[test]
        fn clamped_family_sums_to_one(log_r in -12.0f64..12.0, a in -8i32..0, width in 1i32..8) {
            let s = spec();
            let b = a + width;
            let x = [log_r.exp2(), 0.0];
            let sum: f64 = (a..=b).map(|j| clamped(&s, j, a, b, x).unwrap()).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }
}
