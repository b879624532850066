//! The second iterate `f̂₆` from tabulated first iterates.
//!
//! At `|ξ| ∼ 2^{−9l}` and `t ∼ 2^{12l}` the inputs `f̂₄(η, s)`, `f̂₅(ξ−η, s)`
//! have long settled: in their own rescaled time `s·2^{−4L}` the relevant
//! shells sit far past the stabilization point. The main term therefore uses
//! the limits `f̂^∞` and integrates time exactly; the transients
//! `T = f̂^∞ − f̂(s)` contribute
//!
//! ```text
//! |J₂ + J₃ + J₄| ≤ ∫dη ∫₀ᵗ (|f̂₅^∞||T₄| + |T₅||f̂₄^∞| + |T₅||T₄|) ds,
//! ```
//!
//! which is added to the error using `|T(η, s)| ≤ min(|f̂^∞| + sM, K/s)`,
//! `M = ε²∫φ²`, and the per-shell decay constant `K` stored in the grid.

use num_complex::Complex64;

use super::grid::{default_rows, GridInput};
use super::{check_shell, quad_err, Cascade, Equation, Estimate, ProfileError, ProfileGrid, ProfileId};
use crate::dyadic::eval_phi_k;
use crate::oscint::bilinear::{default_scale, Bilinear, RadialInput};
use crate::oscint::cells::integrate_polar;
use crate::oscint::{gl8_nodes, PolarOptions, Region, RegionContribution};
use crate::Point;

/// Limits `f̂₄^∞`, `f̂₅^∞` tabulated deep enough for the second iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondInputs {
    pub f4: ProfileGrid,
    pub f5: ProfileGrid,
}

impl SecondInputs {
    pub fn grid(&self, p: ProfileId) -> Result<&ProfileGrid, ProfileError> {
        match p {
            ProfileId::F4 => Ok(&self.f4),
            ProfileId::F5 => Ok(&self.f5),
            other => Err(ProfileError::Coverage {
                what: format!("no grid for input {other}"),
            }),
        }
    }

    /// The `(ξ−η, η)` slot inputs of `eq`, checked to reach shell `2^{k_lo}`.
    pub(crate) fn slots_for(&self, eq: &Equation, k_lo: f64) -> Result<(GridInput, GridInput), ProfileError> {
        let mut out = Vec::with_capacity(2);
        for (p, conj) in eq.inputs.into_iter().zip(eq.conjugate) {
            let g = self.grid(p)?;
            g.check_rows(k_lo, g.support.log2(), 0.5)?;
            if g.times.last() != Some(&f64::INFINITY) {
                return Err(ProfileError::Coverage {
                    what: format!("{p} grid has no s′ = ∞ checkpoint"),
                });
            }
            out.push(g.input(f64::INFINITY, conj)?);
        }
        let nu = out.pop().expect("two slots");
        let mu = out.pop().expect("two slots");
        Ok((mu, nu))
    }

    pub(crate) fn slots(&self, eq: &Equation) -> Result<(GridInput, GridInput), ProfileError> {
        let k_lo = self.f4.k_min().max(self.f5.k_min());
        self.slots_for(eq, k_lo)
    }
}

/// `∫₀ᵗ min(a + sM, K/s) ds` and the largest value of the minimum.
fn transient_integral(a: f64, m: f64, k: f64, t: f64) -> (f64, f64) {
    if k <= 0.0 {
        return (0.0, 0.0);
    }
    // crossing a + sM = K/s
    let s_star = if m > 0.0 {
        (-a + (a * a + 4.0 * m * k).sqrt()) / (2.0 * m)
    } else {
        k / a
    };
    if t <= s_star {
        (a * t + 0.5 * m * t * t, a + m * t)
    } else {
        (a * s_star + 0.5 * m * s_star * s_star + k * (t / s_star).ln(), a + m * s_star)
    }
}

/// `‖P_{−9l} f₆‖_{L²}` with the mean-value bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub l: u32,
    pub t: f64,
    pub norm: f64,
    /// `norm / ε⁴`.
    pub normalized: f64,
    /// Inf and sup of `|f̂₆|` over the sampled shell.
    pub inf: f64,
    pub sup: f64,
    /// `|E| = π(1.2² − 0.55²)·2^{−18l}`, the shell's area.
    pub measure: f64,
    /// `∫ φ_{−9l}²`, the weighted area the bracket uses.
    pub weighted_measure: f64,
    pub error: f64,
    pub budget_exhausted: bool,
}

impl NormReport {
    /// `inf·(∫φ²)^{1/2} ≤ norm ≤ sup·(∫φ²)^{1/2}`.
    pub fn bracket(&self) -> (f64, f64) {
        let m = self.weighted_measure.sqrt();
        (self.inf * m, self.sup * m)
    }
}

impl Cascade {
    /// Tabulates `f̂₄^∞` and `f̂₅^∞` on the default shells for depth `l`.
    pub fn build_second_inputs(&self, l: u32) -> Result<SecondInputs, ProfileError> {
        let f4 = self.build_grid(ProfileId::F4, l, &default_rows(l, 2.4), &[f64::INFINITY])?;
        let f5 = self.build_grid(ProfileId::F5, l, &default_rows(l, 2.4), &[f64::INFINITY])?;
        Ok(SecondInputs { f4, f5 })
    }

    /// `f̂₆(ξ, t)` at `|ξ| ∼ 2^{−9l}`, `t = 2^{t_exp}`.
    pub fn second_iteration(
        &self,
        inputs: &SecondInputs,
        l: u32,
        t_exp: f64,
        xi: Point,
    ) -> Result<Estimate, ProfileError> {
        Ok(self.second_iteration_series(inputs, l, &[t_exp.exp2()], xi)?.remove(0))
    }

    /// `f̂₆` at several physical times sharing one frame.
    pub fn second_iteration_series(
        &self,
        inputs: &SecondInputs,
        l: u32,
        times: &[f64],
        xi: Point,
    ) -> Result<Vec<Estimate>, ProfileError> {
        let a = check_shell(xi, 9.0 * l as f64)?;
        self.f6_series(inputs, a, 3.0 * l as f64, times)
    }

    fn f6_series(&self, inputs: &SecondInputs, a: f64, big_l: f64, times: &[f64]) -> Result<Vec<Estimate>, ProfileError> {
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
            return Err(ProfileError::Domain(format!("t = {t}")));
        }
        let eq = *self.equation(ProfileId::F6)?;
        // the core reaches |η| ≈ 2^{−L}·R_MIN·... ; demand two shells of margin
        let (mu, nu) = inputs.slots_for(&eq, -big_l - 2.0)?;
        let bl = Bilinear::new(eq.triple, &mu, &nu, self.cfg);
        let fr = bl.frame_with(a, big_l);
        let p4 = (4.0 * big_l).exp2();
        let scaled: Vec<f64> = times.iter().map(|t| t / p4).collect();
        let eps = self.eps_pow(ProfileId::F6);
        let qs = bl.series(&fr, &scaled).map_err(quad_err("second iteration"))?;
        let mut out = Vec::with_capacity(times.len());
        for (q, &t) in qs.into_iter().zip(times) {
            if t == 0.0 {
                out.push(Estimate::zero(eps));
                continue;
            }
            let mut e = Estimate::from_quad(q, eps);
            let b = self.transient_bound(&mu, &nu, a, t);
            e.error += b;
            e.regions.push(RegionContribution {
                region: Region::InputTransient,
                value: Complex64::new(0.0, 0.0),
                error: b,
                cells: 0,
            });
            out.push(e);
        }
        Ok(out)
    }

    /// Bound on `|J₂ + J₃ + J₄|` at `ξ = a e₁`, physical time `t`.
    pub(crate) fn transient_bound(&self, mu: &GridInput, nu: &GridInput, a: f64, t: f64) -> f64 {
        let m = self.g0.epsilon.powi(2) * self.g0.phi_sq_integral();
        let f = |r: f64, th: f64| {
            let (s, c) = th.sin_cos();
            let rm = (a - r * c).hypot(r * s);
            let (a4, a5) = (nu.value(r).norm(), mu.value(rm).norm());
            let (i4, sup4) = transient_integral(a4, m, nu.decay(r), t);
            let (i5, sup5) = transient_integral(a5, m, mu.decay(rm), t);
            Complex64::new(a5 * i4 + i5 * a4 + (sup5 * i4).min(sup4 * i5), 0.0)
        };
        let hi = nu.support().min(a + mu.support());
        let mut edges = vec![0.0];
        let mut r = hi * 2f64.powi(-60);
        while r < hi {
            edges.push(r);
            r *= 2.0;
        }
        edges.push(hi);
        edges.push(a);
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let opts = PolarOptions {
            tol: 1e-2,
            ..PolarOptions::default()
        };
        let s = integrate_polar(&f, &|_, _| (0.0, 0.0), &edges, (0.0, std::f64::consts::PI), 4, &opts);
        2.0 * (s.value.re + s.error)
    }

    /// `f̂₆(ξ, t)` at any `|ξ|`, in the frame `L = max(0, −log₂|ξ|/3)`.
    pub fn f6_value(&self, inputs: &SecondInputs, xi: Point, times: &[f64]) -> Result<Vec<Estimate>, ProfileError> {
        let a = xi[0].hypot(xi[1]);
        if a >= ProfileId::F6.support_radius() {
            return Ok(times.iter().map(|_| Estimate::zero(self.eps_pow(ProfileId::F6))).collect());
        }
        self.f6_series(inputs, a, default_scale(a), times)
    }

    /// Tabulates `f̂₆` on `rows` at physical times `t = s′·2^{12l}`.
    pub fn build_f6_grid(
        &self,
        inputs: &SecondInputs,
        l: u32,
        rows: &[f64],
        times: &[f64],
    ) -> Result<ProfileGrid, ProfileError> {
        let p = (12.0 * l as f64).exp2();
        let phys: Vec<f64> = times.iter().map(|s| s * p).collect();
        let mut values = Vec::with_capacity(rows.len());
        let mut errors = Vec::with_capacity(rows.len());
        for &k in rows {
            let v = self.f6_value(inputs, [k.exp2(), 0.0], &phys)?;
            errors.push(v.iter().map(|e| e.error).fold(0.0, f64::max));
            values.push(v.into_iter().map(|e| e.value).collect());
        }
        Ok(ProfileGrid {
            profile: ProfileId::F6,
            l,
            epsilon: self.epsilon(),
            n_angles: 64,
            log_r: rows.to_vec(),
            times: times.to_vec(),
            values,
            errors,
            decay: vec![0.0; rows.len()],
            support: ProfileId::F6.support_radius(),
        })
    }

    /// `‖φ_{−9l} f̂₆(·, t)‖_{L²}` by Gauss-Legendre in `|ξ|` over the shell,
    /// `t = 2^{t_exp}` with `t_exp ≥ 12.05 l`.
    pub fn l2_norm_lowfreq(&self, inputs: &SecondInputs, l: u32, t_exp: f64) -> Result<NormReport, ProfileError> {
        self.l2_norm_with(inputs, l, t_exp, 2)
    }

    /// [`Cascade::l2_norm_lowfreq`] with `n_panels` Gauss-Legendre panels
    /// on the plateau of the shell (one on each ramp).
    pub fn l2_norm_with(&self, inputs: &SecondInputs, l: u32, t_exp: f64, n_panels: usize) -> Result<NormReport, ProfileError> {
        let lf = l as f64;
        if !(t_exp >= 12.05 * lf) {
            return Err(ProfileError::Domain(format!("t = 2^{t_exp} is below 2^(12.05·{l})")));
        }
        let k = -9 * l as i32;
        let unit = (-9.0 * lf).exp2();
        let spec = self.g0.cutoff;
        let mut panels = vec![(0.55 * unit, 0.6 * unit)];
        for i in 0..n_panels {
            let w = 0.5 / n_panels as f64;
            panels.push(((0.6 + w * i as f64) * unit, (0.6 + w * (i + 1) as f64) * unit));
        }
        panels.push((1.1 * unit, 1.2 * unit));
        let t = t_exp.exp2();
        let (mut acc, mut err, mut wm) = (0.0, 0.0, 0.0);
        let (mut inf, mut sup) = (f64::INFINITY, 0.0f64);
        let mut budget = false;
        for (lo, hi) in panels {
            for (r, w) in gl8_nodes(lo, hi) {
                let phi = eval_phi_k(&spec, k, [r, 0.0]);
                let e = self.second_iteration_series(inputs, l, &[t], [r, 0.0])?.remove(0);
                let f = e.value.norm();
                let jac = 2.0 * std::f64::consts::PI * r * w;
                acc += phi * phi * f * f * jac;
                err += 2.0 * phi * phi * f * e.error * jac;
                wm += phi * phi * jac;
                inf = inf.min(f);
                sup = sup.max(f);
                budget |= e.budget_exhausted;
            }
        }
        let norm = acc.sqrt();
        let eps = self.eps_pow(ProfileId::F6);
        Ok(NormReport {
            l,
            t,
            norm,
            normalized: norm / eps,
            inf,
            sup,
            measure: std::f64::consts::PI * (1.2f64.powi(2) - 0.55f64.powi(2)) * unit * unit,
            weighted_measure: wm,
            error: if norm > 0.0 { err / (2.0 * norm) } else { err.sqrt() },
            budget_exhausted: budget,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::transient_integral;

    #[test]
    fn transient_integral_matches_quadrature() {
        for (a, m, k, t) in [(2.0, 0.5, 30.0, 100.0), (1.0, 4.0, 1e6, 1e3), (0.0, 1.0, 4.0, 1e4), (3.0, 0.1, 1e-3, 50.0)] {
            let n = 2_000_000;
            let h = t / n as f64;
            let mut acc = 0.0;
            let mut peak: f64 = 0.0;
            for i in 0..n {
                let s = (i as f64 + 0.5) * h;
                let v = (a + s * m).min(k / s);
                acc += v * h;
                peak = peak.max(v);
            }
            let (got, sup) = transient_integral(a, m, k, t);
            assert!((got - acc).abs() < 1e-4 * acc, "{got} vs {acc}");
            assert!(sup >= peak * (1.0 - 1e-6));
        }
    }
}
