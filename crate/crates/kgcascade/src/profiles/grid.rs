//! Tabulated radial profiles on log-spaced shells.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Cascade, ProfileError, ProfileId};
use crate::oscint::bilinear::{default_scale, RadialInput};

/// First line of an exported grid.
pub const GRID_FORMAT: &str = "# kgcascade-profile-grid v1";

/// Radial profile values on shells `r = 2^k` and rescaled times
/// `s′ = t·2^{−4l}`. Angles are stored implicitly: the inputs are radial,
/// so every angle carries the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileGrid {
    pub profile: ProfileId,
    pub l: u32,
    pub epsilon: f64,
    pub n_angles: usize,
    /// Row positions `k = log₂ r`, increasing.
    pub log_r: Vec<f64>,
    /// Checkpoints `s′`, increasing; the last may be `∞`.
    pub times: Vec<f64>,
    /// `values[row][time]`.
    pub values: Vec<Vec<Complex64>>,
    /// Largest quadrature error in each row.
    pub errors: Vec<f64>,
    /// `K` with `|f(∞) − f(t)| ≲ K/t` in physical time, per row.
    pub decay: Vec<f64>,
    /// Radius beyond which the profile vanishes.
    pub support: f64,
}

/// Default rows: half-dyadic steps from `2^{−6l}` to `2^{−6}`, then steps
/// of `1/16` through the support edge. The fine part resolves the shells
/// where the resonant set `Φ = 0` meets the cutoff ramp of `ĝ₀`.
pub fn default_rows(l: u32, support: f64) -> Vec<f64> {
    let mut k = -6.0 * l as f64;
    let mut out = Vec::new();
    while k < -6.0 {
        out.push(k);
        k += 0.5;
    }
    let end = support.log2() + 0.2;
    let mut j = 0;
    loop {
        let x = -6.0 + j as f64 / 16.0;
        out.push(x);
        if x > end {
            break;
        }
        j += 1;
    }
    out
}

/// Lagrange weights for `x` on up to four nodes.
fn lagrange(xs: &[f64], x: f64) -> ([f64; 4], [f64; 4]) {
    let n = xs.len();
    let mut w = [0.0; 4];
    let mut dw = [0.0; 4];
    for i in 0..n {
        let mut num = 1.0;
        let mut den = 1.0;
        let mut d = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            den *= xs[i] - xs[j];
            // derivative of Π (x − x_j) by the product rule
            let mut p = 1.0;
            for m in 0..n {
                if m != i && m != j {
                    p *= x - xs[m];
                }
            }
            d += p;
            num *= x - xs[j];
        }
        w[i] = num / den;
        dw[i] = d / den;
    }
    (w, dw)
}

impl ProfileGrid {
    pub fn k_min(&self) -> f64 {
        self.log_r[0]
    }

    /// Column of values at rescaled time `s′`, interpolated between checkpoints.
    pub fn column(&self, s: f64) -> Result<Vec<Complex64>, ProfileError> {
        let n = self.times.len();
        if !(s >= 0.0) {
            return Err(ProfileError::Domain(format!("s′ = {s}")));
        }
        if let Some(j) = self.times.iter().position(|&t| t == s) {
            return Ok(self.values.iter().map(|row| row[j]).collect());
        }
        if s == 0.0 {
            return Ok(vec![Complex64::new(0.0, 0.0); self.values.len()]);
        }
        let j = self.times.iter().position(|&t| t > s);
        let col = |f: &dyn Fn(&[Complex64]) -> Complex64| self.values.iter().map(|row| f(row)).collect();
        match j {
            Some(0) => {
                let t0 = self.times[0];
                if t0.is_infinite() {
                    return Err(ProfileError::Coverage {
                        what: format!("{} grid has no finite checkpoint below s′ = {s}", self.profile),
                    });
                }
                Ok(col(&|row| row[0] * (s / t0)))
            }
            Some(j) => {
                let (ta, tb) = (self.times[j - 1], self.times[j]);
                if tb.is_infinite() {
                    let u = ta / s;
                    Ok(col(&|row| row[j] + (row[j - 1] - row[j]) * u))
                } else {
                    let u = (s / ta).ln() / (tb / ta).ln();
                    Ok(col(&|row| row[j - 1] * (1.0 - u) + row[j] * u))
                }
            }
            None => Err(ProfileError::Coverage {
                what: format!(
                    "{} grid ends at s′ = {} below the requested s′ = {s}",
                    self.profile,
                    self.times[n - 1]
                ),
            }),
        }
    }

    /// Largest gap between consecutive rows in `[k_lo, k_hi]`, or a
    /// coverage error naming the first missing shell.
    pub fn check_rows(&self, k_lo: f64, k_hi: f64, max_step: f64) -> Result<(), ProfileError> {
        if self.k_min() > k_lo {
            return Err(ProfileError::Coverage {
                what: format!("{} grid starts at shell 2^{} above the needed 2^{k_lo}", self.profile, self.k_min()),
            });
        }
        let last = *self.log_r.last().expect("nonempty grid");
        if last < k_hi.min(self.support.log2()) {
            return Err(ProfileError::Coverage {
                what: format!("{} grid ends at shell 2^{last} below 2^{k_hi}", self.profile),
            });
        }
        for w in self.log_r.windows(2) {
            if w[1] - w[0] > max_step + 1e-12 && w[0] < k_hi && w[1] > k_lo {
                return Err(ProfileError::Coverage {
                    what: format!("{} grid misses shells between 2^{} and 2^{}", self.profile, w[0], w[1]),
                });
            }
        }
        Ok(())
    }

    /// Radial input reading this grid at rescaled time `s′`.
    pub fn input(&self, s: f64, conjugate: bool) -> Result<GridInput, ProfileError> {
        let col = self.column(s)?;
        let g = col
            .iter()
            .zip(&self.log_r)
            .map(|(v, &k)| {
                let v = if conjugate { v.conj() } else { *v };
                v * (2.0 * k / 3.0).exp2()
            })
            .collect();
        Ok(GridInput {
            log_r: self.log_r.clone(),
            g,
            decay: self.decay.clone(),
            support: self.support,
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), ProfileError> {
        let mut head = String::new();
        writeln!(head, "{GRID_FORMAT}").ok();
        writeln!(head, "profile {}", self.profile).ok();
        writeln!(head, "l {}", self.l).ok();
        writeln!(head, "epsilon {}", self.epsilon).ok();
        writeln!(head, "support {}", self.support).ok();
        writeln!(head, "n_angles {}", self.n_angles).ok();
        let times: Vec<String> = self.times.iter().map(|t| t.to_string()).collect();
        writeln!(head, "times {}", times.join(" ")).ok();
        writeln!(head, "n_rows {}", self.log_r.len()).ok();
        writeln!(head, "interpolation cubic-log2r").ok();
        writeln!(head, "columns k angle s_index re im").ok();
        w.write_all(head.as_bytes())?;
        for (i, &k) in self.log_r.iter().enumerate() {
            for a in 0..self.n_angles {
                for (j, v) in self.values[i].iter().enumerate() {
                    writeln!(w, "{k} {a} {j} {} {}", v.re, v.im)?;
                }
            }
        }
        writeln!(w, "decay k K error")?;
        for (i, &k) in self.log_r.iter().enumerate() {
            writeln!(w, "{k} {} {}", self.decay[i], self.errors[i])?;
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, ProfileError> {
        let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String), ProfileError> {
            match lines.next() {
                Some((n, Ok(s))) => Ok((n, s)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(ProfileError::Format {
                    line: 0,
                    msg: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let bad = |line: usize, msg: String| ProfileError::Format { line, msg };
        let (n, first) = next("header")?;
        if first.trim() != GRID_FORMAT {
            return Err(bad(n, format!("expected {GRID_FORMAT:?}")));
        }
        let mut field = |key: &str| -> Result<(usize, String), ProfileError> {
            let (n, s) = next(key)?;
            match s.split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.trim().to_string())),
                _ => Err(bad(n, format!("expected key {key:?}"))),
            }
        };
        fn num<T: std::str::FromStr>(n: usize, s: &str) -> Result<T, ProfileError> {
            s.parse().map_err(|_| ProfileError::Format {
                line: n,
                msg: format!("cannot parse {s:?}"),
            })
        }
        let (n, v) = field("profile")?;
        let profile: ProfileId = v.parse().map_err(|_| bad(n, format!("unknown profile {v:?}")))?;
        let (n, v) = field("l")?;
        let l: u32 = num(n, &v)?;
        let (n, v) = field("epsilon")?;
        let epsilon: f64 = num(n, &v)?;
        let (n, v) = field("support")?;
        let support: f64 = num(n, &v)?;
        let (n, v) = field("n_angles")?;
        let n_angles: usize = num(n, &v)?;
        let (n, v) = field("times")?;
        let times = v.split_whitespace().map(|t| num(n, t)).collect::<Result<Vec<f64>, _>>()?;
        if times.is_empty() || times.windows(2).any(|w| !(w[0] < w[1])) || !(times[0] > 0.0) {
            return Err(bad(n, "times must be positive and increasing".into()));
        }
        let (n, v) = field("n_rows")?;
        let n_rows: usize = num(n, &v)?;
        let (n, v) = field("interpolation")?;
        if v != "cubic-log2r" {
            return Err(bad(n, format!("unsupported interpolation {v:?}")));
        }
        let (n, v) = field("columns")?;
        if v != "k angle s_index re im" {
            return Err(bad(n, format!("unexpected columns {v:?}")));
        }
        if n_angles == 0 {
            return Err(bad(n, "n_angles must be positive".into()));
        }
        let nt = times.len();
        let mut log_r = Vec::with_capacity(n_rows);
        let mut values = vec![vec![Complex64::new(0.0, 0.0); nt]; n_rows];
        for i in 0..n_rows {
            for a in 0..n_angles {
                for j in 0..nt {
                    let (n, s) = next("data row")?;
                    let parts: Vec<&str> = s.split_whitespace().collect();
                    if parts.len() != 5 {
                        return Err(bad(n, "expected 5 columns".into()));
                    }
                    let k: f64 = num(n, parts[0])?;
                    let (ia, ij): (usize, usize) = (num(n, parts[1])?, num(n, parts[2])?);
                    let v = Complex64::new(num(n, parts[3])?, num(n, parts[4])?);
                    if ia != a || ij != j {
                        return Err(bad(n, format!("expected angle {a}, time index {j}")));
                    }
                    if a == 0 && j == 0 {
                        if log_r.last().is_some_and(|&p| p >= k) {
                            return Err(bad(n, "rows must be increasing in k".into()));
                        }
                        log_r.push(k);
                    } else if k != log_r[i] {
                        return Err(bad(n, format!("row k changed within a shell: {k}")));
                    }
                    if a == 0 {
                        values[i][j] = v;
                    } else if (v - values[i][j]).norm() > 1e-12 * values[i][j].norm().max(f64::MIN_POSITIVE) {
                        return Err(bad(n, "values differ between angles of a radial profile".into()));
                    }
                }
            }
        }
        let (n, s) = next("decay section")?;
        if s.trim() != "decay k K error" {
            return Err(bad(n, "expected decay section".into()));
        }
        let mut decay = Vec::with_capacity(n_rows);
        let mut errors = Vec::with_capacity(n_rows);
        for i in 0..n_rows {
            let (n, s) = next("decay row")?;
            let parts: Vec<&str> = s.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad(n, "expected 3 columns".into()));
            }
            let k: f64 = num(n, parts[0])?;
            if k != log_r[i] {
                return Err(bad(n, format!("decay row {k} does not match shell {}", log_r[i])));
            }
            decay.push(num(n, parts[1])?);
            errors.push(num(n, parts[2])?);
        }
        let (n, s) = next("end")?;
        if s.trim() != "end" {
            return Err(bad(n, "expected end".into()));
        }
        Ok(Self {
            profile,
            l,
            epsilon,
            n_angles,
            log_r,
            times,
            values,
            errors,
            decay,
            support,
        })
    }
}

/// A grid column as a [`RadialInput`]: cubic Lagrange interpolation in
/// `log₂ r` of `f·r^{2/3}`, extended below the first shell by the
/// `r^{−2/3}` law of the small-frequency regime.
#[derive(Debug, Clone, PartialEq)]
pub struct GridInput {
    log_r: Vec<f64>,
    g: Vec<Complex64>,
    decay: Vec<f64>,
    support: f64,
}

impl GridInput {
    fn stencil(&self, x: f64) -> usize {
        let n = self.log_r.len();
        let i = self.log_r.partition_point(|&k| k <= x).saturating_sub(1);
        i.saturating_sub(1).min(n.saturating_sub(4))
    }

    fn g_and_dg(&self, x: f64) -> (Complex64, Complex64) {
        if x <= self.log_r[0] {
            return (self.g[0], Complex64::new(0.0, 0.0));
        }
        let s = self.stencil(x);
        let m = (self.log_r.len() - s).min(4);
        let (w, dw) = lagrange(&self.log_r[s..s + m], x);
        let mut g = Complex64::new(0.0, 0.0);
        let mut dg = Complex64::new(0.0, 0.0);
        for i in 0..m {
            g += self.g[s + i] * w[i];
            dg += self.g[s + i] * dw[i];
        }
        (g, dg)
    }

    /// Interpolated decay constant `K(r)`: log-linear between shells,
    /// `∝ r^{−2}` below the first.
    pub fn decay(&self, r: f64) -> f64 {
        if r >= self.support {
            return 0.0;
        }
        let x = r.log2();
        if x <= self.log_r[0] {
            return self.decay[0] * (2.0 * (self.log_r[0] - x)).exp2();
        }
        let i = self.log_r.partition_point(|&k| k <= x).min(self.log_r.len() - 1);
        let (k0, k1) = (self.log_r[i - 1], self.log_r[i]);
        let (d0, d1) = (self.decay[i - 1], self.decay[i]);
        if d0 <= 0.0 || d1 <= 0.0 || !d0.is_finite() || !d1.is_finite() {
            return d0.max(d1);
        }
        let u = (x - k0) / (k1 - k0);
        (d0.ln() * (1.0 - u) + d1.ln() * u).exp()
    }
}

impl RadialInput for GridInput {
    fn value(&self, r: f64) -> Complex64 {
        if r >= self.support {
            return Complex64::new(0.0, 0.0);
        }
        let r = r.max(f64::MIN_POSITIVE);
        self.g_and_dg(r.log2()).0 * r.powf(-2.0 / 3.0)
    }

    fn deriv(&self, r: f64) -> Complex64 {
        if r >= self.support || r <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let (g, dg) = self.g_and_dg(r.log2());
        let dgdr = dg / (r * std::f64::consts::LN_2);
        dgdr * r.powf(-2.0 / 3.0) - g * (2.0 / 3.0) * r.powf(-5.0 / 3.0)
    }

    fn support(&self) -> f64 {
        self.support
    }
}

/// Result of [`support_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct SupportReport {
    pub profile: ProfileId,
    /// Sum of the input support radii.
    pub expected_radius: f64,
    /// Largest sampled radius with a nonzero value.
    pub measured_radius: f64,
    /// Largest `|value|` sampled beyond the expected radius.
    pub max_beyond: f64,
    pub passes: bool,
}

/// Checks that a grid vanishes outside the convolution support.
pub fn support_check(grid: &ProfileGrid) -> SupportReport {
    let expected = grid.profile.support_radius();
    let mut measured: f64 = 0.0;
    let mut beyond: f64 = 0.0;
    for (row, &k) in grid.values.iter().zip(&grid.log_r) {
        let r = k.exp2();
        let m = row.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if m > 0.0 {
            measured = measured.max(r);
        }
        if r > expected {
            beyond = beyond.max(m);
        }
    }
    SupportReport {
        profile: grid.profile,
        expected_radius: expected,
        measured_radius: measured,
        max_beyond: beyond,
        passes: beyond == 0.0 && measured <= expected,
    }
}

impl Cascade {
    /// Tabulates a first iterate on `rows` (values of `log₂ r`) at rescaled
    /// times `s′ = t·2^{−4l}`.
    pub fn build_grid(&self, which: ProfileId, l: u32, rows: &[f64], times: &[f64]) -> Result<ProfileGrid, ProfileError> {
        if times.is_empty() || times.windows(2).any(|w| !(w[0] < w[1])) || !(times[0] > 0.0) {
            return Err(ProfileError::Domain("grid times must be positive and increasing".into()));
        }
        if rows.windows(2).any(|w| !(w[0] < w[1])) || rows.len() < 4 {
            return Err(ProfileError::Domain("grid rows must be increasing, at least four".into()));
        }
        let bl = self.first_engine(which)?;
        let support = which.support_radius();
        let p4 = (4.0 * l as f64).exp2();
        let phys: Vec<f64> = times.iter().map(|s| s * p4).collect();
        let out: Vec<Result<(Vec<Complex64>, f64, f64), ProfileError>> = rows
            .par_iter()
            .map(|&k| {
                let r = k.exp2();
                if r >= support {
                    return Ok((vec![Complex64::new(0.0, 0.0); times.len()], 0.0, 0.0));
                }
                let fr = bl.frame_with(r, default_scale(r));
                let scale = (4.0 * fr.l).exp2();
                let scaled: Vec<f64> = phys.iter().map(|t| t / scale).collect();
                let (qs, tail) = bl.series_with_tail(&fr, &scaled).map_err(super::quad_err("grid row"))?;
                let tail = match tail {
                    Some(t) => t,
                    None => bl.tail_data(&fr).map_err(super::quad_err("grid row tail"))?,
                };
                let mut k_decay = 0.0;
                for sp in &tail.points {
                    let c = sp.constant().map_err(super::quad_err("grid row tail"))?;
                    k_decay += c.norm() / sp.phi_star.abs();
                }
                k_decay *= (6.0 * fr.l).exp2();
                let err = qs.iter().map(|q| q.error_estimate).fold(0.0, f64::max);
                Ok((qs.into_iter().map(|q| q.value).collect(), err, k_decay))
            })
            .collect();
        let mut values = Vec::with_capacity(rows.len());
        let mut errors = Vec::with_capacity(rows.len());
        let mut decay = Vec::with_capacity(rows.len());
        for r in out {
            let (v, e, d) = r?;
            values.push(v);
            errors.push(e);
            decay.push(d);
        }
        Ok(ProfileGrid {
            profile: which,
            l,
            epsilon: self.epsilon(),
            n_angles: 64,
            log_r: rows.to_vec(),
            times: times.to_vec(),
            values,
            errors,
            decay,
            support,
        })
    }
}
