//! Adaptive tensor Gauss-Legendre quadrature on polar cells.
//!
//! Cells are first split until the integrand's phase changes by at most
//! `phase_per_cell` radians across each cell in each direction (about half a
//! radian between neighbouring nodes), then refined by the `|Q₈ − Q₆|`
//! error indicator until the global target is met. All reductions run over
//! an ordered cell vector, so results are bit-reproducible.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const GL6_X: [f64; 3] = [0.238_619_186_083_196_9, 0.661_209_386_466_264_5, 0.932_469_514_203_152_1];
const GL6_W: [f64; 3] = [0.467_913_934_572_691_0, 0.360_761_573_048_138_6, 0.171_324_492_379_170_4];

fn rule(x: &[f64], w: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2 * x.len());
    for (&xi, &wi) in x.iter().zip(w).rev() {
        out.push((-xi, wi));
    }
    for (&xi, &wi) in x.iter().zip(w) {
        out.push((xi, wi));
    }
    out
}

/// Eight-point Gauss-Legendre nodes and weights mapped to `[a, b]`.
pub fn gl8_nodes(a: f64, b: f64) -> [(f64, f64); 8] {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut out = [(0.0, 0.0); 8];
    for (i, (x, w)) in rule(&GL8_X, &GL8_W).into_iter().enumerate() {
        out[i] = (m + h * x, h * w);
    }
    out
}

/// Values the engine can accumulate.
pub trait CellValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl CellValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Fixed-length complex vector, for integrating several outputs on shared nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CVec<const N: usize>(pub [Complex64; N]);

impl<const N: usize> Add for CVec<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for i in 0..N {
            self.0[i] += o.0[i];
        }
        self
    }
}

impl<const N: usize> Sub for CVec<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for i in 0..N {
            self.0[i] -= o.0[i];
        }
        self
    }
}

impl<const N: usize> Mul<f64> for CVec<N> {
    type Output = Self;
    fn mul(mut self, k: f64) -> Self {
        for v in self.0.iter_mut() {
            *v *= k;
        }
        self
    }
}

impl<const N: usize> CellValue for CVec<N> {
    fn zero() -> Self {
        CVec([Complex64::new(0.0, 0.0); N])
    }
    fn magnitude(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).sum()
    }
}

/// Kahan-compensated sum over leaves of 64, combined pairwise.
pub fn compensated_sum<V: CellValue>(xs: &[V]) -> V {
    if xs.len() <= 64 {
        let mut sum = V::zero();
        let mut c = V::zero();
        for &x in xs {
            let y = x - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    } else {
        let mid = xs.len() / 2;
        compensated_sum(&xs[..mid]) + compensated_sum(&xs[mid..])
    }
}

fn compensated_sum_f64(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        let mut sum = 0.0;
        let mut c = 0.0;
        for &x in xs {
            let y = x - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    } else {
        let mid = xs.len() / 2;
        compensated_sum_f64(&xs[..mid]) + compensated_sum_f64(&xs[mid..])
    }
}

/// Axis-aligned cell in `(r, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCell {
    pub r0: f64,
    pub r1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl PolarCell {
    fn split(&self, nr: usize, nt: usize) -> impl Iterator<Item = PolarCell> + '_ {
        let dr = (self.r1 - self.r0) / nr as f64;
        let dt = (self.t1 - self.t0) / nt as f64;
        (0..nr).flat_map(move |i| {
            (0..nt).map(move |j| PolarCell {
                r0: if i == 0 { self.r0 } else { self.r0 + dr * i as f64 },
                r1: if i + 1 == nr { self.r1 } else { self.r0 + dr * (i + 1) as f64 },
                t0: if j == 0 { self.t0 } else { self.t0 + dt * j as f64 },
                t1: if j + 1 == nt { self.t1 } else { self.t0 + dt * (j + 1) as f64 },
            })
        })
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.r1 * self.r1 - self.r0 * self.r0) * (self.t1 - self.t0)
    }
}

/// Tuning of [`integrate_polar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarOptions {
    pub tol: f64,
    /// Absolute floor on the error target.
    pub abs_tol: f64,
    /// The error target is `tol · max(|value|, l1_floor · ∫|f|)`.
    pub l1_floor: f64,
    pub cell_budget: usize,
    pub phase_per_cell: f64,
    pub max_rounds: usize,
}

impl Default for PolarOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            abs_tol: 0.0,
            l1_floor: 1e-3,
            cell_budget: 1_000_000,
            phase_per_cell: 4.0,
            max_rounds: 40,
        }
    }
}

/// Outcome of [`integrate_polar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarSum<V> {
    pub value: V,
    pub error: f64,
    /// Gauss approximation of `∫|f|`.
    pub abs_integral: f64,
    pub cells: usize,
    pub cells_evaluated: usize,
    pub budget_exhausted: bool,
}

#[derive(Clone, Copy)]
struct Eval<V> {
    q8: V,
    err: f64,
    abs: f64,
}

fn eval_cell<V: CellValue, F: Fn(f64, f64) -> V>(f: &F, c: &PolarCell, r8: &[(f64, f64)], r6: &[(f64, f64)]) -> Eval<V> {
    let (rm, rh) = (0.5 * (c.r0 + c.r1), 0.5 * (c.r1 - c.r0));
    let (tm, th) = (0.5 * (c.t0 + c.t1), 0.5 * (c.t1 - c.t0));
    let mut q8 = V::zero();
    let mut abs = 0.0;
    for &(xr, wr) in r8 {
        let r = rm + rh * xr;
        let mut row = V::zero();
        for &(xt, wt) in r8 {
            let v = f(r, tm + th * xt);
            row = row + v * wt;
            abs += wr * wt * r * v.magnitude();
        }
        q8 = q8 + row * (wr * r);
    }
    let mut q6 = V::zero();
    for &(xr, wr) in r6 {
        let r = rm + rh * xr;
        let mut row = V::zero();
        for &(xt, wt) in r6 {
            row = row + f(r, tm + th * xt) * wt;
        }
        q6 = q6 + row * (wr * r);
    }
    let jac = rh * th;
    Eval {
        q8: q8 * jac,
        err: (q8 - q6).magnitude() * jac,
        abs: abs * jac,
    }
}

/// Splits needed so that the sampled phase change per cell stays below `p`.
fn phase_splits<R: Fn(f64, f64) -> (f64, f64)>(rate: &R, c: &PolarCell, p: f64) -> (usize, usize) {
    let mut wr = 0.0f64;
    let mut wt = 0.0f64;
    for i in 0..3 {
        let r = c.r0 + 0.5 * (c.r1 - c.r0) * i as f64;
        for j in 0..3 {
            let t = c.t0 + 0.5 * (c.t1 - c.t0) * j as f64;
            let (a, b) = rate(r, t);
            wr = wr.max(a);
            wt = wt.max(b);
        }
    }
    let nr = ((wr * (c.r1 - c.r0)) / p).ceil().clamp(1.0, 64.0) as usize;
    let nt = ((wt * (c.t1 - c.t0)) / p).ceil().clamp(1.0, 64.0) as usize;
    (nr, nt)
}

/// `∫∫ f(r, θ) r dr dθ` over the union of `[r_edges[i], r_edges[i+1]] × theta`.
///
/// `rate(r, θ)` returns `(|∂_r ψ|, |∂_θ ψ|)` for the integrand's phase `ψ`;
/// pass zeros for non-oscillatory integrands. Intervals with a large radius
/// ratio are pre-split geometrically.
pub fn integrate_polar<V, F, R>(
    f: &F,
    rate: &R,
    r_edges: &[f64],
    theta: (f64, f64),
    n_theta: usize,
    opts: &PolarOptions,
) -> PolarSum<V>
where
    V: CellValue,
    F: Fn(f64, f64) -> V + Sync,
    R: Fn(f64, f64) -> (f64, f64) + Sync,
{
    let r8 = rule(&GL8_X, &GL8_W);
    let r6 = rule(&GL6_X, &GL6_W);
    let mut edges: Vec<f64> = Vec::new();
    for w in r_edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        edges.push(a);
        if a > 0.0 && b / a > 2.0 {
            let n = (b / a).log2().ceil() as usize;
            for i in 1..n {
                edges.push(a * (b / a).powf(i as f64 / n as f64));
            }
        }
    }
    if let Some(&last) = r_edges.last() {
        edges.push(last);
    }
    let mut cells: Vec<PolarCell> = Vec::new();
    for w in edges.windows(2) {
        let base = PolarCell {
            r0: w[0],
            r1: w[1],
            t0: theta.0,
            t1: theta.1,
        };
        cells.extend(base.split(1, n_theta.max(1)));
    }
    let mut budget_exhausted = false;
    // phase-driven splitting
    for _ in 0..8 {
        let splits: Vec<(usize, usize)> = cells
            .par_iter()
            .map(|c| phase_splits(rate, c, opts.phase_per_cell))
            .collect();
        if splits.iter().all(|&s| s == (1, 1)) {
            break;
        }
        let projected: usize = splits.iter().map(|s| s.0 * s.1).sum();
        if projected > opts.cell_budget {
            budget_exhausted = true;
            break;
        }
        cells = cells
            .iter()
            .zip(&splits)
            .flat_map(|(c, &(nr, nt))| c.split(nr, nt).collect::<Vec<_>>())
            .collect();
    }
    let mut evals: Vec<Eval<V>> = cells.par_iter().map(|c| eval_cell(f, c, &r8, &r6)).collect();
    let mut evaluated = cells.len();
    let mut rounds = 0;
    loop {
        let value = compensated_sum(&evals.iter().map(|e| e.q8).collect::<Vec<_>>());
        let l1 = compensated_sum_f64(&evals.iter().map(|e| e.abs).collect::<Vec<_>>());
        let errs: Vec<f64> = evals.iter().map(|e| e.err).collect();
        let total_err = compensated_sum_f64(&errs);
        let target = (opts.tol * value.magnitude().max(opts.l1_floor * l1)).max(opts.abs_tol);
        if total_err <= target || rounds >= opts.max_rounds || budget_exhausted {
            let error = if budget_exhausted { 10.0 * total_err.max(target) } else { total_err };
            return PolarSum {
                value,
                error,
                abs_integral: l1,
                cells: cells.len(),
                cells_evaluated: evaluated,
                budget_exhausted,
            };
        }
        rounds += 1;
        // split the largest contributors until the rest fits in half the target
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&i, &j| errs[j].total_cmp(&errs[i]).then(i.cmp(&j)));
        let mut remaining = total_err;
        let mut chosen = vec![false; cells.len()];
        for &i in &order {
            if remaining <= 0.5 * target {
                break;
            }
            chosen[i] = true;
            remaining -= errs[i];
        }
        let n_new: usize = chosen.iter().filter(|&&c| c).count() * 4;
        if evaluated + n_new > opts.cell_budget {
            budget_exhausted = true;
            continue;
        }
        let mut next_cells = Vec::with_capacity(cells.len() + n_new);
        let mut next_evals: Vec<Option<Eval<V>>> = Vec::with_capacity(cells.len() + n_new);
        for (i, c) in cells.iter().enumerate() {
            if chosen[i] {
                let (wr, wt) = phase_splits(rate, c, 1.0);
                let (nr, nt) = if wr >= 2 * wt {
                    (2, 1)
                } else if wt >= 2 * wr {
                    (1, 2)
                } else {
                    (2, 2)
                };
                for child in c.split(nr, nt) {
                    next_cells.push(child);
                    next_evals.push(None);
                }
            } else {
                next_cells.push(*c);
                next_evals.push(Some(evals[i]));
            }
        }
        let fresh: Vec<(usize, Eval<V>)> = next_evals
            .par_iter()
            .enumerate()
            .filter(|(_, e)| e.is_none())
            .map(|(i, _)| (i, eval_cell(f, &next_cells[i], &r8, &r6)))
            .collect();
        evaluated += fresh.len();
        for (i, e) in fresh {
            next_evals[i] = Some(e);
        }
        cells = next_cells;
        evals = next_evals.into_iter().map(|e| e.expect("filled")).collect();
    }
}
