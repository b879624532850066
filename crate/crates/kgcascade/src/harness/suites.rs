use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use super::{fit_frequency, HarnessError, ReportRow, RowStatus, ScalingReport, SuiteRunner, SECOND_T_EXP};
use crate::critical::{h3_abs_min, h_eval, min_grad_on_annulus, phi_at_critical, solve_critical_point};
use crate::phase::{degeneracy_report, degeneracy_report_exact, phi_direct, taylor_probe, InteractionTriple};
use crate::profiles::{Estimate, ProfileId};

const F4: ProfileId = ProfileId::F4;

fn row_from(x: f64, label: String, r: Result<Estimate, impl ToString>) -> ReportRow {
    match r {
        Ok(e) => ReportRow {
            x,
            label,
            value: e.normalized.norm(),
            error: e.error / e.value.norm() * e.normalized.norm(),
            status: if e.budget_exhausted { RowStatus::Budget } else { RowStatus::Ok },
        },
        Err(e) => ReportRow::failed(x, label, e),
    }
}

fn xi_first(l: u32) -> [f64; 2] {
    [(-3.0 * l as f64).exp2(), 0.0]
}

/// `t = 2^{⌈4.05 l⌉}`, just past stabilization.
fn t_settled(l: u32) -> f64 {
    (4.05 * l as f64).ceil().exp2()
}

fn xi_second(l: u32) -> [f64; 2] {
    [(-9.0 * l as f64).exp2(), 0.0]
}

pub(super) fn degeneracy(run: &SuiteRunner) -> Result<Vec<ScalingReport>, HarnessError> {
    let mut rep = ScalingReport::new("degeneracy", "origin diagnostics", "triple");
    let mut triples = vec![("f4", InteractionTriple::f4(), None), ("f5", InteractionTriple::f5(), None)];
    let cfg_triple = run.config.triple()?;
    if cfg_triple != InteractionTriple::f4() && cfg_triple != InteractionTriple::f5() {
        triples.push(("config", cfg_triple, Some(run.config.exact_triple())));
    }
    for (i, (name, t, exact)) in triples.iter().enumerate() {
        let d = match exact {
            Some(e) => degeneracy_report_exact(t, e),
            None => degeneracy_report(t),
        };
        let x = i as f64;
        let g = d.grad_eta_at_origin[0].hypot(d.grad_eta_at_origin[1]);
        rep.rows.push(ReportRow::ok(x, format!("{name} |Phi(0,0)|"), d.phi_at_origin.abs(), 0.0));
        rep.rows.push(ReportRow::ok(x, format!("{name} |grad Phi(0,0)|"), g, 0.0));
        rep.rows.push(ReportRow::ok(x, format!("{name} |det Hess(0,0)|"), d.hess_det_at_origin.abs(), 0.0));
        rep.rows.push(ReportRow::ok(x, format!("{name} condition1"), d.condition1_holds as u8 as f64, 0.0));
        rep.rows.push(ReportRow::ok(x, format!("{name} condition2"), d.condition2_holds as u8 as f64, 0.0));
        if let Ok(tp) = taylor_probe(t) {
            rep.rows.push(ReportRow::ok(x, format!("{name} kappa"), tp.kappa, 0.0));
        }
        if exact.is_none() {
            rep.check(
                format!("{name} degenerate at the origin"),
                d.is_degenerate(),
                format!("Phi {:e}, grad {g:e}, det {:e}", d.phi_at_origin, d.hess_det_at_origin),
            );
            rep.check(format!("{name} condition1 violated"), !d.condition1_holds, "b_sigma - b_mu - b_nu = 0");
        }
    }
    Ok(vec![rep])
}

pub(super) fn lemma21(run: &SuiteRunner) -> Result<Vec<ScalingReport>, HarnessError> {
    let mut h = ScalingReport::new("lemma21", "h constants", "b");
    let h3 = h_eval(0.0, 3)?;
    h.rows.push(ReportRow::ok(0.0, "h'''(0)", h3, 0.0));
    h.check("h'''(0) = -1.5", h3 == -1.5, format!("{h3}"));
    let h0 = -h_eval(0.1375, 0)?;
    h.rows.push(ReportRow::ok(0.1375, "-h(0.1375)", h0, 0.0));
    h.check("-h(0.1375) in (0.0006, 0.0007)", h0 > 0.0006 && h0 < 0.0007, format!("{h0}"));
    let n = 10_000;
    let (mut min4, mut at) = (f64::INFINITY, 0.0);
    for i in 0..n {
        let b = 0.3 * i as f64 / (n - 1) as f64;
        let v = h_eval(b, 4)?;
        if v < min4 {
            min4 = v;
            at = b;
        }
    }
    h.rows.push(ReportRow::ok(at, "min h''''", min4, 0.0));
    let (h3min, h3at) = h3_abs_min(0.3, n);
    h.rows.push(ReportRow::ok(h3at, "min |h'''| on (0, 0.3]", h3min, 0.0));
    h.check("h'''' >= 0 on [0, 0.3]", min4 >= 0.0, format!("min {min4:e} at b = {at}"));

    let mut g = ScalingReport::new("lemma21", "min |grad Phi~_lambda|", "l");
    let t = run.config.triple()?;
    let cases: Vec<(u32, f64)> = [15u32, 25, 40]
        .into_iter()
        .flat_map(|l| [0.0, 0.25, 0.5, 0.75, 0.99].map(move |lam| (l, lam)))
        .collect();
    let rows: Vec<(ReportRow, bool)> = cases
        .par_iter()
        .map(|&(l, lam)| {
            let label = format!("l={l} lambda={lam}");
            match min_grad_on_annulus(l, lam, &t) {
                Ok(b) => (ReportRow::ok(l as f64, label, b.min_grad, b.grid_min - b.min_grad), b.corroborates()),
                Err(e) => (ReportRow::failed(l as f64, label, e), false),
            }
        })
        .collect();
    for (r, ok) in rows {
        g.check(
            format!("{} gradient bounded below", r.label),
            ok,
            format!("lower bound {:e}", r.value),
        );
        g.rows.push(r);
    }
    Ok(vec![h, g])
}

pub(super) fn critical(run: &SuiteRunner) -> Result<Vec<ScalingReport>, HarnessError> {
    let ls = run.config.l_range((4, 10), 20)?;
    let t = run.config.triple()?;
    let mut rng = rand::rngs::StdRng::seed_from_u64(run.config.seed);
    let angles: Vec<f64> = ls.iter().map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let mut eta = ScalingReport::new("critical", "|eta(xi)|", "l");
    let mut alpha = ScalingReport::new("critical", "alpha", "l");
    for (&l, th) in ls.iter().zip(angles) {
        let a = (-3.0 * l as f64).exp2();
        let xi = [a * th.cos(), a * th.sin()];
        match solve_critical_point(xi, l, &t) {
            Ok(cp) => {
                eta.rows.push(ReportRow::ok(l as f64, format!("l={l}"), cp.radius(), cp.residual));
                eta.check(
                    format!("l={l} residual <= 1e-12"),
                    cp.residual <= 1e-12,
                    format!("{:e}", cp.residual),
                );
                let al = phi_at_critical(&cp, xi, l, &t);
                let err = (4.0 * l as f64).exp2() * (phi_direct(&t, xi, cp.eta) - cp.phi_value).abs();
                alpha.rows.push(ReportRow::ok(l as f64, format!("l={l}"), al.abs(), err));
                alpha.check(
                    format!("l={l} alpha nonzero"),
                    al.abs() > 10.0 * err,
                    format!("alpha {al:.6}, numeric error {err:e}"),
                );
            }
            Err(e) => {
                eta.rows.push(ReportRow::failed(l as f64, format!("l={l}"), &e));
                eta.check(format!("l={l} solved"), false, e.to_string());
            }
        }
    }
    eta.fit_and_check(-1.0, 0.02);
    Ok(vec![eta, alpha])
}

/// Times below the stabilization threshold where the a-priori bound applies.
fn sub_threshold_times(l: u32) -> Vec<f64> {
    let lf = l as f64;
    [0.5, 1.0, 2.0, 3.0, 4.0].iter().map(|c| (c * lf).exp2()).collect()
}

pub(super) fn first(run: &SuiteRunner) -> Result<Vec<ScalingReport>, HarnessError> {
    let ls = run.config.l_range((4, 8), 8)?;
    let c = &run.cascade;
    let mut rep = ScalingReport::new("first", "|f4|/eps^2", "l");
    let results: Vec<_> = ls
        .par_iter()
        .map(|&l| {
            let lf = l as f64;
            let mut times = vec![(4.05 * lf).exp2(), (4.5 * lf).exp2(), t_settled(l)];
            times.extend(sub_threshold_times(l));
            (l, c.first_iteration_series(F4, l, &times, xi_first(l)))
        })
        .collect();
    let mut bound_rep = ScalingReport::new("first", "|f4|/eps^2 over case bound", "l");
    for (l, r) in results {
        match r {
            Ok(v) => {
                rep.rows.push(row_from(l as f64, format!("l={l}"), Ok::<_, String>(v[2].clone())));
                if l == 5 {
                    let ratio = v[1].value / v[0].value;
                    let prop = ratio.norm() * (v[0].relative_error() + v[1].relative_error());
                    let dev = (ratio - 1.0).norm();
                    let tol = super::effective_tolerance(0.1, prop);
                    rep.check(
                        "l=5 stabilization |f(2^4.5l)/f(2^4.05l) - 1| <= 0.1",
                        dev <= tol,
                        format!("{dev:.4} (threshold {tol:.3})"),
                    );
                }
                let lf = l as f64;
                for (e, t) in v[3..].iter().zip(sub_threshold_times(l)) {
                    let b = c.case_bound(F4, l, t)?;
                    let m = e.normalized.norm();
                    let slack = 3.0 * (e.error + e.tail_bound) / c.epsilon().powi(2);
                    bound_rep.rows.push(ReportRow::ok(
                        lf,
                        format!("l={l} t=2^{:.1} case {}", t.log2(), b.case),
                        m / b.bound,
                        slack / b.bound,
                    ));
                    bound_rep.check(
                        format!("l={l} t=2^{:.1} case {} bound", t.log2(), b.case),
                        m <= b.bound + slack,
                        format!("{m:.4e} <= {:.4e}", b.bound),
                    );
                }
            }
            Err(e) => {
                rep.rows.push(ReportRow::failed(l as f64, format!("l={l}"), &e));
            }
        }
    }
    rep.fit_and_check(2.0, 0.15);
    Ok(vec![rep, bound_rep])
}

pub(super) fn gradient(run: &SuiteRunner) -> Result<Vec<ScalingReport>, HarnessError> {
    let ls = run.config.l_range((4, 8), 8)?;
    let c = &run.cascade;
    let mut grad = ScalingReport::new("gradient", "|grad f4|/eps^2", "l");
    let mut ratio = ScalingReport::new("gradient", "|grad f4|/|f4|", "l");
    let results: Vec<_> = ls
        .par_iter()
        .map(|&l| {
            let te = t_settled(l).log2();
            let g = c.first_iteration_gradient(F4, l, te, xi_first(l));
            let f = c.first_iteration(F4, l, te, xi_first(l));
            (l, g, f)
        })
        .collect();
    for (l, g, f) in results {
        let x = l as f64;
        let label = format!("l={l}");
        match (g, f) {
            (Ok(g), Ok(f)) => {
                let gm = g.radial.norm();
                let rel = g.error / gm;
                grad.rows.push(ReportRow {
                    x,
                    label: label.clone(),
                    value: g.magnitude_normalized(),
                    error: rel * g.magnitude_normalized(),
                    status: if g.budget_exhausted { RowStatus::Budget } else { RowStatus::Ok },
                });
                let r = gm / f.value.norm();
                ratio.rows.push(ReportRow::ok(x, label, r, r * (rel + f.relative_error())));
                if l == 4 {
                    // central difference of f̂ along ξ at the same time
                    let a = xi_first(l)[0];
                    let h = 1e-4 * a;
                    let t = t_settled(l);
                    let fd = c
                        .first_iteration_at(F4, l, t, [a + h, 0.0])
                        .and_then(|p| c.first_iteration_at(F4, l, t, [a - h, 0.0]).map(|m| (p.value - m.value) / (2.0 * h)));
                    match fd {
                        Ok(d) => {
                            let e = (d - g.radial).norm() / gm;
                            grad.check("l=4 finite-difference cross-check within 10%", e <= 0.1, format!("{e:.3e}"));
                        }
                        Err(e) => grad.check("l=4 finite-difference cross-check within 10%", false, e.to_string()),
                    }
                }
            }
            (g, f) => {
                let msg = g.err().map(|e| e.to_string()).or(f.err().map(|e| e.to_string())).unwrap_or_default();
                grad.rows.push(ReportRow::failed(x, label.clone(), &msg));
                ratio.rows.push(ReportRow::failed(x, label, msg));
            }
        }
    }
    grad.fit_and_check(5.0, 0.25);
    ratio.fit_and_check(3.0, 0.2);
    Ok(vec![grad, ratio])
}

/// Desk value of the derivative-comparability constant `C_D = 2^D`.
pub const MIDFREQ_D: i32 = 8;

pub(super) fn midfreq(run: &SuiteRunner) -> Result<Vec<ScalingReport>, HarnessError> {
    let c = &run.cascade;
    let times: Vec<f64> = (0..=12).map(|j| (j as f64).exp2()).collect();
    let ks: Vec<i32> = (-8..=0).chain([2, 3]).collect();
    let results: Vec<_> = ks
        .par_iter()
        .map(|&k| (k, c.mid_frequency_bound(F4, k, &times, 16, k == -2)))
        .collect();
    let mut growth = ScalingReport::new("midfreq", "sup_t<=2^12 / sup_t<=2^6", "k");
    let mut sup = ScalingReport::new("midfreq", "sup |P_k f4|/eps^2", "k");
    let eps2 = c.epsilon().powi(2);
    for (k, r) in results {
        let x = k as f64;
        match r {
            Ok(m) => {
                sup.rows.push(ReportRow::ok(x, format!("k={k}"), m.sup / eps2, m.error / eps2));
                if k <= 0 {
                    let (a, b) = (m.sup_until(64.0), m.sup_until(4096.0));
                    let q = b / a;
                    let prop = q * 2.0 * m.error / a.min(b);
                    growth.rows.push(ReportRow::ok(x, format!("k={k}"), q, prop));
                    growth.check(format!("k={k} sup growth <= 1.5"), q - 3.0 * prop <= 1.5, format!("{q:.3}"));
                } else {
                    sup.check(format!("k={k} identically zero"), m.sup == 0.0, format!("sup {:e}", m.sup));
                }
                if let Some(g) = m.grad_sup {
                    let cd = (MIDFREQ_D as f64).exp2();
                    sup.check(
                        format!("k={k} sup|grad| <= 2^{MIDFREQ_D} sup"),
                        g <= cd * m.sup,
                        format!("ratio {:.2}", g / m.sup),
                    );
                }
            }
            Err(e) => {
                sup.rows.push(ReportRow::failed(x, format!("k={k}"), &e));
                sup.check(format!("k={k} evaluated"), false, e.to_string());
            }
        }
    }
    Ok(vec![growth, sup])
}

/// Samples of `∂_t f̂₄` over `[2^{4.1l}, 10·2^{4.1l}]` at `l = 5`.
pub(super) fn tderiv(run: &SuiteRunner) -> Result<Vec<ScalingReport>, HarnessError> {
    let l = 5u32;
    let c = &run.cascade;
    let xi = xi_first(l);
    let t0 = (4.1 * l as f64).exp2();
    let n = 96;
    let times: Vec<f64> = (0..n).map(|j| t0 * (1.0 + 9.0 * j as f64 / (n - 1) as f64)).collect();
    let vals: Vec<Result<Estimate, _>> = times.par_iter().map(|&t| c.time_derivative(F4, l, t, xi)).collect();
    let mut rep = ScalingReport::new("tderiv", "|dt f4|·t/eps^2", "t");
    let mut zs = Vec::with_capacity(n);
    for (&t, v) in times.iter().zip(vals) {
        match v {
            Ok(e) => {
                rep.rows.push(ReportRow::ok(t, format!("t={t:.6e}"), e.normalized.norm() * t, e.error / c.epsilon().powi(2) * t));
                zs.push(e.value);
            }
            Err(e) => {
                rep.rows.push(ReportRow::failed(t, format!("t={t:.6e}"), &e));
                rep.check("time derivative evaluated", false, e.to_string());
                return Ok(vec![rep]);
            }
        }
    }
    let mags: Vec<f64> = rep.rows.iter().map(|r| r.value).collect();
    let (lo, hi) = mags.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
    rep.check("1/t magnitude law within factor 3", hi / lo <= 3.0, format!("max/min {:.3}", hi / lo));

    let cp = solve_critical_point(xi, l, &InteractionTriple::f4())?;
    let alpha = phi_at_critical(&cp, xi, l, &InteractionTriple::f4());
    let expect = alpha.abs() * (-4.0 * l as f64).exp2();
    let dt = times[1] - times[0];
    let w = fit_frequency(&times, &zs, std::f64::consts::PI / dt)?;
    let rel = (w - expect).abs() / expect;
    rep.check(
        "oscillation frequency matches alpha·2^-4l within 5%",
        rel <= 0.05,
        format!("fitted {w:.6e}, alpha·2^-4l {expect:.6e}, rel {rel:.4}"),
    );

    let t1 = (4.5 * l as f64).exp2();
    let d1 = c.time_derivative(F4, l, t1, xi)?;
    let d2 = c.time_derivative(F4, l, 2.0 * t1, xi)?;
    let q = d2.value.norm() / d1.value.norm();
    rep.check("t-doubling ratio 0.5 ± 0.1", (q - 0.5).abs() <= 0.1, format!("{q:.4}"));
    Ok(vec![rep])
}

pub(super) fn second(run: &SuiteRunner) -> Result<Vec<ScalingReport>, HarnessError> {
    let ls = run.config.l_range((3, 5), 5)?;
    let mut rep = ScalingReport::new("second", "|f6|/eps^4", "l");
    for &l in &ls {
        let r = run
            .second_inputs(l)
            .map_err(|e| e.to_string())
            .and_then(|inp| {
                run.cascade
                    .second_iteration(&inp, l, SECOND_T_EXP * l as f64, xi_second(l))
                    .map_err(|e| e.to_string())
            });
        rep.rows.push(row_from(l as f64, format!("l={l}"), r));
    }
    rep.fit_and_check(10.0, 0.5);
    Ok(vec![rep])
}

fn norm_rows(run: &SuiteRunner, ls: &[u32], rep: &mut ScalingReport) {
    for &l in ls {
        let x = l as f64;
        rep.rows.push(match run.norm(l) {
            Ok(n) => ReportRow {
                x,
                label: format!("l={l}"),
                value: n.normalized,
                error: n.error / run.cascade.epsilon().powi(4),
                status: if n.budget_exhausted { RowStatus::Budget } else { RowStatus::Ok },
            },
            Err(e) => ReportRow::failed(x, format!("l={l}"), e),
        });
    }
}

pub(super) fn l2(run: &SuiteRunner) -> Result<Vec<ScalingReport>, HarnessError> {
    let ls = run.config.l_range((3, 5), 5)?;
    let mut rep = ScalingReport::new("l2", "||P_-9l f6||/eps^4", "l");
    norm_rows(run, &ls, &mut rep);
    rep.fit_and_check(1.0, 0.3);
    Ok(vec![rep])
}

pub(super) fn blowup_demo(run: &SuiteRunner) -> Result<Vec<ScalingReport>, HarnessError> {
    let ls = run.config.l_range((3, 5), 5)?;
    let mut rep = ScalingReport::new("blowup_demo", "||P_-9l f6||/eps^4", "l");
    let g0 = &run.cascade.g0;
    let eps = run.cascade.epsilon();
    let r0 = g0.l2_norm() / eps;
    rep.check(
        "initial data ||g0||/eps = O(1)",
        r0.is_finite() && r0 <= 4.0,
        format!("||g0||_L2/eps = {r0:.6}"),
    );
    let low = g0.eval([(-27.0f64).exp2(), 0.0]) / eps;
    rep.check("initial data nonvanishing at low frequency", low == 1.0, format!("g0(2^-27)/eps = {low}"));
    norm_rows(run, &ls, &mut rep);
    let vals: Vec<Option<f64>> = rep
        .rows
        .iter()
        .map(|r| (r.status == RowStatus::Ok).then_some(r.value))
        .collect();
    let increasing = vals.windows(2).all(|w| matches!(w, [Some(a), Some(b)] if b > a));
    rep.check(
        "norm column strictly increasing",
        increasing && !vals.is_empty(),
        vals.iter().map(|v| v.map_or("-".into(), |x| format!("{x:.4e}"))).collect::<Vec<_>>().join(" < "),
    );
    Ok(vec![rep])
}
