use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::oscint::bilinear::RadialInput;

fn cascade(eps: f64) -> Cascade {
    Cascade::new(eps, QuadConfig::default()).unwrap()
}

fn xi(l: u32) -> Point {
    [(-3.0 * l as f64).exp2(), 0.0]
}

#[test]
fn cascade_system_is_consistent() {
    let sys = SystemSpec::cascade();
    sys.validate().unwrap();
    let f6 = sys.equation(ProfileId::F6).unwrap();
    assert_eq!(f6.inputs, [ProfileId::F5, ProfileId::F4]);
    assert_eq!(f6.triple, InteractionTriple::f4());
}

#[test]
fn conjugation_must_follow_mass_signs() {
    let mut sys = SystemSpec::cascade();
    sys.equations[0].conjugate = [false, false];
    assert!(matches!(sys.validate(), Err(ProfileError::System(_))));
}

#[test]
fn inputs_must_be_defined_first() {
    let mut sys = SystemSpec::cascade();
    sys.equations.swap(0, 2);
    assert!(matches!(sys.validate(), Err(ProfileError::System(_))));
}

#[test]
fn profile_ids_round_trip() {
    for p in [ProfileId::G0, ProfileId::F4, ProfileId::F5, ProfileId::F6] {
        assert_eq!(p.to_string().parse::<ProfileId>().unwrap(), p);
    }
    assert!("f7".parse::<ProfileId>().is_err());
}

#[test]
fn initial_data_plateau_and_support() {
    let g = g0_init(1e-3, CutoffSpec::default()).unwrap();
    assert_eq!(g.eval([1.0, 0.0]), 1e-3);
    assert_eq!(g.eval([0.0, 1.3]), 0.0);
    assert_eq!(g.support(), 1.2);
    assert!(g0_init(0.0, CutoffSpec::default()).is_err());
}

#[test]
fn initial_norm_matches_midpoint_sum() {
    let g = g0_init(1e-3, CutoffSpec::default()).unwrap();
    let n = 200_000;
    let h = 1.2 / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let r = (i as f64 + 0.5) * h;
        acc += g.cutoff.eval(r).powi(2) * r * h;
    }
    let want = 1e-3 * (2.0 * std::f64::consts::PI * acc).sqrt();
    assert_relative_eq!(g.l2_norm(), want, max_relative = 1e-8);
    assert!(g.l2_norm() <= 1e-3 * (std::f64::consts::PI * 1.44).sqrt());
}

#[test]
fn zero_time_gives_zero() {
    let c = cascade(1e-3);
    let v = c.first_iteration(ProfileId::F4, 4, f64::NEG_INFINITY, xi(4)).unwrap();
    assert_eq!(v.value, Complex64::new(0.0, 0.0));
}

#[test]
fn shell_precondition_is_enforced() {
    let c = cascade(1e-3);
    let err = c.first_iteration(ProfileId::F4, 4, 17.0, [2.0 * (-12f64).exp2(), 0.0]);
    assert!(matches!(err, Err(ProfileError::Domain(_))));
    let err = c.first_iteration(ProfileId::F6, 4, 17.0, xi(4));
    assert!(matches!(err, Err(ProfileError::Domain(_))));
    let err = c.first_iteration_gradient(ProfileId::F4, 4, 16.0, xi(4));
    assert!(matches!(err, Err(ProfileError::Domain(_))));
}

#[test]
fn epsilon_scaling_is_exact() {
    let a = cascade(1e-3).first_iteration(ProfileId::F4, 4, 17.0, xi(4)).unwrap();
    let b = cascade(2e-3).first_iteration(ProfileId::F4, 4, 17.0, xi(4)).unwrap();
    assert_eq!(b.value, a.value * 4.0);
    assert_eq!(b.normalized, a.normalized);
}

#[test]
fn reflection_symmetry() {
    let c = cascade(1e-3);
    let p = c.first_iteration(ProfileId::F5, 4, 17.0, [0.0, 0.8 * (-12f64).exp2()]).unwrap();
    let m = c.first_iteration(ProfileId::F5, 4, 17.0, [0.0, -0.8 * (-12f64).exp2()]).unwrap();
    assert!((p.value - m.value).norm() <= p.error + m.error);
}

#[test]
fn case_bounds_hold_below_stabilization() {
    let c = cascade(1e-3);
    for l in [3u32, 4] {
        let lf = l as f64;
        for te in [0.0, 0.5 * lf, lf, 2.0 * lf, 3.0 * lf, 4.0 * lf] {
            let v = c.first_iteration(ProfileId::F4, l, te, xi(l)).unwrap();
            let cb = c.case_bound(ProfileId::F4, l, te.exp2()).unwrap();
            assert!(v.normalized.norm() <= cb.bound, "l={l}, t=2^{te}: {} > {}", v.normalized.norm(), cb.bound);
        }
    }
    assert_eq!(c.case_bound(ProfileId::F4, 4, 8.0).unwrap().case, 1);
    assert_eq!(c.case_bound(ProfileId::F4, 4, 256.0).unwrap().case, 2);
    assert_eq!(c.case_bound(ProfileId::F4, 4, 2f64.powi(17)).unwrap().case, 3);
}

#[test]
fn series_matches_single_evaluations() {
    let c = cascade(1e-3);
    let times = [2f64.powi(10), 2f64.powi(17), 2f64.powi(22)];
    let s = c.first_iteration_series(ProfileId::F4, 4, &times, xi(4)).unwrap();
    for (t, e) in times.iter().zip(&s) {
        let one = c.first_iteration_at(ProfileId::F4, 4, *t, xi(4)).unwrap();
        assert!((one.value - e.value).norm() <= 1e-12 * one.value.norm());
    }
}

#[test]
fn gradient_matches_finite_difference() {
    let c = cascade(1e-3);
    let (l, te) = (4, 17.0);
    let a = (-12f64).exp2();
    let g = c.first_iteration_gradient(ProfileId::F4, l, te, [a, 0.0]).unwrap();
    let h = 1e-3 * a;
    let fp = c.first_iteration(ProfileId::F4, l, te, [a + h, 0.0]).unwrap().value;
    let fm = c.first_iteration(ProfileId::F4, l, te, [a - h, 0.0]).unwrap().value;
    let fd = (fp - fm) / (2.0 * h);
    assert!((g.radial - fd).norm() < 1e-3 * fd.norm());
    assert!(g.phase_term.norm() > 1e3 * g.amplitude_term.norm());
}

#[test]
fn time_derivative_matches_difference_quotient() {
    let c = cascade(1e-3);
    let l = 4;
    let t = 2f64.powf(4.2 * l as f64);
    let d = c.time_derivative(ProfileId::F4, l, t, xi(l)).unwrap();
    let h = 1e-4 * t;
    let fp = c.first_iteration_at(ProfileId::F4, l, t + h, xi(l)).unwrap().value;
    let fm = c.first_iteration_at(ProfileId::F4, l, t - h, xi(l)).unwrap().value;
    let fd = (fp - fm) / (2.0 * h);
    assert!((d.value - fd).norm() < 1e-3 * d.value.norm(), "{} vs {}", d.value, fd);
    assert!(c.time_derivative(ProfileId::F4, l, 2f64.powi(16), xi(l)).is_err());
}

#[test]
fn first_main_window_has_the_first_iterate_size() {
    let c = cascade(1e-3);
    let l = 6;
    let w = c.duhamel_window(ProfileId::F4, WindowSpec::first_main(), xi(l), l, None).unwrap();
    let m = w.normalized.norm() / (2.0 * l as f64).exp2();
    assert!((0.25..=4.0).contains(&m), "{m}");
}

#[test]
fn zero_length_time_window_vanishes() {
    let c = cascade(1e-3);
    let w = WindowSpec::new((4.0, 4.0), (-1.03, -0.99)).unwrap();
    let v = c.duhamel_window(ProfileId::F4, w, xi(4), 4, None).unwrap();
    assert_eq!(v.value, Complex64::new(0.0, 0.0));
    assert!(WindowSpec::new((4.0, 3.0), (-1.0, 0.0)).is_err());
}

#[test]
fn second_window_requires_grids() {
    let c = cascade(1e-3);
    let x = [(-27f64).exp2(), 0.0];
    let e = c.duhamel_window(ProfileId::F6, WindowSpec::second_main(), x, 3, None);
    assert!(matches!(e, Err(ProfileError::Coverage { .. })));
}

#[test]
fn far_shells_vanish() {
    let c = cascade(1e-3);
    let m = c.mid_frequency_bound(ProfileId::F4, 3, &[1.0, 4096.0], 9, false).unwrap();
    assert_eq!(m.sup, 0.0);
    let v = c.first_iterate_value(ProfileId::F4, [2.5, 0.0], &[10.0]).unwrap();
    assert_eq!(v[0].value, Complex64::new(0.0, 0.0));
}

fn toy_grid() -> ProfileGrid {
    let log_r: Vec<f64> = (0..12).map(|i| -4.0 + 0.5 * i as f64).collect();
    let times = vec![1.0, 4.0, f64::INFINITY];
    let values = log_r
        .iter()
        .map(|k| {
            let r = k.exp2();
            times
                .iter()
                .enumerate()
                .map(|(j, _)| {
                    if r >= 2.4 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(r.cos(), 0.1 * j as f64 + r) / 3.0
                    }
                })
                .collect()
        })
        .collect();
    ProfileGrid {
        profile: ProfileId::F4,
        l: 2,
        epsilon: 1e-3,
        n_angles: 4,
        log_r: log_r.clone(),
        times,
        values,
        errors: vec![1e-9; 12],
        decay: vec![0.5; 12],
        support: 2.4,
    }
}

#[test]
fn grid_file_round_trip() {
    let g = toy_grid();
    let mut buf = Vec::new();
    g.write_to(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with(GRID_FORMAT));
    let back = ProfileGrid::read_from(buf.as_slice()).unwrap();
    assert_eq!(back, g);
}

#[test]
fn grid_file_rejects_tampering() {
    let g = toy_grid();
    let mut buf = Vec::new();
    g.write_to(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let v0 = text.replacen("kgcascade-profile-grid v1", "kgcascade-profile-grid v9", 1);
    assert!(matches!(ProfileGrid::read_from(v0.as_bytes()), Err(ProfileError::Format { line: 1, .. })));
    // a second angle that disagrees with the first breaks radial symmetry
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let idx = lines.iter().position(|l| l.starts_with("-4 1 0 ")).unwrap();
    lines[idx] = "-4 1 0 5 5".into();
    let bad = lines.join("\n");
    assert!(matches!(ProfileGrid::read_from(bad.as_bytes()), Err(ProfileError::Format { .. })));
    let short: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
    assert!(ProfileGrid::read_from(short.as_bytes()).is_err());
}

#[test]
fn grid_time_interpolation() {
    let g = toy_grid();
    let at = |s: f64| g.column(s).unwrap()[3];
    let (v1, v4, vi) = (g.values[3][0], g.values[3][1], g.values[3][2]);
    assert_eq!(at(1.0), v1);
    assert_eq!(at(0.0), Complex64::new(0.0, 0.0));
    assert!((at(0.5) - v1 * 0.5).norm() < 1e-15);
    assert!((at(2.0) - (v1 + v4) * 0.5).norm() < 1e-15);
    assert!((at(8.0) - (vi + (v4 - vi) * 0.5)).norm() < 1e-15);
    let mut finite = g.clone();
    finite.times.pop();
    for row in finite.values.iter_mut() {
        row.pop();
    }
    assert!(matches!(finite.column(10.0), Err(ProfileError::Coverage { .. })));
}

#[test]
fn grid_coverage_errors_name_the_gap() {
    let mut g = toy_grid();
    g.check_rows(-4.0, 1.0, 0.5).unwrap();
    match g.check_rows(-6.0, 1.0, 0.5) {
        Err(ProfileError::Coverage { what }) => assert!(what.contains("2^-4")),
        other => panic!("{other:?}"),
    }
    g.log_r.remove(5);
    g.values.remove(5);
    match g.check_rows(-4.0, 1.0, 0.5) {
        Err(ProfileError::Coverage { what }) => assert!(what.contains("between")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn grid_support_check() {
    let g = toy_grid();
    let rep = support_check(&g);
    assert!(rep.passes);
    assert!(rep.measured_radius <= 2.4);
    let mut bad = g.clone();
    bad.values[11][0] = Complex64::new(1.0, 0.0);
    assert!(!support_check(&bad).passes);
}

#[test]
fn grid_input_interpolates_first_iterate() {
    let c = cascade(1e-3);
    // coarse deep shells, fine steps where the resonant set meets the cutoff ramp
    let mut rows: Vec<f64> = (0..7).map(|i| -9.0 + 0.5 * i as f64).collect();
    rows.extend((0..17).map(|i| -4.5 + i as f64 / 16.0));
    let g = c.build_grid(ProfileId::F4, 1, &rows, &[f64::INFINITY]).unwrap();
    let inp = g.input(f64::INFINITY, false).unwrap();
    for k in [-7.75, -6.25, -4.3, -3.8] {
        let r = f64::exp2(k);
        let direct = c.first_iterate_value(ProfileId::F4, [r, 0.0], &[f64::INFINITY]).unwrap()[0].value;
        let rel = (inp.value(r) - direct).norm() / direct.norm();
        assert!(rel < 1e-2, "k = {k}: {rel}");
    }
    // conjugated slot
    let conj = g.input(f64::INFINITY, true).unwrap();
    assert_eq!(conj.value(0.3), inp.value(0.3).conj());
    assert_eq!(inp.value(2.5), Complex64::new(0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn grid_input_extrapolates_with_power_law(k in -40.0f64..-8.5) {
        let g = toy_grid();
        let inp = g.input(4.0, false).unwrap();
        let r0 = f64::exp2(-4.0);
        let r = f64::exp2(k);
        let ratio = inp.value(r) / inp.value(r0);
        prop_assert!((ratio.norm() - (r / r0).powf(-2.0 / 3.0)).abs() < 1e-9 * ratio.norm());
    }

    #[test]
    fn case_bound_is_monotone_in_time(a in 0.0f64..30.0, b in 0.0f64..30.0) {
        let c = cascade(1e-3);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let blo = c.case_bound(ProfileId::F4, 5, lo.exp2()).unwrap().bound;
        let bhi = c.case_bound(ProfileId::F4, 5, hi.exp2()).unwrap().bound;
        prop_assert!(blo <= bhi * (1.0 + 1e-12));
    }
}
