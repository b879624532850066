//! First iterates against a brute-force evaluation with the time integral
//! done in closed form: `∫₀ᵗ e^{isΦ} ds = (e^{itΦ} − 1)/(iΦ)`.

mod common;

use num_complex::Complex64;

use common::brute_polar;
use kgcascade::dyadic::{eval_phi, CutoffSpec};
use kgcascade::oscint::QuadConfig;
use kgcascade::phase::{phi, InteractionTriple};
use kgcascade::profiles::{Cascade, ProfileId};

/// `(e^{ix} − 1)/(ix)`, with the series near zero.
fn kernel(x: f64) -> Complex64 {
    if x.abs() < 1e-4 {
        Complex64::new(1.0 - x * x / 6.0, x / 2.0)
    } else {
        (Complex64::new(0.0, x).exp() - 1.0) / Complex64::new(0.0, x)
    }
}

fn oracle(triple: &InteractionTriple, eps: f64, xi: [f64; 2], t: f64) -> Complex64 {
    let spec = CutoffSpec::default();
    let g = |z: [f64; 2]| eps * eval_phi(&spec, z[0].hypot(z[1]));
    let r_max = 1.2 + xi[0].hypot(xi[1]);
    brute_polar(
        |r, th| {
            let eta = [r * th.cos(), r * th.sin()];
            let amp = g([xi[0] - eta[0], xi[1] - eta[1]]) * g(eta);
            if amp == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            amp * t * kernel(t * phi(triple, xi, eta))
        },
        0.0,
        r_max,
        2048,
        1024,
    )
    .0
}

fn check(which: ProfileId, triple: InteractionTriple, l: u32, t_exp: f64) {
    let eps = 1e-3;
    let c = Cascade::new(eps, QuadConfig::default()).unwrap();
    let xi = [0.8 * (-3.0 * l as f64).exp2(), 0.0];
    let got = c.first_iteration(which, l, t_exp, xi).unwrap();
    let want = oracle(&triple, eps, xi, t_exp.exp2());
    let rel = (got.value - want).norm() / want.norm();
    assert!(rel < 1e-3, "{which} l={l} t=2^{t_exp}: engine {} oracle {want} rel {rel:e}", got.value);
}

#[test]
fn f4_before_the_time_scale() {
    check(ProfileId::F4, InteractionTriple::f4(), 2, 5.0);
}

#[test]
fn f4_after_the_time_scale() {
    check(ProfileId::F4, InteractionTriple::f4(), 2, 9.0);
}

#[test]
fn f5_after_the_time_scale() {
    check(ProfileId::F5, InteractionTriple::f5(), 2, 9.0);
}
