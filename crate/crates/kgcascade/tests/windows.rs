//! Windowed Duhamel integrals: the first-iteration mass sits at `|η| ∼ 2^{−l}`.

use kgcascade::oscint::QuadConfig;
use kgcascade::profiles::{Cascade, ProfileId, WindowSpec};

#[test]
fn off_resonance_window_is_smaller_by_two_to_the_half_l() {
    let l = 8;
    let c = Cascade::new(1e-3, QuadConfig::default()).unwrap();
    let xi = [(-3.0 * l as f64).exp2(), 0.0];
    let main = c.duhamel_window(ProfileId::F4, WindowSpec::first_main(), xi, l, None).unwrap();
    let shifted = WindowSpec::new(WindowSpec::first_main().time, (-0.5, -0.4)).unwrap();
    let off = c.duhamel_window(ProfileId::F4, shifted, xi, l, None).unwrap();
    // the off-resonance value is an oscillatory remainder, so its bound counts
    let off_size = off.value.norm() + off.error + off.tail_bound;
    let ratio = (main.value.norm() - main.error) / off_size;
    assert!(ratio >= (0.5 * l as f64).exp2(), "ratio {ratio}");
}
