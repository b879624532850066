//! Sine and cosine integrals and the closed-form time kernels.

use num_complex::Complex64;
use thiserror::Error;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialError {
    #[error("Ci is defined only for x > 0 (got {0})")]
    CiDomain(f64),
}

/// `(Ci(x), Si(x))` with the standard normalisation
/// `Ci(x) = γ + ln x + ∫₀ˣ (cos u − 1)/u du`, so `Ci′(x) = cos x / x`.
///
/// Power series for `x ≤ 2`, a complex continued fraction for `E₁(ix)` beyond.
pub fn ci_si(x: f64) -> Result<(f64, f64), SpecialError> {
    if !(x > 0.0) {
        return Err(SpecialError::CiDomain(x));
    }
    Ok(ci_si_pos(x))
}

/// `Si(x)` for any real `x`.
pub fn si(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x < 0.0 {
        -ci_si_pos(-x).1
    } else {
        ci_si_pos(x).1
    }
}

/// `∫_a^b cos(u)/u du` for `0 < a ≤ b`.
pub fn diff_ci(a: f64, b: f64) -> Result<f64, SpecialError> {
    if !(a > 0.0) {
        return Err(SpecialError::CiDomain(a));
    }
    if a == b {
        return Ok(0.0);
    }
    if b <= 2.0 {
        // the γ + ln terms cancel analytically
        return Ok((b / a).ln() + cin_series(b) - cin_series(a));
    }
    Ok(ci_si_pos(b).0 - ci_si_pos(a).0)
}

/// `∫₀ˣ (cos u − 1)/u du` by its Taylor series (x ≤ 2).
fn cin_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..40 {
        term *= -x2 / ((2 * k - 1) * (2 * k)) as f64;
        let add = term / (2 * k) as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn ci_si_pos(x: f64) -> (f64, f64) {
    if x <= 2.0 {
        let x2 = x * x;
        let mut si = x;
        let mut term = x;
        for k in 1..40 {
            term *= -x2 / ((2 * k) * (2 * k + 1)) as f64;
            let add = term / (2 * k + 1) as f64;
            si += add;
            if add.abs() < 1e-18 * si.abs() {
                break;
            }
        }
        (EULER_GAMMA + x.ln() + cin_series(x), si)
    } else {
        // modified Lentz for E₁(ix) = e^{−ix} / (1 + ix − 1²/(3 + ix − 2²/(5 + ix − …)))
        let tiny = 1e-300;
        let mut b = Complex64::new(1.0, x);
        let mut c = Complex64::new(1.0 / tiny, 0.0);
        let mut d = b.inv();
        let mut h = d;
        for i in 1..100_000 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = (d * a + b).inv();
            c = b + c.inv() * a;
            let del = c * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
                break;
            }
        }
        h *= Complex64::new(x.cos(), -x.sin());
        (-h.re, FRAC_PI_2 + h.im)
    }
}

/// `∫_a^b e^{iαs}/s ds` for `0 < a ≤ b ≤ ∞` and any real `α`.
pub fn exp_over_s(alpha: f64, a: f64, b: f64) -> Result<Complex64, SpecialError> {
    if !(a > 0.0) {
        return Err(SpecialError::CiDomain(a));
    }
    if alpha == 0.0 {
        return Ok(Complex64::new((b / a).ln(), 0.0));
    }
    let w = alpha.abs();
    let (ca, sa) = ci_si_pos(w * a);
    let (re, im) = if b.is_infinite() {
        (-ca, FRAC_PI_2 - sa)
    } else {
        (diff_ci(w * a, w * b)?, ci_si_pos(w * b).1 - sa)
    };
    Ok(Complex64::new(re, alpha.signum() * im))
}

/// `E₀(z) = ∫₀¹ e^{izu} du = (e^{iz} − 1)/(iz)`.
#[inline]
pub fn e0(z: f64) -> Complex64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        Complex64::new(1.0 - z2 / 6.0 + z2 * z2 / 120.0, z / 2.0 - z * z2 / 24.0)
    } else {
        // (1 − cos z)/z through sin² to avoid cancellation
        let half = (0.5 * z).sin();
        Complex64::new(z.sin() / z, 2.0 * half * half / z)
    }
}

/// `E₁(z) = ∫₀¹ u e^{izu} du = e^{iz}/(iz) + (e^{iz} − 1)/z²`.
#[inline]
pub fn e1(z: f64) -> Complex64 {
    if z.abs() < 0.5 {
        // Σ (iz)^n / (n! (n + 2))
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.5, 0.0);
        let iz = Complex64::new(0.0, z);
        for n in 1..30 {
            term = term * iz / n as f64;
            let add = term / (n + 2) as f64;
            sum += add;
            if add.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        let (s, c) = z.sin_cos();
        let eiz = Complex64::new(c, s);
        eiz / Complex64::new(0.0, z) + (eiz - 1.0) / (z * z)
    }
}

/// Exact time integral `F_S(p) = ∫₀^S e^{isp} ds`.
#[inline]
pub fn time_kernel(s: f64, p: f64) -> Complex64 {
    s * e0(s * p)
}

/// `∂_p F_S(p) = i ∫₀^S s e^{isp} ds`.
#[inline]
pub fn time_kernel_dp(s: f64, p: f64) -> Complex64 {
    Complex64::new(0.0, s * s) * e1(s * p)
}

/// Filon step: `∫_a^{a+h} e^{iωs} (y₀ + (y₁ − y₀)(s − a)/h) ds`.
#[inline]
pub fn filon_linear(omega: f64, a: f64, h: f64, y0: Complex64, y1: Complex64) -> Complex64 {
    let z = omega * h;
    let (s, c) = (omega * a).sin_cos();
    Complex64::new(c, s) * h * (y0 * e0(z) + (y1 - y0) * e1(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Composite Simpson on a fine grid.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn classical_values() {
        // Si(1), Ci(1), Si(π), Ci(5) from standard tables
        let (c1, s1) = ci_si(1.0).unwrap();
        assert_relative_eq!(s1, 0.946_083_070_367_183_1, max_relative = 1e-14);
        assert_relative_eq!(c1, 0.337_403_922_900_968_1, max_relative = 1e-13);
        let (_, spi) = ci_si(std::f64::consts::PI).unwrap();
        assert_relative_eq!(spi, 1.851_937_051_982_466_2, max_relative = 1e-14);
        let (c5, s5) = ci_si(5.0).unwrap();
        assert_relative_eq!(c5, -0.190_029_749_656_643_9, max_relative = 1e-12);
        assert_relative_eq!(s5, 1.549_931_244_944_674_1, max_relative = 1e-14);
    }

    #[test]
    fn limits() {
        let (_, s) = ci_si(1e6).unwrap();
        assert!((s - FRAC_PI_2).abs() < 1e-5);
        let (_, s) = ci_si(1e-4).unwrap();
        assert!((s / 1e-4 - 1.0).abs() < 1e-8);
        assert!(ci_si(0.0).is_err());
        assert!(ci_si(-1.0).is_err());
    }

    #[test]
    fn derivative_is_exp_over_x() {
        let x = 5.0;
        let h = 1e-5;
        let (cp, sp) = ci_si(x + h).unwrap();
        let (cm, sm) = ci_si(x - h).unwrap();
        let d = Complex64::new((cp - cm) / (2.0 * h), (sp - sm) / (2.0 * h));
        let want = Complex64::new(x.cos(), x.sin()) / x;
        assert!((d - want).norm() < 1e-9);
    }

    #[test]
    fn continuity_across_branch_switch() {
        let (a, b) = ci_si(2.0).unwrap();
        let (c, d) = ci_si(2.0 + 1e-12).unwrap();
        assert!((a - c).abs() < 1e-11 && (b - d).abs() < 1e-11);
    }

    #[test]
    fn diff_ci_matches_quadrature() {
        for &(a, b) in &[(1e-3, 0.5), (0.3, 7.0), (2.5, 40.0), (1e-6, 1e-5)] {
            let q = simpson(|u| u.cos() / u, a, b, 200_000);
            assert_relative_eq!(diff_ci(a, b).unwrap(), q, max_relative = 1e-8, epsilon = 1e-12);
        }
    }

    #[test]
    fn kernels_match_quadrature() {
        for &(s, p) in &[(1.0, 0.0), (3.0, 0.7), (10.0, -2.3), (0.5, 1e-5), (7.0, 0.06)] {
            let re = simpson(|t| (t * p).cos(), 0.0, s, 20_000);
            let im = simpson(|t| (t * p).sin(), 0.0, s, 20_000);
            assert!((time_kernel(s, p) - Complex64::new(re, im)).norm() < 1e-10);
            let re = simpson(|t| -t * (t * p).sin(), 0.0, s, 20_000);
            let im = simpson(|t| t * (t * p).cos(), 0.0, s, 20_000);
            assert!((time_kernel_dp(s, p) - Complex64::new(re, im)).norm() < 1e-9);
        }
    }

    #[test]
    fn tail_integral_to_infinity() {
        // ∫_a^∞ e^{iαs}/s ds against a long truncated quadrature plus the asymptotic remainder
        let (alpha, a) = (1.3, 2.0);
        let v = exp_over_s(alpha, a, f64::INFINITY).unwrap();
        let b = 2000.0 * std::f64::consts::PI / alpha;
        let re = simpson(|s| (alpha * s).cos() / s, a, b, 2_000_000);
        let im = simpson(|s| (alpha * s).sin() / s, a, b, 2_000_000);
        // remainder ∫_b^∞ e^{iαs}/s ≈ i e^{iαb}/(αb)
        let rem = Complex64::new(0.0, 1.0) * Complex64::new((alpha * b).cos(), (alpha * b).sin()) / (alpha * b);
        assert!((v - Complex64::new(re, im) - rem).norm() < 1e-7);
        let neg = exp_over_s(-alpha, a, f64::INFINITY).unwrap();
        assert!((neg - v.conj()).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn filon_is_exact_for_linear_data(omega in -50.0f64..50.0, a in 0.0f64..10.0, h in 1e-3f64..3.0) {
            let y0 = Complex64::new(0.3, -1.2);
            let y1 = Complex64::new(-0.7, 0.4);
            let f = |s: f64| {
                let y = y0 + (y1 - y0) * ((s - a) / h);
                Complex64::new((omega * s).cos(), (omega * s).sin()) * y
            };
            let re = simpson(|s| f(s).re, a, a + h, 4000);
            let im = simpson(|s| f(s).im, a, a + h, 4000);
            let v = filon_linear(omega, a, h, y0, y1);
            prop_assert!((v - Complex64::new(re, im)).norm() < 1e-8 * (1.0 + h));
        }

        #[test]
        fn si_is_odd_and_bounded(x in 0.0f64..200.0) {
            prop_assert_eq!(si(-x), -si(x));
            prop_assert!(si(x) <= 1.852);
        }
    }
}
