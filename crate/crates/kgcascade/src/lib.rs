//! Numerical laboratory for the degenerate-resonance cascade of 2D multispeed
//! Klein-Gordon systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`dyadic`]: Littlewood-Paley cutoffs `φ`, `φ_k`, `φ_I` and frequency projectors.
//! * [`phase`]: dispersion relations, the phase family `Φ_{σμν}`, derivatives, rescaling.
//! * [`critical`]: the one-dimensional critical-point reduction and annulus gradient scans.
//! * [`oscint`]: adaptive oscillatory quadrature, stationary phase, `Ci`/`Si`.
//! * [`profiles`]: the two-stage Duhamel iteration `ĝ₀ → f̂₄, f̂₅ → f̂₆`.
//! * [`harness`]: configuration, suites, slope fits, CSV/JSON/SVG reports.

pub mod critical;
pub mod dyadic;
pub mod harness;
pub mod oscint;
pub mod phase;
pub mod profiles;

/// A point of `ℝ²`.
pub type Point = [f64; 2];

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cutoffs.md")]
    mod cutoffs {}
    #[doc = include_str!("../../../book/src/phase.md")]
    mod phase {}
    #[doc = include_str!("../../../book/src/critical.md")]
    mod critical {}
    #[doc = include_str!("../../../book/src/quadrature.md")]
    mod quadrature {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
