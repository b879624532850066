//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # the f₄ triple, speeds given as c (not c²)
//! c_sigma = 1
//! c_mu    = sqrt(2)
//! c_nu    = 1
//! b_sigma = 1
//! b_mu    = 2
//! b_nu    = -1
//! epsilon = 1e-3
//! l_min   = 4
//! l_max   = 8
//! ```
//!
//! Every key is optional; unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use num_rational::BigRational;

use super::HarnessError;
use crate::oscint::QuadConfig;
use crate::phase::{parse_exact, ExactReal, ExactTriple, InteractionTriple};

/// Documented configuration keys, in file order.
pub const CONFIG_KEYS: [(&str, &str); 15] = [
    ("c_sigma", "speed of the σ branch (exact: 1, 3/2, sqrt(2))"),
    ("c_mu", "speed of the μ branch"),
    ("c_nu", "speed of the ν branch"),
    ("b_sigma", "signed mass of the σ branch (rational)"),
    ("b_mu", "signed mass of the μ branch"),
    ("b_nu", "signed mass of the ν branch"),
    ("epsilon", "size of the initial data"),
    ("l_min", "smallest depth l (suite default if absent)"),
    ("l_max", "largest depth l (suite default if absent)"),
    ("quad_tol", "relative tolerance of the adaptive quadrature"),
    ("cell_budget", "cell budget per integral"),
    ("ibp_order", "integration-by-parts order of the outer tail bounds"),
    ("s_cut_policy", "`default` or a rescaled time where the time tail takes over"),
    ("out", "output directory"),
    ("seed", "seed for scan jitter"),
];

/// Where the time integral switches to its stationary-phase tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SCutPolicy {
    Default,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `(c, b)` of σ, μ, ν as exact numbers.
    pub speeds: [ExactReal; 3],
    pub masses: [BigRational; 3],
    pub epsilon: f64,
    pub l_min: Option<u32>,
    pub l_max: Option<u32>,
    pub quad_tol: f64,
    pub cell_budget: usize,
    pub ibp_order: u32,
    pub s_cut_policy: SCutPolicy,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ex = |s: &str| parse_exact(s).expect("literal");
        let q = QuadConfig::default();
        Self {
            speeds: [ex("1"), ex("sqrt(2)"), ex("1")],
            masses: [1, 2, -1].map(|b| BigRational::from_integer(b.into())),
            epsilon: 1e-3,
            l_min: None,
            l_max: None,
            quad_tol: q.tol,
            cell_budget: q.cell_budget,
            ibp_order: q.ibp_order,
            s_cut_policy: SCutPolicy::Default,
            out: PathBuf::from("kgcascade-out"),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn exact_triple(&self) -> ExactTriple {
        ExactTriple {
            c2: [0, 1, 2].map(|i| self.speeds[i].square()),
            b: self.masses.clone(),
        }
    }

    pub fn triple(&self) -> Result<InteractionTriple, HarnessError> {
        Ok(self.exact_triple().to_triple()?)
    }

    pub fn quad(&self) -> QuadConfig {
        let mut q = QuadConfig {
            tol: self.quad_tol,
            cell_budget: self.cell_budget,
            ibp_order: self.ibp_order,
            ..QuadConfig::default()
        };
        if let SCutPolicy::Fixed(s) = self.s_cut_policy {
            q.s_cut = s;
        }
        q
    }

    /// `[l_min, l_max]`, falling back to `default`, capped at `limit`.
    pub fn l_range(&self, default: (u32, u32), limit: u32) -> Result<Vec<u32>, HarnessError> {
        let lo = self.l_min.unwrap_or(default.0);
        let hi = self.l_max.unwrap_or(default.1);
        if lo > hi {
            return Err(HarnessError::Domain(format!("l_min = {lo} exceeds l_max = {hi}")));
        }
        if hi > limit {
            return Err(HarnessError::Domain(format!("l = {hi} beyond the desk-scale limit {limit}")));
        }
        Ok((lo..=hi).collect())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Domain(m));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon = {} must be positive", self.epsilon));
        }
        if !(self.quad_tol > 0.0 && self.quad_tol < 1.0) {
            return bad(format!("quad_tol = {} must lie in (0, 1)", self.quad_tol));
        }
        if self.cell_budget == 0 {
            return bad("cell_budget must be positive".into());
        }
        if self.ibp_order == 0 {
            return bad("ibp_order must be positive".into());
        }
        if let SCutPolicy::Fixed(s) = self.s_cut_policy {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("s_cut_policy = {s} must be positive"));
            }
        }
        if let (Some(a), Some(b)) = (self.l_min, self.l_max) {
            if a > b {
                return bad(format!("l_min = {a} exceeds l_max = {b}"));
            }
        }
        self.triple()?;
        Ok(())
    }

    /// Renders the configuration in the file format, every key present.
    pub fn to_text(&self) -> String {
        let ex = |x: &ExactReal| match x {
            ExactReal::Rational(r) => r.to_string(),
            ExactReal::Sqrt(r) => format!("sqrt({r})"),
        };
        let mut s = String::new();
        for (i, name) in ["sigma", "mu", "nu"].iter().enumerate() {
            s += &format!("c_{name} = {}\n", ex(&self.speeds[i]));
        }
        for (i, name) in ["sigma", "mu", "nu"].iter().enumerate() {
            s += &format!("b_{name} = {}\n", self.masses[i]);
        }
        s += &format!("epsilon = {:e}\n", self.epsilon);
        if let Some(l) = self.l_min {
            s += &format!("l_min = {l}\n");
        }
        if let Some(l) = self.l_max {
            s += &format!("l_max = {l}\n");
        }
        s += &format!("quad_tol = {:e}\n", self.quad_tol);
        s += &format!("cell_budget = {}\n", self.cell_budget);
        s += &format!("ibp_order = {}\n", self.ibp_order);
        match self.s_cut_policy {
            SCutPolicy::Default => s += "s_cut_policy = default\n",
            SCutPolicy::Fixed(v) => s += &format!("s_cut_policy = {v}\n"),
        }
        s += &format!("out = {}\n", self.out.display());
        s += &format!("seed = {}\n", self.seed);
        s
    }
}

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, HarnessError> {
    v.parse().map_err(|_| HarnessError::Config {
        line,
        msg: format!("{key}: cannot parse {v:?}"),
    })
}

impl FromStr for ExperimentConfig {
    type Err = HarnessError;

    fn from_str(text: &str) -> Result<Self, HarnessError> {
        let mut seen = BTreeMap::new();
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| HarnessError::Config {
                line,
                msg: format!("expected `key = value`, got {body:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !CONFIG_KEYS.iter().any(|(k, _)| *k == key) {
                return Err(HarnessError::Config {
                    line,
                    msg: format!("unknown key {key:?}"),
                });
            }
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(HarnessError::Config {
                    line,
                    msg: format!("{key} already set on line {prev}"),
                });
            }
            let exact = |v: &str| {
                parse_exact(v).map_err(|e| HarnessError::Config {
                    line,
                    msg: format!("{key}: {e}"),
                })
            };
            let slot = |name: &str| ["sigma", "mu", "nu"].iter().position(|n| *n == name).expect("known key");
            match key {
                k if k.starts_with("c_") => cfg.speeds[slot(&k[2..])] = exact(value)?,
                k if k.starts_with("b_") => {
                    let b = exact(value)?.as_rational().cloned().ok_or_else(|| HarnessError::Config {
                        line,
                        msg: format!("{k} must be rational"),
                    })?;
                    cfg.masses[slot(&k[2..])] = b;
                }
                "epsilon" => cfg.epsilon = num(line, key, value)?,
                "l_min" => cfg.l_min = Some(num(line, key, value)?),
                "l_max" => cfg.l_max = Some(num(line, key, value)?),
                "quad_tol" => cfg.quad_tol = num(line, key, value)?,
                "cell_budget" => cfg.cell_budget = num(line, key, value)?,
                "ibp_order" => cfg.ibp_order = num(line, key, value)?,
                "s_cut_policy" => {
                    cfg.s_cut_policy = if value == "default" {
                        SCutPolicy::Default
                    } else {
                        SCutPolicy::Fixed(num(line, key, value)?)
                    }
                }
                "out" => cfg.out = PathBuf::from(value),
                "seed" => cfg.seed = num(line, key, value)?,
                _ => unreachable!("key list checked above"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
