//! Configuration, suites, slope fits and CSV/JSON/SVG reports.
//!
//! A suite turns one module operation into a scaling experiment: it sweeps
//! `l` (or a shell index), records each measurement with its error estimate,
//! fits `log₂ value` against `l` and checks the slope. Row failures are
//! recorded in the row; they never abort the suite.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use num_rational::BigRational;
use thiserror::Error;

use crate::critical::CriticalError;
use crate::phase::PhaseError;
use crate::profiles::{default_rows, Cascade, NormReport, ProfileError, ProfileGrid, ProfileId, SecondInputs};

mod config;
mod report;
mod suites;

pub use config::{ExperimentConfig, SCutPolicy, CONFIG_KEYS};
pub use report::{
    effective_tolerance, fit_frequency, fit_slope, fit_slope_with_errors, render_csv, render_json, Check, ReportRow,
    RowStatus, ScalingReport, SlopeFit, CSV_COLUMNS, CSV_SCHEMA, JSON_SCHEMA,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Critical(#[from] CriticalError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// `c ↦ (2c + 2)/3`: the exponent of the next cascade output when the input
/// grows like `2^{c·3j}`.
pub fn exponent_map(c: &BigRational) -> BigRational {
    let two = BigRational::from_integer(2.into());
    let three = BigRational::from_integer(3.into());
    (two.clone() * c + two) / three
}

/// `[c, map(c), map²(c), …]` with `n` applications.
pub fn exponent_iterates(c: &BigRational, n: usize) -> Vec<BigRational> {
    let mut out = vec![c.clone()];
    for _ in 0..n {
        let next = exponent_map(out.last().expect("nonempty"));
        out.push(next);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Degeneracy,
    Lemma21,
    Critical,
    First,
    Gradient,
    Midfreq,
    Tderiv,
    Second,
    L2,
    BlowupDemo,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Degeneracy,
        Suite::Lemma21,
        Suite::Critical,
        Suite::First,
        Suite::Gradient,
        Suite::Midfreq,
        Suite::Tderiv,
        Suite::Second,
        Suite::L2,
        Suite::BlowupDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Degeneracy => "degeneracy",
            Suite::Lemma21 => "lemma21",
            Suite::Critical => "critical",
            Suite::First => "first",
            Suite::Gradient => "gradient",
            Suite::Midfreq => "midfreq",
            Suite::Tderiv => "tderiv",
            Suite::Second => "second",
            Suite::L2 => "l2",
            Suite::BlowupDemo => "blowup_demo",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s || x.name().replace('_', "-") == s)
            .ok_or_else(|| HarnessError::UnknownSuite(s.into()))
    }
}

/// Runs suites against one configuration, sharing the expensive
/// second-iteration input grids and norms between them.
pub struct SuiteRunner {
    pub config: ExperimentConfig,
    pub cascade: Cascade,
    grid_dir: Option<PathBuf>,
    inputs: Mutex<BTreeMap<u32, Arc<SecondInputs>>>,
    norms: Mutex<BTreeMap<u32, Result<NormReport, String>>>,
}

impl SuiteRunner {
    pub fn new(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let cascade = Cascade::new(config.epsilon, config.quad())?;
        Ok(Self {
            config,
            cascade,
            grid_dir: None,
            inputs: Mutex::new(BTreeMap::new()),
            norms: Mutex::new(BTreeMap::new()),
        })
    }

    /// Loads input grids from `dir` when present and matching, and saves
    /// freshly built ones there.
    pub fn with_grid_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.grid_dir = Some(dir.into());
        self
    }

    pub fn run(&self, suite: Suite) -> Result<Vec<ScalingReport>, HarnessError> {
        let start = Instant::now();
        let mut reports = match suite {
            Suite::Degeneracy => suites::degeneracy(self)?,
            Suite::Lemma21 => suites::lemma21(self)?,
            Suite::Critical => suites::critical(self)?,
            Suite::First => suites::first(self)?,
            Suite::Gradient => suites::gradient(self)?,
            Suite::Midfreq => suites::midfreq(self)?,
            Suite::Tderiv => suites::tderiv(self)?,
            Suite::Second => suites::second(self)?,
            Suite::L2 => suites::l2(self)?,
            Suite::BlowupDemo => suites::blowup_demo(self)?,
        };
        let dt = start.elapsed().as_secs_f64();
        for r in &mut reports {
            r.runtime_s = dt;
        }
        Ok(reports)
    }

    /// `f̂₄^∞`, `f̂₅^∞` grids for depth `l`, built once.
    pub fn second_inputs(&self, l: u32) -> Result<Arc<SecondInputs>, HarnessError> {
        if let Some(x) = self.inputs.lock().expect("poisoned").get(&l) {
            return Ok(x.clone());
        }
        let inputs = Arc::new(SecondInputs {
            f4: self.grid(ProfileId::F4, l)?,
            f5: self.grid(ProfileId::F5, l)?,
        });
        self.inputs.lock().expect("poisoned").insert(l, inputs.clone());
        Ok(inputs)
    }

    fn grid(&self, p: ProfileId, l: u32) -> Result<ProfileGrid, HarnessError> {
        let rows = default_rows(l, 2.4);
        let path = self.grid_dir.as_ref().map(|d| d.join(format!("{p}_l{l}.grid")));
        if let Some(path) = &path {
            if let Some(g) = load_matching(path, p, l, self.config.epsilon, &rows) {
                return Ok(g);
            }
        }
        let g = self.cascade.build_grid(p, l, &rows, &[f64::INFINITY])?;
        if let Some(path) = &path {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            g.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        }
        Ok(g)
    }

    /// `‖P_{−9l} f₆‖` at `t = 2^{12.5 l}`, computed once per `l`.
    pub fn norm(&self, l: u32) -> Result<NormReport, String> {
        if let Some(x) = self.norms.lock().expect("poisoned").get(&l) {
            return x.clone();
        }
        let r = self
            .second_inputs(l)
            .map_err(|e| e.to_string())
            .and_then(|inp| {
                self.cascade
                    .l2_norm_lowfreq(&inp, l, SECOND_T_EXP * l as f64)
                    .map_err(|e| e.to_string())
            });
        self.norms.lock().expect("poisoned").insert(l, r.clone());
        r
    }
}

/// `t = 2^{12.5 l}` for second-iteration measurements.
pub const SECOND_T_EXP: f64 = 12.5;

fn load_matching(path: &Path, p: ProfileId, l: u32, epsilon: f64, rows: &[f64]) -> Option<ProfileGrid> {
    let f = std::fs::File::open(path).ok()?;
    let g = ProfileGrid::read_from(std::io::BufReader::new(f)).ok()?;
    (g.profile == p && g.l == l && g.epsilon == epsilon && g.log_r == rows).then_some(g)
}

/// Runs one suite with a fresh runner.
pub fn run_suite(config: &ExperimentConfig, suite: Suite) -> Result<Vec<ScalingReport>, HarnessError> {
    SuiteRunner::new(config.clone())?.run(suite)
}

/// The blow-up table `(l, ‖P_{−9l} f₆‖/ε⁴)` with the initial-data checks.
pub fn blowup_demo(config: &ExperimentConfig) -> Result<ScalingReport, HarnessError> {
    Ok(run_suite(config, Suite::BlowupDemo)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn exponent_examples() {
        assert_eq!(exponent_map(&q(0, 1)), q(2, 3));
        assert_eq!(exponent_map(&q(2, 3)), q(10, 9));
        assert_eq!(exponent_map(&q(2, 1)), q(2, 1));
        assert_eq!(exponent_iterates(&q(0, 1), 2), vec![q(0, 1), q(2, 3), q(10, 9)]);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!("blowup-demo".parse::<Suite>().unwrap(), Suite::BlowupDemo);
        assert!("firsts".parse::<Suite>().is_err());
    }

    #[test]
    fn config_round_trip_and_errors() {
        let c: ExperimentConfig = "c_mu = sqrt(2)\nb_nu = -1 # mass\nepsilon = 2e-3\nl_min = 4\nl_max = 6\n"
            .parse()
            .unwrap();
        assert_eq!(c.epsilon, 2e-3);
        assert_eq!(c.l_range((1, 2), 8).unwrap(), vec![4, 5, 6]);
        assert!(c.l_range((1, 2), 5).is_err());
        let back: ExperimentConfig = c.to_text().parse().unwrap();
        assert_eq!(back, c);
        let t = c.triple().unwrap();
        assert_eq!(t.mu.c2(), 2.0);

        let err = |s: &str| s.parse::<ExperimentConfig>().unwrap_err().to_string();
        assert!(err("epsilon = 1\nepsilo = 2").contains("line 2"));
        assert!(err("seed = 1\nseed = 2").contains("already set"));
        assert!(err("quad_tol = 0").contains("quad_tol"));
        assert!(err("b_mu = sqrt(2)").contains("rational"));
        assert!(err("l_min = 5\nl_max = 4").contains("exceeds"));
        assert!(err("just words").contains("key = value"));
    }

    #[test]
    fn every_documented_key_parses() {
        let text = ExperimentConfig {
            l_min: Some(3),
            l_max: Some(4),
            s_cut_policy: SCutPolicy::Fixed(40.0),
            ..Default::default()
        }
        .to_text();
        for (k, _) in CONFIG_KEYS {
            assert!(text.contains(&format!("{k} = ")), "{k}");
        }
        let c: ExperimentConfig = text.parse().unwrap();
        assert_eq!(c.quad().s_cut, 40.0);
    }
}
