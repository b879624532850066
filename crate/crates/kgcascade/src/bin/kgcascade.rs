//! Command-line front end: one subcommand per suite, plus `exponent-map`.
//!
//! Exit status is 0 when every enabled check passes, 1 when a check fails
//! and 2 on usage, configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;

use kgcascade::harness::{
    exponent_iterates, render_csv, render_json, ExperimentConfig, HarnessError, ScalingReport, Suite, SuiteRunner,
};
use kgcascade::phase::parse_exact;

#[derive(Parser)]
#[command(name = "kgcascade", version, about = "Degenerate-resonance cascade laboratory")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the `out` key).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    l_min: Option<u32>,
    #[arg(long, global = true)]
    l_max: Option<u32>,
    /// Comma-separated suites to run, or `all`.
    #[arg(long, global = true)]
    suite: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Directory caching the second-iteration input grids.
    #[arg(long, global = true)]
    grid_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    DegeneracyScan,
    Lemma21Scan,
    CriticalPoint,
    FirstIteration,
    Gradient,
    MidFrequency,
    TimeDerivative,
    SecondIteration,
    L2Norm,
    BlowupDemo,
    /// Iterates c ↦ (2c+2)/3 in exact arithmetic.
    ExponentMap {
        #[arg(long, default_value = "0")]
        c: String,
        #[arg(long, default_value_t = 2)]
        iterations: usize,
    },
}

impl Command {
    fn suite(&self) -> Option<Suite> {
        Some(match self {
            Command::DegeneracyScan => Suite::Degeneracy,
            Command::Lemma21Scan => Suite::Lemma21,
            Command::CriticalPoint => Suite::Critical,
            Command::FirstIteration => Suite::First,
            Command::Gradient => Suite::Gradient,
            Command::MidFrequency => Suite::Midfreq,
            Command::TimeDerivative => Suite::Tderiv,
            Command::SecondIteration => Suite::Second,
            Command::L2Norm => Suite::L2,
            Command::BlowupDemo => Suite::BlowupDemo,
            Command::ExponentMap { .. } => return None,
        })
    }
}

fn exponent_map(c: &str, n: usize) -> Result<bool, HarnessError> {
    let c = parse_exact(c)?
        .as_rational()
        .cloned()
        .ok_or_else(|| HarnessError::Domain(format!("{c} is not rational")))?;
    let it = exponent_iterates(&c, n);
    let line: Vec<String> = it.iter().map(BigRational::to_string).collect();
    println!("{}", line.join(" -> "));
    let two = BigRational::from_integer(2.into());
    let fixed = kgcascade::harness::exponent_map(&two) == two;
    println!("{} fixed point 2", if fixed { "PASS" } else { "FAIL" });
    Ok(fixed)
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    if let Some(Command::ExponentMap { c, iterations }) = &cli.command {
        return exponent_map(c, *iterations);
    }
    let mut cfg = match &cli.config {
        Some(p) => std::fs::read_to_string(p)?.parse::<ExperimentConfig>()?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if cli.l_min.is_some() {
        cfg.l_min = cli.l_min;
    }
    if cli.l_max.is_some() {
        cfg.l_max = cli.l_max;
    }
    let mut suites: Vec<Suite> = cli.command.as_ref().and_then(Command::suite).into_iter().collect();
    if let Some(list) = &cli.suite {
        for name in list.split(',').map(str::trim) {
            if name == "all" {
                suites.extend(Suite::ALL);
            } else {
                suites.push(name.parse()?);
            }
        }
    }
    suites.dedup();
    if suites.is_empty() {
        return Err(HarnessError::Domain("no subcommand or --suite given".into()));
    }
    let mut runner = SuiteRunner::new(cfg.clone())?;
    if let Some(d) = cli.grid_dir {
        runner = runner.with_grid_dir(d);
    }
    std::fs::create_dir_all(&cfg.out)?;
    let mut all_ok = true;
    for suite in suites {
        let reports = runner.run(suite)?;
        write_reports(&cfg.out, suite, &reports, cli.format)?;
        for r in &reports {
            for c in &r.checks {
                println!("{} {suite}: {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            all_ok &= r.passed();
        }
    }
    Ok(all_ok)
}

fn write_reports(dir: &std::path::Path, suite: Suite, reports: &[ScalingReport], fmt: Format) -> Result<(), HarnessError> {
    let (ext, body) = match fmt {
        Format::Csv => ("csv", render_csv(reports)),
        Format::Json => ("json", render_json(reports)?),
    };
    std::fs::write(dir.join(format!("{suite}.{ext}")), body)?;
    for (i, r) in reports.iter().enumerate().filter(|(_, r)| r.fit.is_some()) {
        std::fs::write(dir.join(format!("{suite}_{i}.svg")), r.to_svg())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("kgcascade: {e}");
            ExitCode::from(2)
        }
    }
}
