//! Scaling reports and their CSV, JSON and SVG renderings.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use super::HarnessError;

/// First line of every CSV report; bump on any column change.
pub const CSV_SCHEMA: &str = "# kgcascade-report v1";
/// `schema` field of JSON reports.
pub const JSON_SCHEMA: &str = "kgcascade-report/1";
/// CSV column names.
pub const CSV_COLUMNS: &str = "suite,quantity,x_name,x,label,value,error,status";

/// Least-squares line through `(l, log₂ value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual variance.
    pub half_width: f64,
    /// Slope uncertainty propagated from the per-point error estimates.
    pub numeric: f64,
    pub points: usize,
}

/// Fits `log₂ value = slope·l + intercept`. Needs three or more points and
/// positive values.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit, HarnessError> {
    let with_err: Vec<(f64, f64, f64)> = points.iter().map(|&(x, v)| (x, v, 0.0)).collect();
    fit_slope_with_errors(&with_err)
}

/// [`fit_slope`] on `(l, value, error)` triples; the errors feed
/// [`SlopeFit::numeric`].
pub fn fit_slope_with_errors(points: &[(f64, f64, f64)]) -> Result<SlopeFit, HarnessError> {
    let n = points.len();
    if n < 3 {
        return Err(HarnessError::Domain(format!("slope fit needs at least 3 points, got {n}")));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite() || !p.0.is_finite()) {
        return Err(HarnessError::Domain(format!("cannot fit log₂ of {} at l = {}", p.1, p.0)));
    }
    let nf = n as f64;
    let xm = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let ym = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Domain("slope fit needs distinct abscissae".into()));
    }
    let sxy: f64 = points.iter().zip(&ys).map(|(p, y)| (p.0 - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = points
        .iter()
        .zip(&ys)
        .map(|(p, y)| (y - intercept - slope * p.0).powi(2))
        .sum();
    let half_width = if n > 2 { (rss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let numeric = points
        .iter()
        .map(|p| (p.0 - xm).abs() / sxx * (p.2 / p.1) / std::f64::consts::LN_2)
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        half_width,
        numeric,
        points: n,
    })
}

/// Angular frequency of `z(t) ≈ A(t) e^{iωt}` from unevenly weighted samples:
/// the peak of the discrete Fourier sum `|Σ ẑⱼ e^{−iωtⱼ}|` of the unit
/// phasors `ẑ = z/|z|`, searched on `[0, ω_max]` and refined by golden section.
pub fn fit_frequency(times: &[f64], values: &[Complex64], omega_max: f64) -> Result<f64, HarnessError> {
    if times.len() != values.len() || times.len() < 4 {
        return Err(HarnessError::Domain("frequency fit needs at least 4 paired samples".into()));
    }
    if values.iter().any(|z| !(z.norm() > 0.0)) {
        return Err(HarnessError::Domain("frequency fit on a vanishing sample".into()));
    }
    let unit: Vec<Complex64> = values.iter().map(|z| z / z.norm()).collect();
    let power = |w: f64| -> f64 {
        times
            .iter()
            .zip(&unit)
            .map(|(&t, z)| z * Complex64::from_polar(1.0, -w * t))
            .sum::<Complex64>()
            .norm()
    };
    let n = 4096;
    let step = omega_max / n as f64;
    let (mut best, mut at) = (f64::NEG_INFINITY, 0.0);
    for i in 0..=n {
        let w = i as f64 * step;
        let p = power(w);
        if p > best {
            best = p;
            at = w;
        }
    }
    let (mut a, mut b) = ((at - step).max(0.0), at + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if power(c) > power(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(0.5 * (a + b))
}

/// The threshold a check may use: never tighter than three times the
/// propagated numeric error.
pub fn effective_tolerance(tol: f64, numeric: f64) -> f64 {
    tol.max(3.0 * numeric)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    /// A cell budget ran out; the value is reported but not fitted.
    Budget,
    Error(String),
}

impl RowStatus {
    fn as_csv(&self) -> String {
        match self {
            RowStatus::Ok => "ok".into(),
            RowStatus::Budget => "budget".into(),
            RowStatus::Error(m) => format!("error: {}", m.replace([',', '\n'], ";")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub x: f64,
    pub label: String,
    pub value: f64,
    pub error: f64,
    pub status: RowStatus,
}

impl ReportRow {
    pub fn ok(x: f64, label: impl Into<String>, value: f64, error: f64) -> Self {
        Self {
            x,
            label: label.into(),
            value,
            error,
            status: RowStatus::Ok,
        }
    }

    pub fn failed(x: f64, label: impl Into<String>, msg: impl ToString) -> Self {
        Self {
            x,
            label: label.into(),
            value: f64::NAN,
            error: f64::NAN,
            status: RowStatus::Error(msg.to_string()),
        }
    }
}

/// One asserted property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub suite: String,
    pub quantity: String,
    pub x_name: String,
    pub rows: Vec<ReportRow>,
    pub fit: Option<SlopeFit>,
    pub expected_slope: Option<f64>,
    pub slope_tolerance: Option<f64>,
    pub checks: Vec<Check>,
    pub runtime_s: f64,
}

impl ScalingReport {
    pub fn new(suite: &str, quantity: &str, x_name: &str) -> Self {
        Self {
            suite: suite.into(),
            quantity: quantity.into(),
            x_name: x_name.into(),
            rows: Vec::new(),
            fit: None,
            expected_slope: None,
            slope_tolerance: None,
            checks: Vec::new(),
            runtime_s: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    /// Fits the `ok` rows and checks the slope against `expected ± tol`,
    /// widening `tol` to three times the propagated numeric error.
    pub fn fit_and_check(&mut self, expected: f64, tol: f64) {
        self.expected_slope = Some(expected);
        self.slope_tolerance = Some(tol);
        let pts: Vec<(f64, f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.status == RowStatus::Ok)
            .map(|r| (r.x, r.value, r.error))
            .collect();
        let name = format!("slope of log2 {}", self.quantity);
        match fit_slope_with_errors(&pts) {
            Ok(fit) => {
                let t = effective_tolerance(tol, fit.numeric);
                let pass = (fit.slope - expected).abs() <= t;
                self.fit = Some(fit);
                self.check(
                    name,
                    pass,
                    format!("{:.4} ± {:.4} (expected {expected} ± {t:.3})", fit.slope, fit.half_width),
                );
            }
            Err(e) => self.check(name, false, e.to_string()),
        }
    }

    pub fn to_csv(&self) -> String {
        render_csv(std::slice::from_ref(self))
    }

    /// Log₂ plot of the rows with the fitted line.
    pub fn to_svg(&self) -> String {
        let (w, h, m) = (640.0, 420.0, 60.0);
        let pts: Vec<(f64, f64, bool)> = self
            .rows
            .iter()
            .filter(|r| r.value > 0.0 && r.value.is_finite())
            .map(|r| (r.x, r.value.log2(), r.status == RowStatus::Ok))
            .collect();
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        )
        .ok();
        writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).ok();
        writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}: log2 {} vs {}</text>"#,
            w / 2.0,
            xml(&self.suite),
            xml(&self.quantity),
            xml(&self.x_name)
        )
        .ok();
        if pts.is_empty() {
            s += "</svg>\n";
            return s;
        }
        let span = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if hi > lo {
                let pad = 0.08 * (hi - lo);
                (lo - pad, hi + pad)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        };
        let (x0, x1) = span(&mut pts.iter().map(|p| p.0));
        let (y0, y1) = span(&mut pts.iter().map(|p| p.1));
        let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
        writeln!(
            s,
            r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
            h - m,
            w - m
        )
        .ok();
        for i in 0..=4 {
            let (xv, yv) = (x0 + (x1 - x0) * i as f64 / 4.0, y0 + (y1 - y0) * i as f64 / 4.0);
            writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{xv:.2}</text>"#, px(xv), h - m + 18.0).ok();
            writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{yv:.2}</text>"#, m - 6.0, py(yv) + 4.0).ok();
        }
        if let Some(f) = self.fit {
            writeln!(
                s,
                r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#c03030" stroke-dasharray="6 4"/>"##,
                px(x0),
                py(f.intercept + f.slope * x0),
                px(x1),
                py(f.intercept + f.slope * x1)
            )
            .ok();
            writeln!(
                s,
                r##"<text x="{}" y="44" text-anchor="end" fill="#c03030">slope {:.3} ± {:.3}</text>"##,
                w - m,
                f.slope,
                f.half_width
            )
            .ok();
        }
        for (x, y, ok) in &pts {
            let fill = if *ok { "#2050a0" } else { "#a0a0a0" };
            writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{fill}"/>"#, px(*x), py(*y)).ok();
        }
        s += "</svg>\n";
        s
    }
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// CSV for several reports: schema line, column header, rows, then the
/// fits and checks as `#` lines.
pub fn render_csv(reports: &[ScalingReport]) -> String {
    let mut s = format!("{CSV_SCHEMA}\n{CSV_COLUMNS}\n");
    for r in reports {
        for row in &r.rows {
            writeln!(
                s,
                "{},{},{},{},{},{:e},{:e},{}",
                r.suite,
                r.quantity,
                r.x_name,
                row.x,
                row.label.replace(',', ";"),
                row.value,
                row.error,
                row.status.as_csv()
            )
            .ok();
        }
    }
    for r in reports {
        if let Some(f) = r.fit {
            writeln!(
                s,
                "# fit {} {} slope={} half_width={} numeric={} expected={}",
                r.suite,
                r.quantity,
                f.slope,
                f.half_width,
                f.numeric,
                r.expected_slope.map_or("-".into(), |e| e.to_string())
            )
            .ok();
        }
        for c in &r.checks {
            writeln!(
                s,
                "# check {} {} {}: {}",
                r.suite,
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )
            .ok();
        }
    }
    s
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    schema: &'static str,
    reports: &'a [ScalingReport],
}

/// JSON document `{"schema": …, "reports": […]}`. Non-finite numbers
/// become `null`.
pub fn render_json(reports: &[ScalingReport]) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(&JsonDoc {
        schema: JSON_SCHEMA,
        reports,
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_powers() {
        let pts: Vec<(f64, f64)> = (4..=8).map(|l| (l as f64, (2.0 * l as f64).exp2())).collect();
        let f = fit_slope(&pts).unwrap();
        assert_eq!(f.slope, 2.0);
        assert_eq!(f.half_width, 0.0);
    }

    #[test]
    fn fit_preconditions() {
        assert!(fit_slope(&[(1.0, 2.0), (2.0, 4.0)]).is_err());
        assert!(fit_slope(&[(1.0, 2.0), (2.0, 0.0), (3.0, 8.0)]).is_err());
        assert!(fit_slope(&[(1.0, 2.0), (1.0, 4.0), (1.0, 8.0)]).is_err());
    }

    #[test]
    fn frequency_of_a_chirp_free_tone() {
        let times: Vec<f64> = (0..200).map(|i| 3.0 + 0.37 * i as f64).collect();
        let vals: Vec<Complex64> = times.iter().map(|&t| Complex64::from_polar(1.0 / t, 1.3 * t + 0.4)).collect();
        let w = fit_frequency(&times, &vals, 8.0).unwrap();
        assert!((w - 1.3).abs() < 1e-6, "{w}");
    }

    #[test]
    fn csv_is_versioned() {
        let mut r = ScalingReport::new("first", "f4", "l");
        for l in 4..=6 {
            r.rows.push(ReportRow::ok(l as f64, format!("l={l}"), (2.0 * l as f64).exp2(), 0.0));
        }
        r.rows.push(ReportRow::failed(7.0, "l=7", "budget, exceeded"));
        r.fit_and_check(2.0, 0.15);
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_SCHEMA));
        assert_eq!(lines.next(), Some(CSV_COLUMNS));
        assert!(csv.contains("error: budget; exceeded"));
        assert!(r.passed());
        let json = render_json(&[r.clone()]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["schema"], JSON_SCHEMA);
        assert_eq!(v["reports"][0]["rows"][3]["value"], serde_json::Value::Null);
        assert!(r.to_svg().starts_with("<svg"));
    }

    proptest! {
        #[test]
        fn perturbed_powers_keep_slope(us in proptest::collection::vec(-0.2f64..0.2, 5)) {
            let pts: Vec<(f64, f64)> = us
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let l = 4.0 + i as f64;
                    (l, (2.0 * l + u).exp2())
                })
                .collect();
            let f = fit_slope(&pts).unwrap();
            prop_assert!((f.slope - 2.0).abs() <= 0.2 + 1e-12);
        }
    }
}
