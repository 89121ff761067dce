//! Per-case CSV and summary tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::eval::{CaseResult, EvalReport, RowSummary, Stats};
use crate::error::{Error, Result};

const CASE_HEADER: [&str; 5] = ["method", "case_id", "dsc", "iterations", "error"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::Report(format!(
                "unknown format `{s}`; expected md or csv"
            ))),
        }
    }
}

/// Per-case rows as CSV. Floats are written in shortest round-trip form.
pub fn to_case_csv(report: &EvalReport) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(CASE_HEADER)?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    into_string(w)
}

pub fn from_case_csv(text: &str) -> Result<EvalReport> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CASE_HEADER {
        return Err(Error::Report(format!(
            "unexpected header {header:?}; expected {CASE_HEADER:?}"
        )));
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<CaseResult>, _>>()?;
    Ok(EvalReport { rows })
}

pub fn write_case_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_case_csv(report)?)?;
    Ok(())
}

pub fn read_case_csv(path: impl AsRef<Path>) -> Result<EvalReport> {
    from_case_csv(&fs::read_to_string(path)?)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn iteration_cell(s: Option<&Stats>) -> String {
    match s {
        None => "-".into(),
        Some(s) if s.std == 0.0 => format!("{}", s.mean),
        Some(s) => format!("{:.2} ± {:.2}", s.mean, s.std),
    }
}

fn dsc_cells(s: Option<&Stats>) -> [String; 3] {
    match s {
        None => ["-".into(), "-".into(), "-".into()],
        Some(s) => [
            format!("{} ± {}", pct(s.mean), pct(s.std)),
            pct(s.max),
            pct(s.min),
        ],
    }
}

pub const FOOTER: &str = "DSC in percent, mean ± population standard deviation over cases.";

pub fn to_markdown(report: &EvalReport) -> String {
    let mut out = String::from("| Method | Mean DSC | # Iterations | Max DSC | Min DSC |\n");
    out.push_str("|---|---|---|---|---|\n");
    let summaries = report.summaries();
    for s in &summaries {
        let [mean, max, min] = dsc_cells(s.dsc.as_ref());
        let _ = writeln!(
            out,
            "| {} | {mean} | {} | {max} | {min} |",
            s.method,
            iteration_cell(s.iterations.as_ref())
        );
    }
    out.push('\n');
    out.push_str(FOOTER);
    out.push('\n');
    let failed: usize = summaries.iter().map(|s| s.errors).sum();
    if failed > 0 {
        let _ = writeln!(
            out,
            "{failed} case evaluations failed and are excluded from the statistics."
        );
    }
    out
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    cases: usize,
    errors: usize,
    mean_dsc: Option<f64>,
    std_dsc: Option<f64>,
    max_dsc: Option<f64>,
    min_dsc: Option<f64>,
    mean_iterations: Option<f64>,
    std_iterations: Option<f64>,
}

impl<'a> From<&'a RowSummary> for SummaryRow<'a> {
    fn from(s: &'a RowSummary) -> Self {
        Self {
            method: &s.method,
            cases: s.dsc.map_or(0, |d| d.n),
            errors: s.errors,
            mean_dsc: s.dsc.map(|d| d.mean),
            std_dsc: s.dsc.map(|d| d.std),
            max_dsc: s.dsc.map(|d| d.max),
            min_dsc: s.dsc.map(|d| d.min),
            mean_iterations: s.iterations.map(|i| i.mean),
            std_iterations: s.iterations.map(|i| i.std),
        }
    }
}

/// Aggregates as CSV, DSC as fractions.
pub fn to_summary_csv(report: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let summaries = report.summaries();
    if summaries.is_empty() {
        w.write_record([
            "method",
            "cases",
            "errors",
            "mean_dsc",
            "std_dsc",
            "max_dsc",
            "min_dsc",
            "mean_iterations",
            "std_iterations",
        ])?;
    }
    for s in &summaries {
        w.serialize(SummaryRow::from(s))?;
    }
    into_string(w)
}

pub fn render(report: &EvalReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Markdown => Ok(to_markdown(report)),
        ReportFormat::Csv => to_summary_csv(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(method: &str, case: &str, dsc: Option<f64>, iterations: Option<usize>) -> CaseResult {
        CaseResult {
            method: method.into(),
            case_id: case.into(),
            dsc,
            iterations,
            error: None,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(
            to_case_csv(&EvalReport::default()).unwrap(),
            "method,case_id,dsc,iterations,error\n"
        );
        assert_eq!(
            from_case_csv("method,case_id,dsc,iterations,error\n").unwrap(),
            EvalReport::default()
        );
    }

    #[test]
    fn markdown_follows_the_table_layout() {
        let report = EvalReport {
            rows: vec![
                row("Coarse Segmentation", "a", Some(0.8), None),
                row("Coarse Segmentation", "b", Some(0.6), None),
                row("After d_t > 0.95", "a", Some(0.9), Some(2)),
                row("After d_t > 0.95", "b", Some(0.7), Some(4)),
            ],
        };
        let md = to_markdown(&report);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(
            lines[0],
            "| Method | Mean DSC | # Iterations | Max DSC | Min DSC |"
        );
        assert_eq!(
            lines[2],
            "| Coarse Segmentation | 70.00 ± 10.00 | - | 80.00 | 60.00 |"
        );
        assert_eq!(
            lines[3],
            "| After d_t > 0.95 | 80.00 ± 10.00 | 3.00 ± 1.00 | 90.00 | 70.00 |"
        );
        assert!(md.contains("population standard deviation"));
    }

    #[test]
    fn errors_round_trip_and_are_excluded() {
        let mut failed = row("Oracle Bounding Box", "c", None, None);
        failed.error = Some("model failed on axial slice 3: empty, \"quoted\"".into());
        let report = EvalReport {
            rows: vec![row("Oracle Bounding Box", "a", Some(0.5), None), failed],
        };
        let back = from_case_csv(&to_case_csv(&report).unwrap()).unwrap();
        assert_eq!(back, report);
        let s = &report.summaries()[0];
        assert_eq!((s.errors, s.dsc.unwrap().n), (1, 1));
        assert!(to_markdown(&report).contains("1 case evaluations failed"));
    }

    #[test]
    fn summary_csv_has_one_line_per_method() {
        let report = EvalReport {
            rows: vec![
                row("x", "a", Some(0.25), Some(1)),
                row("y", "a", Some(0.5), None),
            ],
        };
        let text = to_summary_csv(&report).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("method,cases,errors,mean_dsc"));
        assert!(text.contains("x,1,0,0.25,0.0,0.25,0.25,1.0,0.0"));
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(from_case_csv("a,b\n1,2\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(values in proptest::collection::vec((0.0f64..=1.0, proptest::option::of(0usize..20)), 0..30)) {
            let report = EvalReport {
                rows: values.iter().enumerate().map(|(i, &(d, it))| row(if i % 2 == 0 { "A" } else { "B" }, &format!("case_{i:03}"), Some(d), it)).collect(),
            };
            let back = from_case_csv(&to_case_csv(&report).unwrap()).unwrap();
            prop_assert_eq!(back, report);
        }

        #[test]
        fn summaries_match_brute_force(values in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
            let report = EvalReport { rows: values.iter().map(|&d| row("m", "c", Some(d), None)).collect() };
            let s = report.summaries()[0].dsc.unwrap();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            prop_assert!((s.mean - mean).abs() < 1e-12);
            prop_assert!((s.std - std).abs() < 1e-12);
            prop_assert_eq!(s.max, values.iter().cloned().fold(f64::MIN, f64::max));
            prop_assert_eq!(s.min, values.iter().cloned().fold(f64::MAX, f64::min));
            prop_assert!(s.min <= s.mean + 1e-12 && s.mean <= s.max + 1e-12);
        }
    }
}
