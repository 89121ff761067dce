//! Cross-validated evaluation producing per-case DSC rows.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Case, Scale, TrainedModels};
use crate::error::{Error, Result};
use crate::fixpoint::{self, FixpointConfig};
use crate::metrics::mask_dsc;

/// One evaluated configuration, i.e. one row of the summary table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowSpec {
    /// `Z(0)` only.
    Coarse,
    /// Exactly `n` refinement rounds.
    Iterations(usize),
    /// Stop at the first round with `d(t) >= R`, capped at `T`.
    Threshold(f64),
    /// Highest DSC over rounds `1..=T`.
    Best,
    /// One fine pass with ground-truth regions.
    OracleBox,
}

impl RowSpec {
    pub fn label(&self) -> String {
        match *self {
            RowSpec::Coarse => "Coarse Segmentation".into(),
            RowSpec::Iterations(1) => "After 1 Iteration".into(),
            RowSpec::Iterations(n) => format!("After {n} Iterations"),
            RowSpec::Threshold(r) if format!("{r:.2}").parse() == Ok(r) => {
                format!("After d_t > {r:.2}")
            }
            RowSpec::Threshold(r) => format!("After d_t > {r}"),
            RowSpec::Best => "Best among All Iterations".into(),
            RowSpec::OracleBox => "Oracle Bounding Box".into(),
        }
    }

    pub fn parse_list(list: &str) -> Result<Vec<RowSpec>> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for RowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowSpec::Coarse => f.write_str("coarse"),
            RowSpec::Iterations(n) => write!(f, "iter{n}"),
            RowSpec::Threshold(r) => write!(f, "thresh{r}"),
            RowSpec::Best => f.write_str("best"),
            RowSpec::OracleBox => f.write_str("oracle-box"),
        }
    }
}

impl FromStr for RowSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidConfig(format!(
                "unknown row `{s}`; expected coarse, iterN, threshR, best or oracle-box"
            ))
        };
        Ok(match s {
            "coarse" => RowSpec::Coarse,
            "best" => RowSpec::Best,
            "oracle-box" => RowSpec::OracleBox,
            _ => {
                if let Some(n) = s.strip_prefix("iter") {
                    RowSpec::Iterations(n.parse().map_err(|_| bad())?)
                } else if let Some(r) = s.strip_prefix("thresh") {
                    let r: f64 = r.parse().map_err(|_| bad())?;
                    if !(r > 0.0 && r <= 1.0) {
                        return Err(bad());
                    }
                    RowSpec::Threshold(r)
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

/// One per-case outcome for one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub method: String,
    pub case_id: String,
    pub dsc: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<CaseResult>,
}

/// `mean, population std, max, min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stats {
            n: values.len(),
            mean,
            std: var.sqrt(),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowSummary {
    pub method: String,
    pub dsc: Option<Stats>,
    pub iterations: Option<Stats>,
    pub errors: usize,
}

impl EvalReport {
    /// Methods in order of first appearance.
    pub fn methods(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.method) {
                seen.push(r.method.clone());
            }
        }
        seen
    }

    pub fn summaries(&self) -> Vec<RowSummary> {
        self.methods()
            .into_iter()
            .map(|method| {
                let rows: Vec<&CaseResult> =
                    self.rows.iter().filter(|r| r.method == method).collect();
                let dscs: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.error.is_none())
                    .filter_map(|r| r.dsc)
                    .collect();
                let iters: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.error.is_none())
                    .filter_map(|r| r.iterations.map(|n| n as f64))
                    .collect();
                RowSummary {
                    dsc: Stats::of(&dscs),
                    iterations: Stats::of(&iters),
                    errors: rows.iter().filter(|r| r.error.is_some()).count(),
                    method,
                }
            })
            .collect()
    }

    pub fn summary(&self, method: &str) -> Option<RowSummary> {
        self.summaries().into_iter().find(|s| s.method == method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub rows: Vec<RowSpec>,
    pub fixpoint: FixpointConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            rows: vec![
                RowSpec::Coarse,
                RowSpec::Iterations(1),
                RowSpec::Iterations(10),
                RowSpec::Threshold(0.95),
                RowSpec::OracleBox,
            ],
            fixpoint: FixpointConfig::default(),
        }
    }
}

/// `(dsc, iterations)` of one row for one case.
type RowValue = (Option<f64>, Option<usize>);

fn evaluate_case(
    case: &Case,
    models: &TrainedModels,
    config: &EvalConfig,
) -> Result<Vec<RowValue>> {
    let set = models.for_case(&case.id)?;
    let truth = Some(&case.truth);
    let coarse = set.views(Scale::Coarse, truth)?;
    let fine = set.views(Scale::Fine, truth)?;
    let fp = &config.fixpoint;

    let needs_loop = config.rows.iter().any(|r| !matches!(r, RowSpec::OracleBox));
    let max_rounds = config
        .rows
        .iter()
        .filter_map(|r| match r {
            RowSpec::Iterations(n) => Some(*n),
            _ => None,
        })
        .chain([fp.max_iterations])
        .max()
        .unwrap_or(0);
    // dsc_per_round[t] = DSC(Z(t), Y); the mask sequence does not depend on R.
    let mut dsc_per_round = Vec::new();
    let mut records = Vec::new();
    if needs_loop {
        let run = FixpointConfig {
            max_iterations: max_rounds,
            ..*fp
        };
        let mut failure = None;
        records =
            fixpoint::trajectory(&case.volume, &coarse, &fine, &run, |_, z| {
                match mask_dsc(z, &case.truth) {
                    Ok(d) => dsc_per_round.push(d),
                    Err(e) => failure = Some(e),
                }
            })?;
        if let Some(e) = failure {
            return Err(e);
        }
    }
    let last = dsc_per_round.len().saturating_sub(1);
    let capped = last.min(fp.max_iterations);

    config
        .rows
        .iter()
        .map(|row| {
            Ok(match *row {
                RowSpec::Coarse => (Some(dsc_per_round[0]), None),
                RowSpec::Iterations(n) => {
                    let t = n.min(last);
                    (Some(dsc_per_round[t]), Some(t))
                }
                RowSpec::Threshold(r) => {
                    let t = records
                        .iter()
                        .take(fp.max_iterations)
                        .find(|rec| rec.d >= r)
                        .map(|rec| rec.t)
                        .unwrap_or(capped);
                    (Some(dsc_per_round[t]), Some(t))
                }
                RowSpec::Best => {
                    let (t, d) = dsc_per_round[..=capped]
                        .iter()
                        .enumerate()
                        .skip(usize::from(capped > 0))
                        .fold((0, f64::NEG_INFINITY), |best, (t, &d)| {
                            if d > best.1 {
                                (t, d)
                            } else {
                                best
                            }
                        });
                    (Some(d), Some(t))
                }
                RowSpec::OracleBox => {
                    let z = fixpoint::run_with_oracle_box(
                        &case.volume,
                        &fine,
                        &case.truth,
                        &fp.margins,
                    )?;
                    (Some(mask_dsc(&z, &case.truth)?), None)
                }
            })
        })
        .collect()
}

/// Evaluates every case with the models of its held-out fold. A failing case
/// becomes one errored row per requested method.
pub fn evaluate(cases: &[Case], models: &TrainedModels, config: &EvalConfig) -> Result<EvalReport> {
    config.fixpoint.validate()?;
    if config.rows.is_empty() {
        return Err(Error::InvalidConfig("no evaluation rows requested".into()));
    }
    let mut ordered: Vec<&Case> = cases.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    let per_case: Vec<Result<Vec<RowValue>>> = ordered
        .par_iter()
        .map(|c| evaluate_case(c, models, config))
        .collect();

    let mut rows = Vec::with_capacity(config.rows.len() * cases.len());
    for (ri, row) in config.rows.iter().enumerate() {
        for (case, outcome) in ordered.iter().zip(&per_case) {
            let (dsc, iterations, error) = match outcome {
                Ok(values) => (values[ri].0, values[ri].1, None),
                Err(e) => {
                    log::warn!("case {} failed: {e}", case.id);
                    (None, None, Some(e.to_string()))
                }
            };
            rows.push(CaseResult {
                method: row.label(),
                case_id: case.id.clone(),
                dsc,
                iterations,
                error,
            });
        }
    }
    Ok(EvalReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::{phantom_cases, ModelSet};
    use crate::harness::phantom::PhantomSpec;
    use crate::model::{ModelConfig, OracleParams};

    #[test]
    fn row_specs_parse_and_label() {
        let rows = RowSpec::parse_list("coarse,iter1,iter10,thresh0.95,oracle-box,best").unwrap();
        assert_eq!(
            rows,
            vec![
                RowSpec::Coarse,
                RowSpec::Iterations(1),
                RowSpec::Iterations(10),
                RowSpec::Threshold(0.95),
                RowSpec::OracleBox,
                RowSpec::Best
            ]
        );
        let labels: Vec<String> = rows.iter().map(RowSpec::label).collect();
        assert_eq!(labels[1], "After 1 Iteration");
        assert_eq!(labels[2], "After 10 Iterations");
        assert_eq!(labels[3], "After d_t > 0.95");
        assert_eq!(RowSpec::Threshold(0.9).label(), "After d_t > 0.90");
        assert_eq!(RowSpec::Threshold(0.995).label(), "After d_t > 0.995");
        for r in &rows {
            assert_eq!(&r.to_string().parse::<RowSpec>().unwrap(), r);
        }
        assert!("iterx".parse::<RowSpec>().is_err());
        assert!("thresh1.5".parse::<RowSpec>().is_err());
        assert!("median".parse::<RowSpec>().is_err());
    }

    #[test]
    fn two_point_statistics() {
        let s = Stats::of(&[0.8, 0.6]).unwrap();
        assert!((s.mean - 0.7).abs() < 1e-15);
        assert!((s.std - 0.1).abs() < 1e-15);
        assert_eq!((s.max, s.min), (0.8, 0.6));
        assert_eq!(Stats::of(&[0.42]).unwrap().std, 0.0);
        assert!(Stats::of(&[]).is_none());
    }

    fn oracle_models(ids: &[String], noise: f64) -> TrainedModels {
        let set = ModelSet {
            coarse: [1, 2, 3].map(|s| ModelConfig::Oracle(OracleParams::new(noise, 1, s))),
            fine: [4, 5, 6].map(|s| ModelConfig::Oracle(OracleParams::new(noise, 1, s))),
        };
        TrainedModels::shared(ids, 4, 0, set).unwrap()
    }

    #[test]
    fn threshold_row_matches_a_direct_fixpoint_run() {
        let cases = phantom_cases(&PhantomSpec::new([24, 24, 24], 8), 4).unwrap();
        let ids: Vec<String> = cases.iter().map(|c| c.id.clone()).collect();
        let models = oracle_models(&ids, 0.3);
        let config = EvalConfig {
            rows: vec![
                RowSpec::Threshold(0.95),
                RowSpec::Iterations(3),
                RowSpec::Best,
            ],
            fixpoint: FixpointConfig {
                margins: crate::region::MarginSpec::fixed(3),
                ..Default::default()
            },
        };
        let report = evaluate(&cases, &models, &config).unwrap();
        for case in &cases {
            let set = models.for_case(&case.id).unwrap();
            let coarse = set.views(Scale::Coarse, Some(&case.truth)).unwrap();
            let fine = set.views(Scale::Fine, Some(&case.truth)).unwrap();
            let (z, trace) =
                fixpoint::run_fixpoint(&case.volume, &coarse, &fine, &config.fixpoint).unwrap();
            let row = report
                .rows
                .iter()
                .find(|r| r.case_id == case.id && r.method == RowSpec::Threshold(0.95).label())
                .unwrap();
            assert_eq!(row.dsc, Some(mask_dsc(&z, &case.truth).unwrap()));
            assert_eq!(row.iterations, Some(trace.iteration_count()));
            let best = report
                .rows
                .iter()
                .find(|r| r.case_id == case.id && r.method == RowSpec::Best.label())
                .unwrap();
            assert!(best.dsc >= row.dsc);
        }
    }

    #[test]
    fn failing_cases_become_error_rows() {
        let cases = phantom_cases(&PhantomSpec::new([12, 12, 12], 1), 4).unwrap();
        let ids: Vec<String> = cases.iter().map(|c| c.id.clone()).collect();
        let mut models = oracle_models(&ids, 0.0);
        models.folds.truncate(3);
        let report = evaluate(&cases, &models, &EvalConfig::default()).unwrap();
        let errors = report.rows.iter().filter(|r| r.error.is_some()).count();
        assert_eq!(errors, 5);
        let s = report.summary("Coarse Segmentation").unwrap();
        assert_eq!(s.errors, 1);
        assert_eq!(s.dsc.unwrap().n, 3);
        assert!(s.dsc.unwrap().mean > 0.0);
    }
}
