//! Accuracy-comparison data: every method's predictive band against the
//! exact GP on the toy problem, exported as one CSV.

use factorgp::Dataset;
use serde::Serialize;

use crate::config::{ExperimentConfig, Method};
use crate::error::{CliError, Result};
use crate::run::{band_coverage, learn_hyper, run_method, RunResult};
use crate::toy::{gen_toy, ToyData};

/// Column-wise CSV with blank cells where a column is shorter than the
/// longest one.
pub fn export_fig_data(results: &[RunResult], full: &RunResult, training: &Dataset) -> Result<String> {
    let check = |r: &RunResult| -> Result<()> {
        if r.failed() || r.mean.len() != full.test_x.len() || r.test_x != full.test_x {
            return Err(CliError::Alignment(format!(
                "{} has {} predictions over a different grid than {} ({} points)",
                r.method,
                r.mean.len(),
                full.method,
                full.test_x.len()
            )));
        }
        Ok(())
    };
    check(full)?;
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let (lo, hi) = full.band95();
    columns.push(("x".into(), full.test_x.clone()));
    columns.push(("truth".into(), full.truth.clone()));
    columns.push(("full_mean".into(), full.mean.clone()));
    columns.push(("full_lo95".into(), lo));
    columns.push(("full_hi95".into(), hi));
    for r in results {
        check(r)?;
        let (lo, hi) = r.band95();
        columns.push((format!("{}_mean", r.method), r.mean.clone()));
        columns.push((format!("{}_lo95", r.method), lo));
        columns.push((format!("{}_hi95", r.method), hi));
    }
    columns.push(("train_x".into(), training.x().column(0).iter().copied().collect()));
    columns.push(("train_y".into(), training.y().iter().copied().collect()));
    for r in results {
        if let (Some(z0), Some(z)) = (&r.inducing_initial, &r.inducing_final) {
            columns.push((format!("{}_z_init", r.method), z0.clone()));
            columns.push((format!("{}_z_final", r.method), z.clone()));
        }
    }
    let rows = columns.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns.iter().map(|(name, _)| name.as_str()))?;
    for i in 0..rows {
        w.write_record(
            columns
                .iter()
                .map(|(_, c)| c.get(i).map_or_else(String::new, |v| v.to_string())),
        )?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("CSV is UTF-8"))
}

/// Parsed column-wise CSV as written by [`export_fig_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct FigData {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl FigData {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[i])
    }
}

/// Reads columns back, dropping trailing blank cells.
pub fn parse_fig_data(text: &str) -> Result<FigData> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); names.len()];
    for record in r.records() {
        let record = record?;
        for (k, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                continue;
            }
            let v = cell
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("column {}: {e}", names[k])))?;
            columns[k].push(v);
        }
    }
    Ok(FigData { names, columns })
}

#[derive(Debug, Clone)]
pub struct FigureRuns {
    pub toy: ToyData,
    pub full: RunResult,
    pub results: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureSummary {
    pub method: Method,
    pub coverage_in_full_band: Option<f64>,
    pub rmse_vs_full: Option<f64>,
    pub rmse_vs_truth: Option<f64>,
    pub failure: Option<String>,
}

/// Learns hyperparameters with the exact GP, then runs every method with
/// those shared values. FITC/VFE optimize their inducing points under their
/// own objective for `base.inducing_steps` steps.
pub fn figure_runs(base: &ExperimentConfig, methods: &[Method]) -> Result<FigureRuns> {
    base.validate()?;
    let toy = gen_toy(base.n, base.seed)?;
    let spec = learn_hyper(&toy.data, &base.hyper.to_spec()?)?;
    let hyper = spec.hyper();
    let mut shared = base.clone();
    shared.learn_hyper = false;
    shared.hyper.lengthscale = hyper.lengthscales()[0];
    shared.hyper.signal_variance = hyper.signal_variance();
    shared.hyper.noise_variance = hyper.noise_variance();
    let full = run_method(
        &ExperimentConfig {
            method: Method::Full,
            ..shared.clone()
        },
        &toy,
    )?;
    let results = methods
        .iter()
        .filter(|&&m| m != Method::Full)
        .map(|&method| run_method(&ExperimentConfig { method, ..shared.clone() }, &toy))
        .collect::<Result<Vec<_>>>()?;
    Ok(FigureRuns { toy, full, results })
}

impl FigureRuns {
    pub fn to_csv(&self) -> Result<String> {
        let ok: Vec<RunResult> = self.results.iter().filter(|r| !r.failed()).cloned().collect();
        export_fig_data(&ok, &self.full, &self.toy.data)
    }

    pub fn summary(&self) -> Vec<FigureSummary> {
        self.results
            .iter()
            .map(|r| FigureSummary {
                method: r.method,
                coverage_in_full_band: band_coverage(r, &self.full).ok(),
                rmse_vs_full: r.rmse_vs_full,
                rmse_vs_truth: r.rmse_vs_truth,
                failure: r.failure.clone(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runs() -> FigureRuns {
        let cfg = ExperimentConfig {
            n: 40,
            m: 8,
            inducing_steps: 5,
            ..ExperimentConfig::default()
        };
        figure_runs(&cfg, &[Method::Fitc, Method::Vfe, Method::Ski, Method::Hcfgp]).unwrap()
    }

    #[test]
    fn csv_round_trips() {
        let f = runs();
        let text = f.to_csv().unwrap();
        let parsed = parse_fig_data(&text).unwrap();
        assert_eq!(parsed.column("x").unwrap(), f.full.test_x.as_slice());
        assert_eq!(parsed.column("full_mean").unwrap(), f.full.mean.as_slice());
        assert_eq!(parsed.column("vfe_mean").unwrap(), f.results[1].mean.as_slice());
        assert_eq!(parsed.column("train_x").unwrap().len(), 40);
        assert_eq!(parsed.column("fitc_z_final").unwrap().len(), 8);
        assert!(parsed.column("ski_z_init").is_none());
    }

    #[test]
    fn full_columns_duplicate_for_full_method() {
        let f = runs();
        let text = export_fig_data(std::slice::from_ref(&f.full), &f.full, &f.toy.data).unwrap();
        let parsed = parse_fig_data(&text).unwrap();
        assert_eq!(parsed.column("full_mean"), Some(f.full.mean.as_slice()));
        // header carries the full-GP block twice
        assert_eq!(parsed.names.iter().filter(|n| *n == "full_mean").count(), 2);
    }

    #[test]
    fn misaligned_grids_are_rejected() {
        let f = runs();
        let mut bad = f.results[0].clone();
        bad.test_x[3] += 1e-3;
        assert!(matches!(
            export_fig_data(&[bad], &f.full, &f.toy.data),
            Err(CliError::Alignment(_))
        ));
    }

    #[test]
    fn far_band_width_is_prior() {
        let f = runs();
        let (lo, hi) = f.full.band95();
        let s2 = f.full.hyper.as_ref().unwrap().signal_variance();
        let ls = f.full.hyper.as_ref().unwrap().lengthscales()[0];
        // only meaningful when the edge sits far from the data
        let far = f.toy.data.x().iter().all(|&x| (x - 10.0).abs() > 6.0 * ls);
        if far {
            let width = hi[hi.len() - 1] - lo[lo.len() - 1];
            assert!((width - 2.0 * 1.96 * s2.sqrt()).abs() < 1e-6);
        }
        let summary = f.summary();
        assert_eq!(summary.len(), 4);
        assert!(summary.iter().all(|s| s.coverage_in_full_band.is_some()));
    }
}
