use std::time::Instant;

use factorgp::inducing::optimize_inducing;
use factorgp::structured::RegularGrid;
use factorgp::{
    Dataset, ExactPosterior, GpError, HcfgpModel, HyperParams, InducingObjective, InducingSet, KernelSpec,
    OptimizeConfig, Prediction, SkiModel, SparseMethod, SparsePosterior,
};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{ExperimentConfig, Method};
use crate::error::{CliError, Result};
use crate::toy::ToyData;

/// Raw output of one timed fit + predict.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub prediction: Prediction,
    pub nlml: f64,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    pub inducing_initial: Option<Vec<f64>>,
    pub inducing_final: Option<Vec<f64>>,
    pub diagnostics: Option<serde_json::Value>,
}

fn first_column(z: &DMatrix<f64>) -> Vec<f64> {
    z.column(0).iter().copied().collect()
}

/// Fits `method` on `data` and predicts at `xstar`, timing both phases.
/// NLML is the method's own objective: exact, FITC's approximate NLML,
/// VFE's negated bound, SKI's approximation, or the HODLR value.
pub fn fit_predict(
    method: Method,
    cfg: &ExperimentConfig,
    spec: &KernelSpec,
    data: &Dataset,
    xstar: &DMatrix<f64>,
) -> Result<Outcome, GpError> {
    let start = Instant::now();
    let mut inducing_initial = None;
    let mut inducing_final = None;
    let mut diagnostics = None;
    let (prediction, nlml, fit_seconds) = match method {
        Method::Full => {
            let post = ExactPosterior::fit(data, spec)?;
            let fit = start.elapsed().as_secs_f64();
            (post.predict_marginal(xstar)?, post.nlml(), fit)
        }
        Method::Fitc | Method::Vfe => {
            let (sparse, objective) = if method == Method::Fitc {
                (SparseMethod::Fitc, InducingObjective::Fitc)
            } else {
                (SparseMethod::Vfe, InducingObjective::Vfe)
            };
            let z0 = InducingSet::evenly_spaced(data, cfg.m)?;
            let z = if cfg.inducing_steps > 0 {
                optimize_inducing(data, &z0, spec, objective, cfg.inducing_steps)?.z
            } else {
                z0.clone()
            };
            let post = SparsePosterior::fit(sparse, data, &z, spec)?;
            let fit = start.elapsed().as_secs_f64();
            inducing_initial = Some(first_column(z0.z()));
            inducing_final = Some(first_column(z.z()));
            (post.predict(xstar)?, post.objective_nlml(), fit)
        }
        Method::Ski => {
            let mut all = DMatrix::zeros(data.len() + xstar.nrows(), data.dim());
            all.rows_mut(0, data.len()).copy_from(data.x());
            all.rows_mut(data.len(), xstar.nrows()).copy_from(xstar);
            let grid = RegularGrid::covering(&all, cfg.m)?;
            let model = SkiModel::fit(data, &grid, spec, cfg.ski())?;
            let fit = start.elapsed().as_secs_f64();
            diagnostics = Some(serde_json::json!({ "cg_iterations": model.cg_iterations() }));
            (model.predict(xstar)?, model.nlml_approx(), fit)
        }
        Method::Hcfgp => {
            let model = HcfgpModel::fit(data, spec, &cfg.hcfgp())?;
            let fit = start.elapsed().as_secs_f64();
            diagnostics = serde_json::to_value(model.diagnostics()).ok();
            (model.predict(xstar)?, model.nlml(), fit)
        }
    };
    let predict_seconds = start.elapsed().as_secs_f64() - fit_seconds;
    Ok(Outcome {
        prediction,
        nlml,
        fit_seconds,
        predict_seconds,
        inducing_initial,
        inducing_final,
        diagnostics,
    })
}

/// Learns hyperparameters by minimizing the exact NLML with its analytic
/// gradient.
pub fn learn_hyper(data: &Dataset, init: &KernelSpec) -> Result<KernelSpec, GpError> {
    let objective = |h: &HyperParams| ExactPosterior::fit(data, &init.with_hyper(h.clone())).map(|p| p.nlml());
    let gradient = |h: &HyperParams| ExactPosterior::fit(data, &init.with_hyper(h.clone()))?.nlml_grad();
    let opt = factorgp::minimize_nlml(objective, Some(gradient), init.hyper(), &OptimizeConfig::default())?;
    Ok(init.with_hyper(opt.hyper))
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len().max(1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub method: Method,
    pub n: usize,
    /// `None` for methods that ignore `m`.
    pub m: Option<usize>,
    pub seed: u64,
    pub hyper: Option<HyperParams>,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    pub test_x: Vec<f64>,
    pub truth: Vec<f64>,
    pub mean: Vec<f64>,
    /// Clamped at zero.
    pub variance: Vec<f64>,
    pub rmse_vs_full: Option<f64>,
    pub rmse_vs_truth: Option<f64>,
    pub nlml: Option<f64>,
    pub inducing_initial: Option<Vec<f64>>,
    pub inducing_final: Option<Vec<f64>>,
    pub diagnostics: Option<serde_json::Value>,
    pub failure: Option<String>,
}

impl RunResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// `mean ± 1.96·sd`.
    pub fn band95(&self) -> (Vec<f64>, Vec<f64>) {
        let half: Vec<f64> = self.variance.iter().map(|v| 1.96 * v.max(0.0).sqrt()).collect();
        (
            self.mean.iter().zip(&half).map(|(m, h)| m - h).collect(),
            self.mean.iter().zip(&half).map(|(m, h)| m + h).collect(),
        )
    }

    /// Per-test-point data columns `x,truth,mean,variance,lo95,hi95`.
    pub fn to_csv(&self) -> Result<String> {
        let (lo, hi) = self.band95();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "truth", "mean", "variance", "lo95", "hi95"])?;
        for i in 0..self.mean.len() {
            w.write_record(
                [self.test_x[i], self.truth[i], self.mean[i], self.variance[i], lo[i], hi[i]]
                    .iter()
                    .map(|v| v.to_string()),
            )?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("CSV is UTF-8"))
    }

    /// Run metadata without the per-point arrays.
    pub fn metadata_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("run result serializes");
        if let Some(obj) = v.as_object_mut() {
            for key in ["test_x", "truth", "mean", "variance"] {
                obj.remove(key);
            }
        }
        v
    }
}

/// Runs one configured experiment on `toy`. Backend failures are captured
/// in [`RunResult::failure`] rather than returned as errors.
pub fn run_method(cfg: &ExperimentConfig, toy: &ToyData) -> Result<RunResult> {
    cfg.validate()?;
    let mut spec = cfg.hyper.to_spec()?;
    let xstar = toy.test_matrix();
    let mut result = RunResult {
        method: cfg.method,
        n: toy.data.len(),
        m: cfg.method.uses_m().then_some(cfg.m),
        seed: cfg.seed,
        hyper: None,
        fit_seconds: 0.0,
        predict_seconds: 0.0,
        test_x: toy.test_x.clone(),
        truth: toy.truth.clone(),
        mean: Vec::new(),
        variance: Vec::new(),
        rmse_vs_full: None,
        rmse_vs_truth: None,
        nlml: None,
        inducing_initial: None,
        inducing_final: None,
        diagnostics: None,
        failure: None,
    };
    if cfg.learn_hyper {
        match learn_hyper(&toy.data, &spec) {
            Ok(s) => spec = s,
            Err(e) => {
                result.failure = Some(format!("hyperparameter learning failed: {e}"));
                return Ok(result);
            }
        }
    }
    result.hyper = Some(spec.hyper().clone());
    let outcome = match fit_predict(cfg.method, cfg, &spec, &toy.data, &xstar) {
        Ok(o) => o,
        Err(e) => {
            result.failure = Some(e.to_string());
            return Ok(result);
        }
    };
    result.fit_seconds = outcome.fit_seconds;
    result.predict_seconds = outcome.predict_seconds;
    result.mean = outcome.prediction.mean.iter().copied().collect();
    result.variance = outcome.prediction.variance.iter().map(|v| v.max(0.0)).collect();
    result.nlml = Some(outcome.nlml);
    result.inducing_initial = outcome.inducing_initial;
    result.inducing_final = outcome.inducing_final;
    result.diagnostics = outcome.diagnostics;
    result.rmse_vs_truth = Some(rmse(&result.mean, &toy.truth));
    result.rmse_vs_full = if cfg.method == Method::Full {
        Some(0.0)
    } else if toy.data.len() <= cfg.oracle_cap {
        ExactPosterior::fit(&toy.data, &spec)
            .and_then(|p| p.predict_marginal(&xstar))
            .ok()
            .map(|p| rmse(&result.mean, p.mean.as_slice()))
    } else {
        None
    };
    Ok(result)
}

/// Fraction of points where `method`'s mean lies inside `full`'s 95% band.
pub fn band_coverage(method: &RunResult, full: &RunResult) -> Result<f64> {
    if method.mean.len() != full.mean.len() || method.test_x != full.test_x {
        return Err(CliError::Alignment(format!(
            "{} has {} predictions, {} has {}",
            method.method,
            method.mean.len(),
            full.method,
            full.mean.len()
        )));
    }
    let (lo, hi) = full.band95();
    let inside = method
        .mean
        .iter()
        .enumerate()
        .filter(|&(i, &m)| lo[i] <= m && m <= hi[i])
        .count();
    Ok(inside as f64 / method.mean.len().max(1) as f64)
}
