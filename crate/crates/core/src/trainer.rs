//! Hyperparameter learning: gradient descent with backtracking (Armijo) line
//! search in log-parameter space.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};
use crate::kernel::HyperParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    /// Ignore any analytic gradient and use central differences.
    pub use_finite_diff: bool,
    pub fd_step: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            max_iters: 200,
            grad_tol: 1e-5,
            step_tol: 1e-10,
            use_finite_diff: false,
            fd_step: 1e-5,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(GpError::InvalidInput("max_iters must be at least 1".into()));
        }
        for (name, v) in [
            ("grad_tol", self.grad_tol),
            ("step_tol", self.step_tol),
            ("fd_step", self.fd_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GpError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    StepTolerance,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub theta: Vec<f64>,
    pub value: f64,
    pub trace: Vec<TraceEntry>,
    pub stop: StopReason,
}

#[derive(Debug, Clone)]
pub struct Optimized {
    pub hyper: HyperParams,
    pub value: f64,
    pub trace: Vec<TraceEntry>,
    pub stop: StopReason,
}

/// Central-difference gradient.
pub fn finite_diff_grad<F>(objective: F, theta: &[f64], fd_step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            work[i] = theta[i] + fd_step;
            let fp = objective(&work);
            work[i] = theta[i] - fd_step;
            let fm = objective(&work);
            work[i] = theta[i];
            (fp - fm) / (2.0 * fd_step)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimizes `objective` over a flat parameter vector. Non-finite objective
/// values are treated as infeasible and make the line search shrink.
pub fn minimize<F, G>(objective: F, gradient: Option<G>, theta0: &[f64], cfg: &OptimizeConfig) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    cfg.validate()?;
    let grad_of = |theta: &[f64]| -> Vec<f64> {
        match (&gradient, cfg.use_finite_diff) {
            (Some(g), false) => g(theta),
            _ => finite_diff_grad(&objective, theta, cfg.fd_step),
        }
    };

    let mut theta = theta0.to_vec();
    let mut value = objective(&theta);
    if !value.is_finite() {
        return Err(GpError::OptimizationFailed { trace: Vec::new() });
    }
    let mut trace = vec![TraceEntry {
        iteration: 0,
        objective: value,
        grad_norm: f64::NAN,
        step_size: 0.0,
    }];
    let mut step: Option<f64> = None;

    for iter in 1..=cfg.max_iters {
        let g = grad_of(&theta);
        let gnorm = norm(&g);
        trace.last_mut().expect("trace is never empty").grad_norm = gnorm;
        if !gnorm.is_finite() {
            return Err(GpError::OptimizationFailed { trace });
        }
        if gnorm <= cfg.grad_tol {
            return Ok(Minimum {
                theta,
                value,
                trace,
                stop: StopReason::GradientTolerance,
            });
        }
        let mut t = step.unwrap_or(1.0 / gnorm.max(1.0));
        let mut found_finite = false;
        let accepted = loop {
            if t * gnorm < cfg.step_tol {
                break None;
            }
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(x, gi)| x - t * gi).collect();
            let v = objective(&cand);
            if v.is_finite() {
                found_finite = true;
                // Armijo sufficient decrease
                if v <= value - 1e-4 * t * gnorm * gnorm {
                    break Some((cand, v));
                }
            }
            t *= 0.5;
        };
        match accepted {
            Some((cand, v)) => {
                theta = cand;
                value = v;
                trace.push(TraceEntry {
                    iteration: iter,
                    objective: v,
                    grad_norm: f64::NAN,
                    step_size: t * gnorm,
                });
                step = Some(2.0 * t);
            }
            None if !found_finite => return Err(GpError::OptimizationFailed { trace }),
            None => {
                return Ok(Minimum {
                    theta,
                    value,
                    trace,
                    stop: StopReason::StepTolerance,
                })
            }
        }
    }
    let g = grad_of(&theta);
    trace.last_mut().expect("trace is never empty").grad_norm = norm(&g);
    Ok(Minimum {
        theta,
        value,
        trace,
        stop: StopReason::MaxIterations,
    })
}

/// Minimizes a negative log marginal likelihood over log-space
/// hyperparameters. Objective or gradient errors count as infeasible points.
pub fn minimize_nlml<F, G>(
    objective: F,
    gradient: Option<G>,
    theta0: &HyperParams,
    cfg: &OptimizeConfig,
) -> Result<Optimized>
where
    F: Fn(&HyperParams) -> Result<f64>,
    G: Fn(&HyperParams) -> Result<DVector<f64>>,
{
    let wrap = |theta: &[f64]| -> f64 {
        HyperParams::from_vec(theta)
            .and_then(|h| objective(&h))
            .unwrap_or(f64::NAN)
    };
    let n = theta0.n_params();
    let grad_wrap = gradient.map(|g| {
        move |theta: &[f64]| -> Vec<f64> {
            HyperParams::from_vec(theta)
                .and_then(|h| g(&h))
                .map(|v| v.iter().copied().collect())
                .unwrap_or_else(|_| vec![f64::NAN; n])
        }
    });
    let min = minimize(wrap, grad_wrap, &theta0.to_vec(), cfg)?;
    Ok(Optimized {
        hyper: HyperParams::from_vec(&min.theta)?,
        value: min.value,
        trace: min.trace,
        stop: min.stop,
    })
}

/// Writes a trace as CSV with columns `iteration,objective,grad_norm,step_size`.
pub fn write_trace_csv<W: Write>(trace: &[TraceEntry], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()
}
