use std::fmt;
use std::path::Path;
use std::str::FromStr;

use factorgp::{HcfgpConfig, HodlrSolver, HyperParams, KernelSpec, SkiConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Full,
    Fitc,
    Vfe,
    Ski,
    Hcfgp,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Full, Method::Fitc, Method::Vfe, Method::Ski, Method::Hcfgp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Fitc => "fitc",
            Method::Vfe => "vfe",
            Method::Ski => "ski",
            Method::Hcfgp => "hcfgp",
        }
    }

    /// Whether `m` (inducing count or grid size) means anything.
    pub fn uses_m(self) -> bool {
        matches!(self, Method::Fitc | Method::Vfe | Method::Ski)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CliError::Config(format!("unknown method {s:?}")))
    }
}

/// Initial hyperparameters in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperInit {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl Default for HyperInit {
    fn default() -> Self {
        HyperInit {
            lengthscale: 1.0,
            signal_variance: 1.0,
            noise_variance: 0.2,
        }
    }
}

impl HyperInit {
    pub fn to_spec(&self) -> Result<KernelSpec> {
        let h = HyperParams::new(&[self.lengthscale], self.signal_variance, self.noise_variance)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(KernelSpec::squared_exponential(h))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub n: usize,
    /// Inducing-point count (FITC/VFE) or grid size (SKI).
    pub m: usize,
    pub seed: u64,
    pub repeats: usize,
    pub hyper: HyperInit,
    /// Learn hyperparameters with the exact GP before running the method.
    pub learn_hyper: bool,
    /// Inducing-location optimization steps (FITC/VFE); 0 keeps the evenly
    /// spaced initialization.
    pub inducing_steps: usize,
    pub tol: f64,
    pub leaf_size: usize,
    pub max_rank: usize,
    pub solver: HodlrSolver,
    pub cg_tol: f64,
    pub cg_maxit: usize,
    /// Largest `n` for which the exact GP is run as an accuracy oracle.
    pub oracle_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let hodlr = HcfgpConfig::default();
        let ski = SkiConfig::default();
        ExperimentConfig {
            method: Method::Full,
            n: 100,
            m: 10,
            seed: 0,
            repeats: 100,
            hyper: HyperInit::default(),
            learn_hyper: false,
            inducing_steps: 0,
            tol: hodlr.tol,
            leaf_size: hodlr.leaf_size,
            max_rank: hodlr.max_rank,
            solver: hodlr.solver,
            cg_tol: ski.cg_tol,
            cg_maxit: ski.cg_maxit,
            oracle_cap: 8000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        match self.method {
            Method::Fitc | Method::Vfe if self.m == 0 => return bad("m must be at least 1".into()),
            Method::Ski if self.m < 2 => return bad("SKI grid needs at least 2 points".into()),
            _ => {}
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.leaf_size < 8 {
            return bad(format!("leaf_size must be at least 8, got {}", self.leaf_size));
        }
        if self.max_rank == 0 {
            return bad("max_rank must be at least 1".into());
        }
        if !(self.cg_tol > 0.0) || self.cg_maxit == 0 {
            return bad("CG tolerance and iteration cap must be positive".into());
        }
        self.hyper.to_spec()?;
        Ok(())
    }

    pub fn hcfgp(&self) -> HcfgpConfig {
        HcfgpConfig {
            tol: self.tol,
            leaf_size: self.leaf_size,
            max_rank: self.max_rank,
            solver: self.solver,
        }
    }

    pub fn ski(&self) -> SkiConfig {
        SkiConfig {
            cg_tol: self.cg_tol,
            cg_maxit: self.cg_maxit,
        }
    }
}
