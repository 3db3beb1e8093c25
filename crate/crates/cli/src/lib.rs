//! Benchmark harness for the factorgp backends: toy data, single runs,
//! timing sweeps and accuracy-comparison exports.

pub mod cli;
pub mod config;
pub mod error;
pub mod figure;
pub mod run;
pub mod table;
pub mod toy;

pub use config::{ExperimentConfig, HyperInit, Method};
pub use error::{CliError, Result};
pub use figure::{export_fig_data, figure_runs, parse_fig_data, FigData, FigureRuns, FigureSummary};
pub use run::{band_coverage, fit_predict, learn_hyper, rmse, run_method, Outcome, RunResult};
pub use table::{timing_table, TimingCell, TimingTable};
pub use toy::{gen_toy, ToyData};
