use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ExperimentConfig, Method};
use crate::error::{CliError, Result};
use crate::figure::figure_runs;
use crate::run::run_method;
use crate::table::timing_table;
use crate::toy::gen_toy;

#[derive(Debug, Parser)]
#[command(name = "bench", version, about = "Toy-problem accuracy and timing runs for the GP backends")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single experiment: data CSV plus run metadata.
    Run(CommonArgs),
    /// Timing sweep over sizes and methods.
    Table {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated training sizes.
        #[arg(long, value_delimiter = ',', default_value = "500,1000,2500,5000")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "full,fitc,vfe,ski,hcfgp")]
        methods: Vec<Method>,
    },
    /// Accuracy-comparison data for every method against the exact GP.
    Figure {
        #[command(flatten)]
        common: CommonArgs,
        /// Inducing-location optimization steps for FITC/VFE.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, value_delimiter = ',', default_value = "fitc,vfe,ski,hcfgp")]
        methods: Vec<Method>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON file mirroring the experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Inducing count (FITC/VFE) or grid size (SKI).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// ACA tolerance for the HODLR backend.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub leaf_size: Option<usize>,
    /// Learn hyperparameters with the exact GP first.
    #[arg(long)]
    pub learn_hyper: bool,
    /// Output directory; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

impl CommonArgs {
    pub fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.repeats {
            cfg.repeats = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.leaf_size {
            cfg.leaf_size = v;
        }
        cfg.learn_hyper |= self.learn_hyper;
        Ok(cfg)
    }
}

/// Writes `text` to `dir/name`, or to stdout without a directory.
fn emit(dir: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            fs::write(d.join(name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Runs a parsed command; `Ok(true)` when some run or cell failed.
pub fn execute(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Run(args) => {
            let cfg = args.config()?;
            cfg.validate()?;
            let toy = gen_toy(cfg.n, cfg.seed)?;
            let result = run_method(&cfg, &toy)?;
            let stem = format!("run_{}_n{}_seed{}", cfg.method, cfg.n, cfg.seed);
            let out = args.out.as_deref();
            match args.format {
                Format::Csv => {
                    let meta = serde_json::to_string_pretty(&result.metadata_json())? + "\n";
                    match out {
                        Some(_) => emit(out, &format!("{stem}.json"), &meta)?,
                        None => eprint!("{meta}"),
                    }
                    emit(out, &format!("{stem}.csv"), &result.to_csv()?)?;
                }
                Format::Json => emit(out, &format!("{stem}.json"), &(serde_json::to_string_pretty(&result)? + "\n"))?,
            }
            if let Some(f) = &result.failure {
                eprintln!("{} failed: {f}", cfg.method);
            }
            Ok(result.failed())
        }
        Command::Table { common, sizes, methods } => {
            let cfg = common.config()?;
            cfg.validate()?;
            if sizes.contains(&0) || sizes.is_empty() || methods.is_empty() {
                return Err(CliError::Config("sizes and methods must be non-empty, sizes ≥ 1".into()));
            }
            let table = timing_table(sizes, methods, cfg.repeats, cfg.seed, &cfg)?;
            let out = common.out.as_deref();
            match common.format {
                Format::Csv => {
                    emit(out, "table.txt", &table.to_text())?;
                    if out.is_some() {
                        emit(out, "table.csv", &table.to_csv()?)?;
                    }
                }
                Format::Json => emit(out, "table.json", &(serde_json::to_string_pretty(&table)? + "\n"))?,
            }
            Ok(table.has_failures())
        }
        Command::Figure { common, steps, methods } => {
            let mut cfg = common.config()?;
            cfg.inducing_steps = *steps;
            let runs = figure_runs(&cfg, methods)?;
            let summary = serde_json::to_string_pretty(&runs.summary())? + "\n";
            let out = common.out.as_deref();
            match common.format {
                Format::Csv => {
                    emit(out, "figure.csv", &runs.to_csv()?)?;
                    match out {
                        Some(_) => emit(out, "figure_summary.json", &summary)?,
                        None => eprint!("{summary}"),
                    }
                }
                Format::Json => emit(out, "figure_summary.json", &summary)?,
            }
            Ok(runs.results.iter().any(|r| r.failed()))
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(false) => 0,
        Ok(true) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
