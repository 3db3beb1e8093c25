//! Timing sweep: sizes as rows, methods as columns.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::{ExperimentConfig, Method};
use crate::error::Result;
use crate::run::fit_predict;
use crate::toy::gen_toy;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingCell {
    pub size: usize,
    pub method: Method,
    /// Fit + predict seconds per repeat.
    pub samples: Vec<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub failure: Option<String>,
}

impl TimingCell {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingTable {
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub repeats: usize,
    /// Row-major: `cells[i * methods.len() + j]`.
    pub cells: Vec<TimingCell>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Times fit + predict for every (size, method). Repeat `r` uses toy data
/// drawn with seed `seed + r`; within a repeat the methods run back to back
/// so slow drifts in machine load hit every method alike. A failing method
/// stops accumulating samples and is reported as `FAIL`.
pub fn timing_table(
    sizes: &[usize],
    methods: &[Method],
    repeats: usize,
    seed: u64,
    base: &ExperimentConfig,
) -> Result<TimingTable> {
    let spec = base.hyper.to_spec()?;
    let mut cells = Vec::with_capacity(sizes.len() * methods.len());
    for &size in sizes {
        let mut samples = vec![Vec::with_capacity(repeats); methods.len()];
        let mut failures: Vec<Option<String>> = vec![None; methods.len()];
        for r in 0..repeats {
            let toy = gen_toy(size, seed.wrapping_add(r as u64))?;
            let xstar = toy.test_matrix();
            for (j, &method) in methods.iter().enumerate() {
                if failures[j].is_some() {
                    continue;
                }
                match fit_predict(method, base, &spec, &toy.data, &xstar) {
                    Ok(o) => samples[j].push(o.fit_seconds + o.predict_seconds),
                    Err(e) => failures[j] = Some(e.to_string()),
                }
            }
        }
        for (j, &method) in methods.iter().enumerate() {
            let mut sorted = samples[j].clone();
            sorted.sort_by(f64::total_cmp);
            cells.push(TimingCell {
                size,
                method,
                samples: samples[j].clone(),
                median: quantile(&sorted, 0.5),
                q1: quantile(&sorted, 0.25),
                q3: quantile(&sorted, 0.75),
                failure: failures[j].take(),
            });
        }
    }
    Ok(TimingTable {
        sizes: sizes.to_vec(),
        methods: methods.to_vec(),
        repeats,
        cells,
    })
}

impl TimingTable {
    pub fn cell(&self, size: usize, method: Method) -> Option<&TimingCell> {
        let i = self.sizes.iter().position(|&s| s == size)?;
        let j = self.methods.iter().position(|&m| m == method)?;
        self.cells.get(i * self.methods.len() + j)
    }

    /// Median seconds, `None` for failed or absent cells.
    pub fn median(&self, size: usize, method: Method) -> Option<f64> {
        self.cell(size, method)
            .filter(|c| c.failure.is_none())
            .map(|c| c.median)
    }

    pub fn has_failures(&self) -> bool {
        self.cells.iter().any(|c| c.failure.is_some())
    }

    /// Aligned plain-text table of `median (IQR)` seconds.
    pub fn to_text(&self) -> String {
        let mut header = vec!["n".to_string()];
        header.extend(self.methods.iter().map(|m| m.name().to_uppercase()));
        let mut rows = vec![header];
        let mut notes = Vec::new();
        for (i, &size) in self.sizes.iter().enumerate() {
            let mut row = vec![size.to_string()];
            for j in 0..self.methods.len() {
                let c = &self.cells[i * self.methods.len() + j];
                match &c.failure {
                    Some(msg) => {
                        notes.push(format!("[{}] {} at n={}: {}", notes.len() + 1, c.method, size, msg));
                        row.push(format!("FAIL[{}]", notes.len()));
                    }
                    None => row.push(format!("{:.4} ({:.4})", c.median, c.iqr())),
                }
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|k| rows.iter().map(|r| r[k].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (r, row) in rows.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| format!("{cell:>w$}"))
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
            if r == 0 {
                writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))).unwrap();
            }
        }
        writeln!(out, "\nmedian (IQR) seconds of fit + predict over {} repeats", self.repeats).unwrap();
        for note in notes {
            writeln!(out, "{note}").unwrap();
        }
        out
    }

    /// Wide CSV: one row per size, `<method>_median,<method>_iqr` columns,
    /// `FAIL` in failed cells.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n".to_string()];
        for m in &self.methods {
            header.push(format!("{m}_median"));
            header.push(format!("{m}_iqr"));
        }
        w.write_record(&header)?;
        for (i, &size) in self.sizes.iter().enumerate() {
            let mut row = vec![size.to_string()];
            for j in 0..self.methods.len() {
                let c = &self.cells[i * self.methods.len() + j];
                if c.failure.is_some() {
                    row.push("FAIL".into());
                    row.push("FAIL".into());
                } else {
                    row.push(c.median.to_string());
                    row.push(c.iqr().to_string());
                }
            }
            w.write_record(&row)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("CSV is UTF-8"))
    }
}
