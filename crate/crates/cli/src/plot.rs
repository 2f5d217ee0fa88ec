//! Standalone matplotlib scripts for the CSV outputs.
//!
//! The scripts are artifacts: nothing here runs Python.

use std::path::{Path, PathBuf};

use clap::ValueEnum;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Risk against gamma, log x axis.
    Gamma,
    /// Risk against flow time, log x axis.
    Time,
    /// Bias, variance and total against the interpolation parameter.
    Alpha,
}

impl PlotKind {
    pub fn x_column(self) -> &'static str {
        match self {
            PlotKind::Gamma => "gamma",
            PlotKind::Time => "t",
            PlotKind::Alpha => "alpha",
        }
    }

    fn log_x(self) -> bool {
        !matches!(self, PlotKind::Alpha)
    }

    fn title(self) -> &'static str {
        match self {
            PlotKind::Gamma => "risk against gamma",
            PlotKind::Time => "risk against time",
            PlotKind::Alpha => "risk against alpha",
        }
    }
}

const METRICS: [&str; 3] = ["bias", "variance", "total"];

/// How a CSV is drawn: curves for per-point values, markers for Monte Carlo means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Style {
    Line,
    Points,
}

fn read_header(path: &Path) -> CliResult<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Csv { path: path.to_path_buf(), source: e })?;
    let header = rdr.headers().map_err(|e| CliError::Csv { path: path.to_path_buf(), source: e })?;
    Ok(header.iter().map(str::to_string).collect())
}

/// Returns the style and the name of the total-risk column (`total` or `risk`).
fn classify(file: &str, header: &[String], kind: PlotKind) -> CliResult<(Style, &'static str)> {
    let has = |c: &str| header.iter().any(|h| h == c);
    let missing = |c: &str| CliError::MissingColumn { file: file.to_string(), column: c.to_string() };
    if !has(kind.x_column()) {
        return Err(missing(kind.x_column()));
    }
    if !has("preconditioner") && !has("family") {
        return Err(missing("preconditioner"));
    }
    let style = if has("bias_mean") { Style::Points } else { Style::Line };
    let total = if style == Style::Line && !has("total") && has("risk") { "risk" } else { "total" };
    for m in METRICS {
        let m = if m == "total" { total } else { m };
        let col = if style == Style::Points { format!("{m}_mean") } else { m.to_string() };
        if !has(&col) {
            return Err(missing(&col));
        }
    }
    Ok((style, total))
}

fn py_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Checks the columns of each CSV and returns the script text. `csvs` are
/// written into the script as given; relative paths resolve against the
/// script's own directory.
pub fn emit_plot_script(csvs: &[&Path], kind: PlotKind) -> CliResult<String> {
    render(csvs.iter().map(|p| (p.to_string_lossy().into_owned(), p.to_path_buf())).collect(), kind)
}

/// Same as [`emit_plot_script`] for files in `dir`, embedding bare file names.
pub fn emit_for_dir(dir: &Path, names: &[&str], kind: PlotKind) -> CliResult<String> {
    render(names.iter().map(|n| (n.to_string(), dir.join(n))).collect(), kind)
}

/// `files` pairs the name written into the script with the path read now.
fn render(files: Vec<(String, PathBuf)>, kind: PlotKind) -> CliResult<String> {
    if files.is_empty() {
        return Err(CliError::config("csv", "no CSV files given"));
    }
    let mut entries = Vec::new();
    for (name, path) in &files {
        let (style, total) = classify(name, &read_header(path)?, kind)?;
        let style = match style {
            Style::Points => "points",
            Style::Line => "line",
        };
        entries.push(format!("    ({}, {}, {}),", py_str(name), py_str(style), py_str(total)));
    }
    Ok(SCRIPT
        .replace("@TITLE@", kind.title())
        .replace("@X@", &py_str(kind.x_column()))
        .replace("@LOGX@", if kind.log_x() { "True" } else { "False" })
        .replace("@FILES@", &entries.join("\n"))
        .replace("@OUT@", &py_str(&format!("plot_{}.png", kind.x_column()))))
}

const SCRIPT: &str = r#"#!/usr/bin/env python3
"""@TITLE@ (generated by precond-risk plot).

Usage: python3 this_script.py [output.png]
"""
import csv
import os
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

X = @X@
LOG_X = @LOGX@
FILES = [
@FILES@
]
OUT = sys.argv[1] if len(sys.argv) > 1 else @OUT@
HERE = os.path.dirname(os.path.abspath(__file__))


def load(path):
    if not os.path.isabs(path):
        path = os.path.join(HERE, path)
    groups = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = row.get("preconditioner") or row.get("family")
            if row.get("seed"):
                key = f"{key} seed {row['seed']}"
            groups[key].append(row)
    for rows in groups.values():
        rows.sort(key=lambda r: float(r[X]))
    return groups


def main():
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.8))
    colors = {}
    for path, style, total in FILES:
        for key, rows in load(path).items():
            base = key.split(" seed ")[0]
            color = colors.setdefault(base, f"C{len(colors) % 10}")
            xs = [float(r[X]) for r in rows]
            for ax, metric in zip(axes, ("bias", "variance", total)):
                if style == "points":
                    ys = [float(r[metric + "_mean"]) for r in rows]
                    err = [float(r.get(metric + "_std") or 0.0) for r in rows]
                    ax.errorbar(xs, ys, yerr=err, fmt="o", ms=4, capsize=2, color=color, label=f"{key} (sim)")
                else:
                    ys = [float(r[metric]) for r in rows]
                    ax.plot(xs, ys, color=color, label=key)
    for ax, metric in zip(axes, ("bias", "variance", "total")):
        ax.set_xlabel(X)
        ax.set_title(metric)
        if LOG_X:
            ax.set_xscale("log")
    axes[-1].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(OUT, dpi=150)


if __name__ == "__main__":
    main()
"#;
