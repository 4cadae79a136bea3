//! Experiment orchestration and persistence: single simulation runs, regime
//! sweeps, inequality campaigns, fit reports, checkpointing and plot-script
//! emission. Every output file embeds the config hash on its first line.

use crate::analysis::{
    check_monotone_decay, fit_algebraic, fit_exponential, select_rate_model,
    MonotoneReport, ModelSelection, RateFit,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::functionals::{weights_for_regime, FunctionalRecord, WeightSet};
use crate::grid::{Field, Grid};
use crate::inequalities::{estimate_constants, poincare_constant, RatioReport};
use crate::model::{classify_regime, steady_state, Regime, SteadyState};
use crate::solver::{
    perturb_steady_state, simulate, PerturbOptions, Sampling, SimState, TimeSeries,
};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::{Path, PathBuf};

fn fmt(x: f64) -> String {
    format!("{:.16e}", x)
}

fn hash_line(hash: &str) -> String {
    format!("# config_hash={hash}\n")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Checks that an artifact carries the expected config hash on its first
/// line.
pub fn verify_artifact(path: &Path, expected: &str) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or("");
    match first.strip_prefix("# config_hash=") {
        Some(found) if found == expected => Ok(()),
        Some(found) => Err(Error::HashMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }),
        None => Err(Error::MalformedFile {
            path: path.display().to_string(),
            reason: "missing config hash line".into(),
        }),
    }
}

/// Summary block of one simulation run, serialized to summary.toml.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub regime: Regime,
    pub steady_state: SteadyState,
    pub weights: WeightSet,
    pub eta: f64,
    pub exit_time: Option<f64>,
    pub clipped_mass_total: f64,
    pub monotone_passed: bool,
    pub selection: Option<ModelSelection>,
}

/// In-memory result of run_simulate, alongside the files it wrote.
#[derive(Debug)]
pub struct RunResult {
    pub summary: RunSummary,
    pub series: TimeSeries,
    pub files: Vec<PathBuf>,
}

/// Resolves the composite-functional weights for a config: the explicit
/// override when present, the regime table otherwise.
pub fn resolve_weights(
    cfg: &ExperimentConfig,
    grid: &Grid,
    s: &SteadyState,
    r: &Regime,
) -> Result<WeightSet> {
    match &cfg.monitoring.weights {
        Some(w) => Ok(WeightSet {
            l2_u: w.l2_u,
            l2_v: w.l2_v,
            grad_u: w.grad_u,
            grad_v: w.grad_v,
            lap_u: w.lap_u,
            lap_v: w.lap_v,
            mass_v: None,
            grad_terms_active: w.grad_u > 0.0 || w.grad_v > 0.0,
        }),
        None => weights_for_regime(&cfg.parameters, s, r, poincare_constant(grid)),
    }
}

/// Distance series d(t) = w22_u + w22_v used by the rate fits.
pub fn distance_series(records: &[FunctionalRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .map(|rec| (rec.t, rec.w22_u + rec.w22_v))
        .collect()
}

pub fn series_csv(records: &[FunctionalRecord], hash: &str) -> String {
    let mut out = hash_line(hash);
    out.push_str(FunctionalRecord::CSV_HEADER);
    out.push('\n');
    for rec in records {
        out.push_str(&rec.csv_row());
        out.push('\n');
    }
    out
}

const PLOT_SCRIPT: &str = r##"#!/usr/bin/env python3
"""Plots the recorded functional series next to this script."""
import csv
import math
import os
import sys

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "series.csv")
rows = []
with open(path) as fh:
    for line in fh:
        if line.startswith("#"):
            continue
        rows.append(line.strip())
reader = csv.DictReader(rows)
data = {k: [] for k in reader.fieldnames}
for rec in reader:
    for k, v in rec.items():
        data[k].append(float(v))

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

fig, axes = plt.subplots(1, 3, figsize=(15, 4))
axes[0].semilogy(data["t"], [max(y, 1e-300) for y in data["y"]])
axes[0].set_title("composite functional y(t)")
axes[1].semilogy(
    data["t"], [max(a + b, 1e-300) for a, b in zip(data["w22_u"], data["w22_v"])]
)
axes[1].set_title("W22 distance to steady state")
axes[2].plot(data["t"], data["mass_u"], label="mass_u")
axes[2].plot(data["t"], data["mass_v"], label="mass_v")
axes[2].set_title("masses")
axes[2].legend()
for ax in axes:
    ax.set_xlabel("t")
fig.tight_layout()
out = os.path.join(os.path.dirname(path), "series.png")
fig.savefig(out, dpi=130)
print(out)
"##;

/// Runs one configured simulation end to end and writes all artifacts:
/// config echo, functional series, summary, final checkpoint and a plot
/// script.
pub fn run_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunResult> {
    cfg.validate()?;
    let hash = cfg.hash();
    let grid = cfg.grid.build()?;
    let p = &cfg.parameters;
    let regime = classify_regime(p)?;
    let s = steady_state(p, grid.volume())?;
    let weights = resolve_weights(cfg, &grid, &s, &regime)?;
    let eta = cfg.monitoring.eta_for(&s);

    let opts = PerturbOptions {
        fold_nonnegative: cfg.perturbation.fold_nonnegative,
        allow_mean_shift: cfg.perturbation.allow_mean_shift,
    };
    let initial = perturb_steady_state(
        &s,
        &grid,
        cfg.perturbation.epsilon,
        &cfg.perturbation.modes,
        cfg.perturbation.seed,
        &opts,
    )?;
    let sampling = Sampling {
        every_steps: cfg.stepping.sample_every_steps,
        snapshot_times: cfg.outputs.snapshot_times.clone(),
    };
    let series = simulate(
        &initial,
        p,
        &cfg.stepping.control(),
        cfg.stepping.t_end,
        &sampling,
        eta,
        &weights,
    )?;

    let d = distance_series(&series.records);
    let selection = select_rate_model(&d, regime.tag).ok();
    let ys: Vec<(f64, f64)> = series.records.iter().map(|r| (r.t, r.y)).collect();
    let monotone = check_monotone_decay(&ys, 1e-10);

    let summary = RunSummary {
        config_hash: hash.clone(),
        regime,
        steady_state: s,
        weights,
        eta,
        exit_time: series.exit_time,
        clipped_mass_total: series.clipped_mass_total,
        monotone_passed: monotone.passed,
        selection,
    };

    let mut files = Vec::new();
    let config_path = out_dir.join("config.toml");
    write_file(
        &config_path,
        &format!("{}{}", hash_line(&hash), cfg.canonical_toml()),
    )?;
    files.push(config_path);

    let series_path = out_dir.join("series.csv");
    write_file(&series_path, &series_csv(&series.records, &hash))?;
    files.push(series_path);

    let summary_path = out_dir.join("summary.toml");
    let summary_toml =
        toml::to_string(&summary).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    write_file(
        &summary_path,
        &format!("{}{}", hash_line(&hash), summary_toml),
    )?;
    files.push(summary_path);

    let checkpoint_path = out_dir.join("checkpoint.csv");
    let last = series
        .snapshots
        .last()
        .cloned()
        .unwrap_or_else(|| initial.clone());
    write_checkpoint(&checkpoint_path, &last, &hash)?;
    files.push(checkpoint_path);

    let plot_path = out_dir.join("plot_series.py");
    write_file(&plot_path, PLOT_SCRIPT)?;
    files.push(plot_path);

    for f in &files {
        if f.extension().is_some_and(|e| e == "csv" || e == "toml") {
            verify_artifact(f, &hash)?;
        }
    }

    Ok(RunResult {
        summary,
        series,
        files,
    })
}

/// Writes a full-field snapshot plus the metadata needed for bit-identical
/// restart on the same build.
pub fn write_checkpoint(path: &Path, state: &SimState, hash: &str) -> Result<()> {
    let grid = state.u.grid();
    let mut out = hash_line(hash);
    out.push_str(&format!(
        "# t={}\n# shape={}\n# lengths={}\nu,v\n",
        fmt(state.t),
        grid.shape()
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(";"),
        grid.lengths()
            .iter()
            .map(|&l| fmt(l))
            .collect::<Vec<_>>()
            .join(";"),
    ));
    for (u, v) in state.u.values().iter().zip(state.v.values()) {
        out.push_str(&format!("{},{}\n", fmt(*u), fmt(*v)));
    }
    write_file(path, &out)
}

/// Reads a checkpoint back; when `expected_hash` is given the embedded hash
/// must match.
pub fn read_checkpoint(path: &Path, expected_hash: Option<&str>) -> Result<SimState> {
    let text = std::fs::read_to_string(path)?;
    let malformed = |reason: &str| Error::MalformedFile {
        path: path.display().to_string(),
        reason: reason.into(),
    };
    let mut lines = text.lines();
    let hash = lines
        .next()
        .and_then(|l| l.strip_prefix("# config_hash="))
        .ok_or_else(|| malformed("missing config hash line"))?;
    if let Some(expected) = expected_hash {
        if hash != expected {
            return Err(Error::HashMismatch {
                expected: expected.to_string(),
                found: hash.to_string(),
            });
        }
    }
    let t: f64 = lines
        .next()
        .and_then(|l| l.strip_prefix("# t="))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed("missing time line"))?;
    let shape: Vec<usize> = lines
        .next()
        .and_then(|l| l.strip_prefix("# shape="))
        .map(|s| s.split(';').map(|x| x.parse::<usize>()).collect())
        .transpose()
        .ok()
        .flatten()
        .ok_or_else(|| malformed("missing shape line"))?;
    let lengths: Vec<f64> = lines
        .next()
        .and_then(|l| l.strip_prefix("# lengths="))
        .map(|s| s.split(';').map(|x| x.parse::<f64>()).collect())
        .transpose()
        .ok()
        .flatten()
        .ok_or_else(|| malformed("missing lengths line"))?;
    if lines.next() != Some("u,v") {
        return Err(malformed("missing column header"));
    }
    let grid = Grid::new(&shape, &lengths)?;
    let mut us = Vec::with_capacity(grid.num_cells());
    let mut vs = Vec::with_capacity(grid.num_cells());
    for line in lines {
        let (u, v) = line
            .split_once(',')
            .ok_or_else(|| malformed("malformed data row"))?;
        us.push(u.parse().map_err(|_| malformed("unparseable value"))?);
        vs.push(v.parse().map_err(|_| malformed("unparseable value"))?);
    }
    Ok(SimState {
        u: Field::from_values(&grid, us)?,
        v: Field::from_values(&grid, vs)?,
        t,
    })
}

/// One row of a sweep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub regime: Option<String>,
    pub winner: Option<String>,
    pub k2: Option<f64>,
    pub exit_time: Option<f64>,
    pub error: Option<String>,
}

/// Runs the base config once per axis value (dotted config path, or a bare
/// parameter name under [parameters]), concurrently up to `workers`.
/// Per-point failures are recorded in the table; the sweep continues.
pub fn run_sweep(
    base: &ExperimentConfig,
    axis: &str,
    values: &[f64],
    workers: usize,
    out_dir: &Path,
) -> Result<Vec<SweepRow>> {
    base.validate()?;
    let axis_path = if axis.contains('.') {
        axis.to_string()
    } else {
        format!("parameters.{axis}")
    };
    let base_toml = base.canonical_toml();
    let workers = workers.max(1);

    let run_point = |i: usize, value: f64| -> SweepRow {
        let point = (|| -> Result<RunResult> {
            let cfg = crate::config::parse_config(
                &base_toml,
                &[format!("{axis_path}={}", fmt(value))],
            )?;
            run_simulate(&cfg, &out_dir.join(format!("point_{i:03}")))
        })();
        match point {
            Ok(res) => SweepRow {
                value,
                regime: Some(res.summary.regime.tag.to_string()),
                winner: res
                    .summary
                    .selection
                    .as_ref()
                    .map(|sel| format!("{:?}", sel.winner).to_lowercase()),
                k2: res.summary.selection.as_ref().and_then(|sel| {
                    match sel.winner {
                        crate::analysis::RateModel::Exponential => {
                            sel.exponential.map(|f| f.k2)
                        }
                        crate::analysis::RateModel::Algebraic => {
                            sel.algebraic.map(|f| f.k2)
                        }
                    }
                }),
                exit_time: res.summary.exit_time,
                error: None,
            },
            Err(e) => SweepRow {
                value,
                regime: None,
                winner: None,
                k2: None,
                exit_time: None,
                error: Some(e.to_string()),
            },
        }
    };

    let mut rows: Vec<Option<SweepRow>> = vec![None; values.len()];
    let next = std::sync::atomic::AtomicUsize::new(0);
    let rows_mutex = std::sync::Mutex::new(&mut rows);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(values.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= values.len() {
                    break;
                }
                let row = run_point(i, values[i]);
                rows_mutex.lock().unwrap()[i] = Some(row);
            });
        }
    });
    let rows: Vec<SweepRow> = rows.into_iter().map(|r| r.unwrap()).collect();

    let mut csv = hash_line(&base.hash());
    csv.push_str("value,regime,winner,k2,exit_time,error\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(row.value),
            row.regime.clone().unwrap_or_default(),
            row.winner.clone().unwrap_or_default(),
            row.k2.map(fmt).unwrap_or_default(),
            row.exit_time.map(fmt).unwrap_or_default(),
            row.error.clone().unwrap_or_default().replace(',', ";"),
        ));
    }
    write_file(&out_dir.join("sweep.csv"), &csv)?;
    Ok(rows)
}

/// Runs the configured inequality campaign and writes one CSV per family
/// plus a summary.
pub fn run_inequalities(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<RatioReport>> {
    cfg.validate()?;
    let hash = cfg.hash();
    let grid = cfg.grid.build()?;
    let reports = estimate_constants(&cfg.inequalities, &grid)?;
    for report in &reports {
        let mut csv = hash_line(&hash);
        csv.push_str("sample,ratio\n");
        for (i, r) in report.ratios.iter().enumerate() {
            csv.push_str(&format!("{},{}\n", i, fmt(*r)));
        }
        csv.push_str(&format!(
            "max,{}\nmax_refined,{}\nargmax_sample,{}\n",
            fmt(report.max_ratio),
            fmt(report.max_ratio_refined),
            report.argmax_sample
        ));
        write_file(
            &out_dir.join(format!("inequality_{}.csv", report.id.name())),
            &csv,
        )?;
    }
    let summary = format!(
        "{}# empirical lower bounds on best discrete constants; refinement\n# trend is the upper-bound evidence\npoincare_constant = {}\n",
        hash_line(&hash),
        fmt(poincare_constant(&grid)),
    );
    write_file(&out_dir.join("inequalities_summary.toml"), &summary)?;
    Ok(reports)
}

/// Fit report for an existing series file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub exponential: Option<RateFit>,
    pub algebraic: Option<RateFit>,
    pub winner: Option<String>,
}

/// Reads a functional-series CSV and fits both decay laws to the distance
/// column pair on the tail window.
pub fn run_fit(series_path: &Path) -> Result<FitReport> {
    let text = std::fs::read_to_string(series_path)?;
    let malformed = |reason: &str| Error::MalformedFile {
        path: series_path.display().to_string(),
        reason: reason.into(),
    };
    let mut lines = text.lines().peekable();
    while lines.peek().is_some_and(|l| l.starts_with('#')) {
        lines.next();
    }
    let header = lines.next().ok_or_else(|| malformed("empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let t_idx = cols
        .iter()
        .position(|&c| c == "t")
        .ok_or_else(|| malformed("missing t column"))?;
    let wu_idx = cols
        .iter()
        .position(|&c| c == "w22_u")
        .ok_or_else(|| malformed("missing w22_u column"))?;
    let wv_idx = cols
        .iter()
        .position(|&c| c == "w22_v")
        .ok_or_else(|| malformed("missing w22_v column"))?;
    let mut series = Vec::new();
    for line in lines {
        let vals: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64> {
            vals.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| malformed("unparseable row"))
        };
        series.push((get(t_idx)?, get(wu_idx)? + get(wv_idx)?));
    }
    let tail = crate::analysis::tail_window(&series);
    let exponential = fit_exponential(&tail).ok();
    let algebraic = fit_algebraic(&tail).ok();
    let winner = match (&exponential, &algebraic) {
        (Some(e), Some(a)) => Some(if e.residual <= a.residual {
            "exponential".to_string()
        } else {
            "algebraic".to_string()
        }),
        (Some(_), None) => Some("exponential".to_string()),
        (None, Some(_)) => Some("algebraic".to_string()),
        (None, None) => None,
    };
    Ok(FitReport {
        exponential,
        algebraic,
        winner,
    })
}

/// Convenience wrapper exposing the monotone report of a finished run.
pub fn monotone_report(series: &TimeSeries, tolerance: f64) -> MonotoneReport {
    let ys: Vec<(f64, f64)> = series.records.iter().map(|r| (r.t, r.y)).collect();
    check_monotone_decay(&ys, tolerance)
}
