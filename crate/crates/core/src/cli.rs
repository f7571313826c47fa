//! Command-line front end: argument parsing and subcommand dispatch.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_config, ExperimentSpec, Overrides};
use crate::error::{Error, Result};
use crate::estimators::{asymptotic_oracle_from_trace, estimate, AsymptoticOracle, EstimateReport};
use crate::io::{fmt_f64, write_csv, write_json};
use crate::kernel::{build_profile, discretize, DiscretizedKernel};
use crate::measurements::{measure, spot_vol_with, MeasurementRecorder};
use crate::montecarlo::{
    rmse_sweep, run_replications, table_from_outcomes, write_hist_csv, write_runs_csv,
    write_sweep_csv, write_table_csv, McSummary,
};
use crate::simulator::{simulate, simulate_with};
use crate::stats::binomial_band;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Confidence of the binomial acceptance band reported by `coverage`.
const COVERAGE_BAND_CONFIDENCE: f64 = 0.99;

#[derive(Debug, Parser)]
#[command(name = "heatest", version = VERSION, about = "Diffusivity estimation for the stochastic heat equation")]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DumpFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate one path and write its local measurements
    Simulate {
        /// Also write the full solution matrix
        #[arg(long, value_enum)]
        dump: Option<DumpFormat>,
        /// Also write a sub-sampled (t, x, value) heat map
        #[arg(long)]
        heatmap: bool,
        #[arg(long, default_value_t = 100)]
        time_stride: usize,
        #[arg(long, default_value_t = 4)]
        space_stride: usize,
    },
    /// Simulate one path and print all estimator reports
    Estimate,
    /// Monte Carlo table, histograms and per-run records
    Mc,
    /// RMSE against the kernel resolution on a delta grid
    Sweep,
    /// Empirical coverage of the confidence intervals
    Coverage,
    /// KS test of the studentized errors against N(0, 1)
    Normality,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Estimate => "estimate",
            Command::Mc => "mc",
            Command::Sweep => "sweep",
            Command::Coverage => "coverage",
            Command::Normality => "normality",
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    command: &'static str,
    master_seed: u64,
    spec: &'a ExperimentSpec,
}

/// Estimator output on a single path, with its asymptotic oracle.
#[derive(Debug, Clone, Serialize)]
pub struct PathEstimate {
    pub delta: f64,
    pub report: EstimateReport,
    pub oracle: AsymptoticOracle,
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Io(format!("cannot create output directory {}: {e}", dir.display())))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"")
        .map_err(|e| Error::Io(format!("output directory {} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

fn kernels(spec: &ExperimentSpec) -> Result<Vec<DiscretizedKernel>> {
    let profile = build_profile(spec.profile);
    let grid = spec.model.spatial_grid();
    spec.delta_list()
        .iter()
        .map(|&d| discretize(&profile, spec.x0, d, &grid))
        .collect()
}

/// Runs one subcommand against a validated spec. Returns a JSON summary
/// (also printed by the binary).
pub fn dispatch(spec: &ExperimentSpec, command: &Command) -> Result<serde_json::Value> {
    prepare_out_dir(&spec.out_dir)?;
    write_json(
        &spec.out_dir.join("manifest.json"),
        &Manifest {
            version: VERSION,
            command: command.name(),
            master_seed: spec.model.seed,
            spec,
        },
    )?;
    match command {
        Command::Simulate {
            dump,
            heatmap,
            time_stride,
            space_stride,
        } => run_simulate(spec, *dump, *heatmap, *time_stride, *space_stride),
        Command::Estimate => {
            let estimates = estimate_path(spec)?;
            write_json(&spec.out_dir.join("estimates.json"), &estimates)?;
            Ok(serde_json::to_value(&estimates).map_err(|e| Error::Io(e.to_string()))?)
        }
        Command::Mc => run_mc(spec),
        Command::Sweep => {
            let sweep = rmse_sweep(&spec.mc_settings())?;
            write_sweep_csv(&spec.out_dir.join("rmse_sweep.csv"), &sweep)?;
            write_json(&spec.out_dir.join("sweep.json"), &sweep)?;
            Ok(json!({ "fitted_slope": sweep.fitted_slope }))
        }
        Command::Coverage => run_coverage(spec),
        Command::Normality => run_normality(spec),
    }
}

fn run_simulate(
    spec: &ExperimentSpec,
    dump: Option<DumpFormat>,
    heatmap: bool,
    time_stride: usize,
    space_stride: usize,
) -> Result<serde_json::Value> {
    let path = simulate(&spec.model)?;
    let dir = &spec.out_dir;
    let mut written = vec![];
    for (i, kernel) in kernels(spec)?.iter().enumerate() {
        let meas = measure(&path, kernel)?;
        let spot = spot_vol_with(&meas, spec.window, spec.startup)?;
        let name = format!("measurement_{i}.csv");
        meas.write_csv(&dir.join(&name), Some(&spot))?;
        written.push(name);
    }
    match dump {
        Some(DumpFormat::Csv) => {
            path.write_matrix_csv(BufWriter::new(File::create(dir.join("path.csv"))?))?;
            written.push("path.csv".into());
        }
        Some(DumpFormat::Binary) => {
            path.write_binary(BufWriter::new(File::create(dir.join("path.bin"))?))?;
            written.push("path.bin".into());
        }
        None => {}
    }
    if heatmap {
        path.write_heatmap_csv(
            BufWriter::new(File::create(dir.join("heatmap.csv"))?),
            time_stride,
            space_stride,
        )?;
        written.push("heatmap.csv".into());
    }
    let max_abs = path.rows().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(json!({ "files": written, "max_abs": max_abs }))
}

/// One streamed path at the master seed; every configured estimator at
/// every resolution. Any estimator failure is an error.
pub fn estimate_path(spec: &ExperimentSpec) -> Result<Vec<PathEstimate>> {
    let ks = kernels(spec)?;
    let config = &spec.model;
    let mut recorder = MeasurementRecorder::new(ks.clone(), spec.x0, config.time_steps);
    simulate_with(config, |_, row| recorder.observe(row))?;
    let (measurements, trace) = recorder.finish(config.time_grid().times(), config.dt());
    let mut out = Vec::new();
    for (i, (kernel, meas)) in ks.iter().zip(&measurements).enumerate() {
        let spot = spot_vol_with(meas, spec.window, spec.startup)?;
        meas.write_csv(&spec.out_dir.join(format!("measurement_{i}.csv")), Some(&spot))?;
        let eps = spec.epsilon.resolve(kernel.delta)?;
        for &kind in &spec.kinds {
            let report = estimate(kind, meas, &spot, eps, spec.alpha)?;
            let oracle = asymptotic_oracle_from_trace(
                kind,
                &trace,
                config,
                kernel.norm_k,
                kernel.norm_kprime,
                spec.zeta,
            )?;
            out.push(PathEstimate {
                delta: kernel.delta,
                report,
                oracle,
            });
        }
    }
    Ok(out)
}

fn summaries(spec: &ExperimentSpec) -> Result<(Vec<McSummary>, Vec<crate::montecarlo::RunOutcome>)> {
    let settings = spec.mc_settings();
    let outcomes = run_replications(&settings)?;
    let table = table_from_outcomes(&settings, &outcomes, 0)?;
    Ok((table, outcomes))
}

fn run_mc(spec: &ExperimentSpec) -> Result<serde_json::Value> {
    let (table, outcomes) = summaries(spec)?;
    let dir = &spec.out_dir;
    write_table_csv(&dir.join("table1.csv"), &table)?;
    for s in &table {
        write_hist_csv(&dir.join(format!("hist_{}.csv", s.kind.as_str().to_lowercase())), s)?;
    }
    write_runs_csv(&dir.join("runs.csv"), &outcomes, spec.model.theta)?;
    let brief: Vec<_> = table
        .iter()
        .map(|s| {
            json!({
                "kind": s.kind, "delta": s.delta, "mean": s.mean, "sd": s.sd,
                "rmse": s.rmse, "coverage": s.coverage, "excluded": s.excluded,
                "outliers": s.outliers,
                "ks_p_value": s.ks.map(|k| k.p_value),
            })
        })
        .collect();
    write_json(&dir.join("summary.json"), &brief)?;
    Ok(serde_json::Value::Array(brief))
}

fn run_coverage(spec: &ExperimentSpec) -> Result<serde_json::Value> {
    let (table, _) = summaries(spec)?;
    let nominal = 1.0 - spec.alpha;
    let mut rows = vec![];
    let mut brief = vec![];
    for s in &table {
        let (lo, hi) = binomial_band(s.aggregated, nominal, COVERAGE_BAND_CONFIDENCE);
        let within = s.coverage >= lo && s.coverage <= hi;
        rows.push(vec![
            s.kind.to_string(),
            s.aggregated.to_string(),
            fmt_f64(s.coverage),
            fmt_f64(nominal),
            fmt_f64(lo),
            fmt_f64(hi),
            within.to_string(),
        ]);
        brief.push(json!({
            "kind": s.kind, "runs": s.aggregated, "coverage": s.coverage,
            "band": [lo, hi], "within_band": within,
        }));
    }
    write_csv(
        &spec.out_dir.join("coverage.csv"),
        &["kind", "runs", "coverage", "nominal", "band_lo", "band_hi", "within_band"],
        &rows,
    )?;
    Ok(serde_json::Value::Array(brief))
}

fn run_normality(spec: &ExperimentSpec) -> Result<serde_json::Value> {
    let (table, _) = summaries(spec)?;
    let mut rows = vec![];
    let mut brief = vec![];
    for s in &table {
        let ks = s.ks.ok_or(Error::InsufficientRuns {
            got: s.aggregated,
            need: crate::stats::MIN_KS_SAMPLES,
        })?;
        rows.push(vec![
            s.kind.to_string(),
            ks.n.to_string(),
            fmt_f64(ks.statistic),
            fmt_f64(ks.p_value),
            fmt_f64(ks.level),
            ks.pass.to_string(),
        ]);
        brief.push(json!({ "kind": s.kind, "ks": ks }));
    }
    write_csv(
        &spec.out_dir.join("normality.csv"),
        &["kind", "n", "ks_statistic", "p_value", "level", "pass"],
        &rows,
    )?;
    Ok(serde_json::Value::Array(brief))
}

/// Machine-readable error line for stderr.
pub fn error_json(e: &Error) -> String {
    json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

/// Full pipeline used by the binary: parse, validate, dispatch.
pub fn run(cli: &Cli) -> Result<serde_json::Value> {
    let spec = parse_config(cli.config.as_deref(), &cli.overrides)?;
    dispatch(&spec, &cli.command)
}
