//! Replicated experiments: per-run pipeline, aggregation, normality checks
//! and RMSE-versus-δ sweeps.
//!
//! Each replication derives its seed from the master seed and its run index,
//! runs simulate → measure → spot-vol → estimators → oracle, and returns its
//! records. Runs execute on a rayon pool but are reduced in run-index order,
//! so every summary is independent of the worker count.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    asymptotic_oracle_from_trace, default_epsilon_sq, estimate, AsymptoticOracle,
    ConfidenceInterval, EstimateReport, EstimatorKind,
};
use crate::io::{fmt_f64, write_csv};
use crate::kernel::{build_profile, discretize, DiscretizedKernel, ProfileId};
use crate::measurements::{spot_vol_with, MeasurementRecorder, StartUp};
use crate::model::SpdeConfig;
use crate::noise::derive_seed;
use crate::simulator::simulate_with;
use crate::stats::{
    freedman_diaconis, gaussian_mixture_density, ks_normal_test, mean, ols_slope, rmse,
    sample_sd, Histogram, KsOutcome,
};

/// Stabilising constant `ε²` for the SMNE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonChoice {
    /// `0.001 / log(10/δ)`
    Auto,
    Fixed(f64),
}

impl EpsilonChoice {
    pub fn resolve(&self, delta: f64) -> Result<f64> {
        match *self {
            EpsilonChoice::Auto => default_epsilon_sq(delta),
            EpsilonChoice::Fixed(v) => Ok(v),
        }
    }
}

/// Everything a batch of replications needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    /// Model and grid; `seed` is the master seed.
    pub model: SpdeConfig,
    pub profile: ProfileId,
    pub x0: f64,
    /// Resolutions measured on every path; tables use the first one.
    pub deltas: Vec<f64>,
    /// Spot-volatility window `D`.
    pub window: usize,
    pub startup: StartUp,
    pub epsilon: EpsilonChoice,
    pub alpha: f64,
    pub zeta: f64,
    pub kinds: Vec<EstimatorKind>,
    pub runs: usize,
    pub jobs: usize,
    /// KS level for the normality flag in summaries.
    pub ks_level: f64,
}

/// One estimator on one path at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub kind: EstimatorKind,
    pub delta: f64,
    pub theta_hat: f64,
    pub ci: ConfidenceInterval,
    pub sd_oracle: f64,
    pub t_star: f64,
    pub epsilon_sq: Option<f64>,
}

impl RunRecord {
    /// `δ^{-1}(θ̂ - θ) / sd_oracle`
    pub fn studentized(&self, theta: f64) -> f64 {
        (self.theta_hat - theta) / (self.delta * self.sd_oracle)
    }
}

/// A run that produced no record for some estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub run: usize,
    pub kind: EstimatorKind,
    pub delta: f64,
    pub reason: String,
}

/// Outcome of one replication: `records[d]` / `exclusions[d]` per resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    pub records: Vec<Vec<RunRecord>>,
    pub exclusions: Vec<Vec<Exclusion>>,
}

impl McSettings {
    pub fn validate(&self) -> Result<Vec<DiscretizedKernel>> {
        self.model.validate()?;
        if self.deltas.is_empty() {
            return Err(Error::InvalidArgument("at least one delta is required".into()));
        }
        if self.kinds.is_empty() {
            return Err(Error::InvalidArgument("at least one estimator is required".into()));
        }
        if self.window == 0 {
            return Err(Error::InvalidArgument("spot-vol window must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let profile = build_profile(self.profile);
        let grid = self.model.spatial_grid();
        self.deltas
            .iter()
            .map(|&d| discretize(&profile, self.x0, d, &grid))
            .collect()
    }
}

fn single_run(settings: &McSettings, kernels: &[DiscretizedKernel], run: usize) -> Result<RunOutcome> {
    let seed = derive_seed(settings.model.seed, run as u64);
    let config = settings.model.with_seed(seed);
    let mut recorder = MeasurementRecorder::new(kernels.to_vec(), settings.x0, config.time_steps);
    simulate_with(&config, |_, row| recorder.observe(row))?;
    let (measurements, trace) = recorder.finish(config.time_grid().times(), config.dt());

    let mut records = Vec::with_capacity(kernels.len());
    let mut exclusions = Vec::with_capacity(kernels.len());
    for (kernel, meas) in kernels.iter().zip(&measurements) {
        let spot = spot_vol_with(meas, settings.window, settings.startup)?;
        let eps = settings.epsilon.resolve(kernel.delta)?;
        let mut recs = Vec::new();
        let mut excl = Vec::new();
        for &kind in &settings.kinds {
            let outcome = estimate(kind, meas, &spot, eps, settings.alpha).and_then(|r| {
                asymptotic_oracle_from_trace(
                    kind,
                    &trace,
                    &config,
                    kernel.norm_k,
                    kernel.norm_kprime,
                    settings.zeta,
                )
                .map(|o| (r, o))
            });
            match outcome {
                Ok((report, oracle)) => recs.push(record(run, kernel.delta, &report, &oracle)),
                Err(e) => excl.push(Exclusion {
                    run,
                    kind,
                    delta: kernel.delta,
                    reason: e.to_string(),
                }),
            }
        }
        records.push(recs);
        exclusions.push(excl);
    }
    Ok(RunOutcome {
        run,
        seed,
        records,
        exclusions,
    })
}

fn record(run: usize, delta: f64, r: &EstimateReport, o: &AsymptoticOracle) -> RunRecord {
    RunRecord {
        run,
        kind: r.kind,
        delta,
        theta_hat: r.theta_hat,
        ci: r.ci,
        sd_oracle: o.sd,
        t_star: o.t_star,
        epsilon_sq: r.epsilon_sq,
    }
}

/// Runs all replications; results are ordered by run index.
pub fn run_replications(settings: &McSettings) -> Result<Vec<RunOutcome>> {
    let kernels = settings.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunOutcome>> = pool.install(|| {
        (0..settings.runs)
            .into_par_iter()
            .map(|run| {
                single_run(settings, &kernels, run).map_err(|e| Error::Run {
                    run,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Records for `kind` at resolution index `d`, in run order.
pub fn collect_records(outcomes: &[RunOutcome], d: usize, kind: EstimatorKind) -> Vec<RunRecord> {
    outcomes
        .iter()
        .flat_map(|o| o.records[d].iter().filter(|r| r.kind == kind).cloned())
        .collect()
}

pub fn collect_exclusions(outcomes: &[RunOutcome], d: usize, kind: EstimatorKind) -> Vec<Exclusion> {
    outcomes
        .iter()
        .flat_map(|o| o.exclusions[d].iter().filter(|e| e.kind == kind).cloned())
        .collect()
}

/// Pointwise average of the per-run asymptotic densities `N(θ, (δ sd_r)²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureDensity {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Standard deviations `δ · sd_r` of the components.
    pub component_sds: Vec<f64>,
    pub center: f64,
}

const MIXTURE_GRID_POINTS: usize = 4001;
const MIXTURE_HALF_WIDTH_SDS: f64 = 10.0;

impl MixtureDensity {
    pub fn new(center: f64, component_sds: Vec<f64>) -> Self {
        let widest = component_sds.iter().cloned().fold(0.0, f64::max);
        let (a, b) = (
            center - MIXTURE_HALF_WIDTH_SDS * widest,
            center + MIXTURE_HALF_WIDTH_SDS * widest,
        );
        let step = (b - a) / (MIXTURE_GRID_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..MIXTURE_GRID_POINTS).map(|i| a + i as f64 * step).collect();
        let density = grid
            .iter()
            .map(|&x| gaussian_mixture_density(x, center, &component_sds))
            .collect();
        Self {
            grid,
            density,
            component_sds,
            center,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        gaussian_mixture_density(x, self.center, &self.component_sds)
    }

    /// Trapezoid integral over the evaluation grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub kind: EstimatorKind,
    pub delta: f64,
    /// Runs attempted.
    pub runs: usize,
    pub aggregated: usize,
    pub excluded: usize,
    pub mean: f64,
    pub sd: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub ks: Option<KsOutcome>,
    pub hist: Histogram,
    /// Estimates outside `[0, 2θ]`, counted separately for display.
    pub outliers: usize,
    pub mixture: MixtureDensity,
}

/// Aggregates the records of one estimator. `runs` counts attempts, so
/// `runs = records.len() + excluded`.
pub fn summarize(
    kind: EstimatorKind,
    delta: f64,
    theta: f64,
    records: &[RunRecord],
    excluded: usize,
    ks_level: f64,
) -> Result<McSummary> {
    if records.len() < 2 {
        return Err(Error::InsufficientRuns {
            got: records.len(),
            need: 2,
        });
    }
    let est: Vec<f64> = records.iter().map(|r| r.theta_hat).collect();
    let covered = records.iter().filter(|r| r.ci.contains(theta)).count();
    let z: Vec<f64> = records.iter().map(|r| r.studentized(theta)).collect();
    let ks = match ks_normal_test(&z, ks_level) {
        Ok(k) => Some(k),
        Err(Error::InsufficientRuns { .. }) => None,
        Err(e) => return Err(e),
    };
    let outliers = est.iter().filter(|&&t| !(0.0..=2.0 * theta).contains(&t)).count();
    let mixture = MixtureDensity::new(theta, records.iter().map(|r| delta * r.sd_oracle).collect());
    Ok(McSummary {
        kind,
        delta,
        runs: records.len() + excluded,
        aggregated: records.len(),
        excluded,
        mean: mean(&est),
        sd: sample_sd(&est),
        rmse: rmse(&est, theta),
        coverage: covered as f64 / records.len() as f64,
        ks,
        hist: freedman_diaconis(&est),
        outliers,
        mixture,
    })
}

/// Summaries for every configured estimator at the first resolution.
pub fn run_table(settings: &McSettings) -> Result<Vec<McSummary>> {
    if settings.runs < 2 {
        return Err(Error::InsufficientRuns {
            got: settings.runs,
            need: 2,
        });
    }
    let outcomes = run_replications(settings)?;
    table_from_outcomes(settings, &outcomes, 0)
}

pub fn table_from_outcomes(
    settings: &McSettings,
    outcomes: &[RunOutcome],
    d: usize,
) -> Result<Vec<McSummary>> {
    settings
        .kinds
        .iter()
        .map(|&kind| {
            let recs = collect_records(outcomes, d, kind);
            let excl = collect_exclusions(outcomes, d, kind).len();
            summarize(kind, settings.deltas[d], settings.model.theta, &recs, excl, settings.ks_level)
        })
        .collect()
}

/// Studentized errors `δ^{-1}(θ̂_r - θ)/sd_r` tested against N(0, 1).
pub fn studentize_and_test(
    reports: &[EstimateReport],
    oracles: &[AsymptoticOracle],
    theta: f64,
    delta: f64,
    level: f64,
) -> Result<KsOutcome> {
    if reports.len() != oracles.len() {
        return Err(Error::InvalidArgument(format!(
            "{} reports but {} oracles",
            reports.len(),
            oracles.len()
        )));
    }
    let z: Vec<f64> = reports
        .iter()
        .zip(oracles)
        .map(|(r, o)| (r.theta_hat - theta) / (delta * o.sd))
        .collect();
    ks_normal_test(&z, level)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub kind: EstimatorKind,
    pub rmse: f64,
    /// `sqrt(mean_r (δ sd_r)²)`: RMSE predicted by the asymptotic law.
    pub predicted_rmse: f64,
    /// Delta-method standard error of the Monte Carlo RMSE.
    pub mc_se: f64,
    pub runs: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseSweep {
    pub deltas: Vec<f64>,
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of `log10 rmse` on `log10 δ`, per estimator.
    pub fitted_slope: Vec<(EstimatorKind, f64)>,
}

impl RmseSweep {
    pub fn slope(&self, kind: EstimatorKind) -> Option<f64> {
        self.fitted_slope.iter().find(|(k, _)| *k == kind).map(|(_, s)| *s)
    }

    pub fn point(&self, delta: f64, kind: EstimatorKind) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.delta == delta && p.kind == kind)
    }
}

/// RMSE at every resolution in `settings.deltas` (strictly decreasing) and
/// fitted log-log slope. Each path is measured at all resolutions.
pub fn rmse_sweep(settings: &McSettings) -> Result<RmseSweep> {
    if settings.deltas.len() < 2 {
        return Err(Error::InvalidArgument(
            "RMSE sweep needs at least two delta values to fit a slope".into(),
        ));
    }
    if settings.deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("delta grid must be strictly decreasing".into()));
    }
    let outcomes = run_replications(settings)?;
    sweep_from_outcomes(settings, &outcomes)
}

pub fn sweep_from_outcomes(settings: &McSettings, outcomes: &[RunOutcome]) -> Result<RmseSweep> {
    let theta = settings.model.theta;
    let mut points = Vec::new();
    for (d, &delta) in settings.deltas.iter().enumerate() {
        for &kind in &settings.kinds {
            let recs = collect_records(outcomes, d, kind);
            if recs.len() < 2 {
                return Err(Error::InsufficientRuns {
                    got: recs.len(),
                    need: 2,
                });
            }
            let sq: Vec<f64> = recs.iter().map(|r| (r.theta_hat - theta).powi(2)).collect();
            let mse = mean(&sq);
            let err_rmse = mse.sqrt();
            let mc_se = sample_sd(&sq) / (sq.len() as f64).sqrt() / (2.0 * err_rmse);
            let predicted = mean(
                &recs
                    .iter()
                    .map(|r| (delta * r.sd_oracle).powi(2))
                    .collect::<Vec<_>>(),
            )
            .sqrt();
            points.push(SweepPoint {
                delta,
                kind,
                rmse: err_rmse,
                predicted_rmse: predicted,
                mc_se,
                runs: recs.len(),
                excluded: collect_exclusions(outcomes, d, kind).len(),
            });
        }
    }
    let log_d: Vec<f64> = settings.deltas.iter().map(|d| d.log10()).collect();
    let fitted_slope = settings
        .kinds
        .iter()
        .map(|&kind| {
            let log_r: Vec<f64> = points
                .iter()
                .filter(|p| p.kind == kind)
                .map(|p| p.rmse.log10())
                .collect();
            (kind, ols_slope(&log_d, &log_r))
        })
        .collect();
    Ok(RmseSweep {
        deltas: settings.deltas.clone(),
        points,
        fitted_slope,
    })
}

pub fn write_table_csv(path: &Path, summaries: &[McSummary]) -> Result<()> {
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            vec![
                s.kind.to_string(),
                fmt_f64(s.mean),
                fmt_f64(s.sd),
                fmt_f64(s.rmse),
                fmt_f64(s.coverage),
                s.excluded.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["kind", "mean", "sd", "rmse", "coverage", "excluded"], &rows)
}

pub fn write_hist_csv(path: &Path, summary: &McSummary) -> Result<()> {
    let h = &summary.hist;
    let rows: Vec<Vec<String>> = (0..h.bins())
        .map(|i| {
            let c = 0.5 * (h.edges[i] + h.edges[i + 1]);
            vec![
                fmt_f64(h.edges[i]),
                fmt_f64(h.edges[i + 1]),
                h.counts[i].to_string(),
                fmt_f64(summary.mixture.eval(c)),
            ]
        })
        .collect();
    write_csv(path, &["bin_lo", "bin_hi", "count", "mixture_density"], &rows)
}

pub fn write_sweep_csv(path: &Path, sweep: &RmseSweep) -> Result<()> {
    let rows: Vec<Vec<String>> = sweep
        .points
        .iter()
        .map(|p| {
            vec![
                fmt_f64(p.delta),
                p.kind.to_string(),
                fmt_f64(p.rmse),
                fmt_f64(sweep.slope(p.kind).unwrap_or(f64::NAN)),
            ]
        })
        .collect();
    write_csv(path, &["delta", "kind", "rmse", "slope"], &rows)
}

/// Per-run records as CSV (one row per run, estimator and resolution).
pub fn write_runs_csv(path: &Path, outcomes: &[RunOutcome], theta: f64) -> Result<()> {
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .flat_map(|o| o.records.iter().flatten())
        .map(|r| {
            vec![
                r.run.to_string(),
                fmt_f64(r.delta),
                r.kind.to_string(),
                fmt_f64(r.theta_hat),
                fmt_f64(r.ci.lower),
                fmt_f64(r.ci.upper),
                fmt_f64(r.sd_oracle),
                fmt_f64(r.t_star),
                fmt_f64(r.studentized(theta)),
            ]
        })
        .collect();
    write_csv(
        path,
        &["run", "delta", "kind", "theta_hat", "ci_lower", "ci_upper", "sd_oracle", "t_star", "z"],
        &rows,
    )
}
