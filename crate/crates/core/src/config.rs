//! Experiment configuration: TOML file, environment and flag overrides.
//!
//! Precedence, lowest to highest: scale-profile defaults, config file,
//! `HEATEST_OUT_DIR` (output directory only), command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, DEFAULT_ALPHA, DEFAULT_ZETA};
use crate::kernel::{check_support, ProfileId};
use crate::measurements::{default_window, StartUp};
use crate::model::{InitialSpec, SigmaSpec, SpdeConfig};
use crate::montecarlo::{EpsilonChoice, McSettings};

pub const OUT_DIR_ENV: &str = "HEATEST_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";
pub const DEFAULT_SEED: u64 = 20_240_501;
pub const DEFAULT_KS_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// N = 48 000, M = 800, R = 1000
    Paper,
    /// N = 12 000, M = 400, R = 200
    #[default]
    Desk,
}

impl Scale {
    fn grid_and_runs(self) -> (usize, usize, usize) {
        match self {
            Scale::Paper => (48_000, 800, 1000),
            Scale::Desk => (12_000, 400, 200),
        }
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scale: Scale,
    pub model: SpdeConfig,
    pub profile: ProfileId,
    pub x0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    pub window: usize,
    pub startup: StartUp,
    pub epsilon: EpsilonChoice,
    pub alpha: f64,
    pub zeta: f64,
    pub kinds: Vec<EstimatorKind>,
    pub runs: usize,
    pub jobs: usize,
    pub ks_level: f64,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    /// Resolutions in use: the δ-grid, or the single δ.
    pub fn delta_list(&self) -> Vec<f64> {
        match (&self.deltas, self.delta) {
            (Some(g), _) => g.clone(),
            (None, Some(d)) => vec![d],
            (None, None) => vec![],
        }
    }

    pub fn mc_settings(&self) -> McSettings {
        McSettings {
            model: self.model,
            profile: self.profile,
            x0: self.x0,
            deltas: self.delta_list(),
            window: self.window,
            startup: self.startup,
            epsilon: self.epsilon,
            alpha: self.alpha,
            zeta: self.zeta,
            kinds: self.kinds.clone(),
            runs: self.runs,
            jobs: self.jobs,
            ks_level: self.ks_level,
        }
    }
}

/// `σ` or `X₀` given either as a compact string or as a tagged table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Textual<T> {
    Text(String),
    Spec(T),
}

impl<T: std::str::FromStr<Err = Error>> Textual<T> {
    fn resolve(self) -> Result<T> {
        match self {
            Textual::Text(s) => s.parse(),
            Textual::Spec(v) => Ok(v),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum EpsilonField {
    Text(String),
    Value(f64),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scale: Option<Scale>,
    seed: Option<u64>,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    kernel: KernelSection,
    #[serde(default)]
    estimation: EstimationSection,
    #[serde(default)]
    montecarlo: McSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    length: Option<f64>,
    horizon: Option<f64>,
    theta: Option<f64>,
    sigma: Option<Textual<SigmaSpec>>,
    initial: Option<Textual<InitialSpec>>,
    time_steps: Option<usize>,
    space_cells: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    profile: Option<String>,
    x0: Option<f64>,
    delta: Option<f64>,
    deltas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimationSection {
    window: Option<usize>,
    startup: Option<StartUp>,
    epsilon_sq: Option<EpsilonField>,
    alpha: Option<f64>,
    zeta: Option<f64>,
    kinds: Option<Vec<String>>,
    ks_level: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct McSection {
    runs: Option<usize>,
    jobs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

/// Flat overrides, typically from command-line flags. Strings use the same
/// compact syntax as the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Scale profile for grid and run-count defaults
    #[arg(long, value_enum, global = true)]
    pub scale: Option<Scale>,
    /// Master RNG seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Noise amplitude: sigma1|sigma2|sigma3|zero|constant:c|holder:a,p,b|double-exp:A,l,c1,c2
    #[arg(long, global = true)]
    pub sigma: Option<String>,
    /// Initial condition: paper|zero|smooth-step:hi,lo[,w]|sine-mode:amp,mode
    #[arg(long, global = true)]
    pub initial: Option<String>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Domain length L
    #[arg(long, global = true)]
    pub length: Option<f64>,
    /// Terminal time T
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Number of time steps N
    #[arg(long, global = true)]
    pub time_steps: Option<usize>,
    /// Number of space cells M
    #[arg(long, global = true)]
    pub space_cells: Option<usize>,
    /// Kernel profile name
    #[arg(long, global = true)]
    pub profile: Option<String>,
    #[arg(long, global = true)]
    pub x0: Option<f64>,
    /// Kernel resolution (conflicts with --deltas)
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Comma-separated resolution grid, strictly decreasing
    #[arg(long, global = true, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    /// Spot-volatility window D (time steps)
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Spot-volatility start-up rule for the first D - 1 nodes
    #[arg(long, value_enum, global = true)]
    pub startup: Option<StartUp>,
    /// SMNE stabiliser: `auto` or a number
    #[arg(long, global = true)]
    pub epsilon_sq: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Threshold for sigma(X(t, x0)) != 0
    #[arg(long, global = true)]
    pub zeta: Option<f64>,
    /// Comma-separated estimators (ane,mne,smne)
    #[arg(long, global = true, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,
    /// Monte Carlo replications R
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Worker threads
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Level of the KS normality test
    #[arg(long, global = true)]
    pub ks_level: Option<f64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_epsilon(s: &str) -> Result<EpsilonChoice> {
    if s.trim() == "auto" {
        return Ok(EpsilonChoice::Auto);
    }
    s.trim()
        .parse::<f64>()
        .map(EpsilonChoice::Fixed)
        .map_err(|_| Error::Parse(format!("epsilon_sq must be `auto` or a number, got `{s}`")))
}

fn parse_kinds(list: &[String]) -> Result<Vec<EstimatorKind>> {
    list.iter().map(|s| s.parse()).collect()
}

/// Parses TOML text into a validated spec, applying `env_out` and `flags`.
pub fn parse_config_str(
    text: &str,
    env_out: Option<PathBuf>,
    flags: &Overrides,
) -> Result<ExperimentSpec> {
    let file: FileConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    build(file, env_out, flags)
}

/// Reads the config file (if any) and the environment, then applies flags.
pub fn parse_config(path: Option<&Path>, flags: &Overrides) -> Result<ExperimentSpec> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let env_out = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    parse_config_str(&text, env_out, flags)
}

fn build(file: FileConfig, env_out: Option<PathBuf>, f: &Overrides) -> Result<ExperimentSpec> {
    let scale = f.scale.or(file.scale).unwrap_or_default();
    let (n_default, m_default, r_default) = scale.grid_and_runs();

    let sigma = match (&f.sigma, file.model.sigma) {
        (Some(s), _) => s.parse()?,
        (None, Some(s)) => s.resolve()?,
        (None, None) => SigmaSpec::SIGMA1,
    };
    let initial = match (&f.initial, file.model.initial) {
        (Some(s), _) => s.parse()?,
        (None, Some(s)) => s.resolve()?,
        (None, None) => InitialSpec::PAPER,
    };
    let length = f.length.or(file.model.length).unwrap_or(20.0);
    let horizon = f.horizon.or(file.model.horizon).unwrap_or(30.0);
    let time_steps = f.time_steps.or(file.model.time_steps).unwrap_or(n_default);
    let model = SpdeConfig {
        length,
        horizon,
        theta: f.theta.or(file.model.theta).unwrap_or(0.05),
        sigma,
        initial,
        time_steps,
        space_cells: f.space_cells.or(file.model.space_cells).unwrap_or(m_default),
        seed: f.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
    };

    let profile: ProfileId = f
        .profile
        .clone()
        .or(file.kernel.profile)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(ProfileId::NormalizedBump);

    let mut problems = model.problems();

    // Flags replace the file's choice of δ vs δ-grid wholesale.
    let (delta, deltas) = if f.delta.is_some() || f.deltas.is_some() {
        (f.delta, f.deltas.clone())
    } else {
        (file.kernel.delta, file.kernel.deltas)
    };
    let (delta, deltas) = match (delta, deltas) {
        (Some(_), Some(_)) => {
            problems.push("set exactly one of delta and deltas".into());
            (None, None)
        }
        (None, None) => (Some(0.03 * length), None),
        other => other,
    };
    let x0 = f.x0.or(file.kernel.x0).unwrap_or(0.5 * length);

    let window = f
        .window
        .or(file.estimation.window)
        .unwrap_or_else(|| default_window(time_steps, horizon));
    let startup = f.startup.or(file.estimation.startup).unwrap_or_default();
    let epsilon = match (&f.epsilon_sq, file.estimation.epsilon_sq) {
        (Some(s), _) => parse_epsilon(s)?,
        (None, Some(EpsilonField::Text(s))) => parse_epsilon(&s)?,
        (None, Some(EpsilonField::Value(v))) => EpsilonChoice::Fixed(v),
        (None, None) => EpsilonChoice::Auto,
    };
    let kinds = match (&f.kinds, file.estimation.kinds) {
        (Some(k), _) => parse_kinds(k)?,
        (None, Some(k)) => parse_kinds(&k)?,
        (None, None) => EstimatorKind::ALL.to_vec(),
    };
    let alpha = f.alpha.or(file.estimation.alpha).unwrap_or(DEFAULT_ALPHA);
    let zeta = f.zeta.or(file.estimation.zeta).unwrap_or(DEFAULT_ZETA);
    let ks_level = f.ks_level.or(file.estimation.ks_level).unwrap_or(DEFAULT_KS_LEVEL);
    let runs = f.runs.or(file.montecarlo.runs).unwrap_or(r_default);
    let jobs = f
        .jobs
        .or(file.montecarlo.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let out_dir = f
        .out
        .clone()
        .or(env_out)
        .or(file.output.dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    if !(alpha > 0.0 && alpha < 1.0) {
        problems.push(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if !(ks_level > 0.0 && ks_level < 1.0) {
        problems.push(format!("ks_level must lie in (0, 1), got {ks_level}"));
    }
    if !(zeta >= 0.0) {
        problems.push(format!("zeta must be >= 0, got {zeta}"));
    }
    if window == 0 {
        problems.push("window must be >= 1".into());
    }
    if kinds.is_empty() {
        problems.push("at least one estimator kind is required".into());
    }
    if runs < 2 {
        problems.push(format!("runs must be >= 2, got {runs}"));
    }
    if jobs == 0 {
        problems.push("jobs must be >= 1".into());
    }
    if let EpsilonChoice::Fixed(v) = epsilon {
        if !(v >= 0.0) || !v.is_finite() {
            problems.push(format!("epsilon_sq must be finite and >= 0, got {v}"));
        }
    }
    if let Some(g) = &deltas {
        if g.is_empty() {
            problems.push("deltas must not be empty".into());
        }
        if g.windows(2).any(|w| !(w[1] < w[0])) {
            problems.push("deltas must be strictly decreasing".into());
        }
    }
    if model.problems().is_empty() {
        let grid = model.spatial_grid();
        for d in delta.iter().chain(deltas.iter().flatten()) {
            if let Err(e) = check_support(x0, *d, &grid) {
                problems.push(format!("delta = {d}: {e}"));
            }
            if matches!(epsilon, EpsilonChoice::Auto) && !(*d > 0.0 && *d < 10.0) {
                problems.push(format!("delta = {d}: automatic epsilon needs 0 < delta < 10"));
            }
        }
    }

    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    Ok(ExperimentSpec {
        scale,
        model,
        profile,
        x0,
        delta,
        deltas,
        window,
        startup,
        epsilon,
        alpha,
        zeta,
        kinds,
        runs,
        jobs,
        ks_level,
        out_dir,
    })
}
