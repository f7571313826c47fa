//! Model description: noise amplitude `σ(·)`, initial condition and the
//! experiment grid.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{SpatialGrid, TimeGrid};

/// Noise amplitude `σ: ℝ → ℝ₊` acting pointwise on the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SigmaSpec {
    Zero,
    Constant { c: f64 },
    /// `a |x|^p + b`
    Holder { a: f64, p: f64, b: f64 },
    /// `A e^{-λ|x - c1|} + A e^{-λ|x - c2|}`
    DoubleExp {
        amplitude: f64,
        rate: f64,
        c1: f64,
        c2: f64,
    },
}

impl SigmaSpec {
    /// `σ₁(x) = 0.20`
    pub const SIGMA1: SigmaSpec = SigmaSpec::Constant { c: 0.20 };
    /// `σ₂(x) = 0.20 |x|^0.8 + 0.01`
    pub const SIGMA2: SigmaSpec = SigmaSpec::Holder {
        a: 0.20,
        p: 0.80,
        b: 0.01,
    };
    /// `σ₃(x) = 10 e^{-10|x-2|} + 10 e^{-10|x-4|}`
    pub const SIGMA3: SigmaSpec = SigmaSpec::DoubleExp {
        amplitude: 10.0,
        rate: 10.0,
        c1: 2.0,
        c2: 4.0,
    };

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SigmaSpec::Zero => 0.0,
            SigmaSpec::Constant { c } => c,
            SigmaSpec::Holder { a, p, b } => a * x.abs().powf(p) + b,
            SigmaSpec::DoubleExp {
                amplitude,
                rate,
                c1,
                c2,
            } => amplitude * ((-rate * (x - c1).abs()).exp() + (-rate * (x - c2).abs()).exp()),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SigmaSpec::Zero) || matches!(self, SigmaSpec::Constant { c } if *c == 0.0)
    }

    fn validate(&self, problems: &mut Vec<String>) {
        let params: Vec<f64> = match *self {
            SigmaSpec::Zero => vec![],
            SigmaSpec::Constant { c } => vec![c],
            SigmaSpec::Holder { a, p, b } => vec![a, p, b],
            SigmaSpec::DoubleExp {
                amplitude,
                rate,
                c1,
                c2,
            } => vec![amplitude, rate, c1, c2],
        };
        if params.iter().any(|v| !v.is_finite()) {
            problems.push(format!("sigma parameters must be finite ({self})"));
        }
        let negative = match *self {
            SigmaSpec::Zero => false,
            SigmaSpec::Constant { c } => c < 0.0,
            SigmaSpec::Holder { a, p, b } => a < 0.0 || p < 0.0 || b < 0.0,
            SigmaSpec::DoubleExp {
                amplitude, rate, ..
            } => amplitude < 0.0 || rate < 0.0,
        };
        if negative {
            problems.push(format!("sigma must be non-negative ({self})"));
        }
    }
}

impl fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SigmaSpec::Zero => write!(f, "zero"),
            SigmaSpec::Constant { c } => write!(f, "constant:{c}"),
            SigmaSpec::Holder { a, p, b } => write!(f, "holder:{a},{p},{b}"),
            SigmaSpec::DoubleExp {
                amplitude,
                rate,
                c1,
                c2,
            } => write!(f, "double-exp:{amplitude},{rate},{c1},{c2}"),
        }
    }
}

fn parse_params(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let vals = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse(format!("{what}: {e}")))?;
    if vals.len() != n {
        return Err(Error::Parse(format!(
            "{what}: expected {n} parameters, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

impl FromStr for SigmaSpec {
    type Err = Error;

    /// Accepts `zero`, `constant:c`, `holder:a,p,b`, `double-exp:A,λ,c1,c2`
    /// and the presets `sigma1`, `sigma2`, `sigma3`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "zero" => Ok(SigmaSpec::Zero),
            "sigma1" | "s1" => Ok(SigmaSpec::SIGMA1),
            "sigma2" | "s2" => Ok(SigmaSpec::SIGMA2),
            "sigma3" | "s3" => Ok(SigmaSpec::SIGMA3),
            "constant" => {
                let v = parse_params(args, 1, "constant")?;
                Ok(SigmaSpec::Constant { c: v[0] })
            }
            "holder" => {
                let v = parse_params(args, 3, "holder")?;
                Ok(SigmaSpec::Holder {
                    a: v[0],
                    p: v[1],
                    b: v[2],
                })
            }
            "double-exp" => {
                let v = parse_params(args, 4, "double-exp")?;
                Ok(SigmaSpec::DoubleExp {
                    amplitude: v[0],
                    rate: v[1],
                    c1: v[2],
                    c2: v[3],
                })
            }
            other => Err(Error::Parse(format!("unknown sigma specification `{other}`"))),
        }
    }
}

/// Initial condition `X₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialSpec {
    Zero,
    /// `hi` on `[L/4, 3L/4]`, `lo` elsewhere, joined by C² ramps of the given
    /// width (default `L/40`) centred on the jump points.
    SmoothStep {
        hi: f64,
        lo: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<f64>,
    },
    /// `amplitude · sin(mode · π x / L)`
    SineMode { amplitude: f64, mode: u32 },
}

impl InitialSpec {
    pub const PAPER: InitialSpec = InitialSpec::SmoothStep {
        hi: 4.0,
        lo: 2.0,
        width: None,
    };

    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match *self {
            InitialSpec::Zero => 0.0,
            InitialSpec::SineMode { amplitude, mode } => {
                amplitude * (mode as f64 * PI * x / length).sin()
            }
            InitialSpec::SmoothStep { hi, lo, width } => {
                let w = width.unwrap_or(length / 40.0);
                let (a, b) = (0.25 * length, 0.75 * length);
                let up = smootherstep((x - (a - 0.5 * w)) / w);
                let down = smootherstep(((b + 0.5 * w) - x) / w);
                lo + (hi - lo) * up * down
            }
        }
    }

    fn validate(&self, length: f64, problems: &mut Vec<String>) {
        match *self {
            InitialSpec::SmoothStep { hi, lo, width } => {
                if !hi.is_finite() || !lo.is_finite() {
                    problems.push("smooth-step levels must be finite".into());
                }
                if let Some(w) = width {
                    if !(w > 0.0 && w < 0.5 * length) {
                        problems.push(format!(
                            "smooth-step width must lie in (0, L/2), got {w}"
                        ));
                    }
                }
            }
            InitialSpec::SineMode { amplitude, mode } => {
                if !amplitude.is_finite() || mode == 0 {
                    problems.push("sine-mode needs finite amplitude and mode >= 1".into());
                }
            }
            InitialSpec::Zero => {}
        }
    }
}

impl FromStr for InitialSpec {
    type Err = Error;

    /// Accepts `zero`, `smooth-step:hi,lo[,width]`, `sine-mode:amp,mode` and
    /// the preset `paper`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "zero" => Ok(InitialSpec::Zero),
            "paper" => Ok(InitialSpec::PAPER),
            "smooth-step" => {
                let n = args.split(',').count();
                let v = parse_params(args, n.clamp(2, 3), "smooth-step")?;
                Ok(InitialSpec::SmoothStep {
                    hi: v[0],
                    lo: v[1],
                    width: v.get(2).copied(),
                })
            }
            "sine-mode" => {
                let v = parse_params(args, 2, "sine-mode")?;
                if v[1] < 1.0 || v[1].fract() != 0.0 {
                    return Err(Error::Parse("sine-mode: mode must be a positive integer".into()));
                }
                Ok(InitialSpec::SineMode {
                    amplitude: v[0],
                    mode: v[1] as u32,
                })
            }
            other => Err(Error::Parse(format!(
                "unknown initial condition `{other}`"
            ))),
        }
    }
}

/// Quintic `6t⁵ - 15t⁴ + 10t³` clamped to `[0, 1]`; C² at both ends.
fn smootherstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Full description of one simulated experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdeConfig {
    /// Domain length `L`, `Λ = (0, L)`.
    pub length: f64,
    /// Terminal time `T`.
    pub horizon: f64,
    pub theta: f64,
    pub sigma: SigmaSpec,
    pub initial: InitialSpec,
    /// Number of time steps `N`.
    pub time_steps: usize,
    /// Number of space cells `M`.
    pub space_cells: usize,
    pub seed: u64,
}

impl SpdeConfig {
    /// Setup of the reference experiment at full resolution (`N = 48 000`, `M = 800`).
    pub fn paper(sigma: SigmaSpec) -> Self {
        Self {
            length: 20.0,
            horizon: 30.0,
            theta: 0.05,
            sigma,
            initial: InitialSpec::PAPER,
            time_steps: 48_000,
            space_cells: 800,
            seed: 1,
        }
    }

    /// Reduced grid with the same mesh ratio (`N = 12 000`, `M = 400`).
    pub fn desk(sigma: SigmaSpec) -> Self {
        Self {
            time_steps: 12_000,
            space_cells: 400,
            ..Self::paper(sigma)
        }
    }

    pub fn spatial_grid(&self) -> SpatialGrid {
        SpatialGrid::new(self.length, self.space_cells)
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::new(self.horizon, self.time_steps)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.time_steps as f64
    }

    pub fn h(&self) -> f64 {
        self.length / self.space_cells as f64
    }

    /// `θ Δt / h²`
    pub fn mesh_ratio(&self) -> f64 {
        self.theta * self.dt() / (self.h() * self.h())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Collects every violated invariant.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            p.push(format!("theta must be > 0, got {}", self.theta));
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            p.push(format!("L must be > 0, got {}", self.length));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            p.push(format!("T must be > 0, got {}", self.horizon));
        }
        if self.time_steps < 2 {
            p.push(format!("N must be >= 2, got {}", self.time_steps));
        }
        if self.space_cells < 2 {
            p.push(format!("M must be >= 2, got {}", self.space_cells));
        }
        self.sigma.validate(&mut p);
        self.initial.validate(self.length, &mut p);
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p))
        }
    }

    /// Accuracy warning when `θΔt/h² > 1/2`. The scheme is implicit in the
    /// drift and stays stable regardless.
    pub fn cfl_warning(&self) -> Option<String> {
        let r = self.mesh_ratio();
        (r > 0.5).then(|| format!("mesh ratio theta*dt/h^2 = {r:.4} exceeds 1/2; accuracy degrades"))
    }
}
