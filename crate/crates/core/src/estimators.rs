//! Diffusivity estimators built from local measurements.
//!
//! All three estimators are ratios of left-point (Itô) sums
//!
//! ```text
//! θ̂ = Σ_j w_{j-1} X^Δ(t_{j-1}) (X_δ(t_j) - X_δ(t_{j-1}))
//!     ─────────────────────────────────────────────────
//!          Σ_j w_{j-1} X^Δ(t_{j-1})² Δt
//! ```
//!
//! with weights `w = 1` (ANE), `w = 1/Ŷ` (MNE) and `w = 1/(Ŷ + ε²)` (SMNE).
//! Confidence intervals studentize by the observed quadratic variation of
//! the martingale part of the numerator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernel::DiscretizedKernel;
use crate::measurements::{LocalMeasurement, SpotVolSeries};
use crate::model::SpdeConfig;
use crate::simulator::SolutionPath;

/// Default threshold below which `σ(X(t, x0))` counts as zero.
pub const DEFAULT_ZETA: f64 = 1e-6;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EstimatorKind {
    Ane,
    Mne,
    Smne,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Ane, EstimatorKind::Mne, EstimatorKind::Smne];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Ane => "ANE",
            EstimatorKind::Mne => "MNE",
            EstimatorKind::Smne => "SMNE",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ane" => Ok(EstimatorKind::Ane),
            "mne" => Ok(EstimatorKind::Mne),
            "smne" => Ok(EstimatorKind::Smne),
            other => Err(Error::Parse(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceInterval {
    fn centred(center: f64, half_width: f64) -> Self {
        Self {
            lower: center - half_width,
            upper: center + half_width,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub kind: EstimatorKind,
    pub theta_hat: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `I_δ` (ANE), `Ĩ_δ` (MNE) or `I*_δ` (SMNE).
    pub i_term: f64,
    /// `J_δ` (ANE) or `J*_δ` (SMNE); the MNE interval needs no `J` term.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_term: Option<f64>,
    pub ci: ConfidenceInterval,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_sq: Option<f64>,
}

/// Standard normal quantile `q_p`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(normal_quantile(1.0 - 0.5 * alpha))
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_lengths(meas: &LocalMeasurement, spot: Option<&SpotVolSeries>) -> Result<usize> {
    let n = meas.steps();
    if n == 0 || meas.x_delta_lap.len() != n + 1 {
        return Err(Error::InvalidArgument(
            "measurement series must have equal length >= 2".into(),
        ));
    }
    if let Some(s) = spot {
        if s.y_hat.len() != n + 1 {
            return Err(Error::GridMismatch(format!(
                "spot-vol series has {} values, measurement has {}",
                s.y_hat.len(),
                n + 1
            )));
        }
    }
    Ok(n)
}

/// Left-point sums `(Σ w X^Δ ΔX, Σ w X^Δ² Δt, Σ Ŷ w² X^Δ² Δt)`.
fn weighted_sums(
    meas: &LocalMeasurement,
    y_hat: &[f64],
    weight: impl Fn(f64) -> f64,
) -> (f64, f64, f64) {
    let dt = meas.dt;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut qv = 0.0;
    for j in 1..meas.x_delta.len() {
        let lap = meas.x_delta_lap[j - 1];
        let y = y_hat[j - 1];
        let w = weight(y);
        let incr = meas.x_delta[j] - meas.x_delta[j - 1];
        num += w * lap * incr;
        let l2 = lap * lap * dt;
        den += w * l2;
        qv += y * w * w * l2;
    }
    (num, den, qv)
}

fn positive_denominator(den: f64, kind: EstimatorKind) -> Result<f64> {
    if den > 0.0 && den.is_finite() {
        Ok(den)
    } else {
        Err(Error::DegenerateDenominator(format!(
            "{kind} denominator = {den}"
        )))
    }
}

/// Additive noise estimator.
pub fn ane(meas: &LocalMeasurement, spot: &SpotVolSeries, alpha: f64) -> Result<EstimateReport> {
    check_lengths(meas, Some(spot))?;
    let q = check_alpha(alpha)?;
    let (num, den, qv) = weighted_sums(meas, &spot.y_hat, |_| 1.0);
    let den = positive_denominator(den, EstimatorKind::Ane)?;
    let theta_hat = num / den;
    Ok(EstimateReport {
        kind: EstimatorKind::Ane,
        theta_hat,
        numerator: num,
        denominator: den,
        i_term: qv,
        j_term: Some(den),
        ci: ConfidenceInterval::centred(theta_hat, q * qv.sqrt() / den),
        alpha,
        epsilon_sq: None,
    })
}

/// Multiplicative noise estimator; every weight `1/Ŷ(t_{j-1})` must exist.
pub fn mne(meas: &LocalMeasurement, spot: &SpotVolSeries, alpha: f64) -> Result<EstimateReport> {
    let n = check_lengths(meas, Some(spot))?;
    let q = check_alpha(alpha)?;
    if let Some(index) = spot.y_hat[..n].iter().position(|&y| !(y > 0.0)) {
        return Err(Error::ZeroSpotVol { index });
    }
    let (num, den, _) = weighted_sums(meas, &spot.y_hat, |y| 1.0 / y);
    let den = positive_denominator(den, EstimatorKind::Mne)?;
    let theta_hat = num / den;
    Ok(EstimateReport {
        kind: EstimatorKind::Mne,
        theta_hat,
        numerator: num,
        denominator: den,
        i_term: den,
        j_term: None,
        ci: ConfidenceInterval::centred(theta_hat, q / den.sqrt()),
        alpha,
        epsilon_sq: None,
    })
}

/// Stabilised multiplicative noise estimator with weights `1/(Ŷ + ε²)`.
pub fn smne(
    meas: &LocalMeasurement,
    spot: &SpotVolSeries,
    epsilon_sq: f64,
    alpha: f64,
) -> Result<EstimateReport> {
    check_lengths(meas, Some(spot))?;
    let q = check_alpha(alpha)?;
    if !(epsilon_sq >= 0.0) || !epsilon_sq.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "epsilon_sq must be finite and >= 0, got {epsilon_sq}"
        )));
    }
    let (num, den, qv) = weighted_sums(meas, &spot.y_hat, |y| 1.0 / (y + epsilon_sq));
    let den = positive_denominator(den, EstimatorKind::Smne)?;
    let theta_hat = num / den;
    Ok(EstimateReport {
        kind: EstimatorKind::Smne,
        theta_hat,
        numerator: num,
        denominator: den,
        i_term: qv,
        j_term: Some(den),
        ci: ConfidenceInterval::centred(theta_hat, q * qv.sqrt() / den),
        alpha,
        epsilon_sq: Some(epsilon_sq),
    })
}

/// Dispatches on `kind`; `epsilon_sq` is only used by the SMNE.
pub fn estimate(
    kind: EstimatorKind,
    meas: &LocalMeasurement,
    spot: &SpotVolSeries,
    epsilon_sq: f64,
    alpha: f64,
) -> Result<EstimateReport> {
    match kind {
        EstimatorKind::Ane => ane(meas, spot, alpha),
        EstimatorKind::Mne => mne(meas, spot, alpha),
        EstimatorKind::Smne => smne(meas, spot, epsilon_sq, alpha),
    }
}

/// `ε_δ² = 0.001 / log(10/δ)`.
pub fn default_epsilon_sq(delta: f64) -> Result<f64> {
    if delta > 0.0 && delta < 10.0 {
        Ok(0.001 / (10.0 / delta).ln())
    } else {
        Err(Error::InvalidArgument(format!(
            "default epsilon needs 0 < delta < 10, got {delta}"
        )))
    }
}

/// Theoretical asymptotic standard deviation of `δ^{-1}(θ̂ - θ)` on one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticOracle {
    pub kind: EstimatorKind,
    pub sd: f64,
    /// Occupation time of `{σ(X(t, x0)) > ζ}`.
    pub t_star: f64,
}

/// Oracle computed from the true trace `X(t_j, x0)`, `j = 0..=N`; sums run
/// over left endpoints `j < N`.
pub fn asymptotic_oracle_from_trace(
    kind: EstimatorKind,
    trace: &[f64],
    config: &SpdeConfig,
    norm_k: f64,
    norm_kprime: f64,
    zeta: f64,
) -> Result<AsymptoticOracle> {
    let dt = config.dt();
    let n = trace.len().saturating_sub(1);
    let (mut s2, mut s4, mut active) = (0.0, 0.0, 0usize);
    for &x in &trace[..n] {
        let s = config.sigma.eval(x);
        let q = s * s;
        s2 += q * dt;
        s4 += q * q * dt;
        if s > zeta {
            active += 1;
        }
    }
    let t_star = active as f64 * dt;
    let base = (2.0 * config.theta).sqrt() * norm_k / norm_kprime;
    let violated = |reason: String| Error::ConditioningEvent {
        kind: kind.to_string(),
        reason,
    };
    let sd = match kind {
        EstimatorKind::Ane => {
            if !(s2 > 0.0) {
                return Err(violated("integral of sigma^2(X(t, x0)) is zero".into()));
            }
            base * s4.sqrt() / s2
        }
        EstimatorKind::Mne => {
            if !(s2 > 0.0) {
                return Err(violated("integral of sigma^2(X(t, x0)) is zero".into()));
            }
            base / config.horizon.sqrt()
        }
        EstimatorKind::Smne => {
            if t_star <= 0.0 {
                return Err(violated(format!("T* = 0 at threshold {zeta}")));
            }
            base / t_star.sqrt()
        }
    };
    Ok(AsymptoticOracle { kind, sd, t_star })
}

pub fn asymptotic_oracle(
    kind: EstimatorKind,
    path: &SolutionPath,
    config: &SpdeConfig,
    kernel: &DiscretizedKernel,
    zeta: f64,
) -> Result<AsymptoticOracle> {
    let trace = path.trace_at(kernel.x0);
    asymptotic_oracle_from_trace(kind, &trace, config, kernel.norm_k, kernel.norm_kprime, zeta)
}
