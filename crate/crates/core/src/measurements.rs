//! Local observation processes and spot volatility.
//!
//! ```text
//! X_δ(t_j)   = h Σ_k X(t_j, y_k) K_{δ,x0}(y_k)
//! X_δ^Δ(t_j) = h Σ_k X(t_j, y_k) ΔK_{δ,x0}(y_k)
//! ```
//!
//! Spot squared volatility is the one-sided moving average of the
//! disintegrated realized quadratic variation of `X_δ` over the last `D`
//! increments.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_csv};
use crate::kernel::DiscretizedKernel;
use crate::simulator::{interpolate, SolutionPath};

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMeasurement {
    pub times: Vec<f64>,
    pub x_delta: Vec<f64>,
    pub x_delta_lap: Vec<f64>,
    pub dt: f64,
}

impl LocalMeasurement {
    pub fn steps(&self) -> usize {
        self.x_delta.len().saturating_sub(1)
    }

    /// Both series multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            times: self.times.clone(),
            x_delta: self.x_delta.iter().map(|v| v * c).collect(),
            x_delta_lap: self.x_delta_lap.iter().map(|v| v * c).collect(),
            dt: self.dt,
        }
    }

    pub fn write_csv(&self, path: &Path, spot: Option<&SpotVolSeries>) -> Result<()> {
        let rows: Vec<Vec<String>> = (0..self.times.len())
            .map(|j| {
                vec![
                    fmt_f64(self.times[j]),
                    fmt_f64(self.x_delta[j]),
                    fmt_f64(self.x_delta_lap[j]),
                    spot.map(|s| fmt_f64(s.y_hat[j])).unwrap_or_default(),
                ]
            })
            .collect();
        write_csv(path, &["t", "x_delta", "x_delta_lap", "y_hat"], &rows)
    }
}

/// `(⟨row, K_{δ,x0}⟩, ⟨row, ΔK_{δ,x0}⟩)` by the rectangle rule, restricted to
/// the kernel support.
#[inline]
pub fn inner_products(row: &[f64], kernel: &DiscretizedKernel) -> (f64, f64) {
    let window = &row[kernel.range()];
    let mut a = 0.0;
    let mut b = 0.0;
    for ((x, k), kl) in window.iter().zip(&kernel.k_values).zip(&kernel.k_lap_values) {
        a += x * k;
        b += x * kl;
    }
    let h = kernel.grid.h();
    (h * a, h * b)
}

pub fn measure(path: &SolutionPath, kernel: &DiscretizedKernel) -> Result<LocalMeasurement> {
    if path.space != kernel.grid {
        return Err(Error::GridMismatch(format!(
            "path grid {:?} differs from kernel grid {:?}",
            path.space, kernel.grid
        )));
    }
    let (x_delta, x_delta_lap) = path.rows().map(|r| inner_products(r, kernel)).unzip();
    Ok(LocalMeasurement {
        times: path.time.times(),
        x_delta,
        x_delta_lap,
        dt: path.time.dt(),
    })
}

/// Accumulates local measurements for several kernels, plus the field value
/// at a reference point, while a path is being simulated.
#[derive(Debug, Clone)]
pub struct MeasurementRecorder {
    kernels: Vec<DiscretizedKernel>,
    x_delta: Vec<Vec<f64>>,
    x_delta_lap: Vec<Vec<f64>>,
    x0: f64,
    trace: Vec<f64>,
}

impl MeasurementRecorder {
    pub fn new(kernels: Vec<DiscretizedKernel>, x0: f64, steps: usize) -> Self {
        let n = kernels.len();
        Self {
            kernels,
            x_delta: vec![Vec::with_capacity(steps + 1); n],
            x_delta_lap: vec![Vec::with_capacity(steps + 1); n],
            x0,
            trace: Vec::with_capacity(steps + 1),
        }
    }

    pub fn observe(&mut self, row: &[f64]) {
        for (i, kernel) in self.kernels.iter().enumerate() {
            let (a, b) = inner_products(row, kernel);
            self.x_delta[i].push(a);
            self.x_delta_lap[i].push(b);
        }
        let grid = match self.kernels.first() {
            Some(k) => k.grid,
            None => return,
        };
        self.trace.push(interpolate(row, &grid, self.x0));
    }

    /// Per-kernel measurements (in construction order) and the trace `X(t_j, x0)`.
    pub fn finish(self, times: Vec<f64>, dt: f64) -> (Vec<LocalMeasurement>, Vec<f64>) {
        let meas = self
            .x_delta
            .into_iter()
            .zip(self.x_delta_lap)
            .map(|(x_delta, x_delta_lap)| LocalMeasurement {
                times: times.clone(),
                x_delta,
                x_delta_lap,
                dt,
            })
            .collect();
        (meas, self.trace)
    }
}

/// Spot squared volatility `Ŷ(t_n)` on all time nodes; `y_hat[0]` repeats
/// `y_hat[1]` since no increment precedes `t_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotVolSeries {
    pub y_hat: Vec<f64>,
    pub window: usize,
}

/// `Ŷ(t_n) = 1/(n∧D) Σ_{j=(n-D+1)∨1}^{n} (X_δ(t_j) - X_δ(t_{j-1}))² / Δt`.
pub fn spot_vol(meas: &LocalMeasurement, window: usize) -> Result<SpotVolSeries> {
    let n = meas.steps();
    if window == 0 {
        return Err(Error::InvalidArgument("spot-vol window D must be >= 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "spot-vol needs at least one increment".into(),
        ));
    }
    let inv_dt = 1.0 / meas.dt;
    // prefix[i] = Σ_{j=1}^{i} squared increments
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for w in meas.x_delta.windows(2) {
        let d = w[1] - w[0];
        acc += d * d * inv_dt;
        prefix.push(acc);
    }
    let mut y_hat = vec![0.0; n + 1];
    for i in 1..=n {
        let lo = i.saturating_sub(window);
        let count = i.min(window);
        y_hat[i] = ((prefix[i] - prefix[lo]) / count as f64).max(0.0);
    }
    y_hat[0] = y_hat[1];
    Ok(SpotVolSeries { y_hat, window })
}

/// Treatment of the first `D - 1` time nodes, where fewer than `D`
/// increments are available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StartUp {
    /// Average over the `n` increments seen so far (divisor `n ∧ D`).
    Partial,
    /// Hold `Ŷ(t_D)`, the first full-window value, on `t_0..t_{D-1}`.
    /// A one- or two-increment average is a χ²₁ / χ²₂ draw whose reciprocal
    /// has infinite mean, so a single early weight can swamp the MNE sums.
    #[default]
    FullWindow,
}

/// [`spot_vol`] with the given start-up rule.
pub fn spot_vol_with(meas: &LocalMeasurement, window: usize, start: StartUp) -> Result<SpotVolSeries> {
    let mut spot = spot_vol(meas, window)?;
    if start == StartUp::FullWindow {
        let n = meas.steps();
        let d = window.min(n);
        let held = spot.y_hat[d];
        spot.y_hat[..d].iter_mut().for_each(|y| *y = held);
    }
    Ok(spot)
}

/// Window of `0.5` time units: `⌈0.5 N / T⌉` steps.
pub fn default_window(steps: usize, horizon: f64) -> usize {
    ((0.5 * steps as f64 / horizon).ceil() as usize).max(1)
}
