//! Semi-implicit Euler–Maruyama scheme for
//! `dX = θ ΔX dt + σ(X) dW` on `(0, L)` with Dirichlet boundary.
//!
//! One step on the interior nodes `k = 1..M-1`:
//!
//! ```text
//! (I - θΔt A_h) X_{j+1} = X_j + σ(X_j) ⊙ ξ_j √(Δt/h)
//! ```
//!
//! with `A_h` the second-difference matrix divided by `h²`. The drift is
//! implicit, the noise explicit, and the tridiagonal system is solved with a
//! pre-factored Thomas sweep.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{SpatialGrid, TimeGrid};
use crate::model::{InitialSpec, SpdeConfig};
use crate::noise::fill_noise;
use crate::tridiag::SymmetricToeplitzTridiag;

/// Largest admissible `|X|` before a run is declared blown up.
pub const BLOWUP_LIMIT: f64 = 1e8;

/// Discretized random field `X(t_j, y_k)`, row-major with one row per time node.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub space: SpatialGrid,
    pub time: TimeGrid,
    values: Vec<f64>,
}

impl SolutionPath {
    pub fn from_rows(space: SpatialGrid, time: TimeGrid, values: Vec<f64>) -> Result<Self> {
        let expected = space.num_nodes() * (time.steps + 1);
        if values.len() != expected {
            return Err(Error::GridMismatch(format!(
                "path has {} values, grid needs {expected}",
                values.len()
            )));
        }
        Ok(Self {
            space,
            time,
            values,
        })
    }

    pub fn num_times(&self) -> usize {
        self.time.steps + 1
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let w = self.space.num_nodes();
        &self.values[j * w..(j + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.space.num_nodes())
    }

    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.row(j)[k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    /// Time series of the field at `x`, linearly interpolated between nodes.
    pub fn trace_at(&self, x: f64) -> Vec<f64> {
        self.rows().map(|r| interpolate(r, &self.space, x)).collect()
    }

    /// Matrix CSV, one row per time node.
    pub fn write_matrix_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| crate::io::fmt_f64(*v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Little-endian `f64` dump preceded by two `u64` dimensions (rows, cols).
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.num_times() as u64).to_le_bytes())?;
        w.write_all(&(self.space.num_nodes() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// `(t, x, value)` triplets, sub-sampled by the given strides.
    pub fn write_heatmap_csv<W: Write>(
        &self,
        mut w: W,
        time_stride: usize,
        space_stride: usize,
    ) -> std::io::Result<()> {
        writeln!(w, "t,x,value")?;
        let (ts, xs) = (time_stride.max(1), space_stride.max(1));
        for j in (0..self.num_times()).step_by(ts) {
            let t = crate::io::fmt_f64(self.time.time(j));
            for k in (0..self.space.num_nodes()).step_by(xs) {
                writeln!(
                    w,
                    "{t},{},{}",
                    crate::io::fmt_f64(self.space.node(k)),
                    crate::io::fmt_f64(self.value(j, k))
                )?;
            }
        }
        Ok(())
    }
}

/// Linear interpolation of a nodal vector at `x`.
pub fn interpolate(values: &[f64], grid: &SpatialGrid, x: f64) -> f64 {
    let s = grid.index_coordinate(x).clamp(0.0, grid.cells as f64);
    let k = (s.floor() as usize).min(grid.cells - 1);
    let w = s - k as f64;
    if w == 0.0 {
        values[k]
    } else {
        (1.0 - w) * values[k] + w * values[k + 1]
    }
}

pub fn initial_condition(spec: &InitialSpec, grid: &SpatialGrid) -> Vec<f64> {
    grid.nodes().map(|y| spec.eval(y, grid.length)).collect()
}

/// Runs the scheme and hands every time row `(j, X(t_j, ·))` to `observe`,
/// without keeping the path in memory.
pub fn simulate_with<F>(config: &SpdeConfig, mut observe: F) -> Result<()>
where
    F: FnMut(usize, &[f64]),
{
    config.validate()?;
    let m = config.space_cells;
    let grid = config.spatial_grid();
    let dt = config.dt();
    let h = config.h();
    let r = config.theta * dt / (h * h);
    let lu = SymmetricToeplitzTridiag::new(m - 1, 1.0 + 2.0 * r, -r);
    let noise_scale = (dt / h).sqrt();
    let sigma = config.sigma;
    let with_noise = !sigma.is_zero();

    let mut state = initial_condition(&config.initial, &grid);
    observe(0, &state);

    let mut rhs = vec![0.0; m - 1];
    let mut xi = vec![0.0; m];
    state[0] = 0.0;
    state[m] = 0.0;
    for j in 0..config.time_steps {
        if with_noise {
            fill_noise(config.seed, j as u64, &mut xi);
            for k in 1..m {
                let x = state[k];
                rhs[k - 1] = x + sigma.eval(x) * xi[k] * noise_scale;
            }
        } else {
            rhs.copy_from_slice(&state[1..m]);
        }
        lu.solve_in_place(&mut rhs);
        let mut max_abs = 0.0_f64;
        for (dst, &v) in state[1..m].iter_mut().zip(&rhs) {
            *dst = v;
            // NaN fails the comparison and is caught below.
            if !(v.abs() <= max_abs) {
                max_abs = v.abs();
            }
        }
        if !(max_abs <= BLOWUP_LIMIT) {
            return Err(Error::BlowUp {
                step: j + 1,
                max_abs,
            });
        }
        observe(j + 1, &state);
    }
    Ok(())
}

/// Full-path simulation, `(N+1) × (M+1)` values.
pub fn simulate(config: &SpdeConfig) -> Result<SolutionPath> {
    let width = config.space_cells + 1;
    let mut values = Vec::with_capacity(width * (config.time_steps + 1));
    simulate_with(config, |_, row| values.extend_from_slice(row))?;
    SolutionPath::from_rows(config.spatial_grid(), config.time_grid(), values)
}

/// Final state `X(T, ·)` only.
pub fn simulate_final(config: &SpdeConfig) -> Result<Vec<f64>> {
    let mut last = Vec::new();
    let n = config.time_steps;
    simulate_with(config, |j, row| {
        if j == n {
            last = row.to_vec();
        }
    })?;
    Ok(last)
}
