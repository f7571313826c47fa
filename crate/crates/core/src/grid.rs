use serde::{Deserialize, Serialize};

/// Uniform grid on `[0, length]` with `cells` cells, nodes `y_k = k * length / cells`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub length: f64,
    pub cells: usize,
}

impl SpatialGrid {
    pub fn new(length: f64, cells: usize) -> Self {
        Self { length, cells }
    }

    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.length * k as f64 / self.cells as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.cells).map(move |k| self.node(k))
    }

    /// Position in units of `h`, snapped to the nearest integer when within
    /// rounding noise of it.
    pub(crate) fn index_coordinate(&self, x: f64) -> f64 {
        let s = x / self.h();
        let r = s.round();
        if (s - r).abs() < 1e-9 * s.abs().max(1.0) {
            r
        } else {
            s
        }
    }
}

/// Uniform time grid `t_j = j * horizon / steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Self {
        Self { horizon, steps }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        self.horizon * j as f64 / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.time(j)).collect()
    }
}
