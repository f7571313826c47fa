//! Localizing kernels.
//!
//! A [`KernelProfile`] is a fixed function `K` supported in `[-1, 1]`. Local
//! measurements use the rescaled kernel
//!
//! ```text
//! K_{δ,x0}(y)  = δ^{-1/2} K((y - x0) / δ)
//! ΔK_{δ,x0}(y) = δ^{-5/2} K''((y - x0) / δ)
//! ```
//!
//! sampled on the simulation grid ([`DiscretizedKernel`]). Both `K` and `K''`
//! are evaluated in closed form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::quadrature::adaptive_simpson;

/// Minimum number of grid nodes inside the kernel support.
pub const MIN_SUPPORT_NODES: usize = 8;

/// Relative tolerance of the discrete `‖K_{δ,x0}‖²` check in [`discretize`].
pub const DISCRETE_NORM_RTOL: f64 = 1e-3;

const NORM_QUAD_TOL: f64 = 1e-10;

/// Exponent scale of the bump `exp(-BUMP_SCALE / (1 - x²))`.
const BUMP_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileId {
    NormalizedBump,
}

impl ProfileId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileId::NormalizedBump => "normalized-bump",
        }
    }
}

impl fmt::Display for ProfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized-bump" | "bump" => Ok(ProfileId::NormalizedBump),
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }
}

/// Unnormalized bump `exp(-10 / (1 - x²))` on `(-1, 1)` and its derivatives.
mod bump {
    use super::BUMP_SCALE;

    // Below this value of 1 - x² the bump and all its derivatives are < 1e-290.
    const U_MIN: f64 = BUMP_SCALE / 690.0;

    pub fn value(x: f64) -> f64 {
        let u = 1.0 - x * x;
        if u <= U_MIN {
            return 0.0;
        }
        (-BUMP_SCALE / u).exp()
    }

    pub fn first(x: f64) -> f64 {
        let u = 1.0 - x * x;
        if u <= U_MIN {
            return 0.0;
        }
        let e = (-BUMP_SCALE / u).exp();
        e * (-2.0 * BUMP_SCALE * x / (u * u))
    }

    pub fn second(x: f64) -> f64 {
        let u = 1.0 - x * x;
        if u <= U_MIN {
            return 0.0;
        }
        let e = (-BUMP_SCALE / u).exp();
        let c = BUMP_SCALE;
        let u2 = u * u;
        let x2 = x * x;
        // d/dx[-2cx/u²] = -2c/u² - 8c x²/u³ ; (g')² = 4c² x²/u⁴
        e * (4.0 * c * c * x2 / (u2 * u2) - 2.0 * c / u2 - 8.0 * c * x2 / (u2 * u))
    }
}

/// A kernel shape `K` with compact support in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelProfile {
    pub name: ProfileId,
    scale: f64,
    pub norm_k: f64,
    pub norm_kprime: f64,
}

impl KernelProfile {
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        match self.name {
            ProfileId::NormalizedBump => self.scale * bump::value(x),
        }
    }

    pub fn eval_first_derivative(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        match self.name {
            ProfileId::NormalizedBump => self.scale * bump::first(x),
        }
    }

    pub fn eval_second_derivative(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        match self.name {
            ProfileId::NormalizedBump => self.scale * bump::second(x),
        }
    }
}

pub fn build_profile(name: ProfileId) -> KernelProfile {
    match name {
        ProfileId::NormalizedBump => {
            let raw_sq = adaptive_simpson(|x| bump::value(x).powi(2), -1.0, 1.0, NORM_QUAD_TOL);
            let raw_norm = raw_sq.sqrt();
            let scale = 1.0 / raw_norm;
            let deriv_sq =
                adaptive_simpson(|x| (scale * bump::first(x)).powi(2), -1.0, 1.0, NORM_QUAD_TOL);
            let norm_k = adaptive_simpson(|x| (scale * bump::value(x)).powi(2), -1.0, 1.0, NORM_QUAD_TOL)
                .sqrt();
            KernelProfile {
                name,
                scale,
                norm_k,
                norm_kprime: deriv_sq.sqrt(),
            }
        }
    }
}

/// Looks a profile up by its configuration name.
pub fn build_profile_by_name(name: &str) -> Result<KernelProfile> {
    name.parse().map(build_profile)
}

/// `K_{δ,x0}` and `ΔK_{δ,x0}` sampled on the grid nodes inside the support.
///
/// Values are stored only for the window of node indices
/// `first .. first + k_values.len()`; all other nodes carry zero weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedKernel {
    pub x0: f64,
    pub delta: f64,
    pub grid: SpatialGrid,
    pub first: usize,
    pub k_values: Vec<f64>,
    pub k_lap_values: Vec<f64>,
    pub norm_k: f64,
    pub norm_kprime: f64,
}

impl DiscretizedKernel {
    pub fn support_nodes(&self) -> usize {
        self.k_values.len()
    }

    /// Node index range covered by the stored window.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.k_values.len()
    }

    /// Values expanded to the full grid (length `M + 1`).
    pub fn full_k_values(&self) -> Vec<f64> {
        self.expand(&self.k_values)
    }

    pub fn full_k_lap_values(&self) -> Vec<f64> {
        self.expand(&self.k_lap_values)
    }

    fn expand(&self, window: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.num_nodes()];
        out[self.range()].copy_from_slice(window);
        out
    }

    /// `h · Σ K_{δ,x0}(y_k)²`.
    pub fn discrete_norm_sq(&self) -> f64 {
        self.grid.h() * self.k_values.iter().map(|v| v * v).sum::<f64>()
    }

    /// Kernel with both value vectors multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.k_values.iter_mut().for_each(|v| *v *= c);
        out.k_lap_values.iter_mut().for_each(|v| *v *= c);
        out
    }
}

/// Node index window `[lo, hi)` covering `[x0 - δ, x0 + δ)`.
fn support_window(x0: f64, delta: f64, grid: &SpatialGrid) -> (usize, usize) {
    let lo = grid.index_coordinate(x0 - delta).ceil().max(0.0) as usize;
    let hi = (grid.index_coordinate(x0 + delta).ceil() as usize).min(grid.num_nodes());
    (lo, hi.max(lo))
}

/// Checks the support and resolution constraints for `(x0, δ)` on `grid`.
pub fn check_support(x0: f64, delta: f64, grid: &SpatialGrid) -> Result<usize> {
    if !(delta > 0.0) || !x0.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "kernel needs delta > 0 and finite x0 (got delta = {delta}, x0 = {x0})"
        )));
    }
    let (lo, hi) = (x0 - delta, x0 + delta);
    if lo <= 0.0 || hi >= grid.length {
        return Err(Error::SupportOutOfDomain {
            lo,
            hi,
            length: grid.length,
        });
    }
    let (a, b) = support_window(x0, delta, grid);
    let nodes = b - a;
    if nodes < MIN_SUPPORT_NODES {
        return Err(Error::GridTooCoarse {
            nodes,
            min: MIN_SUPPORT_NODES,
        });
    }
    Ok(nodes)
}

pub fn discretize(
    profile: &KernelProfile,
    x0: f64,
    delta: f64,
    grid: &SpatialGrid,
) -> Result<DiscretizedKernel> {
    check_support(x0, delta, grid)?;
    let (a, b) = support_window(x0, delta, grid);
    let inv_sqrt = delta.powf(-0.5);
    let lap_scale = delta.powf(-2.5);
    let (k_values, k_lap_values): (Vec<f64>, Vec<f64>) = (a..b)
        .map(|k| {
            let z = (grid.node(k) - x0) / delta;
            (
                inv_sqrt * profile.eval(z),
                lap_scale * profile.eval_second_derivative(z),
            )
        })
        .unzip();
    let kernel = DiscretizedKernel {
        x0,
        delta,
        grid: *grid,
        first: a,
        k_values,
        k_lap_values,
        norm_k: profile.norm_k,
        norm_kprime: profile.norm_kprime,
    };
    let target = profile.norm_k * profile.norm_k;
    let rel = (kernel.discrete_norm_sq() - target).abs() / target;
    if rel > DISCRETE_NORM_RTOL {
        return Err(Error::GridTooCoarse {
            nodes: kernel.support_nodes(),
            min: MIN_SUPPORT_NODES,
        });
    }
    Ok(kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::trapezoid;

    fn bump() -> KernelProfile {
        build_profile(ProfileId::NormalizedBump)
    }

    #[test]
    fn compact_support_boundary() {
        let k = bump();
        assert_eq!(k.eval(1.0), 0.0);
        assert_eq!(k.eval(-1.0), 0.0);
        assert_eq!(k.eval(1.5), 0.0);
        assert_eq!(k.eval_second_derivative(-1.0), 0.0);
        assert!(k.eval(0.0) > 0.0);
    }

    #[test]
    fn normalized() {
        assert!((bump().norm_k - 1.0).abs() < 1e-9);
    }

    #[test]
    fn derivative_norm_matches_trapezoid() {
        let k = bump();
        let trap = trapezoid(|x| k.eval_first_derivative(x).powi(2), -1.0, 1.0, 1_000_000).sqrt();
        assert!(((k.norm_kprime - trap) / trap).abs() < 1e-6);
        let trap_k = trapezoid(|x| k.eval(x).powi(2), -1.0, 1.0, 1_000_000).sqrt();
        assert!(((k.norm_k - trap_k) / trap_k).abs() < 1e-6);
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        let k = bump();
        let eps = 1e-5;
        for &x in &[-0.8, -0.5, -0.2, 0.0, 0.1, 0.37, 0.66, 0.9] {
            let d1 = (k.eval(x + eps) - k.eval(x - eps)) / (2.0 * eps);
            let d2 = (k.eval(x + eps) - 2.0 * k.eval(x) + k.eval(x - eps)) / (eps * eps);
            let s1 = k.eval_first_derivative(x);
            let s2 = k.eval_second_derivative(x);
            assert!((d1 - s1).abs() < 1e-6 * (1.0 + s1.abs()), "K' at {x}: {d1} vs {s1}");
            assert!((d2 - s2).abs() < 1e-3 * (1.0 + s2.abs()), "K'' at {x}: {d2} vs {s2}");
        }
    }

    #[test]
    fn second_derivative_integrates_to_zero() {
        let k = bump();
        let v = adaptive_simpson(|x| k.eval_second_derivative(x), -1.0, 1.0, 1e-11);
        assert!(v.abs() < 1e-8);
    }

    #[test]
    fn unknown_profile_rejected() {
        assert!(matches!(
            build_profile_by_name("gaussian"),
            Err(Error::UnknownProfile(_))
        ));
    }

    #[test]
    fn paper_grid_support_count() {
        let grid = SpatialGrid::new(20.0, 800);
        let k = discretize(&bump(), 10.0, 0.6, &grid).unwrap();
        assert_eq!(k.support_nodes(), 48);
        let rel = (k.discrete_norm_sq() - 1.0).abs();
        assert!(rel < 1e-3, "{rel}");
    }

    #[test]
    fn halving_delta_scales_peak() {
        let grid = SpatialGrid::new(20.0, 800);
        let p = bump();
        let a = discretize(&p, 10.0, 0.6, &grid).unwrap();
        let b = discretize(&p, 10.0, 0.3, &grid).unwrap();
        let max = |v: &[f64]| v.iter().cloned().fold(0.0_f64, f64::max);
        assert_eq!(b.support_nodes(), a.support_nodes() / 2);
        // x0 sits on a grid node, so both peaks are sampled at z = 0.
        let ratio = max(&b.k_values) / max(&a.k_values);
        assert!((ratio - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn values_vanish_outside_support() {
        let grid = SpatialGrid::new(20.0, 400);
        let k = discretize(&bump(), 7.3, 0.9, &grid).unwrap();
        for (k_idx, y) in grid.nodes().enumerate() {
            let v = k.full_k_values()[k_idx];
            if (y - 7.3).abs() >= 0.9 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn laplacian_scaling_identity() {
        // ΔK_{δ,x0} = δ^{-2} (K'')_{δ,x0}, where (K'')_{δ,x0} = δ^{-1/2} K''(·/δ).
        let grid = SpatialGrid::new(20.0, 800);
        let p = bump();
        for &delta in &[0.15, 0.3, 0.6, 1.2] {
            let k = discretize(&p, 10.0, delta, &grid).unwrap();
            for (i, idx) in k.range().enumerate() {
                let z = (grid.node(idx) - 10.0) / delta;
                let rescaled = delta.powf(-0.5) * p.eval_second_derivative(z);
                let expected = delta.powi(-2) * rescaled;
                assert!((k.k_lap_values[i] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn support_errors() {
        let grid = SpatialGrid::new(20.0, 800);
        let p = bump();
        assert!(matches!(
            discretize(&p, 1.0, 5.0, &grid),
            Err(Error::SupportOutOfDomain { .. })
        ));
        assert!(matches!(
            discretize(&p, 19.5, 0.5, &grid),
            Err(Error::SupportOutOfDomain { .. })
        ));
        assert!(matches!(
            discretize(&p, 10.0, 0.08, &grid),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn discrete_norm_independent_of_delta() {
        let grid = SpatialGrid::new(20.0, 800);
        let p = bump();
        for &delta in &[0.15, 0.3, 0.6, 1.2, 2.4] {
            let k = discretize(&p, 10.0, delta, &grid).unwrap();
            assert!((k.discrete_norm_sq() - 1.0).abs() < 1e-3, "delta {delta}");
        }
    }
}
