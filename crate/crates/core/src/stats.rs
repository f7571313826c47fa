//! Sample statistics, goodness-of-fit and histogram helpers.

use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::estimators::normal_cdf;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with `n - 1` denominator.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Root mean squared deviation from `target`.
pub fn rmse(xs: &[f64], target: f64) -> f64 {
    (xs.iter().map(|x| (x - target).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sided one-sample Kolmogorov–Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let s = sorted(xs);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// P-value of the KS statistic `d` for sample size `n`, with Stephens'
/// small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub level: f64,
    pub pass: bool,
    pub n: usize,
}

/// Minimum sample size for [`ks_normal_test`].
pub const MIN_KS_SAMPLES: usize = 50;

/// KS test of `z` against N(0, 1); passes iff the p-value exceeds `level`.
pub fn ks_normal_test(z: &[f64], level: f64) -> Result<KsOutcome> {
    if z.len() < MIN_KS_SAMPLES {
        return Err(Error::InsufficientRuns {
            got: z.len(),
            need: MIN_KS_SAMPLES,
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("KS level must lie in (0, 1), got {level}")));
    }
    let statistic = ks_statistic(z, normal_cdf);
    let p_value = ks_p_value(statistic, z.len());
    Ok(KsOutcome {
        statistic,
        p_value,
        level,
        pass: p_value > level,
        n: z.len(),
    })
}

/// Equal-tailed acceptance band `[lo, hi] / n` for a Binomial(n, p)
/// proportion: each tail outside the band has probability at most
/// `(1 - confidence) / 2`.
pub fn binomial_band(n: usize, p: f64, confidence: f64) -> (f64, f64) {
    let tail = 0.5 * (1.0 - confidence);
    let dist = Binomial::new(p, n as u64).expect("valid binomial parameters");
    // lo: largest k with P(X < k) <= tail
    let mut lo = 0u64;
    while lo < n as u64 && dist.cdf(lo) <= tail {
        lo += 1;
    }
    // hi: smallest k with P(X > k) <= tail
    let mut hi = n as u64;
    while hi > 0 && dist.sf(hi - 1) <= tail {
        hi -= 1;
    }
    (lo as f64 / n as f64, hi as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

pub const MAX_BINS: usize = 500;

/// Histogram over `[min, max]` with Freedman–Diaconis bin width, capped at
/// [`MAX_BINS`] bins.
pub fn freedman_diaconis(xs: &[f64]) -> Histogram {
    let s = sorted(xs);
    let n = s.len();
    let (lo, hi) = (s[0], s[n - 1]);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    let bins = if hi > lo && width > 0.0 {
        (((hi - lo) / width).ceil() as usize).clamp(1, MAX_BINS)
    } else {
        1
    };
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let step = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * step })
        .collect();
    let mut counts = vec![0usize; bins];
    for &x in &s {
        let i = (((x - lo) / step).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    Histogram { edges, counts }
}

/// Average of Gaussian densities `N(center, sd_r²)`.
pub fn gaussian_mixture_density(x: f64, center: f64, sds: &[f64]) -> f64 {
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    sds.iter()
        .map(|&s| (-0.5 * ((x - center) / s).powi(2)).exp() / (s * norm))
        .sum::<f64>()
        / sds.len() as f64
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
