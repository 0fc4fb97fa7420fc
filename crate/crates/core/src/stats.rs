//! Replica scheduling and worker-count independent reductions.
//!
//! Replicas run on the rayon pool and their results are collected in index
//! order; every reduction afterwards is a fixed-order pairwise sum, so an
//! estimate is bit-identical whatever the number of workers.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Environment variable read by [`worker_count_from_env`].
pub const WORKERS_ENV: &str = "STEINHAUS_WORKERS";

/// Evaluate `f(0), ..., f(n - 1)` on the current rayon pool, in index order.
pub fn run_replicas<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Run `op` inside a dedicated pool of `workers` threads (0 = rayon default).
pub fn with_workers<R: Send>(workers: usize, op: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| precondition(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(op))
}

pub fn worker_count_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Pairwise (cascade) summation with a fixed split order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanEstimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                n: 0,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        MeanEstimate {
            mean,
            stderr,
            n: n as u64,
        }
    }

    /// `mean ± Z95·stderr`.
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - Z95 * self.stderr, self.mean + Z95 * self.stderr)
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// Complex sample mean with per-coordinate standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexMeanEstimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n: u64,
}

impl ComplexMeanEstimate {
    pub fn from_samples(zs: &[Complex64]) -> Self {
        let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
        let im: Vec<f64> = zs.iter().map(|z| z.im).collect();
        let r = MeanEstimate::from_samples(&re);
        let i = MeanEstimate::from_samples(&im);
        ComplexMeanEstimate {
            mean: Complex64::new(r.mean, i.mean),
            stderr_re: r.stderr,
            stderr_im: i.stderr,
            n: r.n,
        }
    }

    /// Both coordinates within `k` standard errors of `value`.
    ///
    /// A zero-variance coordinate must match to within `1e-12`.
    pub fn within(&self, value: Complex64, k: f64) -> bool {
        let ok = |est: f64, se: f64, v: f64| (est - v).abs() <= (k * se).max(1e-12);
        ok(self.mean.re, self.stderr_re, value.re) && ok(self.mean.im, self.stderr_im, value.im)
    }
}

/// Median of batch means, for heavy-tailed samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianOfMeans {
    pub estimate: f64,
    /// Standard error of the median, `1.2533·sd(batch means)/√B`.
    pub stderr: f64,
    pub batch_means: Vec<f64>,
}

impl MedianOfMeans {
    /// Splits `xs` into `batches` contiguous batches (in index order).
    pub fn from_samples(xs: &[f64], batches: usize) -> Result<Self> {
        if batches == 0 || xs.len() < batches {
            return Err(precondition(format!(
                "median-of-means needs at least one sample per batch ({} samples, {batches} batches)",
                xs.len()
            )));
        }
        let size = xs.len() / batches;
        let batch_means: Vec<f64> = (0..batches)
            .map(|b| {
                let end = if b + 1 == batches { xs.len() } else { (b + 1) * size };
                let chunk = &xs[b * size..end];
                pairwise_sum(chunk) / chunk.len() as f64
            })
            .collect();
        let mut sorted = batch_means.clone();
        sorted.sort_by(f64::total_cmp);
        let estimate = if batches % 2 == 1 {
            sorted[batches / 2]
        } else {
            0.5 * (sorted[batches / 2 - 1] + sorted[batches / 2])
        };
        let spread = MeanEstimate::from_samples(&batch_means);
        let stderr = if batches > 1 {
            1.2533 * spread.stderr
        } else {
            f64::INFINITY
        };
        Ok(MedianOfMeans {
            estimate,
            stderr,
            batch_means,
        })
    }

    pub fn ci95(&self) -> (f64, f64) {
        (self.estimate - Z95 * self.stderr, self.estimate + Z95 * self.stderr)
    }
}

/// Composite Simpson rule over equally spaced samples `f_0..f_{2k}`.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "simpson needs an odd number (>= 3) of samples");
    let weighted: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * v
        })
        .collect();
    pairwise_sum(&weighted) * h / 3.0
}

/// Sample skewness and excess kurtosis.
pub fn skew_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let m = |k: i32| pairwise_sum(&xs.iter().map(|x| (x - mean).powi(k)).collect::<Vec<_>>()) / n;
    let m2 = m(2);
    (m(3) / m2.powf(1.5), m(4) / (m2 * m2) - 3.0)
}
