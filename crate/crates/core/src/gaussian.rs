//! The Gaussian analogue of `Re log A_y` on the critical line,
//!
//! ```text
//! G̃(t) = Re Σ_{p<=y} Z_p p^{-1/2-it},    Z_p = (X_p + i Y_p)/√2,
//! ```
//!
//! with `X_p, Y_p` independent standard normals, its covariance kernel, the
//! critical chaos `μ_y = (√(log log y)/log y) ∫_0^1 e^{2G̃(t)} dt`, and a
//! Monte Carlo harness for Kahane's convexity inequality.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, LabError, Result};
use crate::phases::Seed;
use crate::sieve::primes_up_to;
use crate::stats::{pairwise_sum, run_replicas, MeanEstimate, MedianOfMeans};

/// One realization of `G̃` on a grid in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFieldSample {
    pub y: u64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// Per-prime coefficients `c_p = Z_p p^{-1/2}` for one seed.
fn prime_coefficients(seed: Seed, primes: &[u32]) -> Vec<Complex64> {
    let mut rng = seed.stream();
    primes
        .iter()
        .map(|&p| {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(x, y) * (0.5 / p as f64).sqrt()
        })
        .collect()
}

fn field_at(coeffs: &[Complex64], logs: &[f64], t: f64) -> f64 {
    let terms: Vec<f64> = coeffs
        .iter()
        .zip(logs)
        .map(|(c, &lp)| {
            let (s, co) = (t * lp).sin_cos();
            // Re(c e^{-it log p})
            c.re * co + c.im * s
        })
        .collect();
    pairwise_sum(&terms)
}

/// `G̃(t_k) = G̃(a + k h)`, `k < count`, by per-prime phasor recurrence.
fn field_on_uniform_grid(coeffs: &[Complex64], logs: &[f64], a: f64, h: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    for (c, &lp) in coeffs.iter().zip(logs) {
        let step = Complex64::from_polar(1.0, -h * lp);
        let mut z = c * Complex64::from_polar(1.0, -a * lp);
        for (k, v) in out.iter_mut().enumerate() {
            if k > 0 && k % 64 == 0 {
                z = c * Complex64::from_polar(1.0, -(a + k as f64 * h) * lp);
            }
            *v += z.re;
            z *= step;
        }
    }
    out
}

fn check_y(y: u64) -> Result<()> {
    if y < 2 {
        return Err(domain("y must be >= 2"));
    }
    Ok(())
}

pub fn sample_gaussian_field(seed: Seed, y: u64, grid: &[f64]) -> Result<GaussianFieldSample> {
    check_y(y)?;
    if let Some(t) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(domain(format!("grid point {t} outside [0, 1]")));
    }
    let primes = primes_up_to(y);
    let logs: Vec<f64> = primes.iter().map(|&p| (p as f64).ln()).collect();
    let coeffs = prime_coefficients(seed, &primes);
    Ok(GaussianFieldSample {
        y,
        grid: grid.to_vec(),
        values: grid.iter().map(|&t| field_at(&coeffs, &logs, t)).collect(),
    })
}

/// `E[G̃(s) G̃(t)] = (1/2) Σ_{p<=y} cos((s−t) log p) / p`.
pub fn exact_covariance(y: u64, s: f64, t: f64) -> f64 {
    covariance_at_lag(&primes_up_to(y), s - t)
}

fn covariance_at_lag(primes: &[u32], d: f64) -> f64 {
    let terms: Vec<f64> = primes.iter().map(|&p| (d * (p as f64).ln()).cos() / p as f64).collect();
    0.5 * pairwise_sum(&terms)
}

/// `(1/2) log(min(1/|s−t|, log y))`, with `s = t` giving `(1/2) log log y`.
pub fn log_kernel(y: u64, d: f64) -> f64 {
    let ly = (y as f64).ln();
    let inv = if d == 0.0 { f64::INFINITY } else { 1.0 / d.abs() };
    0.5 * inv.min(ly).ln()
}

/// Gap between the exact kernel and the log kernel at one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceGap {
    pub y: u64,
    /// Lag `|s − t|` at which the supremum is attained.
    pub worst_lag: f64,
    pub gap: f64,
}

/// `sup |exact_cov(s,t) − (1/2) log(min(1/|s−t|, log y))|` over the given pairs.
pub fn covariance_gap(y: u64, pairs: &[(f64, f64)]) -> Result<CovarianceGap> {
    check_y(y)?;
    if pairs.is_empty() {
        return Err(precondition("covariance_gap needs at least one pair"));
    }
    let primes = primes_up_to(y);
    let mut best = CovarianceGap {
        y,
        worst_lag: 0.0,
        gap: f64::NEG_INFINITY,
    };
    for &(s, t) in pairs {
        let d = (s - t).abs();
        let g = (covariance_at_lag(&primes, d) - log_kernel(y, d)).abs();
        if g > best.gap {
            best = CovarianceGap {
                y,
                worst_lag: d,
                gap: g,
            };
        }
    }
    Ok(best)
}

/// Pairs `(0, d)` for `d` on a uniform grid of step `1/steps` in `[0, 1]`,
/// plus log-spaced lags down to `1e-6` around the crossover `1/log y`.
pub fn standard_lag_pairs(steps: usize) -> Vec<(f64, f64)> {
    let mut lags: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    lags.extend((0..=120).map(|k| 10f64.powf(-6.0 + k as f64 * 0.05)));
    lags.retain(|d| *d <= 1.0);
    lags.into_iter().map(|d| (0.0, d)).collect()
}

/// Estimate of `E[μ_y^q]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmcMeasureEstimate {
    pub y: u64,
    pub q: f64,
    /// Median of batch means of `μ_y^q`.
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub replicas: u64,
    pub grid_resolution: usize,
    /// The same estimate from the half-resolution Riemann sum.
    pub coarse_estimate: f64,
    pub batch_means: Vec<f64>,
}

impl GmcMeasureEstimate {
    /// Relative change between the half- and full-resolution estimates.
    pub fn resolution_drift(&self) -> f64 {
        if self.estimate == 0.0 {
            0.0
        } else {
            (self.estimate - self.coarse_estimate).abs() / self.estimate
        }
    }
}

/// Batches used by [`gmc_moment`]'s median-of-means.
pub const GMC_BATCHES: usize = 10;

/// The smallest admissible Riemann-sum resolution, `⌈4 log y⌉`.
pub fn min_gmc_resolution(y: u64) -> usize {
    (4.0 * (y as f64).ln()).ceil() as usize
}

/// `E[μ_y^q]` by left-endpoint Riemann sums on `grid_resolution` points of
/// `[0, 1)`; the even-indexed points give the coarse (step-doubled) estimate.
pub fn gmc_moment(y: u64, q: f64, replicas: u64, grid_resolution: usize, seed: Seed) -> Result<GmcMeasureEstimate> {
    check_y(y)?;
    if !(0.0..1.0).contains(&q) {
        return Err(domain(format!("q must lie in [0, 1), got {q}")));
    }
    if grid_resolution < min_gmc_resolution(y) || grid_resolution % 2 == 1 {
        return Err(domain(format!(
            "grid resolution must be even and >= 4 log y = {}",
            min_gmc_resolution(y)
        )));
    }
    if (replicas as usize) < GMC_BATCHES {
        return Err(precondition(format!("need at least {GMC_BATCHES} replicas")));
    }
    let primes = primes_up_to(y);
    let logs: Vec<f64> = primes.iter().map(|&p| (p as f64).ln()).collect();
    let ly = (y as f64).ln();
    let norm = ly.ln().max(0.0).sqrt() / ly;
    let h = 1.0 / grid_resolution as f64;
    let pairs = run_replicas(replicas, |i| {
        let coeffs = prime_coefficients(seed.child(i), &primes);
        let g = field_on_uniform_grid(&coeffs, &logs, 0.0, h, grid_resolution);
        let e: Vec<f64> = g.iter().map(|v| (2.0 * v).exp()).collect();
        let even: Vec<f64> = e.iter().step_by(2).copied().collect();
        let fine = norm * pairwise_sum(&e) * h;
        let coarse = norm * pairwise_sum(&even) * 2.0 * h;
        (fine.powf(q), coarse.powf(q))
    });
    let fine: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let coarse: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let m = MedianOfMeans::from_samples(&fine, GMC_BATCHES)?;
    let mc = MedianOfMeans::from_samples(&coarse, GMC_BATCHES)?;
    let (ci_lo, ci_hi) = if q == 0.0 { (1.0, 1.0) } else { m.ci95() };
    Ok(GmcMeasureEstimate {
        y,
        q,
        estimate: m.estimate,
        ci_lo: ci_lo.max(0.0),
        ci_hi,
        replicas,
        grid_resolution,
        coarse_estimate: mc.estimate,
        batch_means: m.batch_means,
    })
}

/// Outcome of one Kahane comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KahaneComparison {
    pub moment_y: MeanEstimate,
    pub moment_z: MeanEstimate,
    /// `moment_y − moment_z` with the standard error of the paired differences.
    pub gap: MeanEstimate,
}

impl KahaneComparison {
    /// `moment_y >= moment_z − 4·(joint standard error)`.
    pub fn holds(&self) -> bool {
        self.gap.mean >= -4.0 * self.gap.stderr
    }
}

/// `L` with `L Lᵀ = K`, from the symmetric eigendecomposition.
///
/// Eigenvalues down to `−1e-10·trace` are treated as zero; anything lower is
/// a [`LabError::Factorization`].
pub fn psd_factor(kernel: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = kernel.nrows();
    if kernel.ncols() != n {
        return Err(precondition("kernel must be square"));
    }
    if (kernel - kernel.transpose()).abs().max() > 1e-12 * kernel.abs().max().max(1.0) {
        return Err(LabError::Factorization("kernel is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(kernel.clone());
    let floor = -1e-10 * kernel.trace().abs();
    if let Some(l) = eig.eigenvalues.iter().find(|&&l| l < floor) {
        return Err(LabError::Factorization(format!(
            "kernel has eigenvalue {l} below {floor}"
        )));
    }
    let roots = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    Ok(eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// `E[(Σ_i w_i exp(X_i − E[X_i^2]/2))^q]` for `X ~ N(0, kernelY)` and
/// `N(0, kernelZ)`, with uniform weights `w_i = 1/n` and common standard
/// normal inputs for the two fields.
pub fn kahane_compare(
    kernel_y: &DMatrix<f64>,
    kernel_z: &DMatrix<f64>,
    q: f64,
    replicas: u64,
    seed: Seed,
) -> Result<KahaneComparison> {
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("q must lie in (0, 1), got {q}")));
    }
    if kernel_y.shape() != kernel_z.shape() {
        return Err(precondition("kernels must have the same shape"));
    }
    if kernel_y.iter().zip(kernel_z.iter()).any(|(a, b)| a > &(b + 1e-12)) {
        return Err(precondition("kernelY must be dominated by kernelZ pointwise"));
    }
    let ly = psd_factor(kernel_y)?;
    let lz = psd_factor(kernel_z)?;
    let n = kernel_y.nrows();
    let w = 1.0 / n as f64;
    let chaos = |l: &DMatrix<f64>, k: &DMatrix<f64>, xi: &DVector<f64>| {
        let x = l * xi;
        let terms: Vec<f64> = (0..n).map(|i| w * (x[i] - 0.5 * k[(i, i)]).exp()).collect();
        pairwise_sum(&terms).powf(q)
    };
    let samples = run_replicas(replicas, |i| {
        let mut rng = seed.child(i).stream();
        let xi = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        (chaos(&ly, kernel_y, &xi), chaos(&lz, kernel_z, &xi))
    });
    let my: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mz: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let d: Vec<f64> = samples.iter().map(|s| s.0 - s.1).collect();
    Ok(KahaneComparison {
        moment_y: MeanEstimate::from_samples(&my),
        moment_z: MeanEstimate::from_samples(&mz),
        gap: MeanEstimate::from_samples(&d),
    })
}

/// Kernel matrix `(k(t_i, t_j))` on a grid.
pub fn kernel_matrix(grid: &[f64], k: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(grid.len(), grid.len(), |i, j| k(grid[i], grid[j]))
}

/// A random pair `K_Y <= K_Z` (pointwise), both positive semidefinite:
/// `K_Y = A Aᵀ / n` with Gaussian `A`, `K_Z = K_Y + Σ_{k<3} b_k b_kᵀ` with
/// `b_k` uniform in `[0, 1)^n`.
pub fn random_dominated_pair(n: usize, seed: Seed) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = seed.stream();
    let a: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let ky = &a * a.transpose() / n as f64;
    let mut kz = ky.clone();
    for _ in 0..3 {
        let b = DVector::from_fn(n, |_, _| rng.random::<f64>());
        kz += &b * b.transpose();
    }
    (ky, kz)
}

/// `e^{−q(1−q)C/2}`: the ratio `moment_z / moment_y` when `kernelZ = kernelY + C`.
pub fn constant_shift_factor(q: f64, c: f64) -> f64 {
    (-q * (1.0 - q) * c / 2.0).exp()
}

/// Variance of `G̃(t)` at any `t`: `(1/2) Σ_{p<=y} 1/p`.
pub fn marginal_variance(y: u64) -> f64 {
    exact_covariance(y, 0.0, 0.0)
}

/// `E[e^{2G̃(t)}] = e^{Σ_{p<=y} 1/p}`.
pub fn expected_exponential(y: u64) -> f64 {
    (2.0 * marginal_variance(y)).exp()
}
