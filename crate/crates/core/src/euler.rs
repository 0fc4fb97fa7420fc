//! The randomized Euler product `A_y(s) = ∏_{p<=y} (1 − α(p) p^{-s})^{-1}`,
//! its log-decomposition `log A_y = G1 + G2/2 + G3`, the critical-line
//! integral `I_y`, the Parseval identity for truncated smooth sums, and the
//! concentration behaviour of `Re G2`.
//!
//! Integrals over the critical line use composite Simpson on a uniform grid.
//! The field is evaluated with per-prime phasor recurrences
//! (`e^{-i(t+h) log p} = e^{-it log p} e^{-ih log p}`), resynchronized from
//! `sin_cos` every [`RESYNC`] steps. Beyond the truncation point `T` the
//! integral is replaced by its mean-value tail: for an absolutely convergent
//! Dirichlet series `F(1/2+it) = Σ a_n n^{-1/2-it}` the long-run mean of
//! `|F|^2` is `Σ |a_n|^2 / n`, which for `A_y` is `∏_{p<=y} (1 − 1/p)^{-1}`
//! whatever the phases.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Result};
use crate::multiplicative::{MultiplicativeTable, SmoothMask};
use crate::phases::{PhaseAssignment, Seed};
use crate::sieve::primes_up_to;
use crate::stats::{pairwise_sum, run_replicas, simpson, MeanEstimate};

const RESYNC: usize = 64;

/// Terms `p^{-jσ}` below this are dropped from the `G3` series.
pub const G3_TRUNCATION: f64 = 1e-18;

/// Prime bound for the direct part of the constant sums below.
const CONSTANT_SUM_LIMIT: u64 = 10_000_000;

/// `A_y` and its decomposition on a grid of heights `t`, at abscissa `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerFieldSample {
    pub y: u64,
    pub sigma: f64,
    pub grid: Vec<f64>,
    pub a: Vec<Complex64>,
    pub g1: Vec<Complex64>,
    pub g2: Vec<Complex64>,
    pub g3: Vec<Complex64>,
}

impl EulerFieldSample {
    /// `max_t |exp(G1 + G2/2 + G3) − A| / |A|`.
    pub fn reconstruction_error(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.g1)
            .zip(&self.g2)
            .zip(&self.g3)
            .map(|(((a, g1), g2), g3)| ((g1 + g2 * 0.5 + g3).exp() - a).norm() / a.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_g3(&self) -> f64 {
        self.g3.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn check_field_args(y: u64, sigma: f64) -> Result<()> {
    if !(sigma >= 0.5) || !sigma.is_finite() {
        return Err(domain(format!("σ must be >= 1/2, got {sigma}")));
    }
    if y < 2 {
        return Err(domain("y must be >= 2"));
    }
    Ok(())
}

/// `A_y(σ+it)`, `G1`, `G2`, `G3` at every `t` of `grid`, for one realization.
pub fn evaluate_field(assignment: &PhaseAssignment, y: u64, sigma: f64, grid: &[f64]) -> Result<EulerFieldSample> {
    check_field_args(y, sigma)?;
    let primes = primes_up_to(y);
    let thetas = assignment.thetas(&primes);
    let mut sample = EulerFieldSample {
        y,
        sigma,
        grid: grid.to_vec(),
        a: Vec::with_capacity(grid.len()),
        g1: Vec::with_capacity(grid.len()),
        g2: Vec::with_capacity(grid.len()),
        g3: Vec::with_capacity(grid.len()),
    };
    for &t in grid {
        let mut denom = Complex64::new(1.0, 0.0);
        let mut g1 = Vec::with_capacity(primes.len());
        let mut g2 = Vec::with_capacity(primes.len());
        let mut g3 = Vec::with_capacity(primes.len());
        for (&p, &theta) in primes.iter().zip(&thetas) {
            let lp = (p as f64).ln();
            let z = Complex64::from_polar((-sigma * lp).exp(), theta - t * lp);
            denom *= Complex64::new(1.0, 0.0) - z;
            g1.push(z);
            let z2 = z * z;
            g2.push(z2);
            // Σ_{j>=3} z^j / j, stopped once |z|^j < 1e-18
            let r = z.norm();
            let mut zj = z2 * z;
            let mut rj = r * r * r;
            let mut j = 3.0;
            let mut acc = Complex64::new(0.0, 0.0);
            while rj >= G3_TRUNCATION {
                acc += zj / j;
                zj *= z;
                rj *= r;
                j += 1.0;
            }
            g3.push(acc);
        }
        sample.a.push(denom.inv());
        sample.g1.push(sum_c(&g1));
        sample.g2.push(sum_c(&g2));
        sample.g3.push(sum_c(&g3));
    }
    Ok(sample)
}

fn sum_c(v: &[Complex64]) -> Complex64 {
    crate::stats::pairwise_sum_complex(v)
}

/// Upper bound for `Σ_{p<=P} f(p)` plus an analytic bound for `Σ_{p>P} f(p)`.
fn prime_sum_with_tail(f: impl Fn(f64) -> f64, tail: impl Fn(f64) -> f64) -> f64 {
    let terms: Vec<f64> = primes_up_to(CONSTANT_SUM_LIMIT).iter().map(|&p| f(p as f64)).collect();
    pairwise_sum(&terms) + tail(CONSTANT_SUM_LIMIT as f64)
}

/// `K3 = Σ_p Σ_{j>=3} p^{-j/2}`, a uniform bound for `|G3|` when `σ >= 1/2`.
///
/// Direct summation over `p <= 10^7` plus `Σ_{n>P} n^{-3/2} / (1 − P^{-1/2})`
/// bounded by `2 P^{-1/2} / (1 − P^{-1/2})`.
pub fn g3_uniform_bound() -> f64 {
    static K3: OnceLock<f64> = OnceLock::new();
    *K3.get_or_init(|| {
        prime_sum_with_tail(
            |p| p.powf(-1.5) / (1.0 - p.powf(-0.5)),
            |big| 2.0 * big.powf(-0.5) / (1.0 - big.powf(-0.5)),
        )
    })
}

/// `Σ_p p^{-2} log^2 p`, the increment variance proxy for `Re G2`.
///
/// Tail bounded by `∫_P^∞ log^2 x / x^2 dx = (log^2 P + 2 log P + 2) / P`.
pub fn g2_variance_proxy() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| {
        prime_sum_with_tail(
            |p| {
                let l = p.ln();
                l * l / (p * p)
            },
            |big| {
                let l = big.ln();
                (l * l + 2.0 * l + 2.0) / big
            },
        )
    })
}

/// `Σ_{p<=y} p^{-4σ}`.
pub fn prime_power_sum(y: u64, sigma: f64) -> f64 {
    let terms: Vec<f64> = primes_up_to(y).iter().map(|&p| (p as f64).powf(-4.0 * sigma)).collect();
    pairwise_sum(&terms)
}

/// `∏_{p<=y} (1 − 1/p)^{-1}`: the mean value of `|A_y(1/2+it)|^2` over `t`,
/// and also its expectation at any fixed `t`.
pub fn euler_mean_square(y: u64) -> f64 {
    let logs: Vec<f64> = primes_up_to(y).iter().map(|&p| -(-1.0 / p as f64).ln_1p()).collect();
    pairwise_sum(&logs).exp()
}

/// `∫_{|t|>T} dt / (1/4 + t^2)`.
pub fn weight_tail(t: f64) -> f64 {
    2.0 * (PI - 2.0 * (2.0 * t).atan())
}

/// A Dirichlet series on the critical line, evaluated on uniform grids.
#[derive(Debug, Clone)]
enum CriticalLineSeries {
    /// `∏ (1 − c_k e^{-i t ω_k})^{-1}`
    EulerProduct { coeffs: Vec<Complex64>, freqs: Vec<f64> },
    /// `Σ c_k e^{-i t ω_k}`
    Polynomial { coeffs: Vec<Complex64>, freqs: Vec<f64> },
}

impl CriticalLineSeries {
    fn euler(assignment: &PhaseAssignment, y: u64) -> Self {
        let primes = primes_up_to(y);
        let alphas = assignment.alphas(&primes);
        let coeffs = primes.iter().zip(alphas).map(|(&p, a)| a / (p as f64).sqrt()).collect();
        let freqs = primes.iter().map(|&p| (p as f64).ln()).collect();
        CriticalLineSeries::EulerProduct { coeffs, freqs }
    }

    fn polynomial(terms: &[(u64, Complex64)]) -> Self {
        CriticalLineSeries::Polynomial {
            coeffs: terms.iter().map(|&(n, f)| f / (n as f64).sqrt()).collect(),
            freqs: terms.iter().map(|&(n, _)| (n as f64).ln()).collect(),
        }
    }

    fn parts(&self) -> (&[Complex64], &[f64]) {
        match self {
            CriticalLineSeries::EulerProduct { coeffs, freqs } | CriticalLineSeries::Polynomial { coeffs, freqs } => {
                (coeffs, freqs)
            }
        }
    }

    /// `|F(1/2 + i(t0 + k h))|^2` for `k = 0..count`.
    fn abs_sq_grid(&self, t0: f64, h: f64, count: usize) -> Vec<f64> {
        let (coeffs, freqs) = self.parts();
        let steps: Vec<Complex64> = freqs.iter().map(|&w| Complex64::from_polar(1.0, -h * w)).collect();
        let mut phasors: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); freqs.len()];
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            if k % RESYNC == 0 {
                let t = t0 + k as f64 * h;
                for (ph, &w) in phasors.iter_mut().zip(freqs) {
                    *ph = Complex64::from_polar(1.0, -t * w);
                }
            }
            let v = match self {
                CriticalLineSeries::EulerProduct { .. } => {
                    let mut d = Complex64::new(1.0, 0.0);
                    for (c, ph) in coeffs.iter().zip(&phasors) {
                        d *= Complex64::new(1.0, 0.0) - c * ph;
                    }
                    1.0 / d.norm_sqr()
                }
                CriticalLineSeries::Polynomial { .. } => {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (c, ph) in coeffs.iter().zip(&phasors) {
                        s += c * ph;
                    }
                    s.norm_sqr()
                }
            };
            out.push(v);
            for (ph, st) in phasors.iter_mut().zip(&steps) {
                *ph *= st;
            }
        }
        out
    }

    /// Simpson integral of `|F|^2 / (1/4 + t^2)` over `[a, a + 2m h]`.
    fn weighted_simpson(&self, a: f64, h: f64, intervals: usize) -> f64 {
        debug_assert!(intervals.is_multiple_of(2) && intervals > 0);
        let vals = self.abs_sq_grid(a, h, intervals + 1);
        let g: Vec<f64> = vals
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let t = a + k as f64 * h;
                v / (0.25 + t * t)
            })
            .collect();
        simpson(&g, h)
    }
}

/// The largest admissible quadrature step, `π / (8 log y)`.
pub fn max_step(y: u64) -> f64 {
    PI / (8.0 * (y as f64).ln())
}

/// `min(π / (8 log y), 1/20)`: the peak of `1/(1/4 + t^2)` at the origin
/// needs the cap when `y` is small.
pub fn default_step(y: u64) -> f64 {
    max_step(y).min(0.05)
}

/// Budget and stopping rule for [`integral_functional`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralOptions {
    /// Initial truncation height.
    pub t_max: f64,
    /// Quadrature step; `None` means [`default_step`].
    pub h: Option<f64>,
    /// Stop once the last doubling of `T` adds less than this fraction.
    pub eps: f64,
    /// Give up doubling beyond this height.
    pub t_budget: f64,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        IntegralOptions {
            t_max: 8.0,
            h: None,
            eps: 1e-4,
            t_budget: 65_536.0,
        }
    }
}

/// `I_y = (1/log y) ∫_R |A_y(1/2+it)|^2 / |1/2+it|^2 dt` for one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralFunctional {
    pub y: u64,
    /// `I_y`, quadrature plus mean-value tail, divided by `log y`.
    pub value: f64,
    /// Quadrature over `[−T, T]` alone, divided by `log y`.
    pub quadrature: f64,
    /// Mean-value tail beyond `T`, divided by `log y`.
    pub tail_estimate: f64,
    pub t_max: f64,
    pub h: f64,
    /// Whether the doubling rule met `eps` within the budget.
    pub converged: bool,
}

pub fn integral_functional(assignment: &PhaseAssignment, y: u64, opts: IntegralOptions) -> Result<IntegralFunctional> {
    if y < 2 {
        return Err(domain("y must be >= 2"));
    }
    if !(opts.t_max >= 1.0) {
        return Err(domain("T_max must be >= 1"));
    }
    if !(opts.eps > 0.0) {
        return Err(domain("eps must be positive"));
    }
    let bound = max_step(y);
    let h_req = opts.h.unwrap_or_else(|| default_step(y));
    if !(h_req > 0.0) || h_req > bound * (1.0 + 1e-12) {
        return Err(domain(format!("step h = {h_req} exceeds π/(8 log y) = {bound}")));
    }
    let series = CriticalLineSeries::euler(assignment, y);
    let base = 2 * (opts.t_max / (2.0 * h_req)).ceil() as usize;
    let h = opts.t_max / base as f64;

    let mut t = opts.t_max;
    let mut intervals = base;
    let mut pieces = vec![
        series.weighted_simpson(-t, h, intervals),
        series.weighted_simpson(0.0, h, intervals),
    ];
    let mut converged = false;
    while 2.0 * t <= opts.t_budget {
        let right = series.weighted_simpson(t, h, intervals);
        let left = series.weighted_simpson(-2.0 * t, h, intervals);
        let running = pairwise_sum(&pieces);
        pieces.push(left);
        pieces.push(right);
        t *= 2.0;
        intervals *= 2;
        if left + right < opts.eps * running {
            converged = true;
            break;
        }
    }
    let log_y = (y as f64).ln();
    let quadrature = pairwise_sum(&pieces) / log_y;
    let tail_estimate = euler_mean_square(y) * weight_tail(t) / log_y;
    Ok(IntegralFunctional {
        y,
        value: quadrature + tail_estimate,
        quadrature,
        tail_estimate,
        t_max: t,
        h,
        converged,
    })
}

/// Both sides of Parseval's identity for a finitely supported `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsevalCheck {
    /// `2π ∫_1^∞ |Σ_{n<=t} f(n)|^2 dt/t^2`, summed exactly.
    pub lhs: f64,
    /// `∫_R |F(1/2+it)|^2 / |1/2+it|^2 dt`: quadrature plus mean-value tail.
    pub rhs: f64,
    pub relative_error: f64,
    pub quadrature: f64,
    pub tail_estimate: f64,
    /// Tail estimate exceeded `1e-3` of the right-hand side.
    pub tail_flagged: bool,
}

/// Exact left-hand side: `2π [Σ_{r<N} |P(r)|^2 (1/r − 1/(r+1)) + |P(N)|^2 / N]`
/// where `P(r) = Σ_{n<=r} f(n)` and `N` is the largest support point.
pub fn parseval_lhs(terms: &[(u64, Complex64)]) -> f64 {
    let mut sorted = terms.to_vec();
    sorted.sort_by_key(|&(n, _)| n);
    let mut parts = Vec::with_capacity(sorted.len());
    let mut prefix = Complex64::new(0.0, 0.0);
    for (i, &(n, f)) in sorted.iter().enumerate() {
        prefix += f;
        // P is constant on [n, next): ∫ dt/t^2 = 1/n − 1/next
        let weight = match sorted.get(i + 1) {
            Some(&(next, _)) if next > n => 1.0 / n as f64 - 1.0 / next as f64,
            Some(_) => 0.0,
            None => 1.0 / n as f64,
        };
        parts.push(prefix.norm_sqr() * weight);
    }
    2.0 * PI * pairwise_sum(&parts)
}

/// Parseval check for an arbitrary finite coefficient list `(n, f(n))`.
pub fn parseval_for_terms(terms: &[(u64, Complex64)], t_max: f64, h: f64) -> Result<ParsevalCheck> {
    if terms.is_empty() {
        return Err(precondition("f must have nonempty support"));
    }
    if terms.iter().any(|&(n, _)| n == 0) {
        return Err(domain("support must lie in the positive integers"));
    }
    if !(t_max >= 1.0) || !(h > 0.0) {
        return Err(domain("need T_max >= 1 and h > 0"));
    }
    let lhs = parseval_lhs(terms);
    let series = CriticalLineSeries::polynomial(terms);
    let half = 2 * (t_max / (2.0 * h)).ceil() as usize;
    let h_eff = t_max / half as f64;
    let quadrature = series.weighted_simpson(-t_max, h_eff, half) + series.weighted_simpson(0.0, h_eff, half);
    let mean: Vec<f64> = terms.iter().map(|&(n, f)| f.norm_sqr() / n as f64).collect();
    let tail_estimate = pairwise_sum(&mean) * weight_tail(t_max);
    let rhs = quadrature + tail_estimate;
    Ok(ParsevalCheck {
        lhs,
        rhs,
        relative_error: (lhs - rhs).abs() / lhs.abs(),
        quadrature,
        tail_estimate,
        tail_flagged: tail_estimate > 1e-3 * rhs,
    })
}

/// `(n, α(n))` for the y-smooth `n <= n_trunc` of one realization.
pub fn smooth_terms(assignment: &PhaseAssignment, y: u64, n_trunc: u32) -> Result<Vec<(u64, Complex64)>> {
    let table = MultiplicativeTable::build(assignment, n_trunc)?;
    let mask = SmoothMask::new(table.sieve(), n_trunc, y)?;
    Ok((1..=n_trunc)
        .filter(|&n| mask.contains(n))
        .map(|n| (n as u64, table.alpha(n)))
        .collect())
}

/// Parseval check for `f(n) = α(n) 1[n y-smooth] 1[n <= N]`.
pub fn parseval_check(assignment: &PhaseAssignment, y: u64, n_trunc: u32, t_max: f64, h: f64) -> Result<ParsevalCheck> {
    if y < 2 {
        return Err(domain("y must be >= 2"));
    }
    parseval_for_terms(&smooth_terms(assignment, y, n_trunc)?, t_max, h)
}

/// All y-smooth `n <= limit` with `α(n)`, by depth-first enumeration (unsorted).
pub fn enumerate_smooth(assignment: &PhaseAssignment, y: u64, limit: u64) -> Vec<(u64, Complex64)> {
    let primes = primes_up_to(y.min(limit.max(2)));
    let alphas = assignment.alphas(&primes);
    let mut out = vec![(1u64, Complex64::new(1.0, 0.0))];
    // stack of (n, α(n), index of the smallest prime still allowed)
    let mut stack = vec![(1u64, Complex64::new(1.0, 0.0), 0usize)];
    while let Some((n, a, start)) = stack.pop() {
        for (k, &p) in primes.iter().enumerate().skip(start) {
            let Some(m) = n.checked_mul(p as u64).filter(|&m| m <= limit) else {
                break;
            };
            let am = a * alphas[k];
            out.push((m, am));
            stack.push((m, am, k));
        }
    }
    out
}

/// `I_y` through the dual (prefix-sum) side of Parseval, truncated at `n_trunc`.
pub fn dual_integral(assignment: &PhaseAssignment, y: u64, n_trunc: u64) -> Result<f64> {
    if y < 2 {
        return Err(domain("y must be >= 2"));
    }
    let terms = enumerate_smooth(assignment, y, n_trunc);
    Ok(parseval_lhs(&terms) / (y as f64).ln())
}

fn g2_real(thetas: &[f64], logs: &[f64], weights: &[f64], s: f64) -> f64 {
    let terms: Vec<f64> = thetas
        .iter()
        .zip(logs)
        .zip(weights)
        .map(|((&th, &lp), &w)| w * (2.0 * th - 2.0 * s * lp).cos())
        .collect();
    pairwise_sum(&terms)
}

struct G2Setup {
    primes: Vec<u32>,
    logs: Vec<f64>,
    weights: Vec<f64>,
}

impl G2Setup {
    fn new(y: u64, sigma: f64) -> Result<Self> {
        check_field_args(y, sigma)?;
        let primes = primes_up_to(y);
        let logs = primes.iter().map(|&p| (p as f64).ln()).collect();
        let weights = primes.iter().map(|&p| (p as f64).powf(-2.0 * sigma)).collect();
        Ok(G2Setup { primes, logs, weights })
    }

    fn value(&self, seed: Seed, s: f64) -> f64 {
        let thetas = PhaseAssignment::new(seed).thetas(&self.primes);
        g2_real(&thetas, &self.logs, &self.weights, s)
    }
}

/// Points used to approximate the supremum over a unit window.
pub const SUP_SUBGRID: usize = 256;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(-4.0..=4.0).contains(&lambda) {
        return Err(domain(format!("λ must lie in [-4, 4], got {lambda}")));
    }
    Ok(())
}

/// `E[sup_{s∈[n,n+1]} exp(λ Re G2(s))]`, the supremum taken over a 256-point sub-grid.
pub fn g2_exponential_moment(
    lambda: f64,
    y: u64,
    sigma: f64,
    window: i64,
    replicas: u64,
    seed: Seed,
) -> Result<MeanEstimate> {
    check_lambda(lambda)?;
    let setup = G2Setup::new(y, sigma)?;
    let grid: Vec<f64> = (0..SUP_SUBGRID)
        .map(|k| window as f64 + k as f64 / (SUP_SUBGRID - 1) as f64)
        .collect();
    let samples = run_replicas(replicas, |i| {
        let thetas = PhaseAssignment::new(seed.child(i)).thetas(&setup.primes);
        let extreme = grid
            .iter()
            .map(|&s| lambda * g2_real(&thetas, &setup.logs, &setup.weights, s))
            .fold(f64::NEG_INFINITY, f64::max);
        extreme.exp()
    });
    Ok(MeanEstimate::from_samples(&samples))
}

/// `E[exp(λ Re G2(t))]` at a single height.
pub fn g2_pointwise_exponential_moment(
    lambda: f64,
    y: u64,
    sigma: f64,
    t: f64,
    replicas: u64,
    seed: Seed,
) -> Result<MeanEstimate> {
    check_lambda(lambda)?;
    let setup = G2Setup::new(y, sigma)?;
    let samples = run_replicas(replicas, |i| (lambda * setup.value(seed.child(i), t)).exp());
    Ok(MeanEstimate::from_samples(&samples))
}

/// One point of the empirical increment tail of `Re G2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub u: f64,
    pub empirical: f64,
    /// `2 exp(−u^2 / (16 |s−t|^2))`.
    pub bound: f64,
    /// Binomial standard error of `empirical`.
    pub stderr: f64,
}

impl TailPoint {
    /// `empirical <= bound + 4·stderr`.
    pub fn respects_bound(&self) -> bool {
        self.empirical <= self.bound + 4.0 * self.stderr
    }
}

pub fn increment_tail_bound(u: f64, gap: f64) -> f64 {
    2.0 * (-u * u / (16.0 * gap * gap)).exp()
}

/// Empirical `P(|Re G2(s) − Re G2(t)| >= u)` for each `u` in `u_grid`.
pub fn g2_increment_tail(
    y: u64,
    sigma: f64,
    s: f64,
    t: f64,
    u_grid: &[f64],
    replicas: u64,
    seed: Seed,
) -> Result<Vec<TailPoint>> {
    if s == t {
        return Err(precondition("s and t must differ"));
    }
    let setup = G2Setup::new(y, sigma)?;
    let increments = run_replicas(replicas, |i| {
        let thetas = PhaseAssignment::new(seed.child(i)).thetas(&setup.primes);
        (g2_real(&thetas, &setup.logs, &setup.weights, s) - g2_real(&thetas, &setup.logs, &setup.weights, t)).abs()
    });
    let n = increments.len() as f64;
    Ok(u_grid
        .iter()
        .map(|&u| {
            let hits = increments.iter().filter(|&&d| d >= u).count() as f64;
            let empirical = hits / n;
            let bound = increment_tail_bound(u, (s - t).abs());
            // floor the variance at one count so rare events still carry an error bar
            let p = empirical.max(1.0 / n);
            TailPoint {
                u,
                empirical,
                bound,
                stderr: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect())
}

/// First and second moments of `|A_y(σ+it)|` at a single height.
pub fn modulus_moments(y: u64, sigma: f64, t: f64, replicas: u64, seed: Seed) -> Result<(MeanEstimate, MeanEstimate)> {
    check_field_args(y, sigma)?;
    let samples = run_replicas(replicas, |i| {
        let f = evaluate_field(&PhaseAssignment::new(seed.child(i)), y, sigma, &[t]).expect("arguments checked");
        f.a[0].norm()
    });
    let squares: Vec<f64> = samples.iter().map(|v| v * v).collect();
    Ok((
        MeanEstimate::from_samples(&samples),
        MeanEstimate::from_samples(&squares),
    ))
}

/// `E[I_y]` in closed form: `2π ∏_{p<=y}(1 − 1/p)^{-1} / log y`.
pub fn expected_integral(y: u64) -> f64 {
    2.0 * PI * euler_mean_square(y) / (y as f64).ln()
}

/// `∫_{−T}^{T} dt/(1/4+t^2)`.
pub fn weight_mass(t: f64) -> f64 {
    4.0 * (2.0 * t).atan()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_factor_closed_form() {
        let a = PhaseAssignment::new(Seed::new(1, 0)).with_phase(2, 0.0).unwrap();
        let f = evaluate_field(&a, 2, 0.5, &[0.0]).unwrap();
        let expect = 1.0 / (1.0 - 2f64.powf(-0.5));
        assert!((f.a[0].re - expect).abs() < 1e-12);
        assert!(f.a[0].im.abs() < 1e-12);
        assert!((expect - 3.414_213_562_373_095).abs() < 1e-12);
    }

    #[test]
    fn sigma_below_half_rejected() {
        let a = PhaseAssignment::new(Seed::new(1, 0));
        assert!(evaluate_field(&a, 10, 0.49, &[0.0]).is_err());
        assert!(g2_pointwise_exponential_moment(1.0, 10, 0.3, 0.0, 10, Seed::new(1, 1)).is_err());
    }

    #[test]
    fn reconstruction_identity() {
        let a = PhaseAssignment::new(Seed::new(2, 2));
        let grid: Vec<f64> = (0..50).map(|k| -20.0 + k as f64 * 0.83).collect();
        let f = evaluate_field(&a, 1000, 0.5, &grid).unwrap();
        assert!(f.reconstruction_error() <= 1e-9);
        assert!(f.max_abs_g3() <= g3_uniform_bound());
    }

    #[test]
    fn constants() {
        let k3 = g3_uniform_bound();
        assert!(k3 > 1.0 && k3 < 3.0, "K3 = {k3}");
        let v = g2_variance_proxy();
        assert!(v <= 2.0, "variance proxy {v}");
        assert!(prime_power_sum(1_000_000, 0.5) <= 0.5);
    }

    #[test]
    fn lambda_zero_moment_is_one() {
        let e = g2_exponential_moment(0.0, 100, 0.5, 0, 20, Seed::new(3, 0)).unwrap();
        assert_eq!(e.mean, 1.0);
        assert!(g2_exponential_moment(4.5, 100, 0.5, 0, 20, Seed::new(3, 0)).is_err());
    }

    #[test]
    fn tail_at_zero_is_one() {
        let tp = g2_increment_tail(100, 0.5, 0.0, 0.1, &[0.0], 50, Seed::new(4, 0)).unwrap();
        assert_eq!(tp[0].empirical, 1.0);
        assert_eq!(tp[0].bound, 2.0);
        assert!(tp[0].respects_bound());
        assert!(g2_increment_tail(100, 0.5, 0.3, 0.3, &[0.1], 5, Seed::new(4, 0)).is_err());
    }

    #[test]
    fn step_bound_enforced() {
        let a = PhaseAssignment::new(Seed::new(5, 0));
        let opts = IntegralOptions {
            h: Some(max_step(10) * 1.5),
            ..IntegralOptions::default()
        };
        assert!(integral_functional(&a, 10, opts).is_err());
    }

    #[test]
    fn parseval_single_term() {
        let c = parseval_for_terms(&[(1, Complex64::new(1.0, 0.0))], 50.0, 0.01).unwrap();
        assert!((c.lhs - 2.0 * PI).abs() < 1e-12);
        assert!(c.relative_error < 1e-6, "{c:?}");
    }

    #[test]
    fn parseval_lhs_two_terms() {
        let one = Complex64::new(1.0, 0.0);
        // 2π [1·(1 − 1/2) + 4·(1/2)] = 5π
        assert!((parseval_lhs(&[(1, one), (2, one)]) - 5.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn smooth_enumeration_matches_mask() {
        let a = PhaseAssignment::new(Seed::new(6, 1));
        let mut dfs = enumerate_smooth(&a, 13, 5000);
        dfs.sort_by_key(|&(n, _)| n);
        let direct = smooth_terms(&a, 13, 5000).unwrap();
        assert_eq!(dfs.len(), direct.len());
        for (x, y) in dfs.iter().zip(&direct) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).norm() < 1e-12);
        }
    }
}
