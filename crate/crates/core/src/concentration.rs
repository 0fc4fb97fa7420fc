//! Hoeffding's bounds for sums of independent centered bounded variables and
//! the Dudley entropy integral for an interval under the metric
//! `d(s, t) = 2√2 |s − t|`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{domain, Result};
use crate::stats::pairwise_sum;

/// Lipschitz scale of the metric `d(s, t) = 2√2 |s − t|`.
pub const METRIC_SCALE: f64 = 2.0 * std::f64::consts::SQRT_2;

fn sum_sq(c: &[f64]) -> Result<f64> {
    if let Some(x) = c.iter().find(|x| !(**x >= 0.0)) {
        return Err(domain(format!("bounds c_i must be nonnegative, got {x}")));
    }
    Ok(pairwise_sum(&c.iter().map(|x| x * x).collect::<Vec<_>>()))
}

/// `exp(λ^2 Σ c_i^2 / 2)`, bounding `E exp(λ Σ X_i)` when `|X_i| <= c_i`.
pub fn hoeffding_mgf_bound(c: &[f64], lambda: f64) -> Result<f64> {
    Ok((lambda * lambda * sum_sq(c)? / 2.0).exp())
}

/// `2 exp(−u^2 / (2 Σ c_i^2))`, bounding `P(|Σ X_i| >= u)`.
pub fn hoeffding_tail_bound(c: &[f64], u: f64) -> Result<f64> {
    let s = sum_sq(c)?;
    if s == 0.0 {
        return Ok(if u > 0.0 { 0.0 } else { 2.0 });
    }
    Ok(2.0 * (-u * u / (2.0 * s)).exp())
}

/// `N(T, d, r) <= 1 + ⌊2√2 |T| / r⌋` for an interval of length `|T|`.
pub fn cover_number(length: f64, r: f64) -> u64 {
    1 + (METRIC_SCALE * length / r).floor() as u64
}

/// Entropy integral of an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainingBudget {
    pub length: f64,
    pub metric_scale: f64,
    /// `∫_0^∞ √(log N(T, d, r)) dr`.
    pub dudley: f64,
    /// Upper bound for `γ2(T, d)` up to the universal constant.
    pub gamma2_upper: f64,
}

/// Cutoff of the exact part of [`dudley_constant`].
pub const DUDLEY_CUTOFF: u64 = 1 << 20;

/// `∫_0^1 √(log(1 + ⌊1/u⌋)) du` with the sum over `k` exact up to `cutoff`.
///
/// On `(1/(k+1), 1/k]` the integrand is `√log(1+k)`, so the integral is
/// `Σ_k √log(1+k) (1/k − 1/(k+1))`. Past the cutoff the sum is replaced by
/// `∫_K^∞ √(log x) x^{-2} dx = Γ(3/2, log K) = √a e^{-a} + (√π/2) erfc(√a)`
/// with `a = log K`.
pub fn dudley_constant_with_cutoff(cutoff: u64) -> f64 {
    let terms: Vec<f64> = (1..=cutoff)
        .map(|k| {
            let k = k as f64;
            (1.0 + k).ln().sqrt() / (k * (k + 1.0))
        })
        .collect();
    let a = (cutoff as f64).ln();
    let tail = a.sqrt() * (-a).exp() + 0.5 * std::f64::consts::PI.sqrt() * erfc(a.sqrt());
    pairwise_sum(&terms) + tail
}

pub fn dudley_constant() -> f64 {
    static C: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *C.get_or_init(|| dudley_constant_with_cutoff(DUDLEY_CUTOFF))
}

/// `∫_0^∞ √(log N(T, d, r)) dr = 2√2 |T| ∫_0^1 √(log(1 + ⌊1/u⌋)) du`.
pub fn dudley_integral(length: f64) -> Result<ChainingBudget> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(domain(format!("|T| must be positive, got {length}")));
    }
    let dudley = METRIC_SCALE * length * dudley_constant();
    Ok(ChainingBudget {
        length,
        metric_scale: METRIC_SCALE,
        dudley,
        gamma2_upper: dudley,
    })
}
