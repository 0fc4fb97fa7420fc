//! Exact counts of y-smooth and y-rough integers, the Rankin upper bound for
//! `Ψ(x, y)`, and the short-interval ratio controlled by Brun's sieve.
//!
//! Counting runs on a segmented sieve: each segment divides out every prime
//! `p <= y` (smooth count) or crosses out multiples of those primes (rough
//! count). Segments are independent and their integer counts are summed, so
//! the result does not depend on how rayon schedules them.

use bitvec::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, LabError, Result};
use crate::sieve::primes_up_to;

/// Largest `x` accepted by the counting routines.
pub const MAX_COUNT_X: u64 = 1_000_000_000;

/// Meissel–Mertens constant `M = lim (Σ_{p<=y} 1/p − log log y)`.
pub const MEISSEL_MERTENS: f64 = 0.261_497_212_847_642_8;

const SEGMENT: u64 = 1 << 16;

/// `Ψ(x, y)` and `Φ(x, y)`; the integer 1 is counted in both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub x: u64,
    pub y: u64,
    pub psi: u64,
    pub phi: u64,
}

fn check_xy(x: u64, y: u64) -> Result<()> {
    if x < 1 {
        return Err(domain("x must be >= 1"));
    }
    if y < 2 {
        return Err(domain("y must be >= 2"));
    }
    if x > MAX_COUNT_X {
        return Err(LabError::OutOfRange {
            what: "x",
            value: x as f64,
            limit: MAX_COUNT_X as f64,
        });
    }
    Ok(())
}

fn segments(lo: u64, hi: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut a = lo;
    while a < hi {
        let b = (a + SEGMENT).min(hi);
        out.push((a, b));
        a = b;
    }
    out
}

/// Number of y-smooth integers in `[lo, hi)` (`lo >= 1`).
fn smooth_in(lo: u64, hi: u64, primes: &[u32]) -> u64 {
    let mut rem: Vec<u64> = (lo..hi).collect();
    for &p in primes {
        let p = p as u64;
        if p >= hi {
            break;
        }
        let mut m = lo.div_ceil(p) * p;
        while m < hi {
            let r = &mut rem[(m - lo) as usize];
            *r /= p;
            while r.is_multiple_of(p) {
                *r /= p;
            }
            m += p;
        }
    }
    rem.iter().filter(|&&r| r == 1).count() as u64
}

/// Number of y-rough integers in `[lo, hi)` (`lo >= 1`; 1 is rough).
fn rough_in(lo: u64, hi: u64, primes: &[u32]) -> u64 {
    let mut hit = bitvec![0; (hi - lo) as usize];
    for &p in primes {
        let p = p as u64;
        if p >= hi {
            break;
        }
        let mut m = lo.div_ceil(p).max(1) * p;
        while m < hi {
            hit.set((m - lo) as usize, true);
            m += p;
        }
    }
    hit.count_zeros() as u64
}

fn par_count(lo: u64, hi: u64, f: impl Fn(u64, u64) -> u64 + Sync) -> u64 {
    segments(lo, hi).into_par_iter().map(|(a, b)| f(a, b)).sum()
}

/// `Ψ(x, y)`: y-smooth integers in `[1, x]`.
pub fn psi(x: u64, y: u64) -> Result<u64> {
    check_xy(x, y)?;
    if y >= x {
        return Ok(x);
    }
    let primes = primes_up_to(y);
    Ok(par_count(1, x + 1, |a, b| smooth_in(a, b, &primes)))
}

/// `Φ(x, y)`: y-rough integers in `[1, x]`.
pub fn phi(x: u64, y: u64) -> Result<u64> {
    check_xy(x, y)?;
    if y >= x {
        return Ok(1);
    }
    let primes = primes_up_to(y);
    Ok(par_count(1, x + 1, |a, b| rough_in(a, b, &primes)))
}

pub fn count_smooth(x: u64, y: u64) -> Result<CountTable> {
    Ok(CountTable {
        x,
        y,
        psi: psi(x, y)?,
        phi: phi(x, y)?,
    })
}

/// Same record as [`count_smooth`]; both counts are always filled in.
pub fn count_rough(x: u64, y: u64) -> Result<CountTable> {
    count_smooth(x, y)
}

/// `Φ(x + H, y) − Φ(x, y)`: y-rough integers in `(x, x + H]`.
pub fn rough_in_interval(x: u64, h: u64, y: u64) -> Result<u64> {
    if y < 2 {
        return Err(domain("y must be >= 2"));
    }
    if x.saturating_add(h) > MAX_COUNT_X {
        return Err(LabError::OutOfRange {
            what: "x + H",
            value: (x + h) as f64,
            limit: MAX_COUNT_X as f64,
        });
    }
    let primes = primes_up_to(y.min(x + h));
    Ok(par_count(x + 1, x + h + 1, |a, b| rough_in(a, b, &primes)))
}

/// Rankin's bound `Ψ(x, y) <= x^a ∏_{p<=y} (1 − p^{-a})^{-1}` with its exact slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankinCertificate {
    pub x: u64,
    pub y: u64,
    pub alpha: f64,
    pub bound: f64,
    pub log_bound: f64,
    pub psi: u64,
    pub slack: f64,
}

impl RankinCertificate {
    pub fn holds(&self) -> bool {
        self.slack >= 0.0
    }
}

/// `log(x^a ∏_{p<=y} (1 − p^{-a})^{-1})`.
pub fn rankin_log_bound(x: u64, y: u64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(domain(format!("Rankin exponent must be positive, got {alpha}")));
    }
    if y < 2 {
        return Err(domain("y must be >= 2"));
    }
    let primes = primes_up_to(y);
    let euler: Vec<f64> = primes.iter().map(|&p| -(-(p as f64).powf(-alpha)).ln_1p()).collect();
    Ok(alpha * (x as f64).ln() + crate::stats::pairwise_sum(&euler))
}

pub fn rankin_certificate(x: u64, y: u64, alpha: f64) -> Result<RankinCertificate> {
    let log_bound = rankin_log_bound(x, y, alpha)?;
    let psi = psi(x, y)?;
    let bound = log_bound.exp();
    Ok(RankinCertificate {
        x,
        y,
        alpha,
        bound,
        log_bound,
        psi,
        slack: bound - psi as f64,
    })
}

/// `Ψ(x, y) / (x (log y)^A e^{−c log x / log y})`, the constant implicit in
/// the Rankin-type upper bound for given `A`, `c`.
pub fn smooth_envelope_ratio(x: u64, y: u64, a: f64, c: f64) -> Result<f64> {
    let psi = psi(x, y)? as f64;
    let (lx, ly) = ((x as f64).ln(), (y as f64).ln());
    Ok(psi / ((x as f64) * ly.powf(a) * (-c * lx / ly).exp()))
}

/// The short-interval rough count normalized by `H / min(log y, log H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrunRatio {
    pub x: u64,
    pub h: u64,
    pub y: u64,
    pub count: u64,
    pub ratio: f64,
}

pub fn brun_ratio(x: u64, h: u64, y: u64) -> Result<BrunRatio> {
    if h < 2 {
        return Err(domain("H must be >= 2"));
    }
    let count = rough_in_interval(x, h, y)?;
    let scale = (y as f64).ln().min((h as f64).ln());
    Ok(BrunRatio {
        x,
        h,
        y,
        count,
        ratio: count as f64 * scale / h as f64,
    })
}

/// `Σ_{p<=y} 1/p` against `log log y + M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MertensCheck {
    pub y: u64,
    pub reciprocal_sum: f64,
    pub asymptotic: f64,
    pub difference: f64,
}

pub fn mertens_check(y: u64) -> Result<MertensCheck> {
    if y < 3 {
        return Err(domain("y must be >= 3"));
    }
    let recips: Vec<f64> = primes_up_to(y).iter().map(|&p| 1.0 / p as f64).collect();
    let reciprocal_sum = crate::stats::pairwise_sum(&recips);
    let asymptotic = (y as f64).ln().ln() + MEISSEL_MERTENS;
    Ok(MertensCheck {
        y,
        reciprocal_sum,
        asymptotic,
        difference: reciprocal_sum - asymptotic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_counts_by_hand() {
        // 1, 2, 4, 8
        assert_eq!(psi(10, 2).unwrap(), 4);
        // 1, 3, 5, 7, 9
        assert_eq!(phi(10, 2).unwrap(), 5);
        assert_eq!(psi(50, 50).unwrap(), 50);
        assert_eq!(phi(50, 50).unwrap(), 1);
        assert_eq!(psi(1, 2).unwrap(), 1);
        assert_eq!(phi(1, 2).unwrap(), 1);
    }

    #[test]
    fn errors() {
        assert!(psi(0, 2).is_err());
        assert!(psi(10, 1).is_err());
        assert!(matches!(psi(MAX_COUNT_X + 1, 2), Err(LabError::OutOfRange { .. })));
        assert!(rankin_certificate(100, 10, 0.0).is_err());
        assert!(rankin_certificate(100, 10, -0.5).is_err());
        assert!(brun_ratio(10, 1, 3).is_err());
    }

    #[test]
    fn rough_below_y_squared_are_primes() {
        // for y < x < y^2 a rough n > 1 has a single prime factor
        for (x, y) in [(100u64, 11u64), (500, 23), (1000, 37)] {
            let t = count_smooth(x, y).unwrap();
            let pi = |n: u64| primes_up_to(n).len() as u64;
            assert_eq!(t.phi, 1 + pi(x) - pi(y));
        }
    }

    #[test]
    fn rankin_at_alpha_one_with_y_equal_x() {
        let c = rankin_certificate(1000, 1000, 1.0).unwrap();
        assert_eq!(c.psi, 1000);
        assert!(c.holds());
    }

    #[test]
    fn interval_count_matches_difference() {
        let y = 13;
        let direct = phi(5000, y).unwrap() - phi(3000, y).unwrap();
        assert_eq!(rough_in_interval(3000, 2000, y).unwrap(), direct);
        // x = 0, H <= y counts rough integers in [1, H]: just n = 1
        assert_eq!(rough_in_interval(0, 10, 13).unwrap(), 1);
        assert_eq!(rough_in_interval(0, 100, 13).unwrap(), phi(100, 13).unwrap());
    }

    #[test]
    fn parity_ratio_for_y_two() {
        let r = brun_ratio(1_000_000, 100_000, 2).unwrap();
        assert_eq!(r.count, 50_000);
        assert!((r.ratio - 0.5 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mertens_diagnostic() {
        for y in [1_000u64, 10_000, 1_000_000] {
            let m = mertens_check(y).unwrap();
            assert!(m.difference.abs() <= 0.05, "{m:?}");
        }
    }
}
