//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use num_complex::Complex64;
use steinhaus_core::PhaseAssignment;

pub fn trial_primes(limit: u64) -> Vec<u64> {
    (2..=limit)
        .filter(|&n| (2..).take_while(|d| d * d <= n).all(|d| n % d != 0))
        .collect()
}

/// `Ψ(x, p_k)` via `Ψ(x, y) = 1 + Σ_{p<=y} Ψ(x/p, p)`, classifying `n > 1`
/// by its largest prime factor.
pub struct Buchstab {
    primes: Vec<u64>,
    memo: HashMap<(u64, usize), u64>,
}

impl Buchstab {
    pub fn new(max_y: u64) -> Self {
        Buchstab {
            primes: trial_primes(max_y),
            memo: HashMap::new(),
        }
    }

    pub fn psi(&mut self, x: u64, y: u64) -> u64 {
        let k = self.primes.partition_point(|&p| p <= y);
        self.psi_k(x, k)
    }

    /// Smooth over the first `k` primes.
    fn psi_k(&mut self, x: u64, k: usize) -> u64 {
        if x == 0 {
            return 0;
        }
        if k == 0 || x == 1 {
            return 1;
        }
        if self.primes[k - 1] >= x {
            return x;
        }
        if k == 1 {
            return 64 - x.leading_zeros() as u64;
        }
        if let Some(&v) = self.memo.get(&(x, k)) {
            return v;
        }
        let mut total = 1;
        for j in 0..k {
            let p = self.primes[j];
            if p > x {
                break;
            }
            total += self.psi_k(x / p, j + 1);
        }
        self.memo.insert((x, k), total);
        total
    }
}

/// `Φ(x, y) = Σ_{d | ∏_{p<=y} p} μ(d) ⌊x/d⌋`.
pub fn legendre_phi(x: u64, y: u64) -> u64 {
    let ps = trial_primes(y);
    let mut total: i64 = 0;
    for mask in 0u32..(1 << ps.len()) {
        let mut d = 1u64;
        for (i, &p) in ps.iter().enumerate() {
            if mask >> i & 1 == 1 {
                d *= p;
            }
        }
        let sign = if mask.count_ones() % 2 == 0 { 1 } else { -1 };
        total += sign * (x / d) as i64;
    }
    total as u64
}

pub fn trial_factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        let mut e = 0;
        while n.is_multiple_of(d) {
            n /= d;
            e += 1;
        }
        if e > 0 {
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// `α(n)` from the trial-division factorization and per-prime phases.
pub fn alpha_by_trial_division(a: &PhaseAssignment, n: u64) -> Complex64 {
    trial_factorize(n)
        .into_iter()
        .map(|(p, e)| a.alpha_at_prime(p).unwrap().powu(e))
        .product()
}

/// Upper-tail 0.1% point of the chi-square distribution with 31 degrees of freedom.
pub const CHI2_31_999: f64 = 61.098;

#[derive(serde::Deserialize)]
pub struct Envelopes {
    pub brun: BrunFixture,
    pub covariance_gap: CovFixture,
}

#[derive(serde::Deserialize)]
pub struct BrunFixture {
    pub envelope: f64,
    pub counts: Vec<BrunCount>,
}

#[derive(serde::Deserialize)]
pub struct BrunCount {
    pub x: u64,
    pub h: u64,
    pub y: u64,
    pub count: u64,
}

#[derive(serde::Deserialize)]
pub struct CovFixture {
    pub envelope: f64,
    pub dense_sup: HashMap<String, f64>,
}

pub fn envelopes() -> Envelopes {
    let text = include_str!("../fixtures/envelopes.json");
    serde_json::from_str(text).unwrap()
}
