//! Prime sieves shared by every other module.
//!
//! [`LinearSieve`] stores the smallest prime factor of every integer up to a
//! limit (O(N) time, each composite is crossed out exactly once by its
//! smallest prime factor). [`primes_up_to`] is a plain odd-only
//! Eratosthenes sieve for when only the primes themselves are needed, and
//! [`prime_index`] resolves a prime's position in the ordered prime sequence
//! through a process-wide cache that grows on demand.

use std::sync::{Arc, OnceLock, RwLock};

use bitvec::prelude::*;

use crate::error::{domain, LabError, Result};

/// Largest prime whose index the shared cache will resolve.
pub const PRIME_INDEX_CAP: u64 = 1 << 31;

/// Smallest-prime-factor table for `0..=limit`.
#[derive(Debug, Clone)]
pub struct LinearSieve {
    limit: u32,
    spf: Vec<u32>,
    primes: Vec<u32>,
}

impl LinearSieve {
    pub fn new(limit: u32) -> Self {
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes: Vec<u32> = Vec::new();
        if n >= 1 {
            spf[1] = 1;
        }
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                if p > si {
                    break;
                }
                let m = i * p as usize;
                if m > n {
                    break;
                }
                spf[m] = p;
            }
        }
        LinearSieve { limit, spf, primes }
    }

    #[inline]
    pub fn limit(&self) -> u32 {
        self.limit
    }

    /// Smallest prime factor of `n` (with `spf(1) = 1`).
    #[inline]
    pub fn spf(&self, n: u32) -> u32 {
        self.spf[n as usize]
    }

    #[inline]
    pub fn spf_table(&self) -> &[u32] {
        &self.spf
    }

    #[inline]
    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    #[inline]
    pub fn is_prime(&self, n: u32) -> bool {
        n >= 2 && self.spf[n as usize] == n
    }

    /// Number of primes `<= x` (clamped to the sieve limit).
    pub fn prime_count(&self, x: u64) -> usize {
        let x = x.min(self.limit as u64) as u32;
        self.primes.partition_point(|&p| p <= x)
    }

    /// Zero-based position of `p` in the prime sequence, if `p` is prime.
    pub fn index_of(&self, p: u32) -> Option<usize> {
        self.primes.binary_search(&p).ok()
    }

    /// Largest prime factor of every `n <= limit` (`lpf(1) = 1`, `lpf(0) = 0`).
    pub fn largest_prime_factors(&self) -> Vec<u32> {
        let n = self.limit as usize;
        let mut lpf = vec![0u32; n + 1];
        if n >= 1 {
            lpf[1] = 1;
        }
        for i in 2..=n {
            let p = self.spf[i];
            lpf[i] = p.max(lpf[i / p as usize]);
        }
        lpf
    }

    /// Prime factorization of `n` as `(prime, exponent)` pairs in increasing order.
    pub fn factorize(&self, mut n: u32) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = Vec::new();
        while n > 1 {
            let p = self.spf[n as usize];
            match out.last_mut() {
                Some((q, e)) if *q == p => *e += 1,
                _ => out.push((p, 1)),
            }
            n /= p;
        }
        out
    }
}

/// All primes `<= n`, via an odd-only sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u32> {
    assert!(n <= u32::MAX as u64, "primes_up_to: limit {n} exceeds u32");
    if n < 2 {
        return Vec::new();
    }
    // bit i <-> odd number 2i + 1
    let half = (n as usize - 1) / 2 + 1;
    let mut composite = bitvec![0; half];
    composite.set(0, true);
    let mut i = 1usize;
    while (2 * i + 1) * (2 * i + 1) <= n as usize {
        if !composite[i] {
            let p = 2 * i + 1;
            let mut j = (p * p) / 2;
            while j < half {
                composite.set(j, true);
                j += p;
            }
        }
        i += 1;
    }
    let mut primes = Vec::with_capacity(estimate_prime_count(n));
    primes.push(2);
    primes.extend(composite.iter_zeros().map(|i| (2 * i + 1) as u32));
    primes
}

fn estimate_prime_count(n: u64) -> usize {
    let x = n as f64;
    if x < 17.0 {
        8
    } else {
        (1.26 * x / x.ln()) as usize
    }
}

struct PrimeCache {
    covered: u64,
    primes: Arc<Vec<u32>>,
}

fn cache() -> &'static RwLock<PrimeCache> {
    static CACHE: OnceLock<RwLock<PrimeCache>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let covered = 1 << 16;
        RwLock::new(PrimeCache {
            covered,
            primes: Arc::new(primes_up_to(covered)),
        })
    })
}

/// Shared list of all primes `<= n` (possibly longer), growing the cache as needed.
pub fn shared_primes(n: u64) -> Result<Arc<Vec<u32>>> {
    if n > PRIME_INDEX_CAP {
        return Err(LabError::OutOfRange {
            what: "prime bound",
            value: n as f64,
            limit: PRIME_INDEX_CAP as f64,
        });
    }
    {
        let guard = cache().read().expect("prime cache poisoned");
        if guard.covered >= n {
            return Ok(Arc::clone(&guard.primes));
        }
    }
    let mut guard = cache().write().expect("prime cache poisoned");
    if guard.covered < n {
        let mut target = guard.covered;
        while target < n {
            target = target.saturating_mul(2);
        }
        let target = target.min(PRIME_INDEX_CAP);
        guard.primes = Arc::new(primes_up_to(target));
        guard.covered = target;
    }
    Ok(Arc::clone(&guard.primes))
}

/// Position of the prime `p` in the ordered prime sequence (2 has index 0).
pub fn prime_index(p: u64) -> Result<usize> {
    let primes = shared_primes(p)?;
    if p > u32::MAX as u64 {
        return Err(domain(format!("{p} is beyond the prime index range")));
    }
    primes
        .binary_search(&(p as u32))
        .map_err(|_| domain(format!("{p} is not prime")))
}

/// Trial-division primality test, independent of every sieve.
pub fn is_prime_trial(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}
