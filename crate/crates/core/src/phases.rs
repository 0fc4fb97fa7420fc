//! Reproducible uniform phases `θ_p` for every prime.
//!
//! The phase of the prime with index `k` (2 has index 0) is the `k`-th 64-bit
//! output of a ChaCha8 stream keyed by `Seed::master` on stream number
//! `Seed::replica`. ChaCha is counter based, so a single phase can be
//! produced by seeking straight to its word position; the bulk path reads
//! the same words sequentially and yields bit-identical values.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::sieve::{is_prime_trial, prime_index};

/// Identifies one realization: a master key and a replica (stream) number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub master: u64,
    pub replica: u64,
}

impl Seed {
    pub const fn new(master: u64, replica: u64) -> Self {
        Seed { master, replica }
    }

    /// The `i`-th child seed, used for replica `i` of an experiment run under `self`.
    ///
    /// Children of distinct parents live under distinct master keys, so the
    /// whole tree of seeds maps onto distinct ChaCha (key, stream) pairs.
    pub fn child(&self, i: u64) -> Seed {
        Seed {
            master: splitmix64(self.master ^ splitmix64(self.replica.wrapping_add(0x5851_f42d_4c95_7f2d))),
            replica: i,
        }
    }

    /// The ChaCha8 stream keyed by `master` and numbered by `replica`.
    pub fn stream(&self) -> ChaCha8Rng {
        let mut state = self.master;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            chunk.copy_from_slice(&splitmix64(state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.replica);
        rng
    }
}

impl std::fmt::Display for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.master, self.replica)
    }
}

/// SplitMix64 finalizer.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn word_to_angle(w: u64) -> f64 {
    let u = (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let theta = TAU * u;
    if theta >= TAU {
        0.0
    } else {
        theta
    }
}

/// Phases for primes above `cutoff` come from a second, independent seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Conditioning {
    cutoff: u64,
    rough: Seed,
}

/// One realization of the Steinhaus phases `(θ_p)_p`.
///
/// Nothing is stored per prime: every phase is a pure function of the seed(s)
/// and the prime's index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseAssignment {
    seed: Seed,
    conditioning: Option<Conditioning>,
    overrides: Vec<(u64, f64)>,
}

impl PhaseAssignment {
    pub fn new(seed: Seed) -> Self {
        PhaseAssignment {
            seed,
            conditioning: None,
            overrides: Vec::new(),
        }
    }

    /// Primes `<= cutoff` take their phases from `smooth`, larger primes from `rough`.
    ///
    /// Holding `smooth` fixed and varying `rough` samples the phases
    /// conditionally on the sigma-algebra generated by the small primes.
    pub fn conditioned(smooth: Seed, cutoff: u64, rough: Seed) -> Self {
        PhaseAssignment {
            seed: smooth,
            conditioning: Some(Conditioning { cutoff, rough }),
            overrides: Vec::new(),
        }
    }

    /// Pins `θ_p` to a fixed angle (reduced into `[0, 2π)`).
    pub fn with_phase(mut self, p: u64, theta: f64) -> Result<Self> {
        if !is_prime_trial(p) {
            return Err(domain(format!("{p} is not prime")));
        }
        let theta = theta.rem_euclid(TAU);
        self.overrides.retain(|(q, _)| *q != p);
        self.overrides.push((p, theta));
        Ok(self)
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    fn seed_for(&self, p: u64) -> Seed {
        match self.conditioning {
            Some(c) if p > c.cutoff => c.rough,
            _ => self.seed,
        }
    }

    fn override_for(&self, p: u64) -> Option<f64> {
        self.overrides.iter().find(|(q, _)| *q == p).map(|&(_, t)| t)
    }

    /// `θ_p ∈ [0, 2π)`.
    pub fn phase(&self, p: u64) -> Result<f64> {
        let index = prime_index(p)?;
        Ok(self.phase_by_index(p, index))
    }

    /// `α(p) = exp(iθ_p)`.
    pub fn alpha_at_prime(&self, p: u64) -> Result<Complex64> {
        self.phase(p).map(|t| Complex64::from_polar(1.0, t))
    }

    fn phase_by_index(&self, p: u64, index: usize) -> f64 {
        if let Some(t) = self.override_for(p) {
            return t;
        }
        let mut rng = self.seed_for(p).stream();
        rng.set_word_pos(2 * index as u128);
        word_to_angle(rng.next_u64())
    }

    /// Phases of an initial segment of the prime sequence, `primes = [2, 3, 5, ...]`.
    pub fn thetas(&self, primes: &[u32]) -> Vec<f64> {
        debug_assert!(primes.first().is_none_or(|&p| p == 2));
        let mut out = Vec::with_capacity(primes.len());
        let mut rng = self.seed.stream();
        let split = match self.conditioning {
            Some(c) => primes.partition_point(|&p| (p as u64) <= c.cutoff),
            None => primes.len(),
        };
        out.extend((0..split).map(|_| word_to_angle(rng.next_u64())));
        if let Some(c) = self.conditioning {
            let mut rough = c.rough.stream();
            rough.set_word_pos(2 * split as u128);
            out.extend((split..primes.len()).map(|_| word_to_angle(rough.next_u64())));
        }
        for &(p, t) in &self.overrides {
            if let Ok(i) = primes.binary_search(&(p as u32)) {
                out[i] = t;
            }
        }
        out
    }

    /// `α(p)` for an initial segment of the prime sequence.
    pub fn alphas(&self, primes: &[u32]) -> Vec<Complex64> {
        self.thetas(primes)
            .into_iter()
            .map(|t| Complex64::from_polar(1.0, t))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::primes_up_to;

    #[test]
    fn deterministic_and_in_range() {
        let a = PhaseAssignment::new(Seed::new(42, 0));
        let t1 = a.phase(2).unwrap();
        let t2 = a.phase(2).unwrap();
        assert_eq!(t1.to_bits(), t2.to_bits());
        assert!((0.0..TAU).contains(&t1));
    }

    #[test]
    fn non_prime_is_domain_error() {
        let a = PhaseAssignment::new(Seed::new(1, 1));
        assert!(a.phase(1).is_err());
        assert!(a.phase(9).is_err());
        assert!(a.alpha_at_prime(0).is_err());
        assert!(a.clone().with_phase(15, 0.0).is_err());
    }

    #[test]
    fn bulk_matches_random_access() {
        let primes = primes_up_to(2000);
        let a = PhaseAssignment::new(Seed::new(7, 3));
        let bulk = a.thetas(&primes);
        for (i, &p) in primes.iter().enumerate() {
            assert_eq!(bulk[i].to_bits(), a.phase(p as u64).unwrap().to_bits());
        }
    }

    #[test]
    fn conditioned_bulk_matches_random_access() {
        let primes = primes_up_to(500);
        let a = PhaseAssignment::conditioned(Seed::new(1, 2), 31, Seed::new(3, 4));
        let plain_smooth = PhaseAssignment::new(Seed::new(1, 2));
        let plain_rough = PhaseAssignment::new(Seed::new(3, 4));
        let bulk = a.thetas(&primes);
        for (i, &p) in primes.iter().enumerate() {
            let expect = if p <= 31 {
                plain_smooth.phase(p as u64).unwrap()
            } else {
                plain_rough.phase(p as u64).unwrap()
            };
            assert_eq!(bulk[i].to_bits(), expect.to_bits());
            assert_eq!(a.phase(p as u64).unwrap().to_bits(), expect.to_bits());
        }
    }

    #[test]
    fn overrides_apply_everywhere() {
        let a = PhaseAssignment::new(Seed::new(5, 5)).with_phase(3, 7.0).unwrap();
        let primes = primes_up_to(10);
        let t = a.thetas(&primes);
        assert!((t[1] - (7.0 - TAU)).abs() < 1e-15);
        assert_eq!(a.phase(3).unwrap(), t[1]);
        assert_ne!(t[0], t[1]);
    }

    #[test]
    fn unit_modulus() {
        let a = PhaseAssignment::new(Seed::new(9, 0));
        for &p in &primes_up_to(1000) {
            let z = a.alpha_at_prime(p as u64).unwrap();
            assert!((z.norm() - 1.0).abs() <= 1e-15);
            assert!(((z * z.conj()).re - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn children_are_distinct() {
        let s = Seed::new(1, 0);
        assert_ne!(s.child(0), s.child(1));
        assert_ne!(s.child(0), Seed::new(1, 1).child(0));
        assert_eq!(s.child(4), s.child(4));
    }
}
