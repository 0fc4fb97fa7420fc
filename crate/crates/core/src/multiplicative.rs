//! Sieve-backed tables of the Steinhaus multiplicative function and the
//! exact identities relating its full and smooth-restricted partial sums.

use std::sync::Arc;

use bitvec::prelude::*;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, LabError, Result};
use crate::phases::{PhaseAssignment, Seed};
use crate::sieve::LinearSieve;
use crate::stats::{pairwise_sum, pairwise_sum_complex, run_replicas, ComplexMeanEstimate, MeanEstimate};

/// Default memory cap for table construction (4 GiB).
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

/// Bytes per table entry: value + prefix (2 × 16) + spf (4).
const BYTES_PER_ENTRY: u64 = 36;

pub fn check_memory(what: &'static str, n: u64, bytes_per_entry: u64, cap: u64) -> Result<()> {
    let needed = n.saturating_mul(bytes_per_entry);
    if needed > cap {
        return Err(LabError::Resource {
            what,
            needed_bytes: needed,
            cap_bytes: cap,
        });
    }
    Ok(())
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, x: Complex64) {
        let step = |s: &mut f64, c: &mut f64, v: f64| {
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        };
        step(&mut self.sum.re, &mut self.comp.re, x.re);
        step(&mut self.sum.im, &mut self.comp.im, x.im);
    }

    #[inline]
    fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

/// `α(n)` for `1 <= n <= N` together with prefix sums `Σ_{k<=n} α(k)`.
#[derive(Debug, Clone)]
pub struct MultiplicativeTable {
    n: u32,
    sieve: Arc<LinearSieve>,
    values: Vec<Complex64>,
    prefix: Vec<Complex64>,
}

impl MultiplicativeTable {
    /// Builds the sieve and the table in one go.
    pub fn build(assignment: &PhaseAssignment, n: u32) -> Result<Self> {
        Self::build_capped(assignment, n, DEFAULT_MEMORY_CAP)
    }

    pub fn build_capped(assignment: &PhaseAssignment, n: u32, cap_bytes: u64) -> Result<Self> {
        if n == 0 {
            return Err(domain("table size N must be at least 1"));
        }
        check_memory("multiplicative table", n as u64 + 1, BYTES_PER_ENTRY, cap_bytes)?;
        let sieve = Arc::new(LinearSieve::new(n));
        Self::with_sieve(assignment, sieve, n)
    }

    /// Builds the table over an existing sieve (shared across replicas).
    pub fn with_sieve(assignment: &PhaseAssignment, sieve: Arc<LinearSieve>, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(domain("table size N must be at least 1"));
        }
        if sieve.limit() < n {
            return Err(LabError::OutOfRange {
                what: "table size",
                value: n as f64,
                limit: sieve.limit() as f64,
            });
        }
        let primes = &sieve.primes()[..sieve.prime_count(n as u64)];
        let alphas = assignment.alphas(primes);
        let values = fill_multiplicative(&sieve, n, &alphas);
        let mut prefix = Vec::with_capacity(n as usize + 1);
        let mut acc = CompensatedSum::default();
        prefix.push(Complex64::new(0.0, 0.0));
        for v in &values[1..] {
            acc.add(*v);
            prefix.push(acc.value());
        }
        Ok(MultiplicativeTable {
            n,
            sieve,
            values,
            prefix,
        })
    }

    pub fn len(&self) -> u32 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sieve(&self) -> &Arc<LinearSieve> {
        &self.sieve
    }

    /// `α(n)`; index 0 holds zero.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn alpha(&self, n: u32) -> Complex64 {
        self.values[n as usize]
    }

    /// `Σ_{k<=n} α(k)`.
    #[inline]
    pub fn prefix(&self, n: u32) -> Complex64 {
        self.prefix[n as usize]
    }

    pub fn prefix_sums(&self) -> &[Complex64] {
        &self.prefix
    }

    /// Prefix sums of `α(n)·1[n is y-smooth]` for `0..=min(N, mask length)`.
    pub fn smooth_prefix(&self, mask: &SmoothMask) -> Vec<Complex64> {
        self.smooth_prefix_upto(mask, self.n.min(mask.len()))
    }
}

/// `Σ_{n<=x} α(n)` at each of the ascending `points`, without keeping the
/// prefix table.
pub fn partial_sums_at(assignment: &PhaseAssignment, sieve: &LinearSieve, points: &[u32]) -> Result<Vec<Complex64>> {
    let Some(&n) = points.last() else {
        return Ok(Vec::new());
    };
    if points.windows(2).any(|w| w[0] > w[1]) || points[0] == 0 {
        return Err(precondition("points must be ascending and positive"));
    }
    if sieve.limit() < n {
        return Err(LabError::OutOfRange {
            what: "partial sum point",
            value: n as f64,
            limit: sieve.limit() as f64,
        });
    }
    let primes = &sieve.primes()[..sieve.prime_count(n as u64)];
    let values = fill_multiplicative(sieve, n, &assignment.alphas(primes));
    let mut out = Vec::with_capacity(points.len());
    let mut acc = CompensatedSum::default();
    let mut next = points.iter().peekable();
    for (k, v) in values.iter().enumerate().skip(1) {
        acc.add(*v);
        while next.next_if(|&&p| p as usize == k).is_some() {
            out.push(acc.value());
        }
    }
    Ok(out)
}

/// `values[n] = values[n / spf(n)] · values[spf(n)]`, so complete
/// multiplicativity holds by construction.
fn fill_multiplicative(sieve: &LinearSieve, n: u32, alphas: &[Complex64]) -> Vec<Complex64> {
    let n = n as usize;
    let spf = sieve.spf_table();
    let mut values = vec![Complex64::new(0.0, 0.0); n + 1];
    values[1] = Complex64::new(1.0, 0.0);
    let mut next_prime = 0usize;
    for k in 2..=n {
        let p = spf[k] as usize;
        values[k] = if p == k {
            let a = alphas[next_prime];
            next_prime += 1;
            a
        } else {
            values[k / p] * values[p]
        };
    }
    values
}

/// Which integers in `1..=N` are y-smooth (1 included).
#[derive(Debug, Clone)]
pub struct SmoothMask {
    y: u64,
    bits: BitVec,
}

impl SmoothMask {
    pub fn new(sieve: &LinearSieve, n: u32, y: u64) -> Result<Self> {
        if n > sieve.limit() {
            return Err(LabError::OutOfRange {
                what: "mask size",
                value: n as f64,
                limit: sieve.limit() as f64,
            });
        }
        let lpf = sieve.largest_prime_factors();
        let mut bits = bitvec![0; n as usize + 1];
        for (k, &l) in lpf.iter().enumerate().take(n as usize + 1).skip(1) {
            if l as u64 <= y {
                bits.set(k, true);
            }
        }
        Ok(SmoothMask { y, bits })
    }

    pub fn y(&self) -> u64 {
        self.y
    }

    pub fn len(&self) -> u32 {
        (self.bits.len() - 1) as u32
    }

    pub fn is_empty(&self) -> bool {
        self.bits.len() <= 1
    }

    #[inline]
    pub fn contains(&self, k: u32) -> bool {
        self.bits.get(k as usize).is_some_and(|b| *b)
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones()
    }
}

/// `n` has no prime factor `<= y` (1 qualifies).
pub fn is_rough(sieve: &LinearSieve, n: u32, y: u64) -> bool {
    n == 1 || sieve.spf(n) as u64 > y
}

/// A normalized partial sum `S_x` or `S_{x,y}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumRecord {
    pub x: f64,
    pub y: Option<u64>,
    pub value: Complex64,
    pub normalization: f64,
}

/// `S_x = x^{-1/2} Σ_{n<=x} α(n)`, or the y-smooth restriction when a mask is given.
pub fn partial_sum(table: &MultiplicativeTable, x: f64, mask: Option<&SmoothMask>) -> Result<SumRecord> {
    if !(x >= 1.0) {
        return Err(domain(format!("x must be >= 1, got {x}")));
    }
    if x > table.len() as f64 {
        return Err(LabError::OutOfRange {
            what: "x",
            value: x,
            limit: table.len() as f64,
        });
    }
    let k = x.floor() as u32;
    let normalization = 1.0 / x.sqrt();
    let raw = match mask {
        None => table.prefix(k),
        Some(m) => {
            if m.len() < k {
                return Err(LabError::OutOfRange {
                    what: "x (mask)",
                    value: x,
                    limit: m.len() as f64,
                });
            }
            let terms: Vec<Complex64> = (1..=k).filter(|&n| m.contains(n)).map(|n| table.alpha(n)).collect();
            pairwise_sum_complex(&terms)
        }
    };
    Ok(SumRecord {
        x,
        y: mask.map(|m| m.y()),
        value: raw * normalization,
        normalization,
    })
}

/// Monte Carlo estimate of `E[α(n) conj(α(m))]` over independent replicas.
pub fn check_orthogonality(n: u32, m: u32, replicas: u64, seed: Seed) -> Result<ComplexMeanEstimate> {
    let grid = orthogonality_grid(&[n], &[m], replicas, seed)?;
    Ok(grid[0])
}

/// `E[α(n) conj(α(m))]` for every pair in `ns × ms`, sharing replicas across pairs.
///
/// Results are row-major: index `i * ms.len() + j` holds the pair `(ns[i], ms[j])`.
pub fn orthogonality_grid(ns: &[u32], ms: &[u32], replicas: u64, seed: Seed) -> Result<Vec<ComplexMeanEstimate>> {
    if ns.iter().chain(ms).any(|&k| k == 0) {
        return Err(domain("arguments must be positive integers"));
    }
    if replicas < 2 {
        return Err(precondition("need at least two replicas"));
    }
    let top = ns.iter().chain(ms).copied().max().unwrap_or(1);
    let sieve = Arc::new(LinearSieve::new(top));
    let per_replica: Vec<Vec<Complex64>> = run_replicas(replicas, |i| {
        let a = PhaseAssignment::new(seed.child(i));
        let t = MultiplicativeTable::with_sieve(&a, Arc::clone(&sieve), top).expect("sieve covers table");
        ns.iter()
            .flat_map(|&n| ms.iter().map(move |&m| (n, m)))
            .map(|(n, m)| t.alpha(n) * t.alpha(m).conj())
            .collect()
    });
    let pairs = ns.len() * ms.len();
    Ok((0..pairs)
        .map(|j| {
            let col: Vec<Complex64> = per_replica.iter().map(|r| r[j]).collect();
            ComplexMeanEstimate::from_samples(&col)
        })
        .collect())
}

/// Estimate of `E[α(n) conj(α(m)) | F_y]` with the phases of primes `<= y` frozen.
pub fn check_conditional_orthogonality(
    n: u32,
    m: u32,
    y: u64,
    smooth_seed: Seed,
    rough_replicas: u64,
) -> Result<ComplexMeanEstimate> {
    if n == 0 || m == 0 {
        return Err(domain("arguments must be positive integers"));
    }
    if rough_replicas < 2 {
        return Err(precondition("need at least two replicas"));
    }
    let top = n.max(m);
    let sieve = Arc::new(LinearSieve::new(top));
    for k in [n, m] {
        if !is_rough(&sieve, k, y) {
            return Err(precondition(format!("{k} is not {y}-rough")));
        }
    }
    let samples = run_replicas(rough_replicas, |i| {
        let a = PhaseAssignment::conditioned(smooth_seed, y, smooth_seed.child(i));
        let t = MultiplicativeTable::with_sieve(&a, Arc::clone(&sieve), top).expect("sieve covers table");
        t.alpha(n) * t.alpha(m).conj()
    });
    Ok(ComplexMeanEstimate::from_samples(&samples))
}

/// Per-sample check of the smooth/rough splitting identity for `S_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingResidual {
    pub x: u32,
    pub y: u64,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    /// Number of rough `m <= x` (including 1) in the right-hand sum.
    pub terms: u64,
}

/// `|S_x − Σ_{m<=x, m y-rough} α(m) m^{-1/2} S_{x/m,y}|` for one realization.
pub fn check_splitting_identity(table: &MultiplicativeTable, x: u32, y: u64) -> Result<SplittingResidual> {
    if x == 0 || x > table.len() {
        return Err(LabError::OutOfRange {
            what: "x",
            value: x as f64,
            limit: table.len() as f64,
        });
    }
    if y < 2 {
        return Err(domain("y must be >= 2"));
    }
    let sieve = table.sieve();
    let mask = SmoothMask::new(sieve, x, y)?;
    let smooth = table.smooth_prefix_upto(&mask, x);
    let xf = x as f64;
    let lhs = table.prefix(x) / xf.sqrt();
    let terms: Vec<Complex64> = (1..=x)
        .filter(|&m| is_rough(sieve, m, y))
        .map(|m| {
            let mf = m as f64;
            let t = xf / mf;
            let s_ty = smooth[(x / m) as usize] / t.sqrt();
            table.alpha(m) / mf.sqrt() * s_ty
        })
        .collect();
    let rhs = pairwise_sum_complex(&terms);
    Ok(SplittingResidual {
        x,
        y,
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
        terms: terms.len() as u64,
    })
}

impl MultiplicativeTable {
    fn smooth_prefix_upto(&self, mask: &SmoothMask, x: u32) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(x as usize + 1);
        let mut acc = CompensatedSum::default();
        out.push(Complex64::new(0.0, 0.0));
        for k in 1..=x {
            if mask.contains(k) {
                acc.add(self.values[k as usize]);
            }
            out.push(acc.value());
        }
        out
    }
}

/// Result of the conditional second-moment check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSecondMoment {
    pub x: u32,
    pub y: u64,
    /// Monte Carlo estimate of `E[|S_x|^2 | F_y]` over rough replicas.
    pub lhs: MeanEstimate,
    /// `|S_{x,y}|^2 + Σ_{y<m<=x, m rough} m^{-1} |S_{x/m,y}|^2` from the frozen phases.
    pub rhs: f64,
    pub relative_error: f64,
}

/// The pieces of the conditional second moment, split at a parameter `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentSplit {
    pub smooth_term: f64,
    /// Rough `m` in `(y, T]`.
    pub t1: f64,
    /// Rough `m` in `(T, x]`.
    pub t2: f64,
}

impl SecondMomentSplit {
    pub fn total(&self) -> f64 {
        self.smooth_term + self.t1 + self.t2
    }
}

/// Frozen-phase data shared by the conditional second-moment routines.
struct FrozenSmooth {
    sieve: Arc<LinearSieve>,
    /// `Σ_{n<=k, n y-smooth} α(n)` for `k = 0..=x`.
    smooth: Vec<Complex64>,
    rough: Vec<u32>,
}

impl FrozenSmooth {
    fn new(x: u32, y: u64, smooth_seed: Seed) -> Result<Self> {
        if x == 0 {
            return Err(domain("x must be >= 1"));
        }
        if y < 2 {
            return Err(domain("y must be >= 2"));
        }
        let sieve = Arc::new(LinearSieve::new(x));
        let table = MultiplicativeTable::with_sieve(&PhaseAssignment::new(smooth_seed), Arc::clone(&sieve), x)?;
        let mask = SmoothMask::new(&sieve, x, y)?;
        let smooth = table.smooth_prefix_upto(&mask, x);
        let rough = (1..=x).filter(|&m| is_rough(&sieve, m, y)).collect();
        Ok(FrozenSmooth { sieve, smooth, rough })
    }

    fn split(&self, x: u32, y: u64, t_split: f64) -> SecondMomentSplit {
        let xf = x as f64;
        let smooth_term = self.smooth[x as usize].norm_sqr() / xf;
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for &m in &self.rough {
            if (m as u64) <= y {
                continue;
            }
            // m^{-1} |S_{x/m,y}|^2 = |P(⌊x/m⌋)|^2 / x
            let term = self.smooth[(x / m) as usize].norm_sqr() / xf;
            if (m as f64) <= t_split {
                t1.push(term);
            } else {
                t2.push(term);
            }
        }
        SecondMomentSplit {
            smooth_term,
            t1: pairwise_sum(&t1),
            t2: pairwise_sum(&t2),
        }
    }
}

/// Deterministic right-hand side of the conditional second-moment identity,
/// split at `t_split` (the proof uses `T = x^{3/4}`).
pub fn second_moment_split(x: u32, y: u64, t_split: f64, smooth_seed: Seed) -> Result<SecondMomentSplit> {
    Ok(FrozenSmooth::new(x, y, smooth_seed)?.split(x, y, t_split))
}

/// Nested Monte Carlo check of `E[|S_x|^2 | F_y]` against its closed form.
pub fn check_conditional_second_moment(
    x: u32,
    y: u64,
    smooth_seed: Seed,
    rough_replicas: u64,
) -> Result<ConditionalSecondMoment> {
    if rough_replicas < 2 {
        return Err(precondition("need at least two replicas"));
    }
    let frozen = FrozenSmooth::new(x, y, smooth_seed)?;
    let rhs = frozen.split(x, y, f64::INFINITY).total();

    let xf = x as f64;
    let primes = &frozen.sieve.primes()[..frozen.sieve.prime_count(x as u64)];
    let first_rough_prime = primes.partition_point(|&p| (p as u64) <= y);
    let samples = run_replicas(rough_replicas, |i| {
        let a = PhaseAssignment::conditioned(smooth_seed, y, smooth_seed.child(i));
        let alphas = a.alphas(primes);
        // α on rough m only: m / spf(m) is again rough.
        let mut dense = vec![Complex64::new(0.0, 0.0); x as usize + 1];
        let mut prime_cursor = first_rough_prime;
        let mut acc = CompensatedSum::default();
        for &m in &frozen.rough {
            let v = if m == 1 {
                Complex64::new(1.0, 0.0)
            } else {
                let p = frozen.sieve.spf(m);
                if p == m {
                    let v = alphas[prime_cursor];
                    prime_cursor += 1;
                    v
                } else {
                    dense[(m / p) as usize] * dense[p as usize]
                }
            };
            dense[m as usize] = v;
            acc.add(v * frozen.smooth[(x / m) as usize]);
        }
        acc.value().norm_sqr() / xf
    });
    let lhs = MeanEstimate::from_samples(&samples);
    Ok(ConditionalSecondMoment {
        x,
        y,
        lhs,
        rhs,
        relative_error: (lhs.mean - rhs).abs() / rhs,
    })
}
