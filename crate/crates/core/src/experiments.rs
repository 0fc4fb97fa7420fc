//! The headline experiments: decay of `E|S_x|^{2q}` in `x`, the budget
//! `E|S_x|^{2q}` against `E[I_y^q]` plus the smooth remainder, and the
//! normalized moments `E[I_y^q] (log log y)^{q/2}`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Result};
use crate::euler::{dual_integral, integral_functional, IntegralOptions};
use crate::multiplicative::{check_memory, partial_sums_at, DEFAULT_MEMORY_CAP};
use crate::output::{Format, MomentEstimate};
use crate::phases::{PhaseAssignment, Seed};
use crate::sieve::LinearSieve;
use crate::stats::{run_replicas, MeanEstimate, MedianOfMeans};

/// How `y` is chosen from `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum YRule {
    /// `log y = log x / (log log x)^2`.
    LogOverLogLogSquared,
    Fixed {
        y: u64,
    },
    /// `y = x^exponent`.
    Power {
        exponent: f64,
    },
}

impl YRule {
    /// `⌊y(x)⌋`, never below 2.
    pub fn y_for(&self, x: u64) -> u64 {
        let xf = x as f64;
        let y = match *self {
            YRule::LogOverLogLogSquared => {
                let ll = xf.ln().ln();
                (xf.ln() / (ll * ll)).exp()
            }
            YRule::Fixed { y } => y as f64,
            YRule::Power { exponent } => xf.powf(exponent),
        };
        (y.floor() as u64).max(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub x_grid: Vec<u64>,
    /// Heights for the `I_y` experiment.
    pub y_grid: Vec<u64>,
    pub y_rule: YRule,
    pub q_list: Vec<f64>,
    pub delta: f64,
    pub replicas: u64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    /// Split point `T = x^t_exponent` for the second-moment diagnostics.
    pub t_exponent: f64,
    /// Exponent `C` of `log y` in the smooth remainder.
    pub remainder_log_power: f64,
    /// Rate `c` in `e^{−c log x / log y}`.
    pub remainder_rate: f64,
    /// Doubling tolerance for the `I_y` quadrature.
    pub integral_eps: f64,
    pub memory_cap: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: "moment-decay".into(),
            x_grid: vec![1_000, 10_000, 100_000, 1_000_000],
            y_grid: vec![100, 1_000, 10_000],
            y_rule: YRule::LogOverLogLogSquared,
            q_list: vec![0.0, 0.25, 0.5, 0.75],
            delta: 0.1,
            replicas: 1_000,
            seed: 1,
            output: None,
            format: Format::Csv,
            t_exponent: 0.75,
            remainder_log_power: 1.0,
            remainder_rate: 1.0,
            integral_eps: 1e-2,
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }
}

fn strictly_ascending(v: &[u64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(domain(format!("δ must lie in (0, 1), got {}", self.delta)));
        }
        if let Some(q) = self.q_list.iter().find(|&&q| !(0.0..=1.0 - self.delta).contains(&q)) {
            return Err(domain(format!("q = {q} outside [0, 1 − δ]")));
        }
        if !strictly_ascending(&self.x_grid) || !strictly_ascending(&self.y_grid) {
            return Err(precondition("x and y grids must be strictly ascending"));
        }
        if self.x_grid.first().is_some_and(|&x| x < 3) {
            return Err(domain("x must be >= 3"));
        }
        if self.replicas < 100 {
            return Err(precondition(format!("replicas must be >= 100, got {}", self.replicas)));
        }
        if !(self.integral_eps > 0.0) {
            return Err(domain("integral_eps must be positive"));
        }
        Ok(())
    }

    pub fn root_seed(&self) -> Seed {
        Seed::new(self.seed, 0)
    }

    fn x_max(&self) -> Result<u32> {
        let x = *self.x_grid.last().ok_or_else(|| precondition("x grid is empty"))?;
        u32::try_from(x).map_err(|_| domain(format!("x = {x} exceeds the table range")))
    }
}

/// Quantity tags used in emitted records.
pub mod tags {
    pub const S_MOMENT: &str = "S_x^2q";
    pub const S_SECOND: &str = "S_x^2";
    pub const I_MOMENT: &str = "I_y^q";
    pub const I_NORMALIZED: &str = "I_y^q_loglog";
    pub const REMAINDER: &str = "remainder";
    pub const RATIO: &str = "budget_ratio";
}

/// `|S_x|` at every grid point, one vector per replica.
fn sample_abs_s(cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    let x_max = cfg.x_max()?;
    // spf table plus one value table per concurrent replica
    check_memory("moment-decay tables", x_max as u64, 20, cfg.memory_cap)?;
    let sieve = LinearSieve::new(x_max);
    let points: Vec<u32> = cfg.x_grid.iter().map(|&x| x as u32).collect();
    let seed = cfg.root_seed();
    run_replicas(cfg.replicas, |i| {
        let sums = partial_sums_at(&PhaseAssignment::new(seed.child(i)), &sieve, &points)?;
        Ok(sums
            .iter()
            .zip(&cfg.x_grid)
            .map(|(s, &x)| s.norm() / (x as f64).sqrt())
            .collect())
    })
    .into_iter()
    .collect()
}

fn moment_of(samples: &[f64], q: f64) -> MeanEstimate {
    let v: Vec<f64> = samples.iter().map(|s| s.powf(2.0 * q)).collect();
    MeanEstimate::from_samples(&v)
}

/// `E|S_x|^{2q}` for every `x` in the grid and `q` in the list, plus the
/// second moment `E|S_x|^2` (tag [`tags::S_SECOND`], `q = 1`) as calibration.
pub fn run_moment_decay(cfg: &ExperimentConfig) -> Result<Vec<MomentEstimate>> {
    cfg.validate()?;
    let abs = sample_abs_s(cfg)?;
    let seed = cfg.root_seed();
    let mut out = Vec::new();
    for (k, &x) in cfg.x_grid.iter().enumerate() {
        let column: Vec<f64> = abs.iter().map(|r| r[k]).collect();
        for &q in &cfg.q_list {
            out.push(MomentEstimate::from_mean(
                tags::S_MOMENT,
                x,
                q,
                &moment_of(&column, q),
                seed,
            ));
        }
        out.push(MomentEstimate::from_mean(
            tags::S_SECOND,
            x,
            1.0,
            &moment_of(&column, 1.0),
            seed,
        ));
    }
    Ok(out)
}

/// One `(x, q)` row of the inequality budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaBudget {
    pub x: u64,
    pub y: u64,
    pub q: f64,
    pub lhs: MeanEstimate,
    pub rhs_integral: MeanEstimate,
    pub rhs_remainder: f64,
    /// `lhs / (rhs_integral + rhs_remainder)`.
    pub ratio: f64,
    /// Ratio bounds from the endpoints of the two 95% intervals.
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    /// Replicas whose quadrature missed the tail criterion.
    pub unconverged: u64,
}

/// `((log y)^C e^{−c log x / log y})^q`.
pub fn smooth_remainder(x: u64, y: u64, big_c: f64, c: f64, q: f64) -> f64 {
    let (lx, ly) = ((x as f64).ln(), (y as f64).ln());
    (ly.powf(big_c) * (-c * lx / ly).exp()).powf(q)
}

/// The inequality budget at every `x` of the grid with `y` from the rule.
///
/// `S_x` and `I_y` are computed on the same realization of `α`.
pub fn run_lemma_budget(cfg: &ExperimentConfig) -> Result<Vec<LemmaBudget>> {
    cfg.validate()?;
    let ys: Vec<u64> = cfg.x_grid.iter().map(|&x| cfg.y_rule.y_for(x)).collect();
    for (&x, &y) in cfg.x_grid.iter().zip(&ys) {
        if y < 2 || (y as f64) > (x as f64).sqrt() {
            return Err(precondition(format!("y = {y} outside [2, √x] for x = {x}")));
        }
    }
    let abs = sample_abs_s(cfg)?;
    let mut distinct = ys.clone();
    distinct.dedup();
    let seed = cfg.root_seed();
    let opts = IntegralOptions {
        eps: cfg.integral_eps,
        ..IntegralOptions::default()
    };
    let integrals: Vec<Vec<(f64, bool)>> = run_replicas(cfg.replicas, |i| {
        let a = PhaseAssignment::new(seed.child(i));
        distinct
            .iter()
            .map(|&y| integral_functional(&a, y, opts).map(|r| (r.value, r.converged)))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (k, (&x, &y)) in cfg.x_grid.iter().zip(&ys).enumerate() {
        let j = distinct.iter().position(|&v| v == y).expect("y listed");
        let column: Vec<f64> = abs.iter().map(|r| r[k]).collect();
        let iy: Vec<f64> = integrals.iter().map(|r| r[j].0).collect();
        let unconverged = integrals.iter().filter(|r| !r[j].1).count() as u64;
        for &q in &cfg.q_list {
            let lhs = moment_of(&column, q);
            let rhs_integral = MeanEstimate::from_samples(&iy.iter().map(|v| v.powf(q)).collect::<Vec<_>>());
            let rem = smooth_remainder(x, y, cfg.remainder_log_power, cfg.remainder_rate, q);
            let (l_lo, l_hi) = ci_or_point(&lhs);
            let (r_lo, r_hi) = ci_or_point(&rhs_integral);
            out.push(LemmaBudget {
                x,
                y,
                q,
                lhs,
                rhs_integral,
                rhs_remainder: rem,
                ratio: lhs.mean / (rhs_integral.mean + rem),
                ratio_lo: l_lo.max(0.0) / (r_hi + rem),
                ratio_hi: l_hi / (r_lo.max(0.0) + rem),
                unconverged,
            });
        }
    }
    Ok(out)
}

fn ci_or_point(e: &MeanEstimate) -> (f64, f64) {
    if e.stderr.is_finite() {
        e.ci95()
    } else {
        (e.mean, e.mean)
    }
}

impl LemmaBudget {
    pub fn records(&self, seed: Seed) -> Vec<MomentEstimate> {
        vec![
            MomentEstimate::from_mean(tags::S_MOMENT, self.x, self.q, &self.lhs, seed),
            MomentEstimate::from_mean(tags::I_MOMENT, self.y, self.q, &self.rhs_integral, seed),
            MomentEstimate::exact(tags::REMAINDER, self.x, self.q, self.rhs_remainder, seed),
            MomentEstimate {
                quantity: tags::RATIO.into(),
                x_or_y: self.x,
                q: self.q,
                estimate: self.ratio,
                ci_lo: self.ratio_lo.min(self.ratio),
                ci_hi: self.ratio_hi.max(self.ratio),
                replicas: self.lhs.n,
                seed,
            },
        ]
    }
}

/// `E[I_y^q]` and its normalization at one `(y, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma13Row {
    pub y: u64,
    pub q: f64,
    pub moment: MomentEstimate,
    /// `moment · (log log y)^{q/2}`.
    pub normalized: MomentEstimate,
    pub unconverged: u64,
}

/// Batches for the median-of-means used when `q >= 3/4`.
pub const HEAVY_TAIL_BATCHES: usize = 10;

fn moment_record(quantity: &str, y: u64, q: f64, samples: &[f64], seed: Seed) -> Result<MomentEstimate> {
    let powered: Vec<f64> = samples.iter().map(|v| v.powf(q)).collect();
    if q >= 0.75 {
        let m = MedianOfMeans::from_samples(&powered, HEAVY_TAIL_BATCHES)?;
        Ok(MomentEstimate::from_median(
            quantity,
            y,
            q,
            &m,
            samples.len() as u64,
            seed,
        ))
    } else {
        Ok(MomentEstimate::from_mean(
            quantity,
            y,
            q,
            &MeanEstimate::from_samples(&powered),
            seed,
        ))
    }
}

/// Samples of `I_y` by quadrature, with the number of unconverged replicas.
pub fn sample_integrals(y: u64, replicas: u64, seed: Seed, eps: f64) -> Result<(Vec<f64>, u64)> {
    let opts = IntegralOptions {
        eps,
        ..IntegralOptions::default()
    };
    let rs = run_replicas(replicas, |i| {
        integral_functional(&PhaseAssignment::new(seed.child(i)), y, opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let unconverged = rs.iter().filter(|r| !r.converged).count() as u64;
    Ok((rs.iter().map(|r| r.value).collect(), unconverged))
}

pub fn run_lemma13(cfg: &ExperimentConfig) -> Result<Vec<Lemma13Row>> {
    cfg.validate()?;
    if cfg.y_grid.is_empty() {
        return Err(precondition("y grid is empty"));
    }
    let seed = cfg.root_seed();
    let mut out = Vec::new();
    for &y in &cfg.y_grid {
        if y < 3 {
            return Err(domain("y must be >= 3"));
        }
        let (samples, unconverged) = sample_integrals(y, cfg.replicas, seed, cfg.integral_eps)?;
        let scale_base = (y as f64).ln().ln();
        for &q in &cfg.q_list {
            let moment = moment_record(tags::I_MOMENT, y, q, &samples, seed)?;
            let s = scale_base.powf(q / 2.0);
            let normalized = MomentEstimate {
                quantity: tags::I_NORMALIZED.into(),
                estimate: moment.estimate * s,
                ci_lo: moment.ci_lo * s,
                ci_hi: moment.ci_hi * s,
                ..moment.clone()
            };
            out.push(Lemma13Row {
                y,
                q,
                moment,
                normalized,
                unconverged,
            });
        }
    }
    Ok(out)
}

/// `E[I_y^q]` by quadrature and by the truncated prefix-sum form, on the same realizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualConsistency {
    pub y: u64,
    pub q: f64,
    pub quadrature: MeanEstimate,
    pub dual: MeanEstimate,
    pub relative_difference: f64,
}

pub fn lemma13_dual_consistency(
    y: u64,
    q: f64,
    replicas: u64,
    seed: Seed,
    n_trunc: u64,
    eps: f64,
) -> Result<DualConsistency> {
    let (quad, _) = sample_integrals(y, replicas, seed, eps)?;
    let dual = run_replicas(replicas, |i| {
        dual_integral(&PhaseAssignment::new(seed.child(i)), y, n_trunc)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let pw = |v: &[f64]| MeanEstimate::from_samples(&v.iter().map(|s| s.powf(q)).collect::<Vec<_>>());
    let (a, b) = (pw(&quad), pw(&dual));
    Ok(DualConsistency {
        y,
        q,
        quadrature: a,
        dual: b,
        relative_difference: (a.mean - b.mean).abs() / a.mean,
    })
}

/// Shape of a moment curve over the x-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub strictly_decreasing: bool,
    pub endpoints_disjoint: bool,
    /// Least-squares slope of `log E` against `log log log x`.
    pub slope: f64,
    pub rss_constant: f64,
    pub rss_fit: f64,
}

impl TrendReport {
    pub fn passes(&self) -> bool {
        self.strictly_decreasing && self.endpoints_disjoint && self.slope < 0.0 && self.rss_fit < self.rss_constant
    }
}

/// Trend of the `tag` records at moment order `q`, ordered by `x_or_y`.
pub fn decay_trend(records: &[MomentEstimate], tag: &str, q: f64) -> Result<TrendReport> {
    let mut rows: Vec<&MomentEstimate> = records.iter().filter(|r| r.quantity == tag && r.q == q).collect();
    rows.sort_by_key(|r| r.x_or_y);
    if rows.len() < 3 {
        return Err(precondition("trend needs at least three grid points"));
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.x_or_y as f64).ln().ln().ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.estimate.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss_constant = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let rss_fit = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (my + slope * (x - mx));
            r * r
        })
        .sum();
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    Ok(TrendReport {
        strictly_decreasing: rows.windows(2).all(|w| w[1].estimate < w[0].estimate),
        endpoints_disjoint: last.ci_hi < first.ci_lo,
        slope,
        rss_constant,
        rss_fit,
    })
}

/// `max / min` of the estimates.
pub fn band_ratio(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn half_width(r: &MomentEstimate) -> f64 {
    (r.ci_hi - r.ci_lo) / 2.0
}

/// Violations of the sanity invariants of a moment-decay table:
/// `q = 0` rows equal 1, the second moment matches `⌊x⌋/x` within 3σ,
/// Hölder's `E|S|^{2q} <= (E|S|^2)^q`, and log-convexity in `q`.
pub fn moment_table_violations(records: &[MomentEstimate]) -> Vec<String> {
    let mut bad = Vec::new();
    let sd = |r: &MomentEstimate| half_width(r) / crate::stats::Z95;
    let mut xs: Vec<u64> = records.iter().map(|r| r.x_or_y).collect();
    xs.sort_unstable();
    xs.dedup();
    for x in xs {
        let second = records.iter().find(|r| r.x_or_y == x && r.quantity == tags::S_SECOND);
        let mut rows: Vec<&MomentEstimate> = records
            .iter()
            .filter(|r| r.x_or_y == x && r.quantity == tags::S_MOMENT)
            .collect();
        rows.sort_by(|a, b| a.q.total_cmp(&b.q));
        if let Some(s) = second {
            if (s.estimate - 1.0).abs() > 3.0 * sd(s) {
                bad.push(format!(
                    "x = {x}: E|S_x|^2 = {} is not within 3σ of ⌊x⌋/x = 1",
                    s.estimate
                ));
            }
            for r in &rows {
                let bound = s.estimate.powf(r.q) + 4.0 * (sd(r) + r.q * sd(s));
                if r.estimate > bound {
                    bad.push(format!("x = {x}, q = {}: Hölder bound violated", r.q));
                }
            }
        }
        for r in rows.iter().filter(|r| r.q == 0.0) {
            if r.estimate != 1.0 {
                bad.push(format!("x = {x}: q = 0 moment is {}", r.estimate));
            }
        }
        for w in rows.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let lam = (c.q - b.q) / (c.q - a.q);
            let rel = |r: &MomentEstimate| sd(r) / r.estimate;
            let slack = 4.0 * (rel(b) + lam * rel(a) + (1.0 - lam) * rel(c));
            if b.estimate.ln() > lam * a.estimate.ln() + (1.0 - lam) * c.estimate.ln() + slack {
                bad.push(format!("x = {x}: log-convexity in q violated at q = {}", b.q));
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rule_values() {
        let r = YRule::LogOverLogLogSquared;
        assert_eq!(r.y_for(1_000_000), 7);
        assert_eq!(r.y_for(10_000), 6);
        assert_eq!(YRule::Fixed { y: 31 }.y_for(5), 31);
        assert_eq!(YRule::Power { exponent: 0.5 }.y_for(10_000), 100);
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig::default();
        ok.validate().unwrap();
        let bad_q = ExperimentConfig {
            q_list: vec![0.95],
            ..ok.clone()
        };
        assert!(bad_q.validate().is_err());
        let few = ExperimentConfig {
            replicas: 99,
            ..ok.clone()
        };
        assert!(few.validate().is_err());
        let unsorted = ExperimentConfig {
            x_grid: vec![100, 10],
            ..ok.clone()
        };
        assert!(unsorted.validate().is_err());
        let bad_delta = ExperimentConfig { delta: 1.0, ..ok };
        assert!(bad_delta.validate().is_err());
    }

    #[test]
    fn degenerate_budget_rejected() {
        let cfg = ExperimentConfig {
            x_grid: vec![1_000],
            y_rule: YRule::Fixed { y: 2_000 },
            replicas: 100,
            ..ExperimentConfig::default()
        };
        assert!(matches!(run_lemma_budget(&cfg), Err(crate::LabError::Precondition(_))));
    }

    #[test]
    fn config_json_defaults_fill_in() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"x_grid": [100, 1000], "y_rule": {"rule": "fixed", "y": 31}}"#).unwrap();
        assert_eq!(cfg.x_grid, vec![100, 1000]);
        assert_eq!(cfg.y_rule, YRule::Fixed { y: 31 });
        assert_eq!(cfg.delta, 0.1);
    }

    #[test]
    fn small_decay_table_is_sane() {
        let cfg = ExperimentConfig {
            x_grid: vec![100, 1_000],
            q_list: vec![0.0, 0.25, 0.5],
            replicas: 200,
            ..ExperimentConfig::default()
        };
        let recs = run_moment_decay(&cfg).unwrap();
        assert_eq!(recs.len(), 8);
        assert!(moment_table_violations(&recs).is_empty());
        for r in &recs {
            assert!(r.ci_lo <= r.estimate && r.estimate <= r.ci_hi);
        }
    }
}
