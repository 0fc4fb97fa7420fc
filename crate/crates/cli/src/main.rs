//! `steinhaus`: command-line driver for the experiments and checks.
//!
//! Every subcommand prints its results as JSON on stdout and exits with
//! status 1 if any invariant it asserts fails.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use steinhaus_core::concentration::dudley_integral;
use steinhaus_core::counting::{brun_ratio, count_smooth, rankin_certificate};
use steinhaus_core::euler::{evaluate_field, g3_uniform_bound, integral_functional, parseval_check, IntegralOptions};
use steinhaus_core::experiments::{
    band_ratio, decay_trend, moment_table_violations, run_lemma13, run_lemma_budget, run_moment_decay, tags,
    ExperimentConfig,
};
use steinhaus_core::gaussian::{covariance_gap, gmc_moment, kahane_compare, random_dominated_pair, standard_lag_pairs};
use steinhaus_core::multiplicative::{
    check_conditional_second_moment, check_splitting_identity, orthogonality_grid, second_moment_split,
    MultiplicativeTable,
};
use steinhaus_core::output::{emit, Format, MomentEstimate};
use steinhaus_core::stats::{with_workers, WORKERS_ENV};
use steinhaus_core::{PhaseAssignment, Seed};

#[derive(Parser)]
#[command(
    name = "steinhaus",
    version,
    about = "Monte Carlo laboratory for Steinhaus random multiplicative functions"
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = WORKERS_ENV, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration; fields not given take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (overrides the configuration's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        _ => Err(format!("unknown format {s:?} (csv or json)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// E|S_x|^{2q} over the x-grid.
    MomentDecay(ExperimentArgs),
    /// E|S_x|^{2q} against E[I_y^q] plus the smooth remainder.
    LemmaBudget(ExperimentArgs),
    /// E[I_y^q] (log log y)^{q/2} over the y-grid.
    Lemma13(ExperimentArgs),
    /// Splitting identity, orthogonality and the conditional second moment.
    Identities {
        #[arg(long, default_value_t = 10_000)]
        x: u32,
        #[arg(long, default_value_t = 31)]
        y: u64,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, default_value_t = 10_000)]
        replicas: u64,
        #[arg(long, default_value_t = 0.75)]
        t_exponent: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Ψ(x, y), Φ(x, y), Rankin's bound and the short-interval ratio.
    Count {
        #[arg(long)]
        x: u64,
        #[arg(long)]
        y: u64,
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
        /// Interval length for the rough count in (x, x + H].
        #[arg(long)]
        h: Option<u64>,
        /// Print the row `x,y,psi,phi,bound,slack` as CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// A_y(σ+it) and its log-decomposition on a grid.
    Field {
        #[arg(long)]
        y: u64,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        tmin: f64,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        tmax: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// The critical-line integral I_y for one realization.
    Integral {
        #[arg(long)]
        y: u64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Parseval's identity for the truncated smooth sum.
    Parseval {
        #[arg(long, default_value_t = 31)]
        y: u64,
        #[arg(long, default_value_t = 10_000)]
        ntrunc: u32,
        #[arg(long, default_value_t = 2_000.0)]
        tmax: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// E[μ_y^q] for the critical chaos of the Gaussian analogue.
    Gmc {
        #[arg(long)]
        y: u64,
        #[arg(long, default_value_t = 0.75)]
        q: f64,
        #[arg(long, default_value_t = 1_000)]
        replicas: u64,
        /// Riemann-sum points; defaults to 16 log y rounded up to even.
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Gap between the exact kernel and the truncated log kernel.
    CovGap {
        #[arg(long, num_args = 1.., default_values_t = [100u64, 1_000, 10_000, 100_000, 1_000_000])]
        y: Vec<u64>,
        /// Fail if any gap exceeds this.
        #[arg(long)]
        envelope: Option<f64>,
    },
    /// Kahane's inequality on random dominated kernel pairs.
    Kahane {
        #[arg(long, default_value_t = 8)]
        gridsize: usize,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        #[arg(long, default_value_t = 10_000)]
        replicas: u64,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// The Dudley entropy integral of an interval.
    Dudley {
        #[arg(long, default_value_t = 1.0)]
        length: f64,
    },
}

/// Assertions collected while a subcommand runs.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
}

impl Checks {
    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_config(args: &ExperimentArgs, experiment: &str) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    cfg.experiment = experiment.to_owned();
    if let Some(r) = args.replicas {
        cfg.replicas = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    Ok(cfg)
}

fn finish(cfg: &ExperimentConfig, records: &[MomentEstimate]) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            emit(path, cfg.format, records)?;
            eprintln!("wrote {} records to {}", records.len(), path.display());
        }
        None => print!("{}", steinhaus_core::output::to_csv(records)?),
    }
    Ok(())
}

fn run(command: Command, checks: &mut Checks) -> Result<()> {
    match command {
        Command::MomentDecay(args) => {
            let cfg = load_config(&args, "moment-decay")?;
            let records = run_moment_decay(&cfg)?;
            for v in moment_table_violations(&records) {
                checks.require(false, v);
            }
            if cfg.x_grid.len() >= 3 && cfg.q_list.contains(&0.5) {
                eprintln!("trend at q = 1/2: {:?}", decay_trend(&records, tags::S_MOMENT, 0.5)?);
            }
            finish(&cfg, &records)?;
        }
        Command::LemmaBudget(args) => {
            let cfg = load_config(&args, "lemma-budget")?;
            let rows = run_lemma_budget(&cfg)?;
            let mut records = Vec::new();
            for r in &rows {
                checks.require(r.ratio.is_finite(), format!("x = {}: ratio is not finite", r.x));
                checks.require(
                    r.unconverged == 0,
                    format!("y = {}: {} quadratures unconverged", r.y, r.unconverged),
                );
                records.extend(r.records(cfg.root_seed()));
            }
            finish(&cfg, &records)?;
        }
        Command::Lemma13(args) => {
            let cfg = load_config(&args, "lemma13")?;
            let rows = run_lemma13(&cfg)?;
            let mut records = Vec::new();
            for r in &rows {
                checks.require(
                    r.unconverged == 0,
                    format!("y = {}: {} quadratures unconverged", r.y, r.unconverged),
                );
                if r.q == 0.0 {
                    checks.require(r.moment.estimate == 1.0, format!("y = {}: q = 0 moment is not 1", r.y));
                }
                records.push(r.moment.clone());
                records.push(r.normalized.clone());
            }
            let half: Vec<f64> = rows
                .iter()
                .filter(|r| r.q == 0.5)
                .map(|r| r.normalized.estimate)
                .collect();
            if half.len() >= 2 {
                let band = band_ratio(&half);
                eprintln!("q = 1/2 normalized band ratio {band:.3}");
                checks.require(
                    band <= 3.0,
                    format!("q = 1/2 normalized moments span a factor {band:.3} > 3"),
                );
            }
            finish(&cfg, &records)?;
        }
        Command::Identities {
            x,
            y,
            seeds,
            replicas,
            t_exponent,
            seed,
        } => {
            let root = Seed::new(seed, 0);
            let mut worst = 0.0f64;
            for i in 0..seeds {
                let t = MultiplicativeTable::build(&PhaseAssignment::new(root.child(i)), x)?;
                worst = worst.max(check_splitting_identity(&t, x, y)?.residual);
            }
            checks.require(worst <= 1e-8, format!("splitting residual {worst:e} > 1e-8"));
            let ns: Vec<u32> = (1..=10).collect();
            let grid = orthogonality_grid(&ns, &ns, replicas, root.child(seeds))?;
            for (k, e) in grid.iter().enumerate() {
                let (n, m) = (ns[k / ns.len()], ns[k % ns.len()]);
                let expect = if n == m { 1.0 } else { 0.0 };
                checks.require(
                    e.within(num_complex::Complex64::new(expect, 0.0), 4.0),
                    format!("E[α({n})conj α({m})] = {} off δ at 4σ", e.mean),
                );
            }
            let csm = check_conditional_second_moment(x, y, root.child(seeds + 1), replicas)?;
            checks.require(csm.lhs.within(csm.rhs, 4.0), "conditional second moment off at 4σ");
            let split = second_moment_split(x, y, (x as f64).powf(t_exponent), root.child(seeds + 1))?;
            print_json(&serde_json::json!({
                "max_splitting_residual": worst,
                "orthogonality_replicas": replicas,
                "conditional_second_moment": csm,
                "second_moment_split": split,
            }))?;
        }
        Command::Count { x, y, alpha, h, csv } => {
            let counts = count_smooth(x, y)?;
            let rankin = rankin_certificate(x, y, alpha)?;
            checks.require(rankin.holds(), "Rankin bound violated");
            let brun = h.map(|h| brun_ratio(x, h, y)).transpose()?;
            if csv {
                println!("x,y,psi,phi,bound,slack");
                println!(
                    "{x},{y},{},{},{},{}",
                    counts.psi, counts.phi, rankin.bound, rankin.slack
                );
            } else {
                print_json(&serde_json::json!({ "counts": counts, "rankin": rankin, "brun": brun }))?;
            }
        }
        Command::Field {
            y,
            sigma,
            tmin,
            tmax,
            step,
            seed,
        } => {
            anyhow::ensure!(step > 0.0 && tmax >= tmin, "need step > 0 and tmax >= tmin");
            let n = ((tmax - tmin) / step).floor() as usize + 1;
            let grid: Vec<f64> = (0..n).map(|k| tmin + k as f64 * step).collect();
            let f = evaluate_field(&PhaseAssignment::new(Seed::new(seed, 0)), y, sigma, &grid)?;
            let err = f.reconstruction_error();
            let k3 = g3_uniform_bound();
            checks.require(err <= 1e-9, format!("reconstruction error {err:e} > 1e-9"));
            checks.require(f.max_abs_g3() <= k3, "|G3| exceeds K3");
            print_json(&serde_json::json!({
                "reconstruction_error": err,
                "max_abs_g3": f.max_abs_g3(),
                "k3": k3,
                "sample": f,
            }))?;
        }
        Command::Integral { y, eps, seed } => {
            let opts = IntegralOptions {
                eps,
                ..IntegralOptions::default()
            };
            let r = integral_functional(&PhaseAssignment::new(Seed::new(seed, 0)), y, opts)?;
            checks.require(r.converged, "truncation criterion not met within the budget");
            checks.require(r.value >= 0.0, "negative integral");
            print_json(&r)?;
        }
        Command::Parseval { y, ntrunc, tmax, seed } => {
            let h = steinhaus_core::euler::max_step(ntrunc as u64);
            let c = parseval_check(&PhaseAssignment::new(Seed::new(seed, 0)), y, ntrunc, tmax, h)?;
            checks.require(
                c.relative_error <= 1e-3,
                format!("relative error {:e} > 1e-3", c.relative_error),
            );
            checks.require(!c.tail_flagged, "quadrature tail exceeds 1e-3 of the total");
            print_json(&c)?;
        }
        Command::Gmc {
            y,
            q,
            replicas,
            resolution,
            seed,
        } => {
            let res = resolution.unwrap_or_else(|| 2 * (8.0 * (y as f64).ln()).ceil() as usize);
            let g = gmc_moment(y, q, replicas, res, Seed::new(seed, 0))?;
            checks.require(
                g.resolution_drift() <= 0.05,
                format!("estimate moves {:.3} under step halving", g.resolution_drift()),
            );
            print_json(&g)?;
        }
        Command::CovGap { y, envelope } => {
            let pairs = standard_lag_pairs(1_000);
            let gaps = y
                .iter()
                .map(|&y| covariance_gap(y, &pairs))
                .collect::<steinhaus_core::Result<Vec<_>>>()?;
            if let Some(env) = envelope {
                for g in &gaps {
                    checks.require(g.gap <= env, format!("y = {}: gap {} above envelope {env}", g.y, g.gap));
                }
            }
            print_json(&gaps)?;
        }
        Command::Kahane {
            gridsize,
            q,
            replicas,
            trials,
            seed,
        } => {
            let root = Seed::new(seed, 0);
            let mut results = Vec::new();
            for i in 0..trials {
                let (ky, kz) = random_dominated_pair(gridsize, root.child(2 * i));
                let c = kahane_compare(&ky, &kz, q, replicas, root.child(2 * i + 1))?;
                checks.require(c.holds(), format!("trial {i}: Kahane ordering violated"));
                results.push(c);
            }
            print_json(&results)?;
        }
        Command::Dudley { length } => print_json(&dudley_integral(length)?)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut checks = Checks::default();
    let outcome = with_workers(cli.workers, || run(cli.command, &mut checks));
    match outcome {
        Ok(Ok(())) if checks.failures.is_empty() => ExitCode::SUCCESS,
        Ok(Ok(())) => {
            for f in &checks.failures {
                eprintln!("FAILED: {f}");
            }
            ExitCode::FAILURE
        }
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
