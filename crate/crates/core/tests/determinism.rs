//! Results do not depend on the number of worker threads.

use std::fs;

use steinhaus_core::experiments::{run_lemma13, run_moment_decay, ExperimentConfig};
use steinhaus_core::gaussian::gmc_moment;
use steinhaus_core::output::{emit, load, Format, MomentEstimate};
use steinhaus_core::stats::with_workers;
use steinhaus_core::Seed;

const WORKERS: [usize; 3] = [1, 4, 8];

fn same_bytes_for_all_worker_counts(run: impl Fn() -> Vec<MomentEstimate> + Sync) {
    let dir = tempfile::tempdir().unwrap();
    let outputs: Vec<Vec<u8>> = WORKERS
        .iter()
        .map(|&w| {
            let records = with_workers(w, &run).unwrap();
            let path = dir.path().join(format!("w{w}.csv"));
            emit(&path, Format::Csv, &records).unwrap();
            assert_eq!(load(&path, Format::Csv).unwrap(), records);
            fs::read(&path).unwrap()
        })
        .collect();
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn moment_decay_is_worker_independent() {
    let cfg = ExperimentConfig {
        x_grid: vec![1000, 10_000, 100_000],
        replicas: 300,
        seed: 17,
        ..Default::default()
    };
    same_bytes_for_all_worker_counts(|| run_moment_decay(&cfg).unwrap());
}

#[test]
fn lemma13_is_worker_independent() {
    let cfg = ExperimentConfig {
        y_grid: vec![31, 100],
        q_list: vec![0.25, 0.75],
        replicas: 100,
        ..Default::default()
    };
    same_bytes_for_all_worker_counts(|| {
        run_lemma13(&cfg)
            .unwrap()
            .into_iter()
            .flat_map(|r| [r.moment, r.normalized])
            .collect()
    });
}

#[test]
fn gmc_is_worker_independent() {
    let runs: Vec<String> = WORKERS
        .iter()
        .map(|&w| {
            let g = with_workers(w, || gmc_moment(1000, 0.5, 200, 64, Seed::new(4, 0)).unwrap()).unwrap();
            format!("{g:?}")
        })
        .collect();
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
}
