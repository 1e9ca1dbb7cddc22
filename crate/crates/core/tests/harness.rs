//! End-to-end checks of the experiment harness on the shipped configs.

use std::fs;
use std::path::{Path, PathBuf};

use bandit_games::harness::{execute, parse_config, summarize, AlgorithmConfig, ExecuteOptions, GameConfig, RunConfig};

fn experiments() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

fn small(name: &str, horizon: usize) -> RunConfig {
    let mut cfg = parse_config(&experiments().join(format!("{name}.json"))).unwrap();
    cfg.horizon = horizon;
    cfg
}

fn options(out: &Path, parallelism: usize, force: bool) -> ExecuteOptions {
    ExecuteOptions {
        out: Some(out.to_path_buf()),
        parallelism: Some(parallelism),
        force,
    }
}

#[test]
fn every_shipped_config_parses_and_validates() {
    let mut n = 0;
    for entry in fs::read_dir(experiments()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate().unwrap();
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn zero_sum_config_reads_as_written() {
    let cfg = parse_config(&experiments().join("zs_matrix.json")).unwrap();
    match &cfg.game {
        GameConfig::Matrix { matrix, .. } => assert_eq!(matrix, &vec![vec![1.0, 2.0], vec![3.0, 4.0]]),
        other => panic!("unexpected game {other:?}"),
    }
    match &cfg.algorithm {
        AlgorithmConfig::ExactGd { eta } => assert_eq!(*eta, 0.01),
        other => panic!("unexpected algorithm {other:?}"),
    }
    assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
}

#[test]
fn parallelism_does_not_change_outputs_and_reruns_hit_the_cache() {
    let cfg = small("cournot_bandit", 2_000);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = execute(&cfg, &options(a.path(), 1, false)).unwrap();
    let mb = execute(&cfg, &options(b.path(), 8, false)).unwrap();
    assert_eq!(ma.runs.len(), 5);
    assert!(ma.all_ok() && mb.all_ok());
    for (ra, rb) in ma.runs.iter().zip(&mb.runs) {
        let ta = fs::read(ma.dir.join(&ra.path)).unwrap();
        let tb = fs::read(mb.dir.join(&rb.path)).unwrap();
        assert_eq!(ta, tb, "seed {}", ra.seed);
    }
    let again = execute(&cfg, &options(a.path(), 4, false)).unwrap();
    assert!(again.cache_hit);
    let forced = execute(&cfg, &options(a.path(), 4, true)).unwrap();
    assert!(!forced.cache_hit);
}

#[test]
fn summary_matches_an_independent_aggregation() {
    let cfg = small("zs_matrix", 3_000);
    let out = tempfile::tempdir().unwrap();
    let m = execute(&cfg, &options(out.path(), 2, false)).unwrap();
    // final duality gap straight from the csv files
    let mut finals = Vec::new();
    for r in &m.runs {
        let text = fs::read_to_string(m.dir.join(&r.path)).unwrap();
        let last = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[1] == "duality_gap")
            .map(|f| (f[0].parse::<usize>().unwrap(), f[2].parse::<f64>().unwrap()))
            .max_by_key(|(t, _)| *t)
            .unwrap();
        assert_eq!(last.0, 3_000);
        finals.push(last.1);
    }
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let std = (finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();

    let s = summarize(&m.path()).unwrap();
    assert!(!s.partial);
    let row = s.rows.iter().find(|r| r.metric == "duality_gap" && r.t == 3_000).unwrap();
    assert_eq!(row.n, 5);
    assert!((row.mean - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    assert!((row.std - std).abs() <= 1e-12);
    assert!(s.csv_path.exists() && s.txt_path.exists());
}

#[test]
fn failed_runs_make_the_summary_partial() {
    let cfg = small("zs_matrix", 200);
    let out = tempfile::tempdir().unwrap();
    let m = execute(&cfg, &options(out.path(), 1, false)).unwrap();
    fs::remove_file(m.dir.join(&m.runs[0].path)).unwrap();
    let s = summarize(&m.path()).unwrap();
    assert!(s.partial);
    assert!(fs::read_to_string(&s.txt_path).unwrap().to_lowercase().contains("partial"));
}
