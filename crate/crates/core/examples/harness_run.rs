// Running an experiment from a JSON config: every seed is simulated on a
// thread pool, trajectories land in CSV files next to a manifest, and a
// second call with the same config is a cache hit.
//
// Output goes to $BANDIT_GAMES_OUT (default ./runs).

use bandit_games::harness::{execute, parse_config_str, summarize, ExecuteOptions};

const CONFIG: &str = r#"{
  "name": "example_cournot",
  "game": {"kind": "cournot", "preset": "paper_default"},
  "algorithm": {"kind": "bandit_md", "schedule": {"preset": {"kind": "strongly_monotone_main"}}},
  "horizon": 10000,
  "seeds": [1, 2, 3],
  "metrics": ["dist2", "welfare"]
}"#;

fn main() {
    let config = parse_config_str(CONFIG).unwrap();
    println!("config hash {}", config.hash());
    let manifest = execute(&config, &ExecuteOptions::default()).unwrap();
    println!("{} (cache hit: {})", manifest.path().display(), manifest.cache_hit);

    let summary = summarize(&manifest.path()).unwrap();
    for row in summary.rows.iter().filter(|r| r.t == config.horizon) {
        println!("{:<8} at T: mean {:.3e}, std {:.1e} over {} seeds", row.metric, row.mean, row.std, row.n);
    }
    println!("final-decade slopes: {:?}", summary.slopes);

    let again = execute(&config, &ExecuteOptions::default()).unwrap();
    assert!(again.cache_hit);
}
