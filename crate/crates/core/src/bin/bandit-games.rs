use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bandit_games::games::{certify, library_game, LIBRARY_GAMES};
use bandit_games::harness::{execute, parse_config, summarize, ExecuteOptions, ALGORITHMS, GAME_KINDS, METRICS};
use bandit_games::rng::SimRng;

#[derive(Parser)]
#[command(name = "bandit-games", version, about = "Bandit learning dynamics in monotone games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write trajectories plus a manifest.
    Run {
        config: PathBuf,
        /// Comma-separated seeds replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output root (default: config output_dir, then $BANDIT_GAMES_OUT, then ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Rerun even when a complete manifest exists.
        #[arg(long)]
        force: bool,
    },
    /// Aggregate a finished run into summary.csv and summary.txt.
    Summarize { manifest: PathBuf },
    ListGames,
    ListAlgorithms,
    /// Print sampled monotonicity, smoothness and kappa certificates.
    Certify {
        game: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> bandit_games::error::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seeds,
            out,
            parallelism,
            force,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            let m = execute(&cfg, &ExecuteOptions { out, parallelism, force })?;
            if m.cache_hit {
                println!("cache hit: {} (use --force to rerun)", m.path().display());
            } else {
                println!("wrote {} ({:.1}s)", m.path().display(), m.wall_clock_secs);
            }
            for r in &m.runs {
                match &r.error {
                    Some(e) => println!("  seed {}: failed: {e}", r.seed),
                    None => println!("  seed {}: ok ({:.1}s)", r.seed, r.wall_clock_secs),
                }
            }
            Ok(if m.all_ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Summarize { manifest } => {
            let s = summarize(&manifest)?;
            print!("{}", std::fs::read_to_string(&s.txt_path)?);
            Ok(if s.partial { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::ListGames => {
            println!("config kinds:");
            for (n, d) in GAME_KINDS {
                println!("  {n:<22} {d}");
            }
            println!("library games:");
            for (n, d) in LIBRARY_GAMES {
                println!("  {n:<22} {d}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ListAlgorithms => {
            for (n, d) in ALGORITHMS {
                println!("  {n:<16} {d}");
            }
            println!("metrics:");
            for (n, d) in METRICS {
                println!("  {n:<16} {d}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Certify { game, samples, seed } => {
            let lib = library_game(&game)?;
            let kappa = (lib.kappa > 0.0).then_some(lib.kappa);
            let cert = certify(&lib.game, kappa, samples, &mut SimRng::seed_from_u64(seed))?;
            println!("{cert}");
            Ok(if cert.passes() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
