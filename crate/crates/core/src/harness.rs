//! Experiment orchestration: JSON configs, seeded fan-out, CSV trajectories,
//! manifests and summaries.
//!
//! Layout of one run directory:
//!
//! ```text
//! <out>/<name>-<hash12>/
//!     manifest.json
//!     seed_<s>.csv        # config_hash / seed comment header, then t,metric,value
//!     summary.csv         # written by `summarize`
//!     summary.txt
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::{
    default_geometry, log_grid, run_bandit_mirror_descent, run_entropy_bandit_omd, run_exact_gradient_baseline,
    run_linear_variant, run_optimistic_regularized_ew, run_time_varying, schedule_dim, BaselineMethod, EntropyParams,
    Feedback, LinearOptions, MetricSeries, OptimisticParams, PowerLaw, Schedule, SchedulePreset, SimplexFloor,
    TimeVaryingMode, Trajectory, GRID_PER_DECADE,
};
use crate::error::{Error, Result};
use crate::game::{Game, NoiseSpec, StrategyProfile};
use crate::games::{
    cournot_kappa, cournot_nash, library_game, make_cournot, make_matrix_game, make_quadratic_ball,
    make_time_varying_cournot, matrix_equilibrium, regularized_matrix_equilibrium, CournotParams, Drift,
    GameSequence, MatrixGameSpec, Orientation, TimeVaryingCournot,
};
use crate::metrics::{
    divergence_to, duality_gap, fit_rate_positive, gap_function, individual_regret, median, series_on_grid,
    social_cost, Divergence, RateFit, RegretClock,
};
use crate::prox::SoftmaxEquilibrium;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "BANDIT_GAMES_OUT";
pub const DEFAULT_OUT: &str = "runs";

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CournotConfig {
    /// `paper_default` or `all_active`; explicit vectors override it.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub marginal_cost: Option<Vec<f64>>,
    #[serde(default)]
    pub intercept: Option<Vec<f64>>,
    #[serde(default)]
    pub slope: Option<Vec<f64>>,
    #[serde(default)]
    pub capacity: Option<Vec<f64>>,
}

impl CournotConfig {
    pub fn params(&self) -> Result<CournotParams> {
        let base = match self.preset.as_deref() {
            Some("paper_default") => Some(CournotParams::paper_default()),
            Some("all_active") => Some(CournotParams::all_active()),
            Some(other) => return Err(Error::Config(format!("unknown Cournot preset '{other}'"))),
            None => None,
        };
        let pick = |own: &Option<Vec<f64>>, from: Option<&Vec<f64>>, key: &str| -> Result<Vec<f64>> {
            own.clone()
                .or_else(|| from.cloned())
                .ok_or_else(|| Error::Config(format!("missing field `{key}` (or a preset)")))
        };
        let marginal_cost = pick(&self.marginal_cost, base.as_ref().map(|b| &b.marginal_cost), "marginal_cost")?;
        let intercept = pick(&self.intercept, base.as_ref().map(|b| &b.intercept), "intercept")?;
        let slope = pick(&self.slope, base.as_ref().map(|b| &b.slope), "slope")?;
        let capacity = match (&self.capacity, &base) {
            (Some(c), _) => c.clone(),
            (None, Some(b)) => b.capacity.clone(),
            (None, None) => vec![1.0; slope.len()],
        };
        CournotParams::new(marginal_cost, intercept, slope, capacity).map_err(|e| Error::Config(e.to_string()))
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameConfig {
    Cournot {
        #[serde(default)]
        preset: Option<String>,
        #[serde(default)]
        marginal_cost: Option<Vec<f64>>,
        #[serde(default)]
        intercept: Option<Vec<f64>>,
        #[serde(default)]
        slope: Option<Vec<f64>>,
        #[serde(default)]
        capacity: Option<Vec<f64>>,
        #[serde(default = "default_true")]
        normalize: bool,
    },
    Matrix {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        orientation: Orientation,
        #[serde(default)]
        quad_weight: f64,
        /// Entropy level of the regularized target used by `kl_regularized`.
        #[serde(default)]
        tau: Option<f64>,
    },
    QuadraticBall {
        target: Vec<f64>,
    },
    TimeVaryingCournot {
        base: CournotConfig,
        drift: Drift,
        #[serde(default = "default_true")]
        normalize: bool,
    },
    /// A named entry of the game library.
    Library {
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_preset")]
    pub preset: SchedulePreset,
    #[serde(default)]
    pub eta: Option<PowerLaw>,
    #[serde(default)]
    pub delta: Option<PowerLaw>,
    /// Defaults to the game's certified value.
    #[serde(default)]
    pub kappa: Option<f64>,
}

fn default_preset() -> SchedulePreset {
    SchedulePreset::MonotoneMain
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            preset: default_preset(),
            eta: None,
            delta: None,
            kappa: None,
        }
    }
}

fn default_delta() -> f64 {
    1.0
}

fn default_rho() -> f64 {
    1.0
}

fn default_clip() -> SimplexFloor {
    SimplexFloor::Clip
}

fn default_offset() -> SimplexFloor {
    SimplexFloor::Offset
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    BanditMd {
        #[serde(default)]
        schedule: ScheduleConfig,
    },
    LinearVariant {
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default = "default_delta")]
        delta: f64,
        /// Exact gradients instead of bandit feedback.
        #[serde(default)]
        exact: bool,
    },
    EntropyOmd {
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default = "default_clip")]
        floor: SimplexFloor,
    },
    OptimisticEw {
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_offset")]
        floor: SimplexFloor,
    },
    ExactGd {
        eta: f64,
    },
    ExactOmd {
        eta: f64,
    },
    TimeVarying {
        mode: TimeVaryingMode,
        #[serde(default)]
        schedule: ScheduleConfig,
    },
}

pub const ALGORITHMS: &[(&str, &str)] = &[
    ("bandit_md", "barrier-regularized bandit mirror descent (any static game)"),
    ("linear_variant", "bandit mirror descent with the tau (t + 1) regularizer (linear-cost games)"),
    ("entropy_omd", "entropy-regularized bandit OMD on the clipped simplex (matrix games)"),
    ("optimistic_ew", "optimistic entropy-regularized exponentiated weights, two plays per round (matrix games)"),
    ("exact_gd", "projected gradient descent with exact gradients"),
    ("exact_omd", "multiplicative weights with exact gradients (simplex games)"),
    ("time_varying", "bandit mirror descent on a drifting Cournot sequence (converging or tracking)"),
];

pub const GAME_KINDS: &[(&str, &str)] = &[
    ("cournot", "Cournot competition; preset paper_default / all_active or explicit vectors"),
    ("matrix", "two-player matrix game on simplices, optional quadratic regularization"),
    ("quadratic_ball", "one player minimizing |x - target|^2 over the unit ball"),
    ("time_varying_cournot", "Cournot with drifting intercepts (decaying or sinusoidal)"),
    ("library", "a named library game (see below)"),
];

pub const METRICS: &[(&str, &str)] = &[
    ("dist2", "squared distance to the equilibrium"),
    ("bregman_p", "Bregman divergence of the regularizer from the equilibrium"),
    ("kl_regularized", "KL from the entropy-regularized equilibrium (matrix games)"),
    ("duality_gap", "duality gap of the bilinear part (matrix games)"),
    ("gap_function", "sum_i <grad_i c_i(x), x_i - x_i*>"),
    ("welfare", "social cost sum_i c_i(x)"),
    ("regret", "per-player running maximum of positive individual regret"),
    ("tracking_gap", "per-step gap against the moving equilibrium (tracking mode)"),
    ("tracking_gap_avg", "running average of tracking_gap"),
];

fn default_grid() -> usize {
    GRID_PER_DECADE
}

fn default_resolution() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub game: GameConfig,
    pub algorithm: AlgorithmConfig,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub metrics: Vec<String>,
    #[serde(default = "default_grid")]
    pub grid_per_decade: usize,
    /// Grid points per axis for the regret comparator search.
    #[serde(default = "default_resolution")]
    pub regret_resolution: usize,
    /// Does not affect results and is excluded from the hash.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Does not affect results and is excluded from the hash.
    #[serde(default)]
    pub parallelism: Option<usize>,
}

/// Read and validate a config. An empty file reads as `{}` so the error names
/// the first missing key.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.grid_per_decade == 0 {
            return Err(Error::Config("grid_per_decade must be positive".into()));
        }
        if self.regret_resolution < 2 {
            return Err(Error::Config("regret_resolution must be at least 2".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.seeds {
            if !seen.insert(s) {
                return Err(Error::Config(format!("seed {s} listed twice")));
            }
        }
        for m in &self.metrics {
            if !METRICS.iter().any(|(n, _)| n == m) {
                return Err(Error::Config(format!("unknown metric '{m}'")));
            }
        }
        let setup = Setup::build(self)?;
        setup.check_compatibility(self)
    }

    /// Canonical JSON of the science-relevant fields, with sorted keys.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut v {
            map.remove("output_dir");
            map.remove("parallelism");
        }
        // serde_json maps are ordered by key
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    fn label(&self) -> String {
        let raw = self.name.clone().unwrap_or_else(|| "run".into());
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect()
    }
}

/// SHA-256 of the canonical JSON, hex encoded.
pub fn config_hash(config: &RunConfig) -> String {
    hex::encode(Sha256::digest(config.canonical_json().as_bytes()))
}

// ---------------------------------------------------------------------------
// Resolved games

enum Subject {
    Static {
        game: Game,
        kappa: f64,
        equilibrium: Option<StrategyProfile>,
        matrix: Option<MatrixGameSpec>,
    },
    Sequence(TimeVaryingCournot),
}

struct Setup {
    subject: Subject,
}

impl Setup {
    fn build(config: &RunConfig) -> Result<Self> {
        let subject = match &config.game {
            GameConfig::Cournot {
                preset,
                marginal_cost,
                intercept,
                slope,
                capacity,
                normalize,
            } => {
                let p = CournotConfig {
                    preset: preset.clone(),
                    marginal_cost: marginal_cost.clone(),
                    intercept: intercept.clone(),
                    slope: slope.clone(),
                    capacity: capacity.clone(),
                }
                .params()?;
                let game = make_cournot(&p, *normalize)?;
                Subject::Static {
                    kappa: cournot_kappa(&p, &game),
                    equilibrium: Some(cournot_nash(&p, 1e-12)?.profile),
                    game,
                    matrix: None,
                }
            }
            GameConfig::Matrix {
                matrix,
                orientation,
                quad_weight,
                tau,
            } => {
                let mut spec = MatrixGameSpec::from_rows(matrix)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .with_orientation(*orientation)
                    .with_quad_weight(*quad_weight);
                if let Some(t) = tau {
                    spec = spec.with_tau(*t);
                }
                let game = make_matrix_game(&spec)?;
                let equilibrium = if *quad_weight > 0.0 {
                    Some(regularized_matrix_equilibrium(&spec, 1e-12)?)
                } else {
                    matrix_equilibrium(&spec.row_cost_matrix())
                        .ok()
                        .map(|e| StrategyProfile::new(vec![e.x, e.y]))
                };
                Subject::Static {
                    game,
                    kappa: *quad_weight,
                    equilibrium,
                    matrix: Some(spec),
                }
            }
            GameConfig::QuadraticBall { target } => {
                let t = crate::game::Vector::from_vec(target.clone());
                let game = make_quadratic_ball(target.len(), t.clone())?;
                let eq = game.set(0).project(&t);
                Subject::Static {
                    game,
                    kappa: 2.0,
                    equilibrium: Some(StrategyProfile::new(vec![eq])),
                    matrix: None,
                }
            }
            GameConfig::TimeVaryingCournot { base, drift, normalize } => {
                Subject::Sequence(make_time_varying_cournot(&base.params()?, *drift, *normalize)?)
            }
            GameConfig::Library { name } => {
                let lib = library_game(name)?;
                let matrix = match name.as_str() {
                    "matrix_paper" => Some(MatrixGameSpec::paper_default()),
                    "matrix_regularized" => Some(MatrixGameSpec::paper_default().with_quad_weight(1.0)),
                    _ => None,
                };
                Subject::Static {
                    game: lib.game,
                    kappa: lib.kappa,
                    equilibrium: lib.equilibrium,
                    matrix,
                }
            }
        };
        Ok(Self { subject })
    }

    fn check_compatibility(&self, config: &RunConfig) -> Result<()> {
        let incompatible = |why: &str| Err(Error::Config(format!("incompatible configuration: {why}")));
        let algo = &config.algorithm;
        match (&self.subject, algo) {
            (Subject::Sequence(_), AlgorithmConfig::TimeVarying { .. }) => {}
            (Subject::Sequence(_), _) => return incompatible("time_varying_cournot needs the time_varying algorithm"),
            (Subject::Static { .. }, AlgorithmConfig::TimeVarying { .. }) => {
                return incompatible("time_varying needs a time_varying_cournot game")
            }
            (Subject::Static { game, .. }, AlgorithmConfig::BanditMd { schedule }) => {
                if matches!(schedule.preset, SchedulePreset::LinearTau { .. }) && !game.has_linear_costs() {
                    return incompatible(&format!("linear_tau schedule on {} whose costs are not linear", game.name()));
                }
            }
            (Subject::Static { game, .. }, AlgorithmConfig::LinearVariant { .. }) => {
                if !game.has_linear_costs() {
                    return incompatible(&format!("linear_variant on {} whose costs are not linear", game.name()));
                }
            }
            (Subject::Static { matrix, .. }, AlgorithmConfig::EntropyOmd { .. } | AlgorithmConfig::OptimisticEw { .. }) => {
                if matrix.is_none() {
                    return incompatible("simplex dynamics need a matrix game");
                }
            }
            (Subject::Static { matrix, .. }, AlgorithmConfig::ExactOmd { .. }) => {
                if matrix.is_none() {
                    return incompatible("exact_omd needs simplex action sets");
                }
            }
            (Subject::Static { .. }, AlgorithmConfig::ExactGd { .. }) => {}
        }
        for m in &config.metrics {
            let ok = match m.as_str() {
                "duality_gap" => self.matrix().is_some(),
                "kl_regularized" => self.matrix().is_some() && self.regularization_tau(config).is_some(),
                "dist2" | "bregman_p" | "gap_function" => match &self.subject {
                    Subject::Static { equilibrium, .. } => equilibrium.is_some(),
                    Subject::Sequence(_) => m != "gap_function",
                },
                "tracking_gap" | "tracking_gap_avg" => {
                    matches!(algo, AlgorithmConfig::TimeVarying { mode: TimeVaryingMode::Tracking { .. }, .. })
                }
                _ => true,
            };
            if !ok {
                return incompatible(&format!("metric '{m}' is not available for this game and algorithm"));
            }
        }
        Ok(())
    }

    fn matrix(&self) -> Option<&MatrixGameSpec> {
        match &self.subject {
            Subject::Static { matrix, .. } => matrix.as_ref(),
            Subject::Sequence(_) => None,
        }
    }

    fn regularization_tau(&self, config: &RunConfig) -> Option<f64> {
        let t = config.horizon;
        match &config.algorithm {
            AlgorithmConfig::EntropyOmd { tau, .. } | AlgorithmConfig::OptimisticEw { tau, .. } => {
                Some(tau.unwrap_or(EntropyParams::preset(t, SimplexFloor::Clip).tau))
            }
            _ => self.matrix().and_then(|m| m.tau),
        }
    }

    fn schedule(&self, sc: &ScheduleConfig, game: &Game, kappa: f64) -> Result<Schedule> {
        let geo = default_geometry(game)?;
        let mut s = Schedule::preset(sc.preset, schedule_dim(&geo), sc.kappa.unwrap_or(kappa))?;
        if let Some(e) = sc.eta {
            s.eta = e;
            s.preset = SchedulePreset::Custom;
        }
        if let Some(d) = sc.delta {
            s.delta = d;
            s.preset = SchedulePreset::Custom;
        }
        Ok(s)
    }
}

// ---------------------------------------------------------------------------
// One seed

/// Run one seed and evaluate the requested metrics.
pub fn run_seed(config: &RunConfig, seed: u64) -> Result<Trajectory> {
    let setup = Setup::build(config)?;
    setup.check_compatibility(config)?;
    let t = config.horizon;
    let mut traj = match (&setup.subject, &config.algorithm) {
        (Subject::Static { game, kappa, .. }, AlgorithmConfig::BanditMd { schedule }) => {
            let s = setup.schedule(schedule, game, *kappa)?;
            run_bandit_mirror_descent(game, &default_geometry(game)?, &s, t, config.noise, seed)?
        }
        (Subject::Static { game, .. }, AlgorithmConfig::LinearVariant { tau, delta, exact }) => {
            let options = LinearOptions {
                tau: *tau,
                feedback: if *exact { Feedback::Exact } else { Feedback::Bandit(config.noise) },
                delta: *delta,
            };
            run_linear_variant(game, &default_geometry(game)?, t, options, seed)?
        }
        (Subject::Static { matrix: Some(spec), .. }, AlgorithmConfig::EntropyOmd { eta, tau, beta, floor }) => {
            let d = EntropyParams::preset(t, *floor);
            let p = EntropyParams {
                eta: eta.unwrap_or(d.eta),
                tau: tau.unwrap_or(d.tau),
                beta: beta.unwrap_or(d.beta),
                floor: *floor,
            };
            run_entropy_bandit_omd(spec, p, t, seed)?
        }
        (
            Subject::Static { matrix: Some(spec), .. },
            AlgorithmConfig::OptimisticEw {
                eta,
                tau,
                beta,
                rho,
                floor,
            },
        ) => {
            let d = OptimisticParams::preset(t, *floor);
            let p = OptimisticParams {
                eta: eta.unwrap_or(d.eta),
                tau: tau.unwrap_or(d.tau),
                beta: beta.unwrap_or(d.beta),
                rho: *rho,
                floor: *floor,
            };
            run_optimistic_regularized_ew(spec, p, t, seed)?
        }
        (Subject::Static { game, .. }, AlgorithmConfig::ExactGd { eta }) => {
            let mut tr = run_exact_gradient_baseline(game, BaselineMethod::GdProjected, *eta, t)?;
            tr.seed = seed;
            tr
        }
        (Subject::Static { game, .. }, AlgorithmConfig::ExactOmd { eta }) => {
            let mut tr = run_exact_gradient_baseline(game, BaselineMethod::OmdEntropy, *eta, t)?;
            tr.seed = seed;
            tr
        }
        (Subject::Sequence(seq), AlgorithmConfig::TimeVarying { mode, schedule }) => {
            let first = seq.game_at(1)?;
            let s = setup.schedule(schedule, &first, seq.kappa())?;
            run_time_varying(seq, *mode, &default_geometry(&first)?, &s, t, config.noise, seed)?
        }
        _ => return Err(Error::Config("incompatible game and algorithm".into())),
    };
    let metrics = evaluate_metrics(config, &setup, &traj)?;
    let recorded = std::mem::take(&mut traj.metrics);
    traj.metrics = metrics
        .into_iter()
        .chain(recorded.into_iter().filter(|m| config.metrics.contains(&m.name)))
        .collect();
    Ok(traj)
}

fn evaluate_metrics(config: &RunConfig, setup: &Setup, traj: &Trajectory) -> Result<Vec<MetricSeries>> {
    let grid = log_grid(config.horizon, config.grid_per_decade);
    let mut out = Vec::new();
    let sequence_eq = |t: usize| -> Result<StrategyProfile> {
        match &setup.subject {
            Subject::Sequence(seq) => match (&config.algorithm, seq.limit_equilibrium()) {
                (AlgorithmConfig::TimeVarying { mode: TimeVaryingMode::Converging, .. }, Some(eq)) => Ok(eq),
                _ => seq.equilibrium_at(t.max(1), None),
            },
            Subject::Static { equilibrium, .. } => {
                equilibrium.clone().ok_or_else(|| Error::Config("no equilibrium available".into()))
            }
        }
    };
    let game_at = |t: usize| -> Result<Game> {
        match &setup.subject {
            Subject::Static { game, .. } => Ok(game.clone()),
            Subject::Sequence(seq) => seq.game_at(t.max(1)),
        }
    };
    let mut target: Option<SoftmaxEquilibrium> = None;
    for name in &config.metrics {
        let series = match name.as_str() {
            "dist2" => series_on_grid(name, traj, &grid, |t, x| {
                let eq = sequence_eq(t)?;
                divergence_to(&eq, x, Divergence::Euclid2)
            })?,
            "bregman_p" => {
                let geo = default_geometry(&game_at(1)?)?;
                series_on_grid(name, traj, &grid, |t, x| {
                    let eq = sequence_eq(t)?;
                    divergence_to(&eq, x, Divergence::BregmanP(&geo))
                })?
            }
            "gap_function" => {
                let game = game_at(1)?;
                let eq = sequence_eq(1)?;
                series_on_grid(name, traj, &grid, |_, x| gap_function(&game, x, &eq))?
            }
            "welfare" => {
                let mut pts = Vec::with_capacity(grid.len());
                for &t in &grid {
                    pts.push((t, social_cost(&game_at(t)?, &traj.profile(t))?));
                }
                MetricSeries {
                    name: name.clone(),
                    points: pts,
                }
            }
            "duality_gap" => {
                let m = setup.matrix().expect("checked").row_cost_matrix();
                series_on_grid(name, traj, &grid, |_, x| Ok(duality_gap(&m, &x[0], &x[1])))?
            }
            "kl_regularized" => {
                if target.is_none() {
                    let spec = setup.matrix().expect("checked");
                    let tau = setup.regularization_tau(config).expect("checked");
                    target = Some(crate::algorithms::regularized_target(spec, tau)?);
                }
                let z = target.as_ref().expect("set above");
                let reference = StrategyProfile::new(vec![z.x.clone(), z.y.clone()]);
                series_on_grid(name, traj, &grid, |_, x| divergence_to(&reference, x, Divergence::Kl))?
            }
            "regret" => {
                let game = match &setup.subject {
                    Subject::Static { game, .. } => game.clone(),
                    Subject::Sequence(_) => {
                        return Err(Error::Config("regret is defined for static games only".into()))
                    }
                };
                let clocks: &[(RegretClock, &str)] = if traj.plays_per_round > 1 {
                    &[(RegretClock::PerPlay, "regret_per_play"), (RegretClock::PerRound, "regret_per_round")]
                } else {
                    &[(RegretClock::PerPlay, "regret")]
                };
                for &(clock, prefix) in clocks {
                    for i in 0..game.n_players() {
                        let r = individual_regret(traj, &game, i, config.regret_resolution, clock)?;
                        let steps = r.cumulative.len();
                        out.push(MetricSeries {
                            name: format!("{prefix}_p{i}"),
                            points: r.envelope_on(&log_grid(steps, config.grid_per_decade)),
                        });
                    }
                }
                continue;
            }
            // recorded by the loop itself
            "tracking_gap" | "tracking_gap_avg" => continue,
            other => return Err(Error::Config(format!("unknown metric '{other}'"))),
        };
        out.push(series);
    }
    Ok(out)
}


// ---------------------------------------------------------------------------
// Files

/// Trajectory CSV: comment header, then `t,metric,value` rows in metric order.
pub fn trajectory_csv(config_hash: &str, seed: u64, traj: &Trajectory) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "# config_hash={config_hash}")?;
    writeln!(buf, "# seed={seed}")?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["t", "metric", "value"])?;
        for m in &traj.metrics {
            for (t, v) in &m.points {
                w.write_record([t.to_string(), m.name.clone(), v.to_string()])?;
            }
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Write via a temporary sibling and rename, so readers never see partial files.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    /// File name relative to the run directory.
    pub path: String,
    pub status: RunStatus,
    #[serde(default)]
    pub error: Option<String>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub library_version: String,
    pub config: serde_json::Value,
    pub runs: Vec<RunRecord>,
    pub wall_clock_secs: f64,
    /// Set when `execute` found a complete manifest and did nothing.
    #[serde(skip)]
    pub cache_hit: bool,
    #[serde(skip)]
    pub dir: PathBuf,
}

impl RunManifest {
    pub fn all_ok(&self) -> bool {
        self.runs.iter().all(|r| r.status == RunStatus::Ok)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut m: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        m.dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn path(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }
}

/// Output root: explicit, else the config's `output_dir`, else `$BANDIT_GAMES_OUT`, else `runs`.
pub fn output_root(config: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn run_dir(config: &RunConfig, root: &Path) -> PathBuf {
    root.join(format!("{}-{}", config.label(), &config.hash()[..12]))
}

#[derive(Debug, Clone, Default)]
pub struct ExecuteOptions {
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub force: bool,
}

/// Run every seed on a bounded pool and write the manifest last. An existing
/// manifest for the same config with every run ok makes this a no-op unless
/// `force` is set.
pub fn execute(config: &RunConfig, options: &ExecuteOptions) -> Result<RunManifest> {
    config.validate()?;
    let hash = config.hash();
    let dir = run_dir(config, &output_root(config, options.out.as_deref()));
    let manifest_path = dir.join("manifest.json");
    if !options.force && manifest_path.exists() {
        if let Ok(mut m) = RunManifest::load(&manifest_path) {
            let complete = m.config_hash == hash
                && m.all_ok()
                && m.runs.len() == config.seeds.len()
                && m.runs.iter().all(|r| dir.join(&r.path).exists());
            if complete {
                m.cache_hit = true;
                return Ok(m);
            }
        }
    }
    fs::create_dir_all(&dir)?;
    let started = Instant::now();
    let threads = options.parallelism.or(config.parallelism).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| {
                let file = format!("seed_{seed}.csv");
                let t0 = Instant::now();
                let outcome = run_seed(config, seed)
                    .and_then(|traj| trajectory_csv(&hash, seed, &traj))
                    .and_then(|bytes| write_atomic(&dir.join(&file), &bytes));
                RunRecord {
                    seed,
                    path: file,
                    status: if outcome.is_ok() { RunStatus::Ok } else { RunStatus::Failed },
                    error: outcome.err().map(|e| e.to_string()),
                    wall_clock_secs: t0.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });
    let manifest = RunManifest {
        config_hash: hash,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::from_str(&config.canonical_json())?,
        runs,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        cache_hit: false,
        dir: dir.clone(),
    };
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Summaries

/// `metric -> [(t, value)]` as stored in a trajectory CSV.
pub type SeriesMap = BTreeMap<String, Vec<(usize, f64)>>;

/// Read a trajectory CSV as `(config_hash, seed, series)`, checking the header.
pub fn read_trajectory_csv(path: &Path) -> Result<(String, u64, SeriesMap)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let bad = || Error::Config(format!("{} lacks the comment header", path.display()));
    let hash = lines.next().and_then(|l| l.strip_prefix("# config_hash=")).ok_or_else(bad)?.to_string();
    let seed = lines
        .next()
        .and_then(|l| l.strip_prefix("# seed="))
        .and_then(|s| s.parse().ok())
        .ok_or_else(bad)?;
    let body: String = lines.collect::<Vec<_>>().join("\n");
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut out = SeriesMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let parse_err = || Error::Config(format!("malformed row in {}", path.display()));
        let t: usize = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(parse_err)?;
        let name = rec.get(1).ok_or_else(parse_err)?.to_string();
        let v: f64 = rec.get(2).and_then(|v| v.parse().ok()).ok_or_else(parse_err)?;
        out.entry(name).or_default().push((t, v));
    }
    Ok((hash, seed, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub metric: String,
    pub t: usize,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Theil-Sen slope of the mean series over the final decade, per metric.
    pub slopes: BTreeMap<String, Option<f64>>,
    /// Some runs failed or are missing; statistics cover the rest.
    pub partial: bool,
    pub csv_path: PathBuf,
    pub txt_path: PathBuf,
}

/// Aggregate per-seed CSVs: mean, median and population std at each grid
/// time, plus a final-decade slope; writes `summary.csv` and `summary.txt`.
pub fn summarize(manifest_path: &Path) -> Result<Summary> {
    let manifest = RunManifest::load(manifest_path)?;
    let mut partial = false;
    let mut per_metric: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for run in &manifest.runs {
        let path = manifest.dir.join(&run.path);
        if run.status != RunStatus::Ok || !path.exists() {
            partial = true;
            continue;
        }
        let (hash, _, series) = read_trajectory_csv(&path)?;
        if hash != manifest.config_hash {
            return Err(Error::Config(format!("{} belongs to another config", path.display())));
        }
        for (name, pts) in series {
            let slot = per_metric.entry(name).or_default();
            for (t, v) in pts {
                slot.entry(t).or_default().push(v);
            }
        }
    }
    let mut rows = Vec::new();
    let mut slopes = BTreeMap::new();
    for (metric, by_t) in &per_metric {
        let mut mean_series = Vec::new();
        for (t, vals) in by_t {
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            let mut sorted = vals.clone();
            rows.push(SummaryRow {
                metric: metric.clone(),
                t: *t,
                n,
                mean,
                median: median(&mut sorted),
                std,
            });
            mean_series.push((*t, mean));
        }
        let t_max = mean_series.last().map_or(1, |p| p.0);
        let slope = match fit_rate_positive(&mean_series, ((t_max / 10).max(1), t_max)) {
            Ok(RateFit::Slope(s)) => Some(s),
            _ => None,
        };
        slopes.insert(metric.clone(), slope);
    }

    let csv_path = manifest.dir.join("summary.csv");
    let mut buf = Vec::new();
    writeln!(buf, "# config_hash={}", manifest.config_hash)?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["metric", "t", "n", "mean", "median", "std", "final_decade_slope"])?;
        for r in &rows {
            let slope = slopes[&r.metric].map_or_else(String::new, |s| s.to_string());
            w.write_record([
                r.metric.clone(),
                r.t.to_string(),
                r.n.to_string(),
                r.mean.to_string(),
                r.median.to_string(),
                r.std.to_string(),
                slope,
            ])?;
        }
        w.flush()?;
    }
    write_atomic(&csv_path, &buf)?;

    let txt_path = manifest.dir.join("summary.txt");
    let mut txt = String::new();
    txt.push_str(&format!("config {}\n", &manifest.config_hash[..12]));
    if partial {
        txt.push_str("WARNING: partial report, some runs failed or are missing\n");
    }
    txt.push_str(&format!(
        "{:<24} {:>8} {:>4} {:>14} {:>14} {:>12} {:>10}\n",
        "metric", "t", "n", "mean", "median", "std", "slope"
    ));
    for metric in per_metric.keys() {
        let last = rows.iter().rev().find(|r| &r.metric == metric).expect("metric has rows");
        let slope = slopes[metric].map_or_else(|| "n/a".to_string(), |s| format!("{s:.3}"));
        txt.push_str(&format!(
            "{:<24} {:>8} {:>4} {:>14.6e} {:>14.6e} {:>12.3e} {:>10}\n",
            metric, last.t, last.n, last.mean, last.median, last.std, slope
        ));
    }
    write_atomic(&txt_path, txt.as_bytes())?;
    Ok(Summary {
        rows,
        slopes,
        partial,
        csv_path,
        txt_path,
    })
}
