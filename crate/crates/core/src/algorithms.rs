//! Learning loops.
//!
//! * [`run_bandit_mirror_descent`]: barrier-regularized mirror descent with
//!   the ellipsoidal one-point estimator, one bandit observation per player
//!   per step.
//! * [`run_linear_variant`]: the same loop for linear-cost games, with the
//!   regularizer weight `tau (t + 1)` in place of `kappa (t + 1)`.
//! * [`run_time_varying`]: the loop against a drifting game sequence.
//! * [`run_entropy_bandit_omd`] and [`run_optimistic_regularized_ew`]:
//!   entropy-regularized simplex dynamics for matrix games.
//! * [`run_exact_gradient_baseline`]: projected gradient descent and
//!   multiplicative weights with exact gradients.
//!
//! Every loop is sequential and deterministic given its seed.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ellipsoidal_estimate_with, momentum_update, simplex_importance_estimate};
use crate::game::{ActionSet, Game, Matrix, NoiseSpec, StrategyProfile, Vector};
use crate::games::{ConstantSequence, GameSequence, MatrixGameSpec};
use crate::geometry::{dikin_point, precondition_matrix, sample_unit_sphere, PlayerGeometry};
use crate::prox::{
    barrier_prox_step, kl_prox_clipped_simplex, regularized_exponentiated_step, solve_regularized_equilibrium,
    ProxStatus, SoftmaxEquilibrium, DEFAULT_PROX_TOL,
};
use crate::rng::SimRng;

pub const GRID_PER_DECADE: usize = 40;

/// Log-spaced sample times in `[1, horizon]`, `per_decade` per factor of ten,
/// always containing 1 and `horizon`.
pub fn log_grid(horizon: usize, per_decade: usize) -> Vec<usize> {
    let mut grid = vec![1];
    if horizon > 1 {
        let per = per_decade.max(1) as f64;
        let mut k = 1usize;
        loop {
            let t = 10f64.powf(k as f64 / per).round() as usize;
            if t >= horizon {
                break;
            }
            if t > *grid.last().unwrap() {
                grid.push(t);
            }
            k += 1;
        }
        grid.push(horizon);
    }
    grid
}

// ---------------------------------------------------------------------------
// Schedules

/// `coef * (t + offset)^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLaw {
    pub coef: f64,
    pub exponent: f64,
    #[serde(default)]
    pub offset: f64,
}

impl PowerLaw {
    pub fn new(coef: f64, exponent: f64) -> Self {
        Self {
            coef,
            exponent,
            offset: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    pub fn at(&self, t: usize) -> f64 {
        self.coef * (t as f64 + self.offset).powf(-self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulePreset {
    MonotoneMain,
    StronglyMonotoneMain,
    LinearTau { horizon: usize },
    Noisy { sigma: f64 },
    Tracking { phi: f64 },
    /// `eta_t = 1 / sqrt(t + 1)`, `delta_t = 0.001`.
    ExperimentPaper,
    Custom,
}

/// Step, exploration and regularization policy. `t` starts at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub preset: SchedulePreset,
    pub eta: PowerLaw,
    pub delta: PowerLaw,
    pub kappa: f64,
    pub tau: f64,
    pub beta: f64,
    pub rho: f64,
}

impl Schedule {
    /// The preset for action dimension `dim` and curvature constant `kappa`.
    pub fn preset(preset: SchedulePreset, dim: usize, kappa: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("schedule dimension must be positive"));
        }
        let d = dim as f64;
        let (eta, delta, tau) = match preset {
            SchedulePreset::MonotoneMain => (PowerLaw::new(1.0 / (2.0 * d), 0.75), PowerLaw::new(1.0, 0.25), 0.0),
            SchedulePreset::StronglyMonotoneMain => (PowerLaw::new(1.0 / (2.0 * d), 0.5), PowerLaw::constant(1.0), 0.0),
            SchedulePreset::LinearTau { horizon } => {
                if horizon == 0 {
                    return Err(Error::usage("linear schedule needs a positive horizon"));
                }
                (
                    PowerLaw::new(1.0 / (2.0 * d), 0.5),
                    PowerLaw::constant(1.0),
                    (horizon as f64).powf(-1.0 / 6.0),
                )
            }
            SchedulePreset::Noisy { sigma } => {
                if !(sigma >= 0.0) {
                    return Err(Error::usage("noise level must be nonnegative"));
                }
                (
                    PowerLaw::new(1.0 / (4.0 * d * d * (1.0 + sigma)), 0.75),
                    PowerLaw::new(1.0, 0.25),
                    0.0,
                )
            }
            SchedulePreset::Tracking { phi } => {
                if !(0.0..1.0).contains(&phi) {
                    return Err(Error::usage("variation exponent phi must lie in [0, 1)"));
                }
                (PowerLaw::new(1.0 / (2.0 * d), (1.0 - phi) / 3.0), PowerLaw::new(1.0, 0.5), 0.0)
            }
            SchedulePreset::ExperimentPaper => (
                PowerLaw {
                    coef: 1.0,
                    exponent: 0.5,
                    offset: 1.0,
                },
                PowerLaw::constant(0.001),
                0.0,
            ),
            SchedulePreset::Custom => (PowerLaw::new(1.0 / (2.0 * d), 0.5), PowerLaw::constant(1.0), 0.0),
        };
        Ok(Self {
            preset,
            eta,
            delta,
            kappa,
            tau,
            beta: 0.0,
            rho: 1.0,
        })
    }

    pub fn eta(&self, t: usize) -> f64 {
        self.eta.at(t)
    }

    pub fn delta(&self, t: usize) -> f64 {
        self.delta.at(t)
    }

    /// Whether `eta(t) d <= 1/2` on `1..=horizon` (checked at both ends,
    /// since a power law is monotone).
    pub fn is_step_safe(&self, dim: usize, horizon: usize) -> bool {
        let d = dim as f64;
        [1, horizon.max(1)].iter().all(|&t| self.eta(t) * d <= 0.5 + 1e-15)
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        for t in [1, horizon.max(1)] {
            let (eta, delta) = (self.eta(t), self.delta(t));
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(Error::usage(format!("step size {eta} at t = {t} is invalid")));
            }
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(Error::usage(format!("exploration radius {delta} at t = {t} outside (0, 1]")));
            }
        }
        if self.kappa < 0.0 || self.tau < 0.0 || self.beta < 0.0 {
            return Err(Error::usage("kappa, tau and beta must be nonnegative"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::usage("momentum weight must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Canonical JSON of the schedule, stored with each trajectory.
    pub fn fingerprint(&self) -> String {
        serde_json::to_string(self).expect("schedule serializes")
    }
}

// ---------------------------------------------------------------------------
// Trajectories

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub points: Vec<(usize, f64)>,
}

/// Everything a run produced. Profiles are the iterates `x^0 .. x^T` (index 0
/// is the starting point, index `t` the iterate after `t` updates); plays are
/// the actions actually submitted, `plays_per_round` per update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub algorithm: String,
    pub seed: u64,
    pub horizon: usize,
    /// Full-coordinate dimension per player.
    pub dims: Vec<usize>,
    pub plays_per_round: usize,
    profiles: Vec<f64>,
    played: Vec<f64>,
    costs: Vec<f64>,
    pub metrics: Vec<MetricSeries>,
    pub schedule: String,
    pub wall_clock_secs: f64,
}

impl Trajectory {
    fn new(algorithm: &str, seed: u64, horizon: usize, dims: Vec<usize>, plays_per_round: usize, schedule: String) -> Self {
        let width: usize = dims.iter().sum();
        let n = dims.len();
        Self {
            algorithm: algorithm.to_string(),
            seed,
            horizon,
            dims,
            plays_per_round,
            profiles: Vec::with_capacity((horizon + 1) * width),
            played: Vec::with_capacity(horizon * plays_per_round * width),
            costs: Vec::with_capacity(horizon * plays_per_round * n),
            metrics: Vec::new(),
            schedule,
            wall_clock_secs: 0.0,
        }
    }

    fn width(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn n_players(&self) -> usize {
        self.dims.len()
    }

    fn push_profile(&mut self, points: &[Vector]) {
        for p in points {
            self.profiles.extend(p.iter());
        }
    }

    fn push_play(&mut self, points: &[Vector], costs: &[f64]) {
        for p in points {
            self.played.extend(p.iter());
        }
        self.costs.extend_from_slice(costs);
    }

    fn unflatten(&self, flat: &[f64]) -> StrategyProfile {
        let mut offset = 0;
        let points = self
            .dims
            .iter()
            .map(|&d| {
                let v = Vector::from_column_slice(&flat[offset..offset + d]);
                offset += d;
                v
            })
            .collect();
        StrategyProfile::new(points)
    }

    /// Number of recorded iterates (`horizon + 1` for a complete run).
    pub fn n_profiles(&self) -> usize {
        self.profiles.len() / self.width()
    }

    pub fn profile(&self, t: usize) -> StrategyProfile {
        let w = self.width();
        self.unflatten(&self.profiles[t * w..(t + 1) * w])
    }

    pub fn final_profile(&self) -> StrategyProfile {
        self.profile(self.n_profiles() - 1)
    }

    pub fn n_plays(&self) -> usize {
        self.played.len() / self.width()
    }

    pub fn played(&self, k: usize) -> StrategyProfile {
        let w = self.width();
        self.unflatten(&self.played[k * w..(k + 1) * w])
    }

    /// Observed cost of player `i` at play `k`.
    pub fn cost(&self, k: usize, i: usize) -> f64 {
        self.costs[k * self.n_players() + i]
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSeries> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// Equality of everything except wall-clock time.
    pub fn same_series(&self, other: &Self) -> bool {
        self.algorithm == other.algorithm
            && self.seed == other.seed
            && self.horizon == other.horizon
            && self.dims == other.dims
            && self.plays_per_round == other.plays_per_round
            && bits_equal(&self.profiles, &other.profiles)
            && bits_equal(&self.played, &other.played)
            && bits_equal(&self.costs, &other.costs)
            && self.metrics == other.metrics
            && self.schedule == other.schedule
    }
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn check_feasible(sets: &[ActionSet], points: &[Vector], what: &str) -> Result<()> {
    for (i, (s, p)) in sets.iter().zip(points).enumerate() {
        if !s.contains(p) {
            return Err(Error::Invariant(format!("{what} of player {i} left its action set")));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Barrier-regularized mirror descent

/// Which proximal term the barrier loop uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// `eta kappa (t + 1) D_p + D_h`, preconditioner scale `t + 1`.
    Main,
    /// `eta tau (t + 1) D_p + D_h`, preconditioner scale `tau (t + 1)`.
    Linear,
    /// `D_h` only; the preconditioner keeps scale `t + 1`.
    Tracking,
}

/// Where the gradient comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feedback {
    /// One noisy cost observation at the perturbed action.
    Bandit(NoiseSpec),
    /// Exact gradient at the iterate, no perturbation.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeVaryingMode {
    Converging,
    Tracking { phi: f64 },
}

struct BarrierRun<'a> {
    name: &'a str,
    sequence: &'a dyn GameSequence,
    geometry: &'a [PlayerGeometry],
    schedule: &'a Schedule,
    horizon: usize,
    rule: UpdateRule,
    feedback: Feedback,
    seed: u64,
    track_gap: bool,
}

fn barrier_loop(run: BarrierRun<'_>) -> Result<Trajectory> {
    let started = Instant::now();
    run.schedule.validate(run.horizon)?;
    let first = run.sequence.game_at(1)?;
    let n = first.n_players();
    if run.geometry.len() != n {
        return Err(Error::usage("one geometry per player is required"));
    }
    for (i, g) in run.geometry.iter().enumerate() {
        let expect = if g.is_embedded_simplex() {
            g.barrier.dim() + 1
        } else {
            g.barrier.dim()
        };
        if expect != first.set(i).dim() {
            return Err(Error::usage(format!("geometry of player {i} does not match its action set")));
        }
    }
    let dims: Vec<usize> = first.sets().iter().map(|s| s.dim()).collect();
    let mut traj = Trajectory::new(run.name, run.seed, run.horizon, dims, 1, run.schedule.fingerprint());
    let mut rng = SimRng::seed_from_u64(run.seed);
    let mut coords: Vec<Vector> = run.geometry.iter().map(|g| g.barrier.analytic_center()).collect();
    let actions = |coords: &[Vector]| -> Vec<Vector> {
        coords.iter().zip(run.geometry).map(|(c, g)| g.to_action(c)).collect()
    };
    traj.push_profile(&actions(&coords));

    let grid = log_grid(run.horizon, GRID_PER_DECADE);
    let mut next_grid = 0;
    let mut gap_sum = 0.0;
    let mut gap_series = Vec::new();
    let mut gap_avg_series = Vec::new();
    let mut eq_hint: Option<StrategyProfile> = None;

    for t in 1..=run.horizon {
        let step = |e: Error| e.at_step(t);
        let game = if t == 1 { first.clone() } else { run.sequence.game_at(t).map_err(step)? };
        let eta = run.schedule.eta(t);
        let tp1 = (t + 1) as f64;
        let (prox_weight, a_scale) = match run.rule {
            UpdateRule::Main => (run.schedule.kappa, tp1),
            UpdateRule::Linear => (run.schedule.tau, run.schedule.tau * tp1),
            UpdateRule::Tracking => (0.0, tp1),
        };

        let mut plays = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        let mut observed = vec![0.0; n];
        match run.feedback {
            Feedback::Bandit(noise) => {
                let delta = run.schedule.delta(t);
                let mut perturbs = Vec::with_capacity(n);
                for (i, geo) in run.geometry.iter().enumerate() {
                    let pc = precondition_matrix(&geo.barrier, &geo.regularizer, &coords[i], eta, a_scale)
                        .map_err(step)?;
                    let z = sample_unit_sphere(&mut rng, coords[i].len());
                    let hat = dikin_point(&coords[i], &pc.a, &z, delta).map_err(step)?;
                    plays.push(geo.to_action(&hat));
                    perturbs.push((pc, z));
                }
                check_feasible(game.sets(), &plays, "played action").map_err(step)?;
                let hat_profile = StrategyProfile::new(plays.clone());
                for (i, (pc, z)) in perturbs.iter().enumerate() {
                    let c = game.observe_bandit_cost(i, &hat_profile, &noise, &mut rng).map_err(step)?;
                    observed[i] = c;
                    grads.push(ellipsoidal_estimate_with(c, pc, z, delta).map_err(step)?.g);
                }
            }
            Feedback::Exact => {
                plays = actions(&coords);
                let profile = StrategyProfile::new(plays.clone());
                for (i, geo) in run.geometry.iter().enumerate() {
                    observed[i] = game.evaluate_cost(i, &profile).map_err(step)?;
                    let g = game.evaluate_gradient(i, &profile).map_err(step)?;
                    grads.push(geo.pull_back_gradient(&g));
                }
            }
        }

        if run.track_gap {
            let eq = run.sequence.equilibrium_at(t, eq_hint.as_ref()).map_err(step)?;
            let hat_profile = StrategyProfile::new(plays.clone());
            let mut gap = 0.0;
            for i in 0..n {
                let g = game.evaluate_gradient(i, &hat_profile).map_err(step)?;
                gap += g.dot(&(&plays[i] - &eq[i]));
            }
            gap_sum += gap;
            eq_hint = Some(eq);
            if next_grid < grid.len() && grid[next_grid] == t {
                gap_series.push((t, gap));
                gap_avg_series.push((t, gap_sum / t as f64));
            }
        }
        if next_grid < grid.len() && grid[next_grid] == t {
            next_grid += 1;
        }
        traj.push_play(&plays, &observed);

        for (i, geo) in run.geometry.iter().enumerate() {
            let res = barrier_prox_step(
                &geo.barrier,
                &geo.regularizer,
                &coords[i],
                &grads[i],
                eta,
                prox_weight,
                tp1,
                DEFAULT_PROX_TOL,
            )
            .map_err(step)?;
            match res.status {
                ProxStatus::Converged => coords[i] = res.x_next,
                ProxStatus::MaxIters => {
                    return Err(Error::NotConverged {
                        what: "barrier prox step",
                        iterations: res.newton_iterations,
                        residual: res.stationarity_residual,
                    }
                    .at_step(t))
                }
                ProxStatus::BoundaryEscape => {
                    return Err(Error::Invariant(format!("prox iterate of player {i} escaped the domain")).at_step(t))
                }
            }
        }
        let xs = actions(&coords);
        check_feasible(game.sets(), &xs, "iterate").map_err(step)?;
        traj.push_profile(&xs);
    }
    if run.track_gap {
        traj.metrics.push(MetricSeries {
            name: "tracking_gap".into(),
            points: gap_series,
        });
        traj.metrics.push(MetricSeries {
            name: "tracking_gap_avg".into(),
            points: gap_avg_series,
        });
    }
    traj.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(traj)
}

/// Euclidean geometry (barrier of the set, `p = 1/2 |x|^2`) for every player.
pub fn default_geometry(game: &Game) -> Result<Vec<PlayerGeometry>> {
    game.sets().iter().map(PlayerGeometry::euclidean_for).collect()
}

/// Largest barrier-coordinate dimension, the `d` of the schedule presets.
pub fn schedule_dim(geometry: &[PlayerGeometry]) -> usize {
    geometry.iter().map(|g| g.barrier.dim()).max().unwrap_or(1)
}

/// Barrier-regularized bandit mirror descent from the analytic center.
pub fn run_bandit_mirror_descent(
    game: &Game,
    geometry: &[PlayerGeometry],
    schedule: &Schedule,
    horizon: usize,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Trajectory> {
    let seq = ConstantSequence::new(game.clone(), None);
    barrier_loop(BarrierRun {
        name: "bandit_md",
        sequence: &seq,
        geometry,
        schedule,
        horizon,
        rule: UpdateRule::Main,
        feedback: Feedback::Bandit(noise),
        seed,
        track_gap: false,
    })
}

/// Options for the linear-cost variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions {
    /// Replaces `tau = T^{-1/6}` when set.
    pub tau: Option<f64>,
    pub feedback: Feedback,
    /// Exploration radius; the variant's analysis leaves it free.
    pub delta: f64,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self {
            tau: None,
            feedback: Feedback::Bandit(NoiseSpec::none()),
            delta: 1.0,
        }
    }
}

/// The linear-cost variant: `eta_t = 1 / (2 d sqrt t)`, proximal weight
/// `eta_t tau (t + 1)` on a strongly convex `p`, `tau = T^{-1/6}`.
pub fn run_linear_variant(
    game: &Game,
    geometry: &[PlayerGeometry],
    horizon: usize,
    options: LinearOptions,
    seed: u64,
) -> Result<Trajectory> {
    if !game.has_linear_costs() {
        return Err(Error::usage(format!("game {} does not have linear costs", game.name())));
    }
    if geometry.iter().any(|g| g.regularizer.mu() <= 0.0) {
        return Err(Error::usage("the linear variant needs a strongly convex regularizer"));
    }
    let mut schedule = Schedule::preset(SchedulePreset::LinearTau { horizon }, schedule_dim(geometry), 0.0)?;
    if let Some(tau) = options.tau {
        schedule.tau = tau;
    }
    schedule.delta = PowerLaw::constant(options.delta);
    let seq = ConstantSequence::new(game.clone(), None);
    barrier_loop(BarrierRun {
        name: "linear_variant",
        sequence: &seq,
        geometry,
        schedule: &schedule,
        horizon,
        rule: UpdateRule::Linear,
        feedback: options.feedback,
        seed,
        track_gap: false,
    })
}

/// Bandit mirror descent against a game sequence. Converging mode runs the
/// main update; tracking mode drops the `D_p` term and records the per-step
/// gap `sum_i <grad c_i^t(x_hat), x_hat_i - x_i^{t,*}>` and its running mean.
pub fn run_time_varying(
    sequence: &dyn GameSequence,
    mode: TimeVaryingMode,
    geometry: &[PlayerGeometry],
    schedule: &Schedule,
    horizon: usize,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Trajectory> {
    let (rule, track_gap) = match mode {
        TimeVaryingMode::Converging => (UpdateRule::Main, false),
        TimeVaryingMode::Tracking { .. } => (UpdateRule::Tracking, true),
    };
    barrier_loop(BarrierRun {
        name: "bandit_md",
        sequence,
        geometry,
        schedule,
        horizon,
        rule,
        feedback: Feedback::Bandit(noise),
        seed,
        track_gap,
    })
}

// ---------------------------------------------------------------------------
// Simplex dynamics for matrix games

/// How the simplex dynamics keep importance weights bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplexFloor {
    /// Keep iterates in `{x_a >= beta}`; plain `1 / x_a` weights.
    Clip,
    /// Unconstrained simplex; weights `1 / (x_a + beta)`.
    Offset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    pub eta: f64,
    pub tau: f64,
    pub beta: f64,
    pub floor: SimplexFloor,
}

impl EntropyParams {
    /// `tau = beta = T^{-1/6}`, `eta = T^{-7/12}`.
    pub fn preset(horizon: usize, floor: SimplexFloor) -> Self {
        let t = horizon.max(1) as f64;
        Self {
            eta: t.powf(-7.0 / 12.0),
            tau: t.powf(-1.0 / 6.0),
            beta: t.powf(-1.0 / 6.0),
            floor,
        }
    }

    fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if !(self.eta > 0.0) || self.tau < 0.0 || self.beta < 0.0 {
            return Err(Error::usage("need eta > 0 and tau, beta >= 0"));
        }
        if self.eta * self.tau >= 1.0 {
            return Err(Error::usage("need eta * tau < 1"));
        }
        if self.floor == SimplexFloor::Clip && self.beta * rows.max(cols) as f64 > 1.0 + 1e-15 {
            return Err(Error::usage("clip floor too large for the action count"));
        }
        Ok(())
    }
}

/// Target of the entropy dynamics: the `tau`-regularized equilibrium of the
/// unit-rescaled row-cost matrix `C`, i.e. `x ∝ exp(-C y / tau)` and
/// `y ∝ exp(C^T x / tau)`.
pub fn regularized_target(spec: &MatrixGameSpec, tau: f64) -> Result<SoftmaxEquilibrium> {
    let c = spec.unit_cost_matrix();
    solve_regularized_equilibrium(&(-c), tau, 1e-13)
}

fn one_hot(k: usize, len: usize) -> Vector {
    let mut v = Vector::zeros(len);
    v[k] = 1.0;
    v
}

struct SimplexSetup {
    cost: Matrix,
    x: Vector,
    y: Vector,
}

fn simplex_setup(spec: &MatrixGameSpec) -> SimplexSetup {
    let cost = spec.unit_cost_matrix();
    let (m, k) = (cost.nrows(), cost.ncols());
    SimplexSetup {
        x: Vector::from_element(m, 1.0 / m as f64),
        y: Vector::from_element(k, 1.0 / k as f64),
        cost,
    }
}

/// Entropy-regularized bandit mirror descent for a matrix game.
///
/// Both players sample an action, observe their own cost in `[0, 1]` (the row
/// player `C[a, b]`, the column player `1 - C[a, b]`, with `C` the row-cost
/// matrix rescaled to `[0, 1]`), build an importance-weighted estimate with
/// the `tau ln x` term and take a KL-proximal step.
pub fn run_entropy_bandit_omd(spec: &MatrixGameSpec, params: EntropyParams, horizon: usize, seed: u64) -> Result<Trajectory> {
    let started = Instant::now();
    let SimplexSetup { cost, mut x, mut y } = simplex_setup(spec);
    let (m, k) = (cost.nrows(), cost.ncols());
    params.validate(m, k)?;
    let (offset, clip) = match params.floor {
        SimplexFloor::Clip => (0.0, params.beta),
        SimplexFloor::Offset => (params.beta, 0.0),
    };
    let mut traj = Trajectory::new(
        "entropy_omd",
        seed,
        horizon,
        vec![m, k],
        1,
        serde_json::to_string(&params).expect("params serialize"),
    );
    let mut rng = SimRng::seed_from_u64(seed);
    traj.push_profile(&[x.clone(), y.clone()]);
    for t in 1..=horizon {
        let step = |e: Error| e.at_step(t);
        let a = rng.categorical(x.as_slice());
        let b = rng.categorical(y.as_slice());
        let (cx, cy) = (cost[(a, b)], 1.0 - cost[(a, b)]);
        let gx = simplex_importance_estimate(a, cx, &x, offset, params.tau, 1.0).map_err(step)?;
        let gy = simplex_importance_estimate(b, cy, &y, offset, params.tau, 1.0).map_err(step)?;
        traj.push_play(&[one_hot(a, m), one_hot(b, k)], &[cx, cy]);
        x = kl_prox_clipped_simplex(&x, &gx.g, params.eta, clip).map_err(step)?;
        y = kl_prox_clipped_simplex(&y, &gy.g, params.eta, clip).map_err(step)?;
        traj.push_profile(&[x.clone(), y.clone()]);
    }
    traj.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimisticParams {
    pub eta: f64,
    pub tau: f64,
    pub beta: f64,
    /// Momentum weight; 1 disables smoothing.
    pub rho: f64,
    pub floor: SimplexFloor,
}

impl OptimisticParams {
    /// `tau = beta = T^{-1/6}`, `eta = T^{-7/12}`, no momentum.
    pub fn preset(horizon: usize, floor: SimplexFloor) -> Self {
        let e = EntropyParams::preset(horizon, floor);
        Self {
            eta: e.eta,
            tau: e.tau,
            beta: e.beta,
            rho: 1.0,
            floor,
        }
    }
}

/// Optimistic entropy-regularized exponentiated weights for a matrix game.
///
/// Each round plays twice: at `z_t`, giving the estimate that moves the base
/// `z_t` to `z_{t+1/2}`, and at `z_{t+1/2}`, giving the estimate that moves the
/// same base to `z_{t+1}`. Estimates carry no `tau ln x` term; regularization
/// enters through the `x^{1 - eta tau}` power. With [`SimplexFloor::Clip`]
/// each output is KL-projected onto `{x_a >= beta}`.
///
/// Plays are recorded in order (two per round, `plays_per_round = 2`);
/// profiles hold the full-step iterates only.
pub fn run_optimistic_regularized_ew(
    spec: &MatrixGameSpec,
    params: OptimisticParams,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    let started = Instant::now();
    let SimplexSetup { cost, mut x, mut y } = simplex_setup(spec);
    let (m, k) = (cost.nrows(), cost.ncols());
    EntropyParams {
        eta: params.eta,
        tau: params.tau,
        beta: params.beta,
        floor: params.floor,
    }
    .validate(m, k)?;
    if !(params.rho > 0.0 && params.rho <= 1.0) {
        return Err(Error::usage("momentum weight must lie in (0, 1]"));
    }
    let (offset, clip) = match params.floor {
        SimplexFloor::Clip => (0.0, params.beta),
        SimplexFloor::Offset => (params.beta, 0.0),
    };
    let mut traj = Trajectory::new(
        "optimistic_ew",
        seed,
        horizon,
        vec![m, k],
        2,
        serde_json::to_string(&params).expect("params serialize"),
    );
    let mut rng = SimRng::seed_from_u64(seed);
    traj.push_profile(&[x.clone(), y.clone()]);
    let mut mx: Option<Vector> = None;
    let mut my: Option<Vector> = None;
    let smooth = |state: &mut Option<Vector>, fresh: Vector| -> Result<Vector> {
        let next = match state.as_ref() {
            Some(prev) => momentum_update(prev, &fresh, params.rho)?,
            None => fresh,
        };
        *state = Some(next.clone());
        Ok(next)
    };
    let project = |v: Vector| -> Result<Vector> {
        if clip > 0.0 {
            kl_prox_clipped_simplex(&v, &Vector::zeros(v.len()), 1.0, clip)
        } else {
            Ok(v)
        }
    };
    for t in 1..=horizon {
        let step = |e: Error| e.at_step(t);
        let mut observe = |xs: &Vector, ys: &Vector, traj: &mut Trajectory| -> Result<(Vector, Vector)> {
            let a = rng.categorical(xs.as_slice());
            let b = rng.categorical(ys.as_slice());
            let (cx, cy) = (cost[(a, b)], 1.0 - cost[(a, b)]);
            traj.push_play(&[one_hot(a, m), one_hot(b, k)], &[cx, cy]);
            Ok((
                simplex_importance_estimate(a, cx, xs, offset, 0.0, 1.0)?.g,
                simplex_importance_estimate(b, cy, ys, offset, 0.0, 1.0)?.g,
            ))
        };
        let (gx, gy) = observe(&x, &y, &mut traj).map_err(step)?;
        let gx = smooth(&mut mx, gx).map_err(step)?;
        let gy = smooth(&mut my, gy).map_err(step)?;
        let x_half = project(regularized_exponentiated_step(&x, &gx, params.eta, params.tau).map_err(step)?).map_err(step)?;
        let y_half = project(regularized_exponentiated_step(&y, &gy, params.eta, params.tau).map_err(step)?).map_err(step)?;
        let (hx, hy) = observe(&x_half, &y_half, &mut traj).map_err(step)?;
        let hx = smooth(&mut mx, hx).map_err(step)?;
        let hy = smooth(&mut my, hy).map_err(step)?;
        x = project(regularized_exponentiated_step(&x, &hx, params.eta, params.tau).map_err(step)?).map_err(step)?;
        y = project(regularized_exponentiated_step(&y, &hy, params.eta, params.tau).map_err(step)?).map_err(step)?;
        traj.push_profile(&[x.clone(), y.clone()]);
    }
    traj.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Exact-gradient baselines

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    /// Multiplicative weights (simplex sets only).
    OmdEntropy,
    /// Simultaneous Euclidean projected gradient descent.
    GdProjected,
}

/// Deterministic full-information dynamics from the sets' centers.
pub fn run_exact_gradient_baseline(game: &Game, method: BaselineMethod, eta: f64, horizon: usize) -> Result<Trajectory> {
    let started = Instant::now();
    if !(eta >= 0.0) {
        return Err(Error::usage("step size must be nonnegative"));
    }
    if !game.has_gradient() {
        return Err(Error::Unsupported(format!("game {} has no gradient oracle", game.name())));
    }
    if method == BaselineMethod::OmdEntropy && !game.sets().iter().all(|s| matches!(s, ActionSet::Simplex { .. })) {
        return Err(Error::usage("multiplicative weights needs simplex action sets"));
    }
    let name = match method {
        BaselineMethod::OmdEntropy => "exact_omd",
        BaselineMethod::GdProjected => "exact_gd",
    };
    let dims = game.sets().iter().map(|s| s.dim()).collect();
    let mut traj = Trajectory::new(name, 0, horizon, dims, 1, format!("{{\"eta\":{eta}}}"));
    let n = game.n_players();
    let mut x = game.center_profile();
    traj.push_profile(&x.points);
    for t in 1..=horizon {
        let step = |e: Error| e.at_step(t);
        let grads = game.operator(&x).map_err(step)?;
        let costs: Vec<f64> = (0..n).map(|i| game.evaluate_cost(i, &x)).collect::<Result<_>>().map_err(step)?;
        traj.push_play(&x.points, &costs);
        let next: Vec<Vector> = (0..n)
            .map(|i| match method {
                BaselineMethod::GdProjected => Ok(game.set(i).project(&(&x[i] - &grads[i] * eta))),
                BaselineMethod::OmdEntropy => {
                    let floor = match game.set(i) {
                        ActionSet::Simplex { floor, .. } => *floor,
                        _ => 0.0,
                    };
                    kl_prox_clipped_simplex(&x[i], &grads[i], eta.max(f64::MIN_POSITIVE), floor)
                }
            })
            .collect::<Result<_>>()
            .map_err(step)?;
        x = StrategyProfile::new(next);
        traj.push_profile(&x.points);
    }
    traj.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(traj)
}
