//! Concrete games with equilibrium oracles and machine-checkable certificates.
//!
//! Cournot competition, bilinear (optionally quadratic-regularized) matrix
//! games, a one-player quadratic on a ball, and drifting Cournot sequences.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    normalize_costs, ActionSet, CostOracle, CostRange, Game, Matrix, Normalization, RangeSource, StrategyProfile,
    Vector,
};
use crate::rng::SimRng;

// ---------------------------------------------------------------------------
// Cournot

/// Per-player Cournot data. Player `i` produces `x_i in [0, C_i]` and pays
/// `c_i = d_i x_i - x_i (a_i - b_i x_tot)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CournotParams {
    pub marginal_cost: Vec<f64>,
    pub intercept: Vec<f64>,
    pub slope: Vec<f64>,
    pub capacity: Vec<f64>,
}

impl CournotParams {
    pub fn new(marginal_cost: Vec<f64>, intercept: Vec<f64>, slope: Vec<f64>, capacity: Vec<f64>) -> Result<Self> {
        let n = marginal_cost.len();
        if n == 0 || intercept.len() != n || slope.len() != n || capacity.len() != n {
            return Err(Error::usage("Cournot parameter vectors must share a nonzero length"));
        }
        if slope.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::usage("Cournot price slopes must be positive"));
        }
        if capacity.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::usage("Cournot capacities must be positive"));
        }
        if marginal_cost.iter().chain(&intercept).any(|v| !v.is_finite()) {
            return Err(Error::usage("Cournot parameters must be finite"));
        }
        Ok(Self {
            marginal_cost,
            intercept,
            slope,
            capacity,
        })
    }

    /// Five firms: marginal cost 40, intercepts (30, 50, 30, 50, 30), slopes
    /// (50, 30, 50, 30, 50), unit capacities. Three firms are inactive at
    /// equilibrium.
    pub fn paper_default() -> Self {
        Self {
            marginal_cost: vec![40.0; 5],
            intercept: vec![30.0, 50.0, 30.0, 50.0, 30.0],
            slope: vec![50.0, 30.0, 50.0, 30.0, 50.0],
            capacity: vec![1.0; 5],
        }
    }

    /// Five firms that all produce at equilibrium
    /// (intercepts 70/75, slope 30, marginal cost 40).
    pub fn all_active() -> Self {
        Self {
            marginal_cost: vec![40.0; 5],
            intercept: vec![70.0, 75.0, 70.0, 75.0, 70.0],
            slope: vec![30.0; 5],
            capacity: vec![1.0; 5],
        }
    }

    pub fn n(&self) -> usize {
        self.slope.len()
    }

    pub fn gradient(&self, i: usize, x: &[f64]) -> f64 {
        let total: f64 = x.iter().sum();
        self.marginal_cost[i] - self.intercept[i] + self.slope[i] * (total + x[i])
    }

    pub fn cost(&self, i: usize, x: &[f64]) -> f64 {
        let total: f64 = x.iter().sum();
        self.marginal_cost[i] * x[i] - x[i] * (self.intercept[i] - self.slope[i] * total)
    }

    /// Exact range of all players' costs over the capacity box.
    ///
    /// For fixed `x_i >= 0` the cost is nondecreasing in the others' total
    /// `s in [0, S_i]`, so the minimum sits at `s = 0` (a convex quadratic in
    /// `x_i`, minimized at its clamped vertex) and the maximum at `s = S_i`
    /// (a convex quadratic, maximized at an endpoint).
    pub fn cost_range(&self) -> (f64, f64) {
        let cap_total: f64 = self.capacity.iter().sum();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n() {
            let (d, a, b, c) = (self.marginal_cost[i], self.intercept[i], self.slope[i], self.capacity[i]);
            let others = cap_total - c;
            let alone = |x: f64| (d - a) * x + b * x * x;
            let vertex = ((a - d) / (2.0 * b)).clamp(0.0, c);
            lo = lo.min(alone(0.0)).min(alone(vertex)).min(alone(c));
            let crowded = |x: f64| alone(x) + b * others * x;
            hi = hi.max(crowded(0.0)).max(crowded(c));
        }
        (lo, hi)
    }

    /// Largest `|grad_i c_i|` over the box (the gradient is affine, so a vertex).
    pub fn gradient_bound(&self) -> f64 {
        let cap_total: f64 = self.capacity.iter().sum();
        (0..self.n())
            .map(|i| {
                let base = self.marginal_cost[i] - self.intercept[i];
                base.abs().max((base + self.slope[i] * (cap_total + self.capacity[i])).abs())
            })
            .fold(0.0, f64::max)
    }

    fn projected_best_response(&self, i: usize, others: f64) -> f64 {
        let br = (self.intercept[i] - self.marginal_cost[i] - self.slope[i] * others) / (2.0 * self.slope[i]);
        br.clamp(0.0, self.capacity[i])
    }

    /// Worst KKT violation in gradient units: `|g|` at interior coordinates,
    /// `max(0, -g)` at zero, `max(0, g)` at capacity.
    pub fn kkt_residual(&self, x: &[f64]) -> f64 {
        (0..self.n())
            .map(|i| {
                let g = self.gradient(i, x);
                if x[i] <= 0.0 {
                    (-g).max(0.0)
                } else if x[i] >= self.capacity[i] {
                    g.max(0.0)
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug)]
struct CournotOracle {
    params: CournotParams,
}

fn scalar_profile(x: &StrategyProfile) -> Vec<f64> {
    x.iter().map(|p| p[0]).collect()
}

impl CostOracle for CournotOracle {
    fn cost(&self, player: usize, x: &StrategyProfile) -> f64 {
        self.params.cost(player, &scalar_profile(x))
    }

    fn gradient(&self, player: usize, x: &StrategyProfile) -> Option<Vector> {
        Some(Vector::from_element(1, self.params.gradient(player, &scalar_profile(x))))
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

fn raw_cournot(params: &CournotParams) -> Result<Game> {
    let sets = params
        .capacity
        .iter()
        .map(|c| ActionSet::interval(0.0, *c))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = params.cost_range();
    Ok(Game::new(
        "cournot",
        sets,
        Arc::new(CournotOracle { params: params.clone() }),
    )
    .with_smoothness(params.slope.iter().map(|b| 2.0 * b).collect())
    .with_gradient_bound(params.gradient_bound())
    .with_cost_range(CostRange {
        lo,
        hi,
        source: RangeSource::Analytic,
    })
    .monotone(true))
}

/// Cournot game over the boxes `[0, C_i]`; with `normalize` the costs are
/// mapped to `[0, 1]` by one affine map shared by every player (a per-player
/// map could break monotonicity of the joint operator).
pub fn make_cournot(params: &CournotParams, normalize: bool) -> Result<Game> {
    let game = raw_cournot(params)?;
    if normalize {
        normalize_costs(&game)
    } else {
        Ok(game)
    }
}

/// Curvature constant for `p = 1/2 x^2`: `c_i - kappa p` stays convex in the
/// own action with `kappa = min_i b_i`, in the game's units.
pub fn cournot_kappa(params: &CournotParams, game: &Game) -> f64 {
    params.slope.iter().copied().fold(f64::INFINITY, f64::min) * game.cost_scale()
}

#[derive(Debug, Clone)]
pub struct CournotEquilibrium {
    pub profile: StrategyProfile,
    pub sweeps: usize,
    pub kkt_residual: f64,
    /// Ratio of the last two sweep-to-sweep changes.
    pub contraction: f64,
}

/// Nash equilibrium by Gauss-Seidel projected best responses from zero.
///
/// Dividing each gradient by its slope shows the game has the strictly convex
/// potential `sum (d_i - a_i) x_i / b_i + (x_tot^2 + |x|^2) / 2`, and the
/// sweep is exact coordinate descent on it, so it converges.
pub fn cournot_nash(params: &CournotParams, tol: f64) -> Result<CournotEquilibrium> {
    cournot_nash_from(params, tol, &vec![0.0; params.n()])
}

pub fn cournot_nash_from(params: &CournotParams, tol: f64, start: &[f64]) -> Result<CournotEquilibrium> {
    const MAX_SWEEPS: usize = 1_000_000;
    if start.len() != params.n() {
        return Err(Error::usage("start point has the wrong number of players"));
    }
    let mut x: Vec<f64> = start
        .iter()
        .zip(&params.capacity)
        .map(|(v, c)| v.clamp(0.0, *c))
        .collect();
    let mut total: f64 = x.iter().sum();
    let mut prev_change = f64::NAN;
    let mut contraction = 0.0;
    for sweep in 1..=MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for i in 0..params.n() {
            let next = params.projected_best_response(i, total - x[i]);
            change = change.max((next - x[i]).abs());
            total += next - x[i];
            x[i] = next;
        }
        total = x.iter().sum();
        if prev_change > 0.0 {
            contraction = change / prev_change;
        }
        prev_change = change;
        let residual = params.kkt_residual(&x);
        if residual <= tol {
            return Ok(CournotEquilibrium {
                profile: StrategyProfile::new(x.iter().map(|v| Vector::from_element(1, *v)).collect()),
                sweeps: sweep,
                kkt_residual: residual,
                contraction,
            });
        }
    }
    Err(Error::NotConverged {
        what: "Cournot best-response iteration",
        iterations: MAX_SWEEPS,
        residual: params.kkt_residual(&x),
    })
}

// ---------------------------------------------------------------------------
// Matrix games

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `min_x max_y x^T A y`.
    #[default]
    RowMinimizes,
    /// `max_x min_y x^T A y`.
    RowMaximizes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSpec {
    pub matrix: Matrix,
    pub orientation: Orientation,
    /// Entropy regularization level used by the entropy dynamics' target.
    pub tau: Option<f64>,
    /// Weight `w` of the `w/2 |x|^2` and `w/2 |y|^2` terms.
    pub quad_weight: f64,
}

impl MatrixGameSpec {
    pub fn new(matrix: Matrix) -> Self {
        Self {
            matrix,
            orientation: Orientation::RowMinimizes,
            tau: None,
            quad_weight: 0.0,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let k = rows.first().map_or(0, |r| r.len());
        if m == 0 || k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::usage("matrix rows must be nonempty and of equal length"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("matrix entries must be finite"));
        }
        Ok(Self::new(Matrix::from_row_slice(m, k, &flat)))
    }

    /// `[[1, 2], [3, 4]]` with the row player minimizing.
    pub fn paper_default() -> Self {
        Self::new(Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]))
    }

    pub fn with_quad_weight(mut self, w: f64) -> Self {
        self.quad_weight = w;
        self
    }

    pub fn with_orientation(mut self, o: Orientation) -> Self {
        self.orientation = o;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    /// The matrix `M` such that the row player minimizes `x^T M y`.
    pub fn row_cost_matrix(&self) -> Matrix {
        match self.orientation {
            Orientation::RowMinimizes => self.matrix.clone(),
            Orientation::RowMaximizes => -self.matrix.clone(),
        }
    }

    pub fn entry_range(&self) -> (f64, f64) {
        (self.matrix.min(), self.matrix.max())
    }

    /// The row-cost matrix rescaled entrywise to `[0, 1]`; a constant matrix
    /// maps to zero.
    pub fn unit_cost_matrix(&self) -> Matrix {
        let m = self.row_cost_matrix();
        let (lo, hi) = (m.min(), m.max());
        if hi > lo {
            m.map(|v| (v - lo) / (hi - lo))
        } else {
            Matrix::zeros(m.nrows(), m.ncols())
        }
    }
}

#[derive(Debug)]
struct MatrixOracle {
    m: Matrix,
    w: f64,
}

impl CostOracle for MatrixOracle {
    fn cost(&self, player: usize, x: &StrategyProfile) -> f64 {
        let bilinear = x[0].dot(&(&self.m * &x[1]));
        let own = 0.5 * self.w * x[player].norm_squared();
        if player == 0 {
            bilinear + own
        } else {
            -bilinear + own
        }
    }

    fn gradient(&self, player: usize, x: &StrategyProfile) -> Option<Vector> {
        let g = if player == 0 {
            &self.m * &x[1]
        } else {
            -(self.m.transpose() * &x[0])
        };
        Some(g + &x[player] * self.w)
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

/// Two-player game on simplices: the row player pays `x^T M y + w/2 |x|^2`,
/// the column player `-x^T M y + w/2 |y|^2`, with `M` the row-cost matrix.
///
/// The declared cost range covers both players, so [`normalize_costs`] gives
/// one shared affine map.
pub fn make_matrix_game(spec: &MatrixGameSpec) -> Result<Game> {
    if spec.quad_weight < 0.0 {
        return Err(Error::usage("quadratic weight must be nonnegative"));
    }
    let m = spec.row_cost_matrix();
    let sets = vec![
        ActionSet::simplex(m.nrows(), 0.0)?,
        ActionSet::simplex(m.ncols(), 0.0)?,
    ];
    let (lo, hi) = (m.min().min(-m.max()), m.max().max(-m.min()));
    let w = spec.quad_weight;
    let lo = lo + 0.5 * w * (1.0 / m.nrows().max(m.ncols()) as f64);
    let hi = hi + 0.5 * w;
    let norm = m.norm();
    let name = if w > 0.0 { "matrix_regularized" } else { "matrix" };
    Ok(Game::new(name, sets, Arc::new(MatrixOracle { m, w }))
        .with_smoothness(vec![w, w])
        .with_gradient_bound(norm + w)
        .with_cost_range(CostRange {
            lo,
            hi,
            source: RangeSource::Analytic,
        })
        .monotone(true)
        .linear(w == 0.0))
}

#[derive(Debug, Clone)]
pub struct MatrixEquilibrium {
    pub x: Vector,
    pub y: Vector,
    /// Value `x^T M y` for the row-cost matrix `M`.
    pub value: f64,
}

/// Equilibrium of the quadratically regularized matrix game (`w > 0`) by
/// projected gradient on its strongly monotone operator, with step
/// `w / (w + |M|)^2`, which makes the iteration a contraction.
pub fn regularized_matrix_equilibrium(spec: &MatrixGameSpec, tol: f64) -> Result<StrategyProfile> {
    let w = spec.quad_weight;
    if !(w > 0.0) {
        return Err(Error::usage("regularized equilibrium needs a positive quadratic weight"));
    }
    let m = spec.row_cost_matrix();
    let (rows, cols) = (m.nrows(), m.ncols());
    let sx = ActionSet::simplex(rows, 0.0)?;
    let sy = ActionSet::simplex(cols, 0.0)?;
    let lip = w + m.norm();
    let eta = w / (lip * lip);
    let mut x = sx.center();
    let mut y = sy.center();
    const MAX_ITERS: usize = 10_000_000;
    for _ in 0..MAX_ITERS {
        let gx = &m * &y + &x * w;
        let gy = -(m.transpose() * &x) + &y * w;
        let nx = sx.project(&(&x - gx * eta));
        let ny = sy.project(&(&y - gy * eta));
        let change = (&nx - &x).amax().max((&ny - &y).amax());
        x = nx;
        y = ny;
        // contraction factor sqrt(1 - (w / lip)^2) bounds the remaining distance
        let q = (1.0 - (w / lip).powi(2)).sqrt();
        if change * q / (1.0 - q) <= tol {
            return Ok(StrategyProfile::new(vec![x, y]));
        }
    }
    Err(Error::NotConverged {
        what: "regularized matrix equilibrium",
        iterations: MAX_ITERS,
        residual: f64::NAN,
    })
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|mask| mask.count_ones() as usize == size)
        .map(|mask| (0..n).filter(|b| mask & (1 << b) != 0).collect())
        .collect()
}

/// Solve `sum_{j in cols} K[r, j] y_j = v` for `r in rows`, `sum y = 1`.
fn indifference(k: &Matrix, rows: &[usize], cols: &[usize]) -> Option<(Vec<f64>, f64)> {
    let s = rows.len();
    let mut sys = Matrix::zeros(s + 1, s + 1);
    let mut rhs = Vector::zeros(s + 1);
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            sys[(r, c)] = k[(i, j)];
        }
        sys[(r, s)] = -1.0;
    }
    for c in 0..s {
        sys[(s, c)] = 1.0;
    }
    rhs[s] = 1.0;
    let lu = sys.lu();
    let sol = lu.solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, s).iter().copied().collect(), sol[s]))
}

/// Equilibrium of `min_x max_y x^T M y` by support enumeration over equal-size
/// supports (practical up to about 10 actions per side).
pub fn matrix_equilibrium(m: &Matrix) -> Result<MatrixEquilibrium> {
    const EPS: f64 = 1e-10;
    let (rows, cols) = (m.nrows(), m.ncols());
    if rows > 12 || cols > 12 {
        return Err(Error::usage("support enumeration is limited to 12 actions per player"));
    }
    let mt = m.transpose();
    for size in 1..=rows.min(cols) {
        for support_x in subsets(rows, size) {
            for support_y in subsets(cols, size) {
                let Some((yv, v)) = indifference(m, &support_x, &support_y) else {
                    continue;
                };
                let Some((xv, w)) = indifference(&mt, &support_y, &support_x) else {
                    continue;
                };
                if yv.iter().chain(&xv).any(|p| *p < -EPS) || (v - w).abs() > 1e-8 * (1.0 + v.abs()) {
                    continue;
                }
                let mut x = Vector::zeros(rows);
                let mut y = Vector::zeros(cols);
                for (k, &i) in support_x.iter().enumerate() {
                    x[i] = xv[k].max(0.0);
                }
                for (k, &j) in support_y.iter().enumerate() {
                    y[j] = yv[k].max(0.0);
                }
                x /= x.sum();
                y /= y.sum();
                let row_costs = m * &y;
                let col_gains = mt.clone() * &x;
                let value = x.dot(&row_costs);
                if row_costs.min() >= value - 1e-9 && col_gains.max() <= value + 1e-9 {
                    return Ok(MatrixEquilibrium { x, y, value });
                }
            }
        }
    }
    Err(Error::Numeric(
        "support enumeration found no equilibrium (degenerate game)".into(),
    ))
}

// ---------------------------------------------------------------------------
// Quadratic on a ball

#[derive(Debug)]
struct QuadraticOracle {
    target: Vector,
}

impl CostOracle for QuadraticOracle {
    fn cost(&self, player: usize, x: &StrategyProfile) -> f64 {
        (&x[player] - &self.target).norm_squared()
    }

    fn gradient(&self, player: usize, x: &StrategyProfile) -> Option<Vector> {
        Some((&x[player] - &self.target) * 2.0)
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

/// One player minimizing `|x - target|^2` over the unit ball of `R^dim`.
pub fn make_quadratic_ball(dim: usize, target: Vector) -> Result<Game> {
    if target.len() != dim {
        return Err(Error::usage("target dimension differs from the ball"));
    }
    let set = ActionSet::unit_ball(dim)?;
    let dist = target.norm();
    let lo = (dist - 1.0).max(0.0).powi(2);
    let hi = (dist + 1.0).powi(2);
    Ok(Game::new(
        "quadratic_ball",
        vec![set],
        Arc::new(QuadraticOracle { target }),
    )
    .with_smoothness(vec![2.0])
    .with_gradient_bound(2.0 * (dist + 1.0))
    .with_cost_range(CostRange {
        lo,
        hi,
        source: RangeSource::Analytic,
    })
    .monotone(true))
}

// ---------------------------------------------------------------------------
// Time-varying games

/// A sequence of games `t -> G_t` (t starts at 1) sharing action sets.
pub trait GameSequence: Send + Sync {
    fn game_at(&self, t: usize) -> Result<Game>;

    /// Nash equilibrium of the frozen game at step `t`, warm-started from
    /// `hint` when available.
    fn equilibrium_at(&self, t: usize, hint: Option<&StrategyProfile>) -> Result<StrategyProfile>;

    /// Equilibrium of the limit game, when the sequence converges.
    fn limit_equilibrium(&self) -> Option<StrategyProfile> {
        None
    }
}

/// The same game at every step.
pub struct ConstantSequence {
    game: Game,
    equilibrium: Option<StrategyProfile>,
}

impl ConstantSequence {
    pub fn new(game: Game, equilibrium: Option<StrategyProfile>) -> Self {
        Self { game, equilibrium }
    }
}

impl GameSequence for ConstantSequence {
    fn game_at(&self, _t: usize) -> Result<Game> {
        Ok(self.game.clone())
    }

    fn equilibrium_at(&self, _t: usize, _hint: Option<&StrategyProfile>) -> Result<StrategyProfile> {
        self.equilibrium
            .clone()
            .ok_or_else(|| Error::Unsupported("constant sequence has no equilibrium oracle".into()))
    }

    fn limit_equilibrium(&self) -> Option<StrategyProfile> {
        self.equilibrium.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    /// `a_i(t) = a_i + k t^{-(1 - alpha)}`; the cumulative intercept drift
    /// summed over players grows like `n k T^alpha / alpha`.
    Decaying { alpha: f64, k: f64 },
    /// `a_i(t) = a_i + amplitude sin(2 pi t / period)`.
    Sinusoidal { amplitude: f64, period: f64 },
}

impl Drift {
    pub fn offset(&self, t: usize) -> f64 {
        let t = t as f64;
        match *self {
            Drift::Decaying { alpha, k } => k * t.powf(-(1.0 - alpha)),
            Drift::Sinusoidal { amplitude, period } => amplitude * (2.0 * std::f64::consts::PI * t / period).sin(),
        }
    }

    /// Bound on `|offset(t)|` over `t >= 1`.
    fn max_abs(&self) -> f64 {
        match *self {
            Drift::Decaying { k, .. } => k.abs(),
            Drift::Sinusoidal { amplitude, .. } => amplitude.abs(),
        }
    }
}

/// Cournot competition whose intercepts drift over time. All steps share one
/// cost normalization covering every intercept the drift can reach.
#[derive(Debug, Clone)]
pub struct TimeVaryingCournot {
    pub base: CournotParams,
    pub drift: Drift,
    normalization: Option<Normalization>,
}

impl TimeVaryingCournot {
    pub fn params_at(&self, t: usize) -> CournotParams {
        let off = self.drift.offset(t);
        let mut p = self.base.clone();
        for a in &mut p.intercept {
            *a += off;
        }
        p
    }

    /// Kappa for `p = 1/2 x^2` in the sequence's shared units.
    pub fn kappa(&self) -> f64 {
        let scale = self.normalization.map_or(1.0, |n| n.scale());
        self.base.slope.iter().copied().fold(f64::INFINITY, f64::min) * scale
    }

    pub fn cost_scale(&self) -> f64 {
        self.normalization.map_or(1.0, |n| n.scale())
    }

    /// `sum_t sum_i max_x |grad c_i^{t+1} - grad c_i^t|` in raw units over `t < horizon`.
    pub fn gradient_drift(&self, horizon: usize) -> f64 {
        let n = self.base.n() as f64;
        (1..horizon)
            .map(|t| n * (self.drift.offset(t + 1) - self.drift.offset(t)).abs())
            .sum()
    }

    /// `sum_t sum_i max_x |grad c_i - grad c_i^t|` against the undrifted game.
    pub fn drift_from_limit(&self, horizon: usize) -> f64 {
        let n = self.base.n() as f64;
        (1..=horizon).map(|t| n * self.drift.offset(t).abs()).sum()
    }

    /// Equilibrium path and its variation `sum_t |x^{t+1,*} - x^{t,*}|`.
    pub fn variation_path(&self, horizon: usize, tol: f64) -> Result<(Vec<StrategyProfile>, f64)> {
        let mut path: Vec<StrategyProfile> = Vec::with_capacity(horizon);
        let mut total = 0.0;
        for t in 1..=horizon {
            let eq = self.equilibrium_at_tol(t, path.last(), tol)?;
            if let Some(prev) = path.last() {
                total += (Vector::from_vec(prev.flatten()) - Vector::from_vec(eq.flatten())).norm();
            }
            path.push(eq);
        }
        Ok((path, total))
    }

    fn equilibrium_at_tol(&self, t: usize, hint: Option<&StrategyProfile>, tol: f64) -> Result<StrategyProfile> {
        let params = self.params_at(t);
        let start = hint.map_or_else(|| vec![0.0; params.n()], |h| h.flatten());
        Ok(cournot_nash_from(&params, tol, &start)?.profile)
    }
}

impl GameSequence for TimeVaryingCournot {
    fn game_at(&self, t: usize) -> Result<Game> {
        let mut game = raw_cournot(&self.params_at(t))?;
        if let Some(n) = self.normalization {
            game = normalize_costs(&game.with_cost_range(CostRange {
                lo: n.lo,
                hi: n.hi,
                source: RangeSource::Analytic,
            }))?;
        }
        Ok(game)
    }

    fn equilibrium_at(&self, t: usize, hint: Option<&StrategyProfile>) -> Result<StrategyProfile> {
        self.equilibrium_at_tol(t, hint, 1e-10)
    }

    fn limit_equilibrium(&self) -> Option<StrategyProfile> {
        match self.drift {
            Drift::Decaying { .. } => cournot_nash(&self.base, 1e-10).ok().map(|e| e.profile),
            Drift::Sinusoidal { .. } => None,
        }
    }
}

/// Drifting Cournot sequence; with `normalize` every step uses the cost range
/// of the base game widened to every reachable intercept.
pub fn make_time_varying_cournot(base: &CournotParams, drift: Drift, normalize: bool) -> Result<TimeVaryingCournot> {
    let base = CournotParams::new(
        base.marginal_cost.clone(),
        base.intercept.clone(),
        base.slope.clone(),
        base.capacity.clone(),
    )?;
    if let Drift::Sinusoidal { period, .. } = drift {
        if !(period > 0.0) {
            return Err(Error::usage("sinusoidal drift needs a positive period"));
        }
    }
    if let Drift::Decaying { alpha, .. } = drift {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::usage("decay exponent alpha must lie in [0, 1)"));
        }
    }
    let normalization = if normalize {
        let reach = drift.max_abs();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for off in [-reach, 0.0, reach] {
            let mut p = base.clone();
            for a in &mut p.intercept {
                *a += off;
            }
            let (l, h) = p.cost_range();
            lo = lo.min(l);
            hi = hi.max(h);
        }
        if !(hi > lo) {
            return Err(Error::DegenerateRange { lo, hi });
        }
        Some(Normalization { lo, hi })
    } else {
        None
    };
    Ok(TimeVaryingCournot {
        base,
        drift,
        normalization,
    })
}

// ---------------------------------------------------------------------------
// Certificates

#[derive(Debug, Clone, Serialize)]
pub struct SmoothnessCheck {
    pub declared: f64,
    /// Largest sampled `|grad_i c_i(u) - grad_i c_i(v)| / |u - v|` over own-action moves.
    pub sampled: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub game: String,
    pub samples: usize,
    pub monotonicity_min: f64,
    pub smoothness: Vec<SmoothnessCheck>,
    pub kappa: Option<f64>,
    /// Minimum over sampled own-action pairs of
    /// `<grad c_i(u) - grad c_i(v), u - v> / |u - v|^2 - kappa`.
    pub kappa_slack: Option<f64>,
}

impl Certificate {
    pub fn passes(&self) -> bool {
        self.monotonicity_min >= -1e-9
            && self
                .smoothness
                .iter()
                .all(|s| s.sampled <= s.declared * (1.0 + 1e-9) + 1e-12)
            && self.kappa_slack.is_none_or(|s| s >= -1e-9)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "game: {} ({} samples)", self.game, self.samples)?;
        writeln!(f, "  monotonicity min <F(x)-F(y), x-y>: {:.3e}", self.monotonicity_min)?;
        for (i, s) in self.smoothness.iter().enumerate() {
            writeln!(f, "  player {i}: smoothness declared {:.6} sampled {:.6}", s.declared, s.sampled)?;
        }
        match (self.kappa, self.kappa_slack) {
            (Some(k), Some(s)) => writeln!(f, "  kappa {k:.6}: convexity slack {s:.3e}")?,
            _ => writeln!(f, "  kappa: not applicable")?,
        }
        write!(f, "  verdict: {}", if self.passes() { "pass" } else { "FAIL" })
    }
}

/// Sampled monotonicity, smoothness and kappa-convexity certificate.
pub fn certify(game: &Game, kappa: Option<f64>, samples: usize, rng: &mut SimRng) -> Result<Certificate> {
    let monotonicity_min = crate::game::check_monotonicity(game, samples, rng)?;
    let declared = game.smoothness();
    let n = game.n_players();
    let mut sampled = vec![0.0f64; n];
    let mut slack = f64::INFINITY;
    for _ in 0..samples {
        let x = game.sample_profile(rng);
        for i in 0..n {
            let u = game.set(i).sample(rng);
            let v = game.set(i).sample(rng);
            let du = &u - &v;
            let dist2 = du.norm_squared();
            if dist2 < 1e-16 {
                continue;
            }
            let gu = game.evaluate_gradient(i, &x.with_player(i, u))?;
            let gv = game.evaluate_gradient(i, &x.with_player(i, v))?;
            let dg = gu - gv;
            sampled[i] = sampled[i].max(dg.norm() / dist2.sqrt());
            if let Some(k) = kappa {
                slack = slack.min(dg.dot(&du) / dist2 - k);
            }
        }
    }
    Ok(Certificate {
        game: game.name().to_string(),
        samples,
        monotonicity_min,
        smoothness: declared
            .into_iter()
            .zip(sampled)
            .map(|(declared, sampled)| SmoothnessCheck { declared, sampled })
            .collect(),
        kappa,
        kappa_slack: kappa.map(|_| slack),
    })
}

// ---------------------------------------------------------------------------
// Registry

/// A named library game with the constants the algorithms need.
#[derive(Debug, Clone)]
pub struct LibraryGame {
    pub game: Game,
    /// Curvature constant for `p = 1/2 |x|^2` (0 when the game is not strongly convex).
    pub kappa: f64,
    pub equilibrium: Option<StrategyProfile>,
}

pub const LIBRARY_GAMES: &[(&str, &str)] = &[
    ("cournot_paper", "five-firm Cournot, marginal cost 40, normalized costs"),
    ("cournot_all_active", "five-firm Cournot where every firm produces, normalized costs"),
    ("matrix_paper", "zero-sum matrix game [[1, 2], [3, 4]], row player minimizes"),
    ("matrix_regularized", "the same matrix game plus (|x|^2 + |y|^2) / 2"),
    ("quadratic_ball", "one player minimizing |x|^2 over the unit disc"),
];

pub fn library_game(name: &str) -> Result<LibraryGame> {
    match name {
        "cournot_paper" | "cournot_all_active" => {
            let params = if name == "cournot_paper" {
                CournotParams::paper_default()
            } else {
                CournotParams::all_active()
            };
            let game = make_cournot(&params, true)?;
            let kappa = cournot_kappa(&params, &game);
            let equilibrium = Some(cournot_nash(&params, 1e-12)?.profile);
            Ok(LibraryGame {
                game,
                kappa,
                equilibrium,
            })
        }
        "matrix_paper" => {
            let spec = MatrixGameSpec::paper_default();
            let eq = matrix_equilibrium(&spec.row_cost_matrix())?;
            Ok(LibraryGame {
                game: make_matrix_game(&spec)?,
                kappa: 0.0,
                equilibrium: Some(StrategyProfile::new(vec![eq.x, eq.y])),
            })
        }
        "matrix_regularized" => {
            let spec = MatrixGameSpec::paper_default().with_quad_weight(1.0);
            Ok(LibraryGame {
                game: make_matrix_game(&spec)?,
                kappa: 1.0,
                equilibrium: Some(regularized_matrix_equilibrium(&spec, 1e-12)?),
            })
        }
        "quadratic_ball" => Ok(LibraryGame {
            game: make_quadratic_ball(2, Vector::zeros(2))?,
            kappa: 2.0,
            equilibrium: Some(StrategyProfile::new(vec![Vector::zeros(2)])),
        }),
        other => Err(Error::Config(format!(
            "unknown game '{other}' (known: {})",
            LIBRARY_GAMES.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(v: &[f64]) -> StrategyProfile {
        StrategyProfile::new(v.iter().map(|x| Vector::from_element(1, *x)).collect())
    }

    #[test]
    fn cournot_zero_production_costs_nothing() {
        let g = make_cournot(&CournotParams::paper_default(), false).unwrap();
        assert_eq!(g.evaluate_cost(0, &profile(&[0.0; 5])).unwrap(), 0.0);
    }

    #[test]
    fn cournot_gradient_matches_finite_differences() {
        let params = CournotParams::paper_default();
        let mut rng = SimRng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform_in(0.01, 0.99)).collect();
            for i in 0..5 {
                let h = 1e-5;
                let mut up = x.clone();
                let mut dn = x.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (params.cost(i, &up) - params.cost(i, &dn)) / (2.0 * h);
                let g = params.gradient(i, &x);
                assert!((fd - g).abs() <= 1e-5 * g.abs().max(1.0));
            }
        }
    }

    #[test]
    fn cournot_paper_equilibrium() {
        let eq = cournot_nash(&CournotParams::paper_default(), 1e-12).unwrap();
        let expect = [0.0, 1.0 / 9.0, 0.0, 1.0 / 9.0, 0.0];
        for (a, b) in eq.profile.flatten().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(eq.kkt_residual <= 1e-12);
    }

    #[test]
    fn symmetric_duopoly() {
        let p = CournotParams::new(vec![1.0; 2], vec![11.0; 2], vec![1.0; 2], vec![100.0; 2]).unwrap();
        let eq = cournot_nash(&p, 1e-12).unwrap();
        for v in eq.profile.flatten() {
            assert!((v - 10.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn unprofitable_market_has_zero_equilibrium() {
        let p = CournotParams::new(vec![40.0; 3], vec![30.0, 40.0, 10.0], vec![2.0; 3], vec![1.0; 3]).unwrap();
        assert_eq!(cournot_nash(&p, 1e-12).unwrap().profile.flatten(), vec![0.0; 3]);
    }

    #[test]
    fn all_active_preset_is_interior() {
        let eq = cournot_nash(&CournotParams::all_active(), 1e-12).unwrap();
        assert!(eq.profile.flatten().iter().all(|v| *v > 0.05 && *v < 0.95));
    }

    #[test]
    fn nash_is_start_invariant() {
        let params = CournotParams::paper_default();
        let reference = cournot_nash(&params, 1e-11).unwrap().profile.flatten();
        let mut rng = SimRng::seed_from_u64(8);
        for _ in 0..20 {
            let start: Vec<f64> = (0..5).map(|_| rng.uniform()).collect();
            let eq = cournot_nash_from(&params, 1e-11, &start).unwrap();
            for (a, b) in eq.profile.flatten().iter().zip(&reference) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn analytic_range_bounds_samples() {
        let params = CournotParams::paper_default();
        let (lo, hi) = params.cost_range();
        let g = make_cournot(&params, true).unwrap();
        let mut rng = SimRng::seed_from_u64(5);
        let mut seen_lo = f64::INFINITY;
        let mut seen_hi = f64::NEG_INFINITY;
        for _ in 0..20_000 {
            let x = g.sample_profile(&mut rng);
            for i in 0..5 {
                let c = g.evaluate_cost(i, &x).unwrap();
                assert!((-1e-12..=1.0 + 1e-12).contains(&c));
                let raw = g.raw_cost(i, &x).unwrap();
                seen_lo = seen_lo.min(raw);
                seen_hi = seen_hi.max(raw);
            }
        }
        assert!(lo <= seen_lo && seen_hi <= hi);
        // both ends are attained
        assert!((lo - (-10.0 / 12.0)).abs() < 1e-12 && (hi - 260.0).abs() < 1e-12);
        assert!((params.cost(0, &[1.0; 5]) - hi).abs() < 1e-12);
        assert!((params.cost(1, &[0.0, 1.0 / 6.0, 0.0, 0.0, 0.0]) - lo).abs() < 1e-12);
    }

    #[test]
    fn cournot_certificate_passes() {
        let params = CournotParams::paper_default();
        let g = make_cournot(&params, true).unwrap();
        let cert = certify(&g, Some(cournot_kappa(&params, &g)), 2000, &mut SimRng::seed_from_u64(1)).unwrap();
        assert!(cert.passes(), "{cert}");
        assert!(cert.monotonicity_min >= 0.0);
    }

    #[test]
    fn matrix_game_costs_and_gradients() {
        let g = make_matrix_game(&MatrixGameSpec::paper_default()).unwrap();
        let e = |k: usize| {
            let mut v = Vector::zeros(2);
            v[k] = 1.0;
            v
        };
        let x = StrategyProfile::new(vec![e(0), e(1)]);
        assert_eq!(g.evaluate_cost(0, &x).unwrap(), 2.0);
        let u = StrategyProfile::new(vec![Vector::from_element(2, 0.5), Vector::from_element(2, 0.5)]);
        assert!((g.evaluate_cost(0, &u).unwrap() - 2.5).abs() < 1e-15);
        let y = Vector::from_vec(vec![0.3, 0.7]);
        let p = StrategyProfile::new(vec![Vector::from_element(2, 0.5), y.clone()]);
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!((g.evaluate_gradient(0, &p).unwrap() - &a * &y).amax() < 1e-15);
    }

    #[test]
    fn default_matrix_equilibrium() {
        let eq = matrix_equilibrium(&MatrixGameSpec::paper_default().row_cost_matrix()).unwrap();
        assert_eq!(eq.x, Vector::from_vec(vec![1.0, 0.0]));
        assert_eq!(eq.y, Vector::from_vec(vec![0.0, 1.0]));
        assert!((eq.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matching_pennies_is_mixed() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let eq = matrix_equilibrium(&m).unwrap();
        assert!((eq.x[0] - 0.5).abs() < 1e-12 && (eq.y[0] - 0.5).abs() < 1e-12);
        assert!(eq.value.abs() < 1e-12);
    }

    #[test]
    fn regularized_matrix_game_is_strictly_monotone() {
        let g = make_matrix_game(&MatrixGameSpec::paper_default().with_quad_weight(1.0)).unwrap();
        let mut rng = SimRng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = g.sample_profile(&mut rng);
            let y = g.sample_profile(&mut rng);
            let fx = g.operator(&x).unwrap();
            let fy = g.operator(&y).unwrap();
            let form: f64 = (0..2).map(|i| (&fx[i] - &fy[i]).dot(&(&x[i] - &y[i]))).sum();
            let dist: f64 = (0..2).map(|i| (&x[i] - &y[i]).norm_squared()).sum();
            assert!((form - dist).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_operator_is_skew() {
        let g = make_matrix_game(&MatrixGameSpec::paper_default()).unwrap();
        let m = check_monotone(&g);
        assert!(m.abs() < 1e-12);
    }

    fn check_monotone(g: &Game) -> f64 {
        crate::game::check_monotonicity(g, 2000, &mut SimRng::seed_from_u64(4)).unwrap()
    }

    #[test]
    fn decaying_drift_budget() {
        let alpha = 0.25;
        let base = CournotParams::paper_default();
        let seq = make_time_varying_cournot(&base, Drift::Decaying { alpha, k: alpha / 5.0 }, true).unwrap();
        let measured = seq.drift_from_limit(10_000);
        let target = 10_000f64.powf(alpha);
        assert!(measured <= 2.0 * target && measured >= 0.5 * target, "{measured} vs {target}");
    }

    #[test]
    fn zero_amplitude_is_constant() {
        let base = CournotParams::paper_default();
        let seq = make_time_varying_cournot(&base, Drift::Sinusoidal { amplitude: 0.0, period: 100.0 }, true).unwrap();
        let stat = cournot_nash(&base, 1e-10).unwrap().profile;
        for t in [1, 17, 99] {
            assert_eq!(seq.equilibrium_at(t, None).unwrap(), stat);
        }
    }

    #[test]
    fn sinusoidal_path_is_lipschitz() {
        let base = CournotParams::paper_default();
        let period = 1000.0;
        let amp = 5.0;
        let seq = make_time_varying_cournot(&base, Drift::Sinusoidal { amplitude: amp, period }, true).unwrap();
        let (path, variation) = seq.variation_path(1000, 1e-12).unwrap();
        let bound = 10.0 * amp * 2.0 * std::f64::consts::PI / period;
        for w in path.windows(2) {
            let step = (Vector::from_vec(w[1].flatten()) - Vector::from_vec(w[0].flatten())).norm();
            assert!(step <= bound);
        }
        assert!(variation > 0.0);
    }

    #[test]
    fn shared_normalization_keeps_costs_in_unit_interval() {
        let base = CournotParams::paper_default();
        let seq = make_time_varying_cournot(&base, Drift::Sinusoidal { amplitude: 5.0, period: 40.0 }, true).unwrap();
        let mut rng = SimRng::seed_from_u64(6);
        for t in 1..=40 {
            let g = seq.game_at(t).unwrap();
            for _ in 0..200 {
                let x = g.sample_profile(&mut rng);
                for i in 0..5 {
                    let c = g.evaluate_cost(i, &x).unwrap();
                    assert!((-1e-12..=1.0 + 1e-12).contains(&c));
                }
            }
        }
    }

    #[test]
    fn registry_knows_its_games() {
        for (name, _) in LIBRARY_GAMES {
            let lg = library_game(name).unwrap();
            assert!(lg.game.is_labelled_monotone());
        }
        assert!(matches!(library_game("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn regularized_matrix_equilibrium_is_stationary() {
        let spec = MatrixGameSpec::paper_default().with_quad_weight(1.0);
        let game = make_matrix_game(&spec).unwrap();
        let eq = regularized_matrix_equilibrium(&spec, 1e-13).unwrap();
        // fixed point of the projected operator for any step
        for i in 0..2 {
            let g = game.evaluate_gradient(i, &eq).unwrap();
            let moved = game.set(i).project(&(&eq[i] - g * 0.3));
            assert!((moved - &eq[i]).amax() < 1e-10);
        }
        // strong monotonicity: the variational inequality holds at random points
        let mut rng = SimRng::seed_from_u64(5);
        for _ in 0..100 {
            let x = game.sample_profile(&mut rng);
            let v: f64 = (0..2).map(|i| game.evaluate_gradient(i, &x).unwrap().dot(&(&x[i] - &eq[i]))).sum();
            assert!(v >= -1e-10);
        }
    }
}
