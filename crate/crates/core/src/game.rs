//! Games, action sets, strategy profiles and the cost oracles every learning
//! algorithm consumes.

use std::fmt;
use std::ops::Index;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Membership slack. Simplex renormalization drifts by a few ulps per step and
/// that error accumulates over long runs.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// A compact convex action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// Probability simplex with every coordinate at least `floor`.
    Simplex { dim: usize, floor: f64 },
}

impl ActionSet {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::usage("box bounds must be nonempty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::usage("box requires lower < upper componentwise"));
        }
        Ok(ActionSet::Box { lower, upper })
    }

    /// The unit-free interval `[lo, hi]` in one dimension.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo], vec![hi])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::usage("ball center must be nonempty"));
        }
        if !(radius > 0.0) {
            return Err(Error::usage("ball radius must be positive"));
        }
        Ok(ActionSet::Ball { center, radius })
    }

    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::ball(vec![0.0; dim], 1.0)
    }

    pub fn simplex(dim: usize, floor: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("simplex dimension must be positive"));
        }
        if floor < 0.0 || floor * dim as f64 > 1.0 {
            return Err(Error::usage(format!(
                "simplex floor {floor} must satisfy 0 <= floor * dim <= 1"
            )));
        }
        Ok(ActionSet::Simplex { dim, floor })
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionSet::Box { lower, .. } => lower.len(),
            ActionSet::Ball { center, .. } => center.len(),
            ActionSet::Simplex { dim, .. } => *dim,
        }
    }

    /// Exact Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            ActionSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l) * (u - l))
                .sum::<f64>()
                .sqrt(),
            ActionSet::Ball { radius, .. } => 2.0 * radius,
            ActionSet::Simplex { dim, floor } => {
                if *dim < 2 {
                    0.0
                } else {
                    (1.0 - floor * *dim as f64) * std::f64::consts::SQRT_2
                }
            }
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ActionSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - MEMBERSHIP_TOL && *v <= u + MEMBERSHIP_TOL),
            ActionSet::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2.sqrt() <= radius + MEMBERSHIP_TOL
            }
            ActionSet::Simplex { floor, .. } => {
                (x.sum() - 1.0).abs() <= MEMBERSHIP_TOL
                    && x.iter().all(|v| *v >= floor - MEMBERSHIP_TOL)
            }
        }
    }

    /// Strict interior membership (relative interior for the simplex).
    pub fn is_interior(&self, x: &Vector) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ActionSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| v > l && v < u),
            ActionSet::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2 < radius * radius
            }
            ActionSet::Simplex { floor, .. } => {
                (x.sum() - 1.0).abs() <= MEMBERSHIP_TOL && x.iter().all(|v| v > floor)
            }
        }
    }

    /// Euclidean projection.
    pub fn project(&self, y: &Vector) -> Vector {
        match self {
            ActionSet::Box { lower, upper } => Vector::from_iterator(
                y.len(),
                y.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(v, (l, u))| v.clamp(*l, *u)),
            ),
            ActionSet::Ball { center, radius } => {
                let c = Vector::from_column_slice(center);
                let diff = y - &c;
                let norm = diff.norm();
                if norm <= *radius {
                    y.clone()
                } else {
                    c + diff * (radius / norm)
                }
            }
            ActionSet::Simplex { dim, floor } => {
                let mass = 1.0 - floor * *dim as f64;
                let shifted: Vec<f64> = y.iter().map(|v| v - floor).collect();
                let p = project_onto_scaled_simplex(&shifted, mass);
                Vector::from_iterator(*dim, p.into_iter().map(|v| v + floor))
            }
        }
    }

    /// Canonical interior reference point (box midpoint, ball center, simplex barycenter).
    pub fn center(&self) -> Vector {
        match self {
            ActionSet::Box { lower, upper } => {
                Vector::from_iterator(lower.len(), lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)))
            }
            ActionSet::Ball { center, .. } => Vector::from_column_slice(center),
            ActionSet::Simplex { dim, .. } => Vector::from_element(*dim, 1.0 / *dim as f64),
        }
    }

    /// A random point, uniform on boxes and balls and Dirichlet(1) on the simplex.
    pub fn sample(&self, rng: &mut SimRng) -> Vector {
        match self {
            ActionSet::Box { lower, upper } => Vector::from_iterator(
                lower.len(),
                lower.iter().zip(upper).map(|(l, u)| rng.uniform_in(*l, *u)),
            ),
            ActionSet::Ball { center, radius } => {
                let d = center.len();
                let dir = crate::geometry::sample_unit_sphere(rng, d);
                let r = radius * rng.uniform().powf(1.0 / d as f64);
                Vector::from_column_slice(center) + dir * r
            }
            ActionSet::Simplex { dim, floor } => {
                let e: Vec<f64> = (0..*dim).map(|_| -(1.0 - rng.uniform()).ln()).collect();
                let s: f64 = e.iter().sum();
                let mass = 1.0 - floor * *dim as f64;
                Vector::from_iterator(*dim, e.into_iter().map(|v| floor + mass * v / s))
            }
        }
    }

    /// A random point strictly inside, pulled toward the center so that it
    /// sits at least `margin` (relative) away from the boundary.
    pub fn sample_interior(&self, rng: &mut SimRng, margin: f64) -> Vector {
        let x = self.sample(rng);
        let c = self.center();
        &c + (x - &c) * (1.0 - margin)
    }
}

/// Euclidean projection of `y` onto `{p >= 0, sum p = mass}` (sort-based).
pub(crate) fn project_onto_scaled_simplex(y: &[f64], mass: f64) -> Vec<f64> {
    if mass <= 0.0 {
        return vec![0.0; y.len()];
    }
    let mut u: Vec<f64> = y.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, v) in u.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - mass) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// One point per player.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    pub points: Vec<Vector>,
}

impl StrategyProfile {
    pub fn new(points: Vec<Vector>) -> Self {
        Self { points }
    }

    pub fn from_slices(points: &[&[f64]]) -> Self {
        Self::new(points.iter().map(|p| Vector::from_column_slice(p)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vector> {
        self.points.iter()
    }

    /// Concatenation of all players' points.
    pub fn flatten(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn with_player(&self, i: usize, point: Vector) -> Self {
        let mut points = self.points.clone();
        points[i] = point;
        Self { points }
    }
}

impl Index<usize> for StrategyProfile {
    type Output = Vector;

    fn index(&self, i: usize) -> &Vector {
        &self.points[i]
    }
}

/// Per-player cost (and optionally gradient) oracle in raw units.
pub trait CostOracle: Send + Sync {
    fn cost(&self, player: usize, x: &StrategyProfile) -> f64;

    /// Gradient of the player's cost with respect to its own action.
    fn gradient(&self, _player: usize, _x: &StrategyProfile) -> Option<Vector> {
        None
    }

    fn has_gradient(&self) -> bool {
        false
    }
}

/// Where a cost range came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeSource {
    Declared,
    Analytic,
    Sampled { samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRange {
    pub lo: f64,
    pub hi: f64,
    pub source: RangeSource,
}

/// Increasing affine map `c -> (c - lo) / (hi - lo)` shared by all players.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lo: f64,
    pub hi: f64,
}

impl Normalization {
    pub fn scale(&self) -> f64 {
        1.0 / (self.hi - self.lo)
    }

    pub fn apply(&self, c: f64) -> f64 {
        (c - self.lo) / (self.hi - self.lo)
    }

    pub fn invert(&self, v: f64) -> f64 {
        self.lo + v * (self.hi - self.lo)
    }
}

/// Noise law added to bandit observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    /// Uniform on `[-sigma, sigma]`.
    Uniform,
    /// Normal with standard deviation `sigma / 2`, rejected outside `[-sigma, sigma]`.
    GaussianTruncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub kind: NoiseKind,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn uniform(sigma: f64) -> Self {
        Self {
            sigma,
            kind: NoiseKind::Uniform,
        }
    }

    pub fn gaussian_truncated(sigma: f64) -> Self {
        Self {
            sigma,
            kind: NoiseKind::GaussianTruncated,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.kind == NoiseKind::None || self.sigma == 0.0
    }

    /// One noise draw. Consumes no randomness when silent.
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        if self.is_silent() {
            return 0.0;
        }
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Uniform => rng.uniform_in(-self.sigma, self.sigma),
            NoiseKind::GaussianTruncated => loop {
                let e = 0.5 * self.sigma * rng.normal();
                if e.abs() <= self.sigma {
                    break e;
                }
            },
        }
    }
}

/// A continuous game: per-player action sets and cost oracles plus the
/// constants the learning algorithms and certificates use.
#[derive(Clone)]
pub struct Game {
    name: String,
    sets: Vec<ActionSet>,
    oracle: Arc<dyn CostOracle>,
    smoothness: Vec<f64>,
    gradient_bound: f64,
    cost_range: Option<CostRange>,
    normalization: Option<Normalization>,
    monotone: bool,
    linear_costs: bool,
}

impl fmt::Debug for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Game")
            .field("name", &self.name)
            .field("sets", &self.sets)
            .field("smoothness", &self.smoothness)
            .field("gradient_bound", &self.gradient_bound)
            .field("cost_range", &self.cost_range)
            .field("normalization", &self.normalization)
            .field("monotone", &self.monotone)
            .field("linear_costs", &self.linear_costs)
            .finish()
    }
}

impl Game {
    pub fn new(name: impl Into<String>, sets: Vec<ActionSet>, oracle: Arc<dyn CostOracle>) -> Self {
        let n = sets.len();
        Self {
            name: name.into(),
            sets,
            oracle,
            smoothness: vec![f64::NAN; n],
            gradient_bound: f64::NAN,
            cost_range: None,
            normalization: None,
            monotone: false,
            linear_costs: false,
        }
    }

    pub fn with_smoothness(mut self, smoothness: Vec<f64>) -> Self {
        assert_eq!(smoothness.len(), self.sets.len());
        self.smoothness = smoothness;
        self
    }

    pub fn with_gradient_bound(mut self, g: f64) -> Self {
        self.gradient_bound = g;
        self
    }

    pub fn with_cost_range(mut self, range: CostRange) -> Self {
        self.cost_range = Some(range);
        self
    }

    pub fn monotone(mut self, monotone: bool) -> Self {
        self.monotone = monotone;
        self
    }

    pub fn linear(mut self, linear: bool) -> Self {
        self.linear_costs = linear;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_players(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[ActionSet] {
        &self.sets
    }

    pub fn set(&self, i: usize) -> &ActionSet {
        &self.sets[i]
    }

    pub fn has_gradient(&self) -> bool {
        self.oracle.has_gradient()
    }

    pub fn is_labelled_monotone(&self) -> bool {
        self.monotone
    }

    pub fn has_linear_costs(&self) -> bool {
        self.linear_costs
    }

    pub fn cost_range(&self) -> Option<CostRange> {
        self.cost_range
    }

    pub fn normalization(&self) -> Option<Normalization> {
        self.normalization
    }

    /// Factor applied to raw costs and gradients (1 when not normalized).
    pub fn cost_scale(&self) -> f64 {
        self.normalization.map_or(1.0, |n| n.scale())
    }

    /// Per-player smoothness constants in the game's (possibly normalized) units.
    pub fn smoothness(&self) -> Vec<f64> {
        let s = self.cost_scale();
        self.smoothness.iter().map(|l| l * s).collect()
    }

    /// Sum of the per-player smoothness constants.
    pub fn total_smoothness(&self) -> f64 {
        self.smoothness().iter().sum()
    }

    pub fn gradient_bound(&self) -> f64 {
        self.gradient_bound * self.cost_scale()
    }

    /// Maps a cost reported by this game back to raw units.
    pub fn to_original_units(&self, value: f64) -> f64 {
        self.normalization.map_or(value, |n| n.invert(value))
    }

    pub fn is_feasible(&self, x: &StrategyProfile) -> bool {
        x.len() == self.sets.len() && self.sets.iter().zip(x.iter()).all(|(s, p)| s.contains(p))
    }

    fn check(&self, i: usize, x: &StrategyProfile) -> Result<()> {
        if i >= self.sets.len() {
            return Err(Error::usage(format!(
                "player index {i} out of range for {} players",
                self.sets.len()
            )));
        }
        if !self.is_feasible(x) {
            return Err(Error::domain("strategy profile is infeasible"));
        }
        Ok(())
    }

    /// Raw cost, before normalization.
    pub fn raw_cost(&self, i: usize, x: &StrategyProfile) -> Result<f64> {
        self.check(i, x)?;
        Ok(self.oracle.cost(i, x))
    }

    pub fn evaluate_cost(&self, i: usize, x: &StrategyProfile) -> Result<f64> {
        let c = self.raw_cost(i, x)?;
        Ok(self.normalization.map_or(c, |n| n.apply(c)))
    }

    pub fn evaluate_gradient(&self, i: usize, x: &StrategyProfile) -> Result<Vector> {
        self.check(i, x)?;
        let g = self
            .oracle
            .gradient(i, x)
            .ok_or_else(|| Error::Unsupported(format!("game {} has no gradient oracle", self.name)))?;
        Ok(g * self.cost_scale())
    }

    /// The stacked operator `F(x) = [grad_i c_i(x)]_i`.
    pub fn operator(&self, x: &StrategyProfile) -> Result<Vec<Vector>> {
        (0..self.n_players()).map(|i| self.evaluate_gradient(i, x)).collect()
    }

    /// Bandit feedback: the cost at `x` plus one noise draw.
    pub fn observe_bandit_cost(
        &self,
        i: usize,
        x: &StrategyProfile,
        noise: &NoiseSpec,
        rng: &mut SimRng,
    ) -> Result<f64> {
        let c = self.evaluate_cost(i, x)?;
        Ok(c + noise.sample(rng))
    }

    /// A uniformly sampled feasible profile.
    pub fn sample_profile(&self, rng: &mut SimRng) -> StrategyProfile {
        StrategyProfile::new(self.sets.iter().map(|s| s.sample(rng)).collect())
    }

    pub fn center_profile(&self) -> StrategyProfile {
        StrategyProfile::new(self.sets.iter().map(|s| s.center()).collect())
    }
}

/// Minimum over sampled pairs of `<F(x) - F(y), x - y>`.
pub fn check_monotonicity(game: &Game, samples: usize, rng: &mut SimRng) -> Result<f64> {
    if !game.has_gradient() {
        return Err(Error::Unsupported(format!(
            "monotonicity check needs gradients; game {} has none",
            game.name()
        )));
    }
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let x = game.sample_profile(rng);
        let y = game.sample_profile(rng);
        let fx = game.operator(&x)?;
        let fy = game.operator(&y)?;
        let form: f64 = (0..game.n_players())
            .map(|i| (&fx[i] - &fy[i]).dot(&(&x[i] - &y[i])))
            .sum();
        worst = worst.min(form);
    }
    Ok(worst)
}

/// Sampled cost range over all players, including set centers.
pub fn estimate_cost_range(game: &Game, samples: usize, rng: &mut SimRng) -> Result<CostRange> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let center = game.center_profile();
    for k in 0..=samples {
        let x = if k == 0 { center.clone() } else { game.sample_profile(rng) };
        for i in 0..game.n_players() {
            let c = game.raw_cost(i, &x)?;
            lo = lo.min(c);
            hi = hi.max(c);
        }
    }
    Ok(CostRange {
        lo,
        hi,
        source: RangeSource::Sampled { samples },
    })
}

/// Wrap a game so that costs are reported as `(c - lo) / (hi - lo)`.
///
/// Uses the game's recorded range when present; otherwise estimates one from
/// 10^4 sampled profiles (seed 0) and records that provenance.
pub fn normalize_costs(game: &Game) -> Result<Game> {
    let range = match game.cost_range {
        Some(r) => r,
        None => estimate_cost_range(game, 10_000, &mut SimRng::seed_from_u64(0))?,
    };
    if !(range.hi > range.lo) || !range.lo.is_finite() || !range.hi.is_finite() {
        return Err(Error::DegenerateRange {
            lo: range.lo,
            hi: range.hi,
        });
    }
    let mut wrapped = game.clone();
    wrapped.cost_range = Some(range);
    wrapped.normalization = Some(Normalization {
        lo: range.lo,
        hi: range.hi,
    });
    Ok(wrapped)
}
