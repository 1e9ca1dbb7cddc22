//! Convergence and regret measurement.
//!
//! Divergences take the reference first: `divergence_to(x*, x)` is
//! `D(x*, x)`. KL uses natural logarithms.

use serde::{Deserialize, Serialize};

use crate::algorithms::{MetricSeries, Trajectory};
use crate::error::{Error, Result};
use crate::game::{ActionSet, Game, Matrix, StrategyProfile, Vector};
use crate::geometry::{bregman, PlayerGeometry};

/// `max_b [x^T A]_b - min_a [A y]_a` for the row player minimizing `x^T A y`.
pub fn duality_gap(a: &Matrix, x: &Vector, y: &Vector) -> f64 {
    let best_col = (x.transpose() * a).max();
    let best_row = (a * y).min();
    (best_col - best_row).max(0.0)
}

/// `sum_i <grad_i c_i(x), x_i - ref_i>` with the game's (normalized) gradients.
pub fn gap_function(game: &Game, x: &StrategyProfile, reference: &StrategyProfile) -> Result<f64> {
    if reference.len() != game.n_players() {
        return Err(Error::usage("reference profile has the wrong number of players"));
    }
    let mut gap = 0.0;
    for i in 0..game.n_players() {
        let g = game.evaluate_gradient(i, x)?;
        gap += g.dot(&(&x[i] - &reference[i]));
    }
    Ok(gap)
}

/// Social cost `sum_i c_i(x)` in the game's units.
pub fn social_cost(game: &Game, x: &StrategyProfile) -> Result<f64> {
    (0..game.n_players()).map(|i| game.evaluate_cost(i, x)).sum()
}

#[derive(Debug, Clone, Copy)]
pub enum Divergence<'a> {
    /// `|x* - x|^2`.
    Euclid2,
    /// Bregman divergence of each player's regularizer, in barrier coordinates.
    BregmanP(&'a [PlayerGeometry]),
    Kl,
}

/// Sum over players of `D(reference_i, profile_i)`.
pub fn divergence_to(reference: &StrategyProfile, profile: &StrategyProfile, kind: Divergence<'_>) -> Result<f64> {
    if reference.len() != profile.len() {
        return Err(Error::usage("profiles differ in player count"));
    }
    let mut total = 0.0;
    for i in 0..profile.len() {
        let (r, x) = (&reference[i], &profile[i]);
        if r.len() != x.len() {
            return Err(Error::usage(format!("player {i} points differ in length")));
        }
        total += match kind {
            Divergence::Euclid2 => (r - x).norm_squared(),
            Divergence::BregmanP(geo) => {
                let g = geo.get(i).ok_or_else(|| Error::usage("missing geometry for a player"))?;
                bregman(&g.regularizer, &g.to_coords(r), &g.to_coords(x))?.max(0.0)
            }
            Divergence::Kl => kl(r, x)?,
        };
    }
    Ok(total)
}

/// `sum_a r_a ln(r_a / x_a)`; `0 ln 0 = 0`.
pub fn kl(r: &Vector, x: &Vector) -> Result<f64> {
    let mut s = 0.0;
    for (a, b) in r.iter().zip(x.iter()) {
        if *a < 0.0 || *b < 0.0 {
            return Err(Error::domain("KL needs nonnegative vectors"));
        }
        if *a > 0.0 {
            if *b == 0.0 {
                return Err(Error::domain("KL reference has mass where the profile has none"));
            }
            s += a * (a / b).ln();
        }
    }
    Ok(s.max(0.0))
}

/// Evaluate `f(t, x^t)` on the trajectory's iterate after `t` updates, for
/// each grid time.
pub fn series_on_grid<F>(name: &str, traj: &Trajectory, grid: &[usize], mut f: F) -> Result<MetricSeries>
where
    F: FnMut(usize, &StrategyProfile) -> Result<f64>,
{
    let mut points = Vec::with_capacity(grid.len());
    for &t in grid {
        if t >= traj.n_profiles() {
            return Err(Error::usage(format!("grid time {t} beyond the trajectory")));
        }
        points.push((t, f(t, &traj.profile(t))?));
    }
    Ok(MetricSeries {
        name: name.to_string(),
        points,
    })
}

// ---------------------------------------------------------------------------
// Regret

/// How plays are counted when a round contains several plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretClock {
    /// Every play is one time step.
    PerPlay,
    /// Plays of one round are summed into one step.
    PerRound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub player: usize,
    /// Best fixed action in hindsight (up to the search resolution).
    pub comparator: Vector,
    /// Comparator search: `None` for exact 1-d minimization, else grid points per axis.
    pub resolution: Option<usize>,
    /// Cumulative regret after each step (index `k` holds steps `1..=k+1`).
    pub cumulative: Vec<f64>,
}

impl RegretReport {
    /// Running maximum of the positive part of cumulative regret.
    pub fn envelope(&self) -> Vec<f64> {
        let mut best: f64 = 0.0;
        self.cumulative
            .iter()
            .map(|r| {
                best = best.max(*r);
                best
            })
            .collect()
    }

    /// Envelope sampled on the given times (1-based step counts).
    pub fn envelope_on(&self, grid: &[usize]) -> Vec<(usize, f64)> {
        let env = self.envelope();
        grid.iter().filter(|t| **t >= 1 && **t <= env.len()).map(|&t| (t, env[t - 1])).collect()
    }
}

/// Individual regret of `player` along the self-play trajectory:
/// `sum_k c_i(x_hat^k) - c_i(w, x_hat_{-i}^k)` with `w` the best fixed action
/// against the opponents' actual plays over the whole run. Costs are the
/// game's noiseless (normalized) costs.
///
/// 1-d intervals are minimized exactly by golden-section search (costs are
/// convex in the own action for the library games); other sets use a grid
/// with `resolution` points per axis (simplex lattices include the vertices).
pub fn individual_regret(
    traj: &Trajectory,
    game: &Game,
    player: usize,
    resolution: usize,
    clock: RegretClock,
) -> Result<RegretReport> {
    if resolution < 2 {
        return Err(Error::usage("comparator resolution must be at least 2"));
    }
    if player >= game.n_players() || traj.n_players() != game.n_players() {
        return Err(Error::usage("player index or trajectory does not match the game"));
    }
    let n_plays = traj.n_plays();
    let mut plays: Vec<StrategyProfile> = (0..n_plays).map(|k| traj.played(k)).collect();
    let played_cost: Vec<f64> = plays
        .iter()
        .map(|p| game.evaluate_cost(player, p))
        .collect::<Result<_>>()?;

    let total_against = |w: &Vector, plays: &mut [StrategyProfile]| -> Result<f64> {
        let mut s = 0.0;
        for p in plays.iter_mut() {
            p.points[player].copy_from(w);
            s += game.evaluate_cost(player, p)?;
        }
        Ok(s)
    };

    let set = game.set(player);
    let (comparator, used_resolution) = match set {
        ActionSet::Box { lower, upper } if lower.len() == 1 => {
            let (lo, hi) = (lower[0], upper[0]);
            let mut f = |v: f64| total_against(&Vector::from_element(1, v), &mut plays);
            (Vector::from_element(1, golden_section(&mut f, lo, hi, 1e-10)?), None)
        }
        _ => {
            let mut best = (f64::INFINITY, set.center());
            for cand in comparator_grid(set, resolution) {
                let v = total_against(&cand, &mut plays)?;
                if v < best.0 {
                    best = (v, cand);
                }
            }
            (best.1, Some(resolution))
        }
    };

    let per_play: Vec<f64> = plays
        .iter_mut()
        .zip(&played_cost)
        .map(|(p, c)| {
            p.points[player] = comparator.clone();
            Ok(c - game.evaluate_cost(player, p)?)
        })
        .collect::<Result<_>>()?;
    let group = match clock {
        RegretClock::PerPlay => 1,
        RegretClock::PerRound => traj.plays_per_round.max(1),
    };
    let mut cumulative = Vec::with_capacity(per_play.len() / group);
    let mut acc = 0.0;
    for chunk in per_play.chunks(group) {
        acc += chunk.iter().sum::<f64>();
        cumulative.push(acc);
    }
    Ok(RegretReport {
        player,
        comparator,
        resolution: used_resolution,
        cumulative,
    })
}

fn golden_section<F: FnMut(f64) -> Result<f64>>(f: &mut F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    // the endpoints matter when the optimum sits on the boundary
    let mid = 0.5 * (a + b);
    let mut best = (f(mid)?, mid);
    for e in [lo, hi] {
        let v = f(e)?;
        if v < best.0 {
            best = (v, e);
        }
    }
    Ok(best.1)
}

/// Candidate comparators: the simplex lattice with step `1/(resolution-1)`, or
/// a per-axis grid over the bounding box kept inside the set.
fn comparator_grid(set: &ActionSet, resolution: usize) -> Vec<Vector> {
    match set {
        ActionSet::Simplex { .. } => {
            let d = set.dim();
            let m = resolution - 1;
            let mut out = Vec::new();
            let mut counts = vec![0usize; d];
            lattice(&mut counts, 0, m, &mut |c| {
                let v = Vector::from_iterator(d, c.iter().map(|k| *k as f64 / m as f64));
                if set.contains(&v) {
                    out.push(v);
                }
            });
            if out.is_empty() {
                out.push(set.center());
            }
            out
        }
        _ => {
            let d = set.dim();
            let (lo, hi): (Vec<f64>, Vec<f64>) = match set {
                ActionSet::Box { lower, upper } => (lower.clone(), upper.clone()),
                ActionSet::Ball { center, radius } => (
                    center.iter().map(|c| c - radius).collect(),
                    center.iter().map(|c| c + radius).collect(),
                ),
                ActionSet::Simplex { .. } => unreachable!(),
            };
            let mut out = Vec::new();
            let mut idx = vec![0usize; d];
            loop {
                let v = Vector::from_iterator(
                    d,
                    (0..d).map(|k| lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / (resolution - 1) as f64),
                );
                if set.contains(&v) {
                    out.push(v);
                }
                let mut k = 0;
                while k < d {
                    idx[k] += 1;
                    if idx[k] < resolution {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
            out.push(set.center());
            out
        }
    }
}

fn lattice(counts: &mut Vec<usize>, pos: usize, remaining: usize, emit: &mut dyn FnMut(&[usize])) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        emit(counts);
        return;
    }
    for k in 0..=remaining {
        counts[pos] = k;
        lattice(counts, pos + 1, remaining - k, emit);
    }
}

// ---------------------------------------------------------------------------
// Rates

/// Outcome of a rate fit that may lack data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFit {
    Slope(f64),
    /// Fewer usable samples than the fit needs.
    TooFewSamples(usize),
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Theil-Sen slope of `ln value` against `ln t` over samples with
/// `lo <= t <= hi`. Needs at least ten samples, all positive.
pub fn fit_rate(points: &[(usize, f64)], window: (usize, usize)) -> Result<f64> {
    let sel: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .map(|&(t, v)| {
            if v > 0.0 && v.is_finite() {
                Ok(((t as f64).ln(), v.ln()))
            } else {
                Err(Error::domain(format!("rate fit needs positive values, got {v} at t = {t}")))
            }
        })
        .collect::<Result<_>>()?;
    if sel.len() < MIN_FIT_SAMPLES {
        return Err(Error::usage(format!(
            "rate fit needs {MIN_FIT_SAMPLES} samples in the window, found {}",
            sel.len()
        )));
    }
    let mut slopes = Vec::with_capacity(sel.len() * (sel.len() - 1) / 2);
    for i in 0..sel.len() {
        for j in i + 1..sel.len() {
            let dx = sel[j].0 - sel[i].0;
            if dx != 0.0 {
                slopes.push((sel[j].1 - sel[i].1) / dx);
            }
        }
    }
    if slopes.is_empty() {
        return Err(Error::usage("rate fit needs distinct sample times"));
    }
    Ok(median(&mut slopes))
}

/// Like [`fit_rate`] but drops nonpositive samples and reports a shortfall
/// instead of failing.
pub fn fit_rate_positive(points: &[(usize, f64)], window: (usize, usize)) -> Result<RateFit> {
    let kept: Vec<(usize, f64)> = points
        .iter()
        .copied()
        .filter(|(t, v)| *t >= window.0 && *t <= window.1 && *v > 0.0)
        .collect();
    if kept.len() < MIN_FIT_SAMPLES {
        return Ok(RateFit::TooFewSamples(kept.len()));
    }
    fit_rate(&kept, window).map(RateFit::Slope)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run_exact_gradient_baseline, BaselineMethod};
    use crate::games::{cournot_nash, make_cournot, make_matrix_game, CournotParams, MatrixGameSpec};
    use crate::rng::SimRng;

    fn default_matrix() -> Matrix {
        Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])
    }

    #[test]
    fn duality_gap_examples() {
        let a = default_matrix();
        let e = |k| {
            let mut v = Vector::zeros(2);
            v[k] = 1.0;
            v
        };
        assert_eq!(duality_gap(&a, &e(0), &e(1)), 0.0);
        let u = Vector::from_element(2, 0.5);
        assert!((duality_gap(&a, &u, &u) - 1.5).abs() < 1e-15);
        assert_eq!(duality_gap(&Matrix::zeros(2, 2), &u, &e(0)), 0.0);
    }

    #[test]
    fn duality_gap_matches_fine_grid() {
        let a = default_matrix();
        let mut rng = SimRng::seed_from_u64(3);
        for _ in 0..20 {
            let p = rng.uniform();
            let q = rng.uniform();
            let x = Vector::from_vec(vec![p, 1.0 - p]);
            let y = Vector::from_vec(vec![q, 1.0 - q]);
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for k in 0..=1000 {
                let s = k as f64 / 1000.0;
                let v = Vector::from_vec(vec![s, 1.0 - s]);
                hi = hi.max(x.dot(&(&a * &v)));
                lo = lo.min(v.dot(&(&a * &y)));
            }
            assert!((duality_gap(&a, &x, &y) - (hi - lo)).abs() < 1e-9);
        }
    }

    #[test]
    fn gap_function_at_equilibrium_and_cross_check() {
        let params = CournotParams::paper_default();
        let game = make_cournot(&params, true).unwrap();
        let eq = cournot_nash(&params, 1e-13).unwrap().profile;
        assert!(gap_function(&game, &eq, &eq).unwrap().abs() <= 1e-9);
        let full = StrategyProfile::new(vec![Vector::from_element(1, 1.0); 5]);
        let v = gap_function(&game, &full, &eq).unwrap();
        let mut manual = 0.0;
        for i in 0..5 {
            manual += game.evaluate_gradient(i, &full).unwrap()[0] * (1.0 - eq[i][0]);
        }
        assert!(v > 0.0 && (v - manual).abs() < 1e-12);
    }

    #[test]
    fn divergence_examples() {
        let ninth = 1.0 / 9.0;
        let eq = StrategyProfile::new([0.0, ninth, 0.0, ninth, 0.0].iter().map(|v| Vector::from_element(1, *v)).collect());
        let zero = StrategyProfile::new(vec![Vector::zeros(1); 5]);
        assert!((divergence_to(&eq, &zero, Divergence::Euclid2).unwrap() - 2.0 / 81.0).abs() < 1e-15);
        assert_eq!(divergence_to(&eq, &eq, Divergence::Euclid2).unwrap(), 0.0);
        let u = StrategyProfile::new(vec![Vector::from_element(2, 0.5); 2]);
        assert_eq!(divergence_to(&u, &u, Divergence::Kl).unwrap(), 0.0);
        let r = StrategyProfile::new(vec![Vector::from_vec(vec![0.2, 0.8]); 2]);
        assert!(divergence_to(&r, &u, Divergence::Kl).unwrap() > 0.0);
    }

    #[test]
    fn kl_domain_errors() {
        let r = Vector::from_vec(vec![0.5, 0.5]);
        let x = Vector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(kl(&r, &x), Err(Error::Domain(_))));
        assert_eq!(kl(&x, &r).unwrap(), 2f64.ln());
    }

    #[test]
    fn fit_rate_examples() {
        let grid = crate::algorithms::log_grid(100_000, 40);
        let pts: Vec<(usize, f64)> = grid.iter().map(|&t| (t, (t as f64).powf(-0.5))).collect();
        assert!((fit_rate(&pts, (1, 100_000)).unwrap() + 0.5).abs() < 1e-12);
        let scaled: Vec<(usize, f64)> = pts.iter().map(|(t, v)| (*t, 7.5 * v)).collect();
        assert!((fit_rate(&scaled, (1, 100_000)).unwrap() + 0.5).abs() < 1e-12);
        let flat: Vec<(usize, f64)> = grid.iter().map(|&t| (t, 3.0)).collect();
        assert_eq!(fit_rate(&flat, (1, 100_000)).unwrap(), 0.0);
        let mut bad = pts.clone();
        bad[3].1 = 0.0;
        assert!(matches!(fit_rate(&bad, (1, 100_000)), Err(Error::Domain(_))));
        assert!(fit_rate(&pts[..5], (1, 100_000)).is_err());
        assert_eq!(fit_rate_positive(&pts[..5], (1, 100_000)).unwrap(), RateFit::TooFewSamples(5));
    }

    #[test]
    fn fit_rate_noisy_calibration() {
        let grid = crate::algorithms::log_grid(100_000, 40);
        let mut rng = SimRng::seed_from_u64(11);
        let pts: Vec<(usize, f64)> = grid
            .iter()
            .map(|&t| (t, (t as f64).powf(-0.25) * (1.0 + 0.1 * (2.0 * rng.uniform() - 1.0))))
            .collect();
        let s = fit_rate(&pts, (1000, 100_000)).unwrap();
        assert!((s + 0.25).abs() < 0.05, "{s}");
    }

    #[test]
    fn fit_rate_resists_outliers() {
        let grid = crate::algorithms::log_grid(100_000, 40);
        let pts: Vec<(usize, f64)> = grid
            .iter()
            .enumerate()
            .map(|(k, &t)| (t, (t as f64).powf(-0.5) * if k % 4 == 0 { 50.0 } else { 1.0 }))
            .collect();
        let s = fit_rate(&pts, (1, 100_000)).unwrap();
        assert!((s + 0.5).abs() < 0.1, "{s}");
    }

    #[test]
    fn regret_of_constant_best_response_is_nonpositive() {
        // frozen dynamics at the equilibrium of the default matrix game: every
        // play is a best response to the opponent's play
        let spec = MatrixGameSpec::paper_default();
        let game = make_matrix_game(&spec).unwrap();
        let traj = run_exact_gradient_baseline(&game, BaselineMethod::GdProjected, 0.0, 50).unwrap();
        // center is uniform; player 0 facing uniform y has best response e_0
        let r = individual_regret(&traj, &game, 0, 11, RegretClock::PerPlay).unwrap();
        assert_eq!(r.comparator, Vector::from_vec(vec![1.0, 0.0]));
        assert!(r.cumulative.last().unwrap() > &0.0);
        assert!(individual_regret(&traj, &game, 0, 1, RegretClock::PerPlay).is_err());
    }

    #[test]
    fn regret_golden_section_on_interval() {
        let params = CournotParams::paper_default();
        let game = make_cournot(&params, true).unwrap();
        let traj = run_exact_gradient_baseline(&game, BaselineMethod::GdProjected, 0.0, 20).unwrap();
        // opponents frozen at 1/2; best response of firm 1 is the projected
        // clamp((a - d - b * 2) / (2 b))
        let r = individual_regret(&traj, &game, 1, 2, RegretClock::PerPlay).unwrap();
        let expect = ((params.intercept[1] - params.marginal_cost[1] - params.slope[1] * 2.0) / (2.0 * params.slope[1]))
            .clamp(0.0, 1.0);
        assert!((r.comparator[0] - expect).abs() < 1e-8);
        assert!(r.resolution.is_none());
        assert!(r.envelope().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn simplex_lattice_contains_vertices() {
        let s = ActionSet::simplex(3, 0.0).unwrap();
        let g = comparator_grid(&s, 3);
        assert_eq!(g.len(), 6);
        assert!(g.contains(&Vector::from_vec(vec![0.0, 0.0, 1.0])));
    }
}
