//! Property tests for the invariants each module promises.

use bandit_games::algorithms::{log_grid, Schedule, SchedulePreset};
use bandit_games::game::{check_monotonicity, ActionSet, Matrix, StrategyProfile, Vector};
use bandit_games::games::{
    cournot_nash, cournot_nash_from, library_game, matrix_equilibrium, CournotParams, LIBRARY_GAMES,
};
use bandit_games::geometry::{bregman, precondition_matrix, Barrier, ConvexFunction, PlayerGeometry, Regularizer};
use bandit_games::metrics::{divergence_to, fit_rate, Divergence};
use bandit_games::prox::{
    kl_prox_clipped_simplex, optimistic_exponentiated_pair, regularized_ne_softmax_fixed_point, softmax_fixed_point_from,
};
use bandit_games::rng::SimRng;
use proptest::prelude::*;

fn sets() -> Vec<ActionSet> {
    vec![
        ActionSet::interval(0.0, 1.0).unwrap(),
        ActionSet::boxed(vec![-1.0, 0.0, 2.0], vec![1.0, 0.5, 3.0]).unwrap(),
        ActionSet::unit_ball(2).unwrap(),
        ActionSet::ball(vec![1.0, -1.0, 0.5], 2.0).unwrap(),
        ActionSet::simplex(3, 0.0).unwrap(),
        ActionSet::simplex(4, 0.1).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_idempotent_and_feasible(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let mut rng = SimRng::seed_from_u64(seed);
        for s in sets() {
            let y = Vector::from_iterator(s.dim(), (0..s.dim()).map(|_| scale * (2.0 * rng.uniform() - 1.0)));
            let p = s.project(&y);
            prop_assert!(s.contains(&p));
            prop_assert!((s.project(&p) - &p).amax() <= 1e-12);
        }
    }

    #[test]
    fn bregman_three_point_identity(seed in any::<u64>()) {
        let mut rng = SimRng::seed_from_u64(seed);
        for s in sets() {
            let h = Barrier::for_set(&s).unwrap();
            let geo = PlayerGeometry::euclidean_for(&s).unwrap();
            let pts: Vec<Vector> = (0..3).map(|_| geo.to_coords(&s.sample_interior(&mut rng, 0.05))).collect();
            let (a, b, c) = (&pts[0], &pts[1], &pts[2]);
            let lhs = bregman(&h, a, c).unwrap();
            let rhs = bregman(&h, a, b).unwrap() + bregman(&h, b, c).unwrap()
                + (h.gradient(b).unwrap() - h.gradient(c).unwrap()).dot(&(a - b));
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
        }
    }

    #[test]
    fn preconditioner_shrinks_with_scale(seed in any::<u64>(), s1 in 0.0f64..10.0, ds in 0.01f64..10.0) {
        let mut rng = SimRng::seed_from_u64(seed);
        for s in sets() {
            let geo = PlayerGeometry::euclidean_for(&s).unwrap();
            let x = geo.to_coords(&s.sample_interior(&mut rng, 0.05));
            let a1 = precondition_matrix(&geo.barrier, &geo.regularizer, &x, 0.3, s1).unwrap().a;
            let a2 = precondition_matrix(&geo.barrier, &geo.regularizer, &x, 0.3, s1 + ds).unwrap().a;
            let diff = &a1 - &a2;
            let eig = nalgebra::SymmetricEigen::new((&diff + diff.transpose()) * 0.5).eigenvalues;
            prop_assert!(eig.min() >= -1e-12);
        }
    }

    #[test]
    fn kl_prox_without_floor_is_exponentiated_gradient(
        raw in proptest::collection::vec(0.05f64..1.0, 2..6),
        g in proptest::collection::vec(-3.0f64..3.0, 6),
        eta in 0.01f64..2.0,
    ) {
        let sum: f64 = raw.iter().sum();
        let x = Vector::from_iterator(raw.len(), raw.iter().map(|v| v / sum));
        let g = Vector::from_iterator(raw.len(), g.iter().copied().take(raw.len()));
        let out = kl_prox_clipped_simplex(&x, &g, eta, 0.0).unwrap();
        let w = Vector::from_iterator(x.len(), x.iter().zip(g.iter()).map(|(xi, gi)| xi * (-eta * gi).exp()));
        let closed = &w / w.sum();
        prop_assert!((out - closed).amax() <= 1e-12);
    }

    #[test]
    fn optimistic_pair_reduces_to_multiplicative_weights(
        raw in proptest::collection::vec(0.05f64..1.0, 2..5),
        g in proptest::collection::vec(-3.0f64..3.0, 5),
        eta in 0.01f64..1.0,
    ) {
        let sum: f64 = raw.iter().sum();
        let x = Vector::from_iterator(raw.len(), raw.iter().map(|v| v / sum));
        let g = Vector::from_iterator(raw.len(), g.iter().copied().take(raw.len()));
        let (half, next) = optimistic_exponentiated_pair(&x, &g, &g, eta, 0.0).unwrap();
        let mw = kl_prox_clipped_simplex(&x, &g, eta, 0.0).unwrap();
        prop_assert!((&half - &mw).amax() <= 1e-12);
        prop_assert!((&next - &mw).amax() <= 1e-12);
    }

    #[test]
    fn divergences_are_nonnegative(seed in any::<u64>()) {
        let mut rng = SimRng::seed_from_u64(seed);
        let s = ActionSet::simplex(3, 0.0).unwrap();
        let geo = vec![PlayerGeometry::euclidean_for(&s).unwrap(); 2];
        let a = StrategyProfile::new(vec![s.sample_interior(&mut rng, 0.01), s.sample_interior(&mut rng, 0.01)]);
        let b = StrategyProfile::new(vec![s.sample_interior(&mut rng, 0.01), s.sample_interior(&mut rng, 0.01)]);
        for kind in [Divergence::Euclid2, Divergence::BregmanP(&geo), Divergence::Kl] {
            prop_assert!(divergence_to(&a, &b, kind).unwrap() >= 0.0);
            prop_assert!(divergence_to(&a, &a, kind).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn fit_rate_is_scale_invariant(c in 1e-6f64..1e6, p in -2.0f64..2.0, seed in any::<u64>()) {
        let mut rng = SimRng::seed_from_u64(seed);
        let pts: Vec<(usize, f64)> = log_grid(10_000, 40)
            .into_iter()
            .map(|t| (t, (t as f64).powf(p) * (1.0 + 0.2 * rng.uniform())))
            .collect();
        let scaled: Vec<(usize, f64)> = pts.iter().map(|(t, v)| (*t, c * v)).collect();
        let a = fit_rate(&pts, (1, 10_000)).unwrap();
        let b = fit_rate(&scaled, (1, 10_000)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }
}

fn fd_gradient<F: ConvexFunction>(f: &F, x: &Vector, h: f64) -> Vector {
    Vector::from_iterator(
        x.len(),
        (0..x.len()).map(|k| {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[k] += h;
            dn[k] -= h;
            (f.value(&up).unwrap() - f.value(&dn).unwrap()) / (2.0 * h)
        }),
    )
}

#[test]
fn barrier_derivatives_match_finite_differences() {
    let mut rng = SimRng::seed_from_u64(21);
    for s in sets() {
        let h = Barrier::for_set(&s).unwrap();
        let geo = PlayerGeometry::euclidean_for(&s).unwrap();
        for _ in 0..50 {
            let x = geo.to_coords(&s.sample_interior(&mut rng, 0.1));
            let g = h.gradient(&x).unwrap();
            let fd = fd_gradient(&h, &x, 1e-6);
            assert!((&g - &fd).norm() <= 1e-5 * g.norm().max(1.0));
            let hess = h.hessian(&x).unwrap();
            for k in 0..x.len() {
                let mut up = x.clone();
                let mut dn = x.clone();
                up[k] += 1e-6;
                dn[k] -= 1e-6;
                let col = (h.gradient(&up).unwrap() - h.gradient(&dn).unwrap()) / 2e-6;
                assert!((hess.column(k) - col).norm() <= 1e-5 * hess.norm().max(1.0));
            }
        }
    }
}

#[test]
fn analytic_centers_are_stationary() {
    for s in sets() {
        let h = Barrier::for_set(&s).unwrap();
        assert!(h.gradient(&h.analytic_center()).unwrap().norm() <= 1e-8);
    }
}

#[test]
fn regularizer_three_point_identity() {
    let mut rng = SimRng::seed_from_u64(8);
    let s = ActionSet::simplex(4, 0.0).unwrap();
    for p in [Regularizer::squared_euclidean(4), Regularizer::NegEntropy { dim: 4 }] {
        for _ in 0..100 {
            let (a, b, c) = (s.sample_interior(&mut rng, 0.01), s.sample_interior(&mut rng, 0.01), s.sample_interior(&mut rng, 0.01));
            let lhs = bregman(&p, &a, &c).unwrap();
            let rhs = bregman(&p, &a, &b).unwrap() + bregman(&p, &b, &c).unwrap()
                + (p.gradient(&b).unwrap() - p.gradient(&c).unwrap()).dot(&(&a - &b));
            assert!((lhs - rhs).abs() <= 1e-10);
        }
    }
}

/// Directions that keep a point inside the set's affine hull.
fn tangent_directions(set: &ActionSet) -> Vec<Vector> {
    let d = set.dim();
    let unit = |k: usize| Vector::from_fn(d, |r, _| if r == k { 1.0 } else { 0.0 });
    match set {
        ActionSet::Simplex { .. } => (0..d - 1).map(|k| unit(k) - unit(d - 1)).collect(),
        _ => (0..d).map(unit).collect(),
    }
}

#[test]
fn library_gradients_match_finite_differences() {
    let mut rng = SimRng::seed_from_u64(4);
    let h = 1e-6;
    for (name, _) in LIBRARY_GAMES {
        let game = library_game(name).unwrap().game;
        for _ in 0..100 {
            let x = StrategyProfile::new(game.sets().iter().map(|s| s.sample_interior(&mut rng, 0.05)).collect());
            for i in 0..game.n_players() {
                let g = game.evaluate_gradient(i, &x).unwrap();
                for dir in tangent_directions(game.set(i)) {
                    let up = x.with_player(i, &x[i] + &dir * h);
                    let dn = x.with_player(i, &x[i] - &dir * h);
                    let num = (game.evaluate_cost(i, &up).unwrap() - game.evaluate_cost(i, &dn).unwrap()) / (2.0 * h);
                    let exact = g.dot(&dir);
                    assert!((num - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{name} player {i}: {num} vs {exact}");
                }
            }
        }
    }
}

#[test]
fn labelled_monotone_games_pass_the_check() {
    let mut rng = SimRng::seed_from_u64(6);
    for (name, _) in LIBRARY_GAMES {
        let game = library_game(name).unwrap().game;
        if game.is_labelled_monotone() {
            assert!(check_monotonicity(&game, 10_000, &mut rng).unwrap() >= -1e-9, "{name}");
        }
    }
}

#[test]
fn presets_are_step_safe() {
    for d in 1..8 {
        for p in [
            SchedulePreset::MonotoneMain,
            SchedulePreset::StronglyMonotoneMain,
            SchedulePreset::LinearTau { horizon: 100_000 },
            SchedulePreset::Noisy { sigma: 1.0 },
            SchedulePreset::Tracking { phi: 0.3 },
        ] {
            let s = Schedule::preset(p, d, 0.1).unwrap();
            for t in [1, 2, 10, 1000, 1_000_000] {
                assert!(s.eta(t) * d as f64 <= 0.5 + 1e-15);
            }
        }
    }
}

#[test]
fn cournot_nash_is_start_invariant() {
    let mut rng = SimRng::seed_from_u64(13);
    let tol = 1e-11;
    for params in [CournotParams::paper_default(), CournotParams::all_active()] {
        let base = cournot_nash(&params, tol).unwrap();
        assert!(params.kkt_residual(&base.profile.flatten()) <= tol);
        for _ in 0..20 {
            let start: Vec<f64> = (0..params.n()).map(|_| rng.uniform()).collect();
            let other = cournot_nash_from(&params, tol, &start).unwrap();
            let dev = base
                .profile
                .flatten()
                .iter()
                .zip(other.profile.flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            // KKT residual tol bounds the distance through the strong monotonicity of the potential
            assert!(dev <= 10.0 * tol / params.slope.iter().copied().fold(f64::INFINITY, f64::min) + 1e-12);
        }
    }
}

/// Value of `min_x max_b [x^T A]_b` by vertex enumeration of the LP
/// `min v` s.t. `A^T x <= v 1`, `x >= 0`, `sum x = 1`.
fn lp_value(a: &Matrix) -> f64 {
    let (m, k) = (a.nrows(), a.ncols());
    let n_ineq = m + k;
    let mut best = f64::INFINITY;
    // choose m of the inequality constraints to be tight (plus sum x = 1)
    for mask in 0u32..(1 << n_ineq) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let mut sys = Matrix::zeros(m + 1, m + 1);
        let mut rhs = Vector::zeros(m + 1);
        let mut row = 0;
        for c in 0..n_ineq {
            if mask & (1 << c) == 0 {
                continue;
            }
            if c < m {
                sys[(row, c)] = 1.0;
            } else {
                let b = c - m;
                for r in 0..m {
                    sys[(row, r)] = a[(r, b)];
                }
                sys[(row, m)] = -1.0;
            }
            row += 1;
        }
        for r in 0..m {
            sys[(m, r)] = 1.0;
        }
        rhs[m] = 1.0;
        let Some(sol) = sys.lu().solve(&rhs) else { continue };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let x = sol.rows(0, m).into_owned();
        let v = sol[m];
        let feasible = x.iter().all(|xi| *xi >= -1e-9) && (0..k).all(|b| x.dot(&a.column(b)) <= v + 1e-9);
        if feasible {
            best = best.min(v);
        }
    }
    best
}

#[test]
fn support_enumeration_matches_lp_vertices() {
    let mut rng = SimRng::seed_from_u64(31);
    for _ in 0..200 {
        let m = 2 + (rng.uniform() * 3.0) as usize;
        let k = 2 + (rng.uniform() * 3.0) as usize;
        let a = Matrix::from_fn(m, k, |_, _| (rng.uniform() * 10.0).round() - 5.0 + 0.01 * rng.uniform());
        let eq = matrix_equilibrium(&a).unwrap();
        let v = lp_value(&a);
        assert!((eq.value - v).abs() <= 1e-8, "{a} {} vs {v}", eq.value);
    }
}

#[test]
fn softmax_fixed_point_is_unique_for_large_tau() {
    let a = Matrix::from_row_slice(2, 3, &[1.0, 2.0, -1.0, 3.0, 4.0, 0.5]);
    let mut rng = SimRng::seed_from_u64(2);
    for tau in [1.0, 2.5] {
        let base = regularized_ne_softmax_fixed_point(&a, tau, 1e-13, 100_000, 0.5).unwrap();
        for _ in 0..20 {
            let s2 = ActionSet::simplex(2, 0.0).unwrap();
            let s3 = ActionSet::simplex(3, 0.0).unwrap();
            let other = softmax_fixed_point_from(&a, tau, 1e-13, 100_000, 0.5, s2.sample(&mut rng), s3.sample(&mut rng)).unwrap();
            assert!((&base.x - &other.x).amax() <= 1e-8 && (&base.y - &other.y).amax() <= 1e-8);
        }
    }
}

#[test]
fn converging_mode_on_a_constant_sequence_is_the_static_run() {
    use bandit_games::algorithms::{default_geometry, run_bandit_mirror_descent, run_time_varying, schedule_dim, TimeVaryingMode};
    use bandit_games::game::NoiseSpec;
    use bandit_games::games::ConstantSequence;

    let lib = library_game("cournot_paper").unwrap();
    let geo = default_geometry(&lib.game).unwrap();
    let schedule = Schedule::preset(SchedulePreset::StronglyMonotoneMain, schedule_dim(&geo), lib.kappa).unwrap();
    let seq = ConstantSequence::new(lib.game.clone(), None);
    for seed in [1, 2, 3] {
        let a = run_bandit_mirror_descent(&lib.game, &geo, &schedule, 500, NoiseSpec::none(), seed).unwrap();
        let b = run_time_varying(&seq, TimeVaryingMode::Converging, &geo, &schedule, 500, NoiseSpec::none(), seed).unwrap();
        assert_eq!(a.n_profiles(), b.n_profiles());
        for t in 0..a.n_profiles() {
            let (pa, pb) = (a.profile(t).flatten(), b.profile(t).flatten());
            assert!(pa.iter().zip(&pb).all(|(u, v)| u.to_bits() == v.to_bits()), "diverged at {t}");
        }
    }
}
