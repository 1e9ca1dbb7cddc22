// One-point gradient estimation from a single cost observation.
//
// A player at x plays x + delta * A z with z uniform on the sphere and
// A = (hess h(x) + eta hess p(x))^{-1/2}, so the played point always lies in
// the Dikin ellipsoid and stays feasible. Averaging (d / delta) c A^{-1} z over
// many draws recovers the gradient of the smoothed cost; for a quadratic cost
// that is the exact gradient.

use bandit_games::estimators::ellipsoidal_estimate;
use bandit_games::game::{StrategyProfile, Vector};
use bandit_games::games::library_game;
use bandit_games::geometry::{dikin_point, precondition_matrix, sample_unit_sphere, PlayerGeometry};
use bandit_games::rng::SimRng;

fn main() {
    let game = library_game("quadratic_ball").unwrap().game;
    let geo = PlayerGeometry::euclidean_for(game.set(0)).unwrap();
    let x = Vector::from_vec(vec![0.4, 0.1]);
    let a = precondition_matrix(&geo.barrier, &geo.regularizer, &x, 0.1, 1.0).unwrap().a;
    let delta = 0.5;

    let mut rng = SimRng::seed_from_u64(0);
    let mut mean = Vector::zeros(2);
    for n in 1..=200_000usize {
        let z = sample_unit_sphere(&mut rng, 2);
        let played = dikin_point(&x, &a, &z, delta).unwrap();
        let cost = game.evaluate_cost(0, &StrategyProfile::new(vec![played])).unwrap();
        let g = ellipsoidal_estimate(cost, &a, &z, 2, delta).unwrap().g;
        mean += (g - &mean) / n as f64;
        if n.is_power_of_two() && n >= 1024 {
            println!("{n:>7} draws: mean estimate ({:+.4}, {:+.4})", mean[0], mean[1]);
        }
    }
    let exact = game.evaluate_gradient(0, &StrategyProfile::new(vec![x])).unwrap();
    println!("exact gradient     ({:+.4}, {:+.4})", exact[0], exact[1]);
}
