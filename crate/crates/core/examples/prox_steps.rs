// The two inner solvers: a barrier-regularized prox step (damped Newton) and
// the entropic prox onto a floored simplex (closed form with clipping).

use bandit_games::game::{ActionSet, Vector};
use bandit_games::geometry::{Barrier, Regularizer};
use bandit_games::prox::{barrier_prox_step, kl_prox_clipped_simplex, DEFAULT_PROX_TOL};

fn main() {
    let set = ActionSet::interval(0.0, 1.0).unwrap();
    let h = Barrier::for_set(&set).unwrap();
    let p = Regularizer::squared_euclidean(1);
    let x_t = Vector::from_element(1, 0.5);
    for g in [0.1, 1.0, 10.0, 1e3, 1e6] {
        let r = barrier_prox_step(&h, &p, &x_t, &Vector::from_element(1, g), 1.0, 0.5, 10.0, DEFAULT_PROX_TOL).unwrap();
        println!(
            "g = {g:>9}: x_next = {:.12}  ({} Newton steps, residual {:.1e})",
            r.x_next[0], r.newton_iterations, r.stationarity_residual
        );
    }

    // mass leaves the expensive action but never drops below the floor
    let x = Vector::from_vec(vec![0.5, 0.3, 0.2]);
    let g = Vector::from_vec(vec![5.0, 0.0, -1.0]);
    for beta in [0.0, 0.05, 0.2] {
        let next = kl_prox_clipped_simplex(&x, &g, 1.0, beta).unwrap();
        println!("floor {beta:.2}: {:.4?}", next.as_slice());
    }
}
