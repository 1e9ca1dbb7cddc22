// The zero-sum game [[1, 2], [3, 4]]: the row player picks row 1, the column
// player column 2, value 2. Compare full-information projected gradient descent
// with the bandit linear-cost variant, which only sees one scalar per round.

use bandit_games::algorithms::{
    default_geometry, run_exact_gradient_baseline, run_linear_variant, BaselineMethod, LinearOptions,
};
use bandit_games::games::{make_matrix_game, matrix_equilibrium, MatrixGameSpec};
use bandit_games::metrics::duality_gap;

fn main() {
    let spec = MatrixGameSpec::paper_default();
    let a = spec.row_cost_matrix();
    let eq = matrix_equilibrium(&a).unwrap();
    println!("equilibrium x = {:?}, y = {:?}, value {}", eq.x.as_slice(), eq.y.as_slice(), eq.value);

    let game = make_matrix_game(&spec).unwrap();
    let horizon = 20_000;
    let exact = run_exact_gradient_baseline(&game, BaselineMethod::GdProjected, 0.01, horizon).unwrap();
    let geo = default_geometry(&game).unwrap();
    let bandit = run_linear_variant(&game, &geo, horizon, LinearOptions::default(), 3).unwrap();

    for t in [10, 100, 1_000, 10_000, horizon] {
        let (e, b) = (exact.profile(t), bandit.profile(t));
        println!(
            "t = {t:>6}  gap exact {:.4}  bandit {:.4}",
            duality_gap(&a, &e[0], &e[1]),
            duality_gap(&a, &b[0], &b[1])
        );
    }
}
