// Mixed-strategy dynamics on the simplex: each player samples one action,
// sees its own cost, and updates by an entropy-regularized multiplicative
// step. Both the plain and the optimistic versions approach the softmax
// (entropy-regularized) equilibrium.

use bandit_games::algorithms::{
    regularized_target, run_entropy_bandit_omd, run_optimistic_regularized_ew, EntropyParams, OptimisticParams,
    SimplexFloor,
};
use bandit_games::game::StrategyProfile;
use bandit_games::games::MatrixGameSpec;
use bandit_games::metrics::{divergence_to, Divergence};

fn main() {
    let spec = MatrixGameSpec::paper_default();
    let horizon = 100_000;
    let plain = EntropyParams::preset(horizon, SimplexFloor::Clip);
    let optimistic = OptimisticParams::preset(horizon, SimplexFloor::Offset);
    println!("eta {:.4}, tau {:.4}, floor {:.4}", plain.eta, plain.tau, plain.beta);

    let z = regularized_target(&spec, plain.tau).unwrap();
    println!("regularized equilibrium x = {:.4?}, y = {:.4?}", z.x.as_slice(), z.y.as_slice());
    let target = StrategyProfile::new(vec![z.x, z.y]);

    let a = run_entropy_bandit_omd(&spec, plain, horizon, 1).unwrap();
    let b = run_optimistic_regularized_ew(&spec, optimistic, horizon, 1).unwrap();
    for t in [10, 100, 1_000, 10_000, horizon] {
        let ka = divergence_to(&target, &a.profile(t), Divergence::Kl).unwrap();
        let kb = divergence_to(&target, &b.profile(t), Divergence::Kl).unwrap();
        println!("t = {t:>6}  KL plain {ka:.4}  optimistic {kb:.4}");
    }
}
