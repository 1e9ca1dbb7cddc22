// Sampled certificates for the library games: monotonicity of the gradient
// operator, smoothness constants, and the strong convexity constant used by
// the strongly monotone schedules.

use bandit_games::games::{certify, library_game, LIBRARY_GAMES};
use bandit_games::rng::SimRng;

fn main() {
    for (name, description) in LIBRARY_GAMES {
        let lib = library_game(name).unwrap();
        let kappa = (lib.kappa > 0.0).then_some(lib.kappa);
        let cert = certify(&lib.game, kappa, 5_000, &mut SimRng::seed_from_u64(0)).unwrap();
        println!("== {name}: {description}");
        println!("{cert}");
        if let Some(eq) = &lib.equilibrium {
            println!("equilibrium {:.4?}", eq.flatten());
        }
    }
}
