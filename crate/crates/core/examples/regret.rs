// Individual regret of each Cournot firm against its best fixed quantity in
// hindsight, and the fitted growth exponent of the regret envelope. Anything
// below 1 means the regret grows sublinearly.

use bandit_games::algorithms::{default_geometry, log_grid, run_bandit_mirror_descent, schedule_dim, Schedule, SchedulePreset};
use bandit_games::game::NoiseSpec;
use bandit_games::games::library_game;
use bandit_games::metrics::{fit_rate_positive, individual_regret, RegretClock};

fn main() {
    let lib = library_game("cournot_paper").unwrap();
    let geo = default_geometry(&lib.game).unwrap();
    let schedule = Schedule::preset(SchedulePreset::MonotoneMain, schedule_dim(&geo), lib.kappa).unwrap();
    let horizon = 20_000;
    let traj = run_bandit_mirror_descent(&lib.game, &geo, &schedule, horizon, NoiseSpec::none(), 2).unwrap();

    for i in 0..lib.game.n_players() {
        let r = individual_regret(&traj, &lib.game, i, 101, RegretClock::PerPlay).unwrap();
        let envelope = r.envelope_on(&log_grid(horizon, 40));
        let fit = fit_rate_positive(&envelope, (horizon / 100, horizon)).unwrap();
        println!(
            "firm {i}: best fixed quantity {:.4}, regret at T {:+.3}, envelope growth {fit:?}",
            r.comparator[0],
            r.cumulative.last().unwrap()
        );
    }
}
