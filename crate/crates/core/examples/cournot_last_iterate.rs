// Five Cournot firms learning from their own profit alone. With marginal cost
// 40 only the two firms with the higher demand intercept produce at
// equilibrium, each 1/9 of capacity. The played quantities converge to it.

use bandit_games::algorithms::{default_geometry, log_grid, run_bandit_mirror_descent, schedule_dim, Schedule, SchedulePreset};
use bandit_games::game::NoiseSpec;
use bandit_games::games::library_game;
use bandit_games::metrics::{divergence_to, Divergence};

fn main() {
    let lib = library_game("cournot_paper").unwrap();
    let nash = lib.equilibrium.clone().unwrap();
    println!("Nash quantities: {:.4?}", nash.flatten());

    let geo = default_geometry(&lib.game).unwrap();
    let schedule = Schedule::preset(SchedulePreset::StronglyMonotoneMain, schedule_dim(&geo), lib.kappa).unwrap();
    let horizon = 20_000;
    let traj = run_bandit_mirror_descent(&lib.game, &geo, &schedule, horizon, NoiseSpec::none(), 1).unwrap();

    for t in log_grid(horizon, 2) {
        let d = divergence_to(&nash, &traj.profile(t), Divergence::Euclid2).unwrap();
        println!("t = {t:>6}  |x - x*|^2 = {d:.3e}");
    }
    println!("final quantities: {:.4?} ({:.1}s)", traj.final_profile().flatten(), traj.wall_clock_secs);
}
