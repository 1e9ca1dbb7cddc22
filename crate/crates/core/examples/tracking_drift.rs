// A Cournot market whose demand intercepts oscillate over the run. The
// equilibrium moves, and the tracking schedule keeps the running average of
// the gap <F(x_t), x_t - x_t*> shrinking.

use bandit_games::algorithms::{default_geometry, run_time_varying, schedule_dim, Schedule, SchedulePreset, TimeVaryingMode};
use bandit_games::game::NoiseSpec;
use bandit_games::games::{make_time_varying_cournot, CournotParams, Drift, GameSequence};

fn main() {
    let horizon = 20_000;
    let drift = Drift::Sinusoidal {
        amplitude: 5.0,
        period: horizon as f64,
    };
    let seq = make_time_varying_cournot(&CournotParams::paper_default(), drift, true).unwrap();
    let (path, length) = seq.variation_path(horizon, 1e-10).unwrap();
    println!("equilibrium path over {} steps has length {length:.4}", path.len());

    let geo = default_geometry(&seq.game_at(1).unwrap()).unwrap();
    let phi = 0.0;
    let schedule = Schedule::preset(SchedulePreset::Tracking { phi }, schedule_dim(&geo), seq.kappa()).unwrap();
    let traj = run_time_varying(&seq, TimeVaryingMode::Tracking { phi }, &geo, &schedule, horizon, NoiseSpec::none(), 1).unwrap();
    for (t, avg) in traj.metric("tracking_gap_avg").unwrap().points.iter().step_by(20) {
        println!("t = {t:>6}  average gap {avg:.4}");
    }
}
