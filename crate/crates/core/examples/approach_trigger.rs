//! Arm/dwell closing trigger driven by a scripted palm approach at 30 Hz,
//! then a second run that backs away before the dwell expires.

use graspcloud::intent::{Observation, Phase};
use graspcloud::{TriggerConfig, TriggerState};

fn run(label: &str, range_at: impl Fn(f64) -> f64) {
    let config = TriggerConfig::default();
    let mut state = TriggerState::new();
    let mut last = state.phase();
    println!("{label}");
    for k in 0..=300 {
        let t = k as f64 / 30.0;
        let obs = Observation {
            object_id: 0,
            range: range_at(t),
            t,
        };
        if let Some(cmd) = state.step(obs, &config).expect("timestamps increase") {
            println!("  {}", cmd.to_json_line());
        }
        let phase = state.phase();
        if std::mem::discriminant(&phase) != std::mem::discriminant(&last) {
            match phase {
                Phase::Idle => println!("  t = {t:.3}  disarmed"),
                Phase::Armed { armed_at, .. } => {
                    println!("  t = {t:.3}  armed at range {:.3} m", range_at(armed_at))
                }
                Phase::Closed { .. } => {}
            }
            last = phase;
        }
    }
    println!("  closed: {}", state.is_closed());
}

fn main() {
    run("steady approach at 0.1 m/s", |t| (0.6 - 0.1 * t).max(0.05));
    run("approach then retreat", |t| {
        if t < 4.0 {
            0.6 - 0.1 * t
        } else {
            0.2 + 0.1 * (t - 4.0)
        }
    });
}
