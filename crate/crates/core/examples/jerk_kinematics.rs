//! Steps the jerk-constrained kinematics through an abrupt command sequence
//! and prints how the applied acceleration is rate-limited.

use ensemble_follower::kinematics::{step_jerk_constrained, ClipContext, FollowState, KinematicsConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = KinematicsConfig::default();
    let mut state = FollowState::from_observation(25.0, 20.0, 20.0);
    let mut ctx = ClipContext::new();
    // full throttle, then a panic stop, then an out-of-range command
    let commands: Vec<f64> = [vec![0.0; 2], vec![4.0; 12], vec![-4.0; 22], vec![9.0; 6]].concat();
    println!("{:>5} {:>8} {:>8} {:>8} {:>8}", "t", "command", "applied", "speed", "spacing");
    for (k, cmd) in commands.iter().enumerate() {
        let (next, next_ctx, applied) = step_jerk_constrained(state, ctx, *cmd, 20.0, &cfg)?;
        println!(
            "{:>5.2} {:>8.2} {:>8.3} {:>8.3} {:>8.3}",
            k as f64 * cfg.dt,
            cmd,
            applied,
            next.fv_speed,
            next.spacing
        );
        state = next;
        ctx = next_ctx;
    }
    println!("largest change per step: {:.2} m/s²", cfg.max_acc_step());
    Ok(())
}
