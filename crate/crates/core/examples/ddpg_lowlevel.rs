//! Trains the continuous low-level controller for a short budget and
//! reports the held-out error before and after training.

use ensemble_follower::data::{synthesize_events, SynthConfig};
use ensemble_follower::env::RewardConfig;
use ensemble_follower::eval::{compare_models, Candidate};
use ensemble_follower::kinematics::KinematicsConfig;
use ensemble_follower::rl::{train_ddpg_lowlevel, DdpgConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let total: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30_000);
    let kin = KinematicsConfig::default();
    let synth = SynthConfig {
        n_events: 40,
        seed: 21,
        ..SynthConfig::default()
    };
    let events = synthesize_events(&synth, &kin)?;
    let (train, test) = events.split_at(30);
    let base = DdpgConfig {
        batch_size: 64,
        training_start: 2_000,
        buffer_size: 50_000,
        reward_scale: 0.1,
        seed: 1,
        ..DdpgConfig::default()
    };
    let reward = RewardConfig::default();
    // a run that never reaches its first update is the untrained actor
    let before = train_ddpg_lowlevel(train, &DdpgConfig { total_steps: 1, ..base.clone() }, &kin, &reward)?;
    let after = train_ddpg_lowlevel(train, &DdpgConfig { total_steps: total, ..base }, &kin, &reward)?;
    let rewards = after.log.column("cumulative_reward").unwrap_or_default();
    println!("{} episodes, last episode reward {:.1}", rewards.len(), rewards.last().copied().unwrap_or(f64::NAN));
    let report = compare_models(
        &[Candidate::new("untrained", before.policy), Candidate::new("trained", after.policy)],
        test,
        &kin,
    )?;
    for m in &report.models {
        println!(
            "{:<10} speed rmspe {:.4}  spacing rmspe {:.4}  collisions {:.2}",
            m.model, m.rmspe_speed.mean, m.rmspe_spacing.mean, m.collision_rate
        );
    }
    Ok(())
}
