//! Two traffic regimes, each generated by a different driver: brisk
//! followers behind a fast oscillating leader, and cautious followers
//! behind a braking leader. A selector over the two drivers is compared
//! with each driver alone on a mixed test set.
//!
//! Usage: `regime_mix [seed]`.

use ensemble_follower::config::{Preset, RunConfig};
use ensemble_follower::data::{default_ground_truth, synthesize_events, LeaderProfile, ProfileParams, SynthConfig};
use ensemble_follower::ensemble::RosterEntry;
use ensemble_follower::eval::{compare_models, Candidate};
use ensemble_follower::models::{AnyModel, IdmParams, RuleParams};
use ensemble_follower::rl::{train_ef_ddqn, DdqnConfig};

fn regimes(seed: u64, per_regime: usize, prefix: &str) -> Result<Vec<ensemble_follower::data::TimeSeriesEvent>, Box<dyn std::error::Error>> {
    let kin = RunConfig::preset(Preset::Desk).kinematics;
    let brisk = SynthConfig {
        n_events: per_regime,
        leader_profile: LeaderProfile::Sinusoidal,
        profile: ProfileParams { initial_speed: [24.0, 30.0], ..ProfileParams::default() },
        ground_truth: RuleParams::Idm(default_ground_truth()),
        seed,
        id_prefix: format!("{prefix}-fast"),
        ..SynthConfig::default()
    };
    let cautious = SynthConfig {
        leader_profile: LeaderProfile::BrakePulse,
        profile: ProfileParams { initial_speed: [10.0, 14.0], pulse_floor: 3.0, ..ProfileParams::default() },
        ground_truth: RuleParams::Idm(cautious_driver()),
        seed: seed + 1,
        id_prefix: format!("{prefix}-slow"),
        ..brisk.clone()
    };
    let mut events = synthesize_events(&brisk, &kin)?;
    events.extend(synthesize_events(&cautious, &kin)?);
    Ok(events)
}

fn cautious_driver() -> IdmParams {
    IdmParams { a_max: 0.8, v_desired: 16.0, beta: 4.0, a_comf: 1.0, s_jam: 4.0, t_headway: 2.2 }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let desk = RunConfig::preset(Preset::Desk);
    let train = regimes(1000 + 10 * seed, 20, "train")?;
    let test = regimes(5000 + 10 * seed, 10, "test")?;
    let brisk = AnyModel::Rule(RuleParams::Idm(default_ground_truth()));
    let cautious = AnyModel::Rule(RuleParams::Idm(cautious_driver()));
    let roster = vec![RosterEntry::new("brisk", brisk.clone()), RosterEntry::new("cautious", cautious.clone())];
    let cfg = DdqnConfig { seed, ..desk.ddqn };
    let t0 = std::time::Instant::now();
    let out = train_ef_ddqn(&train, roster, &cfg, &desk.kinematics, &desk.reward)?;
    let report = compare_models(
        &[Candidate::new("brisk", brisk), Candidate::new("cautious", cautious), Candidate::new("selector", out.policy)],
        &test,
        &desk.kinematics,
    )?;
    for m in &report.models {
        println!("{:<9} spacing rmspe {:.4} ± {:.4}  collisions {:.2}", m.model, m.rmspe_spacing.mean, m.rmspe_spacing.std, m.collision_rate);
    }
    println!("trained in {:.1?}", t0.elapsed());
    Ok(())
}
