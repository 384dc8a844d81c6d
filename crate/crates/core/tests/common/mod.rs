//! Scenario builders shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use ensemble_follower::data::{
    default_ground_truth, synthesize_events, LeaderProfile, ProfileParams, SynthConfig, TimeSeriesEvent,
};
use ensemble_follower::kinematics::KinematicsConfig;
use ensemble_follower::models::{IdmParams, RuleParams};

/// Train and test events generated by the default synthetic driver.
pub fn toy_events(seed: u64) -> (SynthConfig, Vec<TimeSeriesEvent>, Vec<TimeSeriesEvent>) {
    let kin = KinematicsConfig::default();
    let synth = SynthConfig { n_events: 40, seed: 100 + seed, ..SynthConfig::default() };
    let train = synthesize_events(&synth, &kin).unwrap();
    let test = synthesize_events(
        &SynthConfig { n_events: 10, seed: 900 + seed, id_prefix: "test".into(), ..synth.clone() },
        &kin,
    )
    .unwrap();
    (synth, train, test)
}

pub fn brisk_driver() -> IdmParams {
    default_ground_truth()
}

pub fn cautious_driver() -> IdmParams {
    IdmParams { a_max: 0.8, v_desired: 16.0, beta: 4.0, a_comf: 1.0, s_jam: 4.0, t_headway: 2.2 }
}

/// Events from two regimes: brisk followers behind a fast oscillating
/// leader and cautious followers behind a braking leader.
pub fn two_regimes(seed: u64, per_regime: usize, prefix: &str) -> Vec<TimeSeriesEvent> {
    let kin = KinematicsConfig::default();
    let fast = SynthConfig {
        n_events: per_regime,
        leader_profile: LeaderProfile::Sinusoidal,
        profile: ProfileParams { initial_speed: [24.0, 30.0], ..ProfileParams::default() },
        ground_truth: RuleParams::Idm(brisk_driver()),
        seed,
        id_prefix: format!("{prefix}-fast"),
        ..SynthConfig::default()
    };
    let slow = SynthConfig {
        leader_profile: LeaderProfile::BrakePulse,
        profile: ProfileParams { initial_speed: [10.0, 14.0], pulse_floor: 3.0, ..ProfileParams::default() },
        ground_truth: RuleParams::Idm(cautious_driver()),
        seed: seed + 1,
        id_prefix: format!("{prefix}-slow"),
        ..fast.clone()
    };
    let mut events = synthesize_events(&fast, &kin).unwrap();
    events.extend(synthesize_events(&slow, &kin).unwrap());
    events
}

pub fn efollow(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_efollow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("efollow runs")
}
