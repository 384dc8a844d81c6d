//! Generates synthetic events for each leader profile, writes them to CSV
//! and summarises speeds and gaps.

use ensemble_follower::data::{derive_fields, synthesize_events, write_events, LeaderProfile, SynthConfig};
use ensemble_follower::kinematics::KinematicsConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kin = KinematicsConfig::default();
    let out = std::env::temp_dir().join("efollow_synth");
    std::fs::create_dir_all(&out)?;
    for profile in [
        LeaderProfile::Constant,
        LeaderProfile::PiecewiseAccel,
        LeaderProfile::Sinusoidal,
        LeaderProfile::BrakePulse,
    ] {
        let cfg = SynthConfig {
            n_events: 20,
            leader_profile: profile,
            seed: 3,
            ..SynthConfig::default()
        };
        let events = synthesize_events(&cfg, &kin)?;
        let lv_min = events.iter().flat_map(|e| e.lv_speed.iter()).copied().fold(f64::INFINITY, f64::min);
        let gap_min = events.iter().flat_map(|e| e.spacing.iter()).copied().fold(f64::INFINITY, f64::min);
        let acc_max = events
            .iter()
            .flat_map(|e| derive_fields(e).fv_accel)
            .fold(0.0f64, |m, a| m.max(a.abs()));
        let path = out.join(format!("{profile:?}.csv").to_lowercase());
        write_events(&path, &events)?;
        println!(
            "{profile:?}: {} events, leader min {lv_min:.1} m/s, min gap {gap_min:.1} m, peak |accel| {acc_max:.2} m/s² -> {}",
            events.len(),
            path.display()
        );
    }
    Ok(())
}
