//! Recovers IDM parameters from synthetic events generated by a known IDM
//! driver, then checks the fit on held-out events.

use ensemble_follower::calibration::{fitness, run_ga, GaConfig};
use ensemble_follower::data::{synthesize_events, SynthConfig};
use ensemble_follower::kinematics::KinematicsConfig;
use ensemble_follower::models::RuleKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kin = KinematicsConfig::default();
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let train = synthesize_events(&SynthConfig { n_events: 50, seed, ..SynthConfig::default() }, &kin)?;
    let held_out = synthesize_events(
        &SynthConfig { n_events: 20, seed: seed + 1000, id_prefix: "hold".into(), ..SynthConfig::default() },
        &kin,
    )?;

    let start = std::time::Instant::now();
    let cfg = GaConfig { seed, ..GaConfig::default() };
    let result = run_ga(RuleKind::Idm, &RuleKind::Idm.bounds(), &train, &kin, &cfg)?;
    let check = fitness(&result.best_params, &held_out, &kin, cfg.crash_penalty)?;

    println!("{}", result.to_text());
    println!("truth:    {:?}", SynthConfig::default().ground_truth.to_vector());
    println!("held-out spacing RMSPE {:.5}, collisions {}", check.rmspe, check.collisions);
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
