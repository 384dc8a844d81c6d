//! Runs the reference-parameter IDM, Gipps and FVD models on synthetic
//! events and prints spacing and speed errors side by side.

use ensemble_follower::data::{synthesize_events, SynthConfig};
use ensemble_follower::eval::{compare_models, Candidate};
use ensemble_follower::kinematics::KinematicsConfig;
use ensemble_follower::models::{highd_estimates, RuleParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kin = KinematicsConfig::default();
    let synth = SynthConfig {
        n_events: 40,
        seed: 5,
        ..SynthConfig::default()
    };
    let events = synthesize_events(&synth, &kin)?;
    let candidates = vec![
        Candidate::new("truth", synth.ground_truth),
        Candidate::new("idm", RuleParams::Idm(highd_estimates::idm())),
        Candidate::new("gipps", RuleParams::Gipps(highd_estimates::gipps())),
        Candidate::new("fvd", RuleParams::Fvd(highd_estimates::fvd())),
    ];
    let report = compare_models(&candidates, &events, &kin)?;
    println!("{:<8} {:>18} {:>18} {:>10}", "model", "spacing rmspe", "speed rmspe", "collision");
    for m in &report.models {
        println!(
            "{:<8} {:>9.4} ± {:<6.4} {:>9.4} ± {:<6.4} {:>10.3}",
            m.model, m.rmspe_spacing.mean, m.rmspe_spacing.std, m.rmspe_speed.mean, m.rmspe_speed.std, m.collision_rate
        );
    }
    Ok(())
}
