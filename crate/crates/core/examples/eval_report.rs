//! Evaluates a few models and writes the full report: metric tables,
//! per-event trajectories and SVG figures.

use ensemble_follower::data::{synthesize_events, SynthConfig};
use ensemble_follower::eval::{compare_models, emit_report, Candidate, ReportOptions};
use ensemble_follower::kinematics::KinematicsConfig;
use ensemble_follower::models::{highd_estimates, ConstantModel, RuleParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kin = KinematicsConfig::default();
    let synth = SynthConfig { n_events: 10, seed: 51, ..SynthConfig::default() };
    let events = synthesize_events(&synth, &kin)?;
    let candidates = vec![
        Candidate::new("truth", synth.ground_truth),
        Candidate::new("idm", RuleParams::Idm(highd_estimates::idm())),
        Candidate::new("coast", ConstantModel(0.0)),
    ];
    let mut report = compare_models(&candidates, &events, &kin)?;
    report.meta.insert("synth_seed".into(), synth.seed.to_string());
    let dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("efollow_report"));
    emit_report(&report, &events, &dir, &ReportOptions { trajectory_events: 2 })?;
    print!("{}", std::fs::read_to_string(dir.join("metrics.csv"))?);
    println!("report written to {}", dir.display());
    Ok(())
}
