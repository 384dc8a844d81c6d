//! Fits the recurrent model to observed follower accelerations and compares
//! its closed-loop spacing error with a coasting baseline.

use ensemble_follower::data::{synthesize_events, SynthConfig};
use ensemble_follower::eval::{compare_models, Candidate};
use ensemble_follower::kinematics::KinematicsConfig;
use ensemble_follower::models::ConstantModel;
use ensemble_follower::rl::{train_rnn_cloning, CloningConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kin = KinematicsConfig::default();
    let synth = SynthConfig {
        n_events: 40,
        seed: 11,
        ..SynthConfig::default()
    };
    let events = synthesize_events(&synth, &kin)?;
    let (train, rest) = events.split_at(30);
    let (validation, test) = rest.split_at(5);
    let cfg = CloningConfig {
        epochs: 10,
        hidden: 16,
        sample_stride: 4,
        ..CloningConfig::default()
    };
    let out = train_rnn_cloning(train, validation, &cfg)?;
    let tl = out.log.column("train_loss").unwrap_or_default();
    let vl = out.log.column("validation_loss").unwrap_or_default();
    for (e, (t, v)) in tl.iter().zip(&vl).enumerate() {
        println!("epoch {:>2}: train {t:.4}  validation {v:.4}", e + 1);
    }
    let report = compare_models(
        &[Candidate::new("rnn", out.policy), Candidate::new("coast", ConstantModel(0.0))],
        test,
        &kin,
    )?;
    for m in &report.models {
        println!("{}: spacing rmspe {:.4}, collisions {:.2}", m.model, m.rmspe_spacing.mean, m.collision_rate);
    }
    Ok(())
}
