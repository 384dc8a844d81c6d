//! Trains the convex weight policy over three rule-based models and prints
//! the learned weight allocation and the simplex audit.

use ensemble_follower::data::{synthesize_events, SynthConfig};
use ensemble_follower::ensemble::RosterEntry;
use ensemble_follower::env::RewardConfig;
use ensemble_follower::eval::weight_stats;
use ensemble_follower::kinematics::KinematicsConfig;
use ensemble_follower::models::{highd_estimates, AnyModel, RuleParams};
use ensemble_follower::rl::{train_ef_ppo, PpoConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kin = KinematicsConfig::default();
    let synth = SynthConfig {
        n_events: 30,
        seed: 31,
        ..SynthConfig::default()
    };
    let events = synthesize_events(&synth, &kin)?;
    let (train, test) = events.split_at(24);
    let roster = vec![
        RosterEntry::new("truth", AnyModel::Rule(synth.ground_truth)),
        RosterEntry::new("gipps", AnyModel::Rule(RuleParams::Gipps(highd_estimates::gipps()))),
        RosterEntry::new("fvd", AnyModel::Rule(RuleParams::Fvd(highd_estimates::fvd()))),
    ];
    let cfg = PpoConfig {
        step_per_collect: 2_000,
        minibatch: 500,
        total_steps: 30_000,
        reward_scale: 0.1,
        seed: 2,
        ..PpoConfig::default()
    };
    let out = train_ef_ppo(train, roster, &cfg, &kin, &RewardConfig::default())?;
    let a = out.audit;
    println!(
        "simplex audit over {} steps: min weight {:.3e}, max |Σw−1| {:.1e}, blend violations {} -> {}",
        a.steps,
        a.min_weight,
        a.max_sum_error,
        a.blend_violations,
        if a.holds() { "ok" } else { "VIOLATED" }
    );
    let stats = weight_stats(&out.policy, test, &kin)?;
    for m in &stats.models {
        println!(
            "{:<6} weight {:.3} ± {:.3}  primary {:5.1}%  dominating {:5.1}%",
            m.model, m.weight.mean, m.weight.std, m.primary_pct, m.dominating_pct
        );
    }
    Ok(())
}
