//! Builds a discrete ensemble by hand, saves it as a bundle directory,
//! reloads it and checks that both copies make the same decisions.

use ensemble_follower::data::{synthesize_events, SynthConfig};
use ensemble_follower::ensemble::{EnsembleMode, EnsemblePolicy, RosterEntry};
use ensemble_follower::env::{Episode, RewardConfig};
use ensemble_follower::kinematics::KinematicsConfig;
use ensemble_follower::models::{highd_estimates, AnyModel, RuleParams, HISTORY_LEN};
use ensemble_follower::neural::{Mlp, OutputActivation};
use ensemble_follower::rl::fit_normalization;
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kin = KinematicsConfig::default();
    let events = synthesize_events(&SynthConfig { n_events: 4, seed: 41, ..SynthConfig::default() }, &kin)?;
    let roster = vec![
        RosterEntry::new("idm", AnyModel::Rule(RuleParams::Idm(highd_estimates::idm()))),
        RosterEntry::new("gipps", AnyModel::Rule(RuleParams::Gipps(highd_estimates::gipps()))),
        RosterEntry::new("coast", AnyModel::Constant(0.0)),
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let net = Mlp::new(&[3 * HISTORY_LEN, 64, 32, roster.len()], OutputActivation::Linear, &mut rng)?;
    let policy = EnsemblePolicy::new(EnsembleMode::Discrete, net, fit_normalization(&events), roster)?;

    let dir = std::env::temp_dir().join("efollow_bundle");
    policy.save_bundle(&dir)?;
    let reloaded = EnsemblePolicy::load_bundle(&dir)?;
    println!("bundle at {}:", dir.display());
    for entry in std::fs::read_dir(&dir)? {
        println!("  {}", entry?.file_name().to_string_lossy());
    }

    let mut ep = Episode::new(&events[0], kin, RewardConfig::default());
    let mut counts = vec![0usize; policy.k()];
    while !ep.is_done() {
        let a = policy.decide(ep.window())?;
        let b = reloaded.decide(ep.window())?;
        assert_eq!(a, b, "reloaded bundle disagrees");
        counts[a.choice.unwrap_or(0)] += 1;
        ep.step(a.acc)?;
    }
    for (name, n) in policy.names().iter().zip(&counts) {
        println!("{name}: chosen {n} times");
    }
    Ok(())
}
