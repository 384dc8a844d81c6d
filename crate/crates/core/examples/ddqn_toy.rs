//! Trains the discrete selector on a two-model toy ensemble (the driver that
//! generated the data and a constant-zero controller) and reports how often
//! the greedy policy picks the true driver on unseen events.
//!
//! Usage: `ddqn_toy [seed] [env steps]`; defaults to the desk preset budget.

use ensemble_follower::config::{Preset, RunConfig};
use ensemble_follower::data::{synthesize_events, SynthConfig};
use ensemble_follower::ensemble::RosterEntry;
use ensemble_follower::env::Episode;
use ensemble_follower::models::AnyModel;
use ensemble_follower::rl::{moving_average, train_ef_ddqn, DdqnConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let desk = RunConfig::preset(Preset::Desk);
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let total: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(desk.ddqn.total_steps);
    let (kin, reward) = (desk.kinematics, desk.reward);
    let synth = SynthConfig { n_events: 40, seed: 100 + seed, ..SynthConfig::default() };
    let train = synthesize_events(&synth, &kin)?;
    let test = synthesize_events(&SynthConfig { n_events: 10, seed: 900 + seed, id_prefix: "test".into(), ..synth.clone() }, &kin)?;
    let roster = vec![
        RosterEntry::new("truth", AnyModel::Rule(synth.ground_truth)),
        RosterEntry::new("zero", AnyModel::Constant(0.0)),
    ];
    let cfg = DdqnConfig { total_steps: total, seed, ..desk.ddqn };
    let t0 = std::time::Instant::now();
    let out = train_ef_ddqn(&train, roster, &cfg, &kin, &reward)?;

    let (mut hits, mut steps) = (0usize, 0usize);
    for e in &test {
        let mut ep = Episode::new(e, kin, reward);
        while !ep.is_done() {
            let d = out.policy.decide(ep.window())?;
            hits += (d.choice == Some(0)) as usize;
            steps += 1;
            ep.step(d.acc)?;
        }
    }
    let rewards = out.log.column("cumulative_reward").unwrap_or_default();
    let ma = moving_average(&rewards, 20);
    let q = (ma.len() / 4).max(1);
    let first = ma[..q].iter().sum::<f64>() / q as f64;
    let last = ma[ma.len() - q..].iter().sum::<f64>() / q as f64;
    println!("greedy picks the true driver on {:.1}% of {steps} test steps", 100.0 * hits as f64 / steps as f64);
    println!("moving-average episode reward: first quarter {first:.1}, last quarter {last:.1}");
    println!("{} episodes in {:.1?}", rewards.len(), t0.elapsed());
    Ok(())
}
