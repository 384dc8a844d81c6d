//! Command-line front end for the pipeline stages.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ensemble_follower::config::{Preset, RunConfig};
use ensemble_follower::models::RuleKind;
use ensemble_follower::pipeline::{PipelineError, Run};

#[derive(Parser)]
#[command(name = "efollow", version, about = "Car-following model ensembles: data, calibration, training and evaluation")]
struct Cli {
    /// TOML file overriding preset values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic stage; overrides per-stage seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "desk")]
    preset: PresetArg,
    /// Run directory shared by all stages.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Idm,
    Gipps,
    Fvd,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic events into data/events.csv.
    Synth,
    /// Load a trajectory CSV into data/events.csv.
    Ingest {
        input: PathBuf,
    },
    /// Drop short events and prolonged stoppages.
    Filter,
    /// Split into train, validation and test sets.
    Split,
    /// Calibrate a rule-based model with the genetic algorithm.
    Calibrate {
        #[arg(value_enum)]
        model: ModelArg,
    },
    /// Fit the recurrent model to observed accelerations.
    TrainRnn,
    /// Train the continuous low-level controller.
    TrainDdpg,
    /// Train the discrete model selector.
    TrainEfDdqn,
    /// Train the convex weight policy.
    TrainEfPpo,
    /// Score every trained model on the test set.
    Eval,
    /// Selection and weight statistics of the ensembles.
    Stats,
    /// Metric tables, trajectories and figures.
    Report,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let preset = match cli.preset {
        PresetArg::Paper => Preset::Paper,
        PresetArg::Desk => Preset::Desk,
    };
    let mut cfg = RunConfig::load(preset, cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg = cfg.with_seed(s);
    }
    let run = Run::new(cli.out, cfg, preset, cli.seed);
    match cli.command {
        Command::Synth => println!("{} events", run.synth()?),
        Command::Ingest { input } => {
            let (kept, rejected) = run.ingest(&input)?;
            println!("{kept} events loaded, {rejected} rejected");
        }
        Command::Filter => {
            let (kept, dropped) = run.filter()?;
            println!("{kept} kept, {dropped} dropped");
        }
        Command::Split => {
            let [a, b, c] = run.split()?;
            println!("train {a}, validation {b}, test {c}");
        }
        Command::Calibrate { model } => {
            let kind = match model {
                ModelArg::Idm => RuleKind::Idm,
                ModelArg::Gipps => RuleKind::Gipps,
                ModelArg::Fvd => RuleKind::Fvd,
            };
            let r = run.calibrate(kind)?;
            println!("{}: rmspe {:.4}, crashes {}", kind.name(), r.best_rmspe, r.crashes_at_best);
        }
        Command::TrainRnn => {
            run.train_rnn()?;
            println!("saved models/rnn.json");
        }
        Command::TrainDdpg => {
            run.train_ddpg()?;
            println!("saved models/ddpg.json");
        }
        Command::TrainEfDdqn => {
            let p = run.train_ef_ddqn()?;
            println!("saved models/ef_ddqn over {}", p.names().join(", "));
        }
        Command::TrainEfPpo => {
            let p = run.train_ef_ppo()?;
            println!("saved models/ef_ppo over {}", p.names().join(", "));
        }
        Command::Eval | Command::Report => {
            let report = if matches!(cli.command, Command::Eval) { run.eval()? } else { run.report()? };
            println!("{:<10} {:>18} {:>18} {:>10}", "model", "spacing rmspe", "speed rmspe", "collision");
            for m in &report.models {
                println!(
                    "{:<10} {:>9.4} ± {:<6.4} {:>9.4} ± {:<6.4} {:>10.3}",
                    m.model, m.rmspe_spacing.mean, m.rmspe_spacing.std, m.rmspe_speed.mean, m.rmspe_speed.std, m.collision_rate
                );
            }
        }
        Command::Stats => {
            run.stats()?;
            println!("saved stats/");
        }
        Command::ShowConfig => print!("{}", run.cfg.to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
