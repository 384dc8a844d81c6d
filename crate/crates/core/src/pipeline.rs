//! File-based pipeline stages over a run directory. Each stage reads the
//! artifacts of earlier stages and writes its own, so stages can be run
//! one at a time from the command line.
//!
//! Layout under the run directory:
//!
//! ```text
//! data/    events.csv, rejected.csv, filtered.csv, {train,validation,test}.csv
//! models/  idm.params, gipps.params, fvd.params, rnn.json, ddpg.json, ef_ddqn/, ef_ppo/
//! logs/    <stage>_log.csv, <model>_fitness.csv, ef_ppo_simplex.csv
//! eval/    metrics.csv, per_event.csv, meta.csv
//! stats/   selection.csv, weights.csv and figures
//! report/  metrics, trajectories and figures
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::calibration::{run_ga, CalibrationError, CalibrationResult};
use crate::config::{ConfigError, Preset, RunConfig};
use crate::data::{filter_events, load_events, split, write_events, DataError, TimeSeriesEvent};
use crate::ensemble::{EnsembleError, EnsemblePolicy, RosterEntry};
use crate::eval::{
    compare_models, emit_report, emit_selection, emit_weights, selection_stats, weight_stats, Candidate, EvalError,
    EvaluationReport, ReportOptions, METRICS_HEADER,
};
use crate::models::{AnyModel, ModelError, NetPolicy, RuleKind, RuleParams};
use crate::rl::{train_ddpg_lowlevel, train_ef_ddqn, train_ef_ppo, train_rnn_cloning, RlError, TrainingLog};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Training(#[from] RlError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("missing input {0}; run the earlier stage first")]
    MissingInput(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Short diagnostic category.
    pub fn category(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Data(_) | PipelineError::MissingInput(_) => "input",
            PipelineError::Calibration(_) => "calibration",
            PipelineError::Training(_) => "training",
            PipelineError::Model(_) | PipelineError::Ensemble(_) => "model",
            PipelineError::Eval(_) => "evaluation",
            PipelineError::Io { .. } => "io",
        }
    }

    /// Process exit code for this category. 2 is left to argument errors.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 3,
            "input" => 4,
            "calibration" => 5,
            "training" => 6,
            "model" => 7,
            "evaluation" => 8,
            _ => 9,
        }
    }
}

/// Names of the five low-level models in roster order.
pub const ROSTER_NAMES: [&str; 5] = ["idm", "gipps", "fvd", "rnn", "ddpg"];
pub const DDQN_NAME: &str = "ef_ddqn";
pub const PPO_NAME: &str = "ef_ppo";

/// A run directory plus the configuration every stage reads.
#[derive(Debug, Clone)]
pub struct Run {
    pub root: PathBuf,
    pub cfg: RunConfig,
    pub preset: Preset,
    pub seed: Option<u64>,
}

impl Run {
    pub fn new(root: impl Into<PathBuf>, cfg: RunConfig, preset: Preset, seed: Option<u64>) -> Self {
        Self {
            root: root.into(),
            cfg,
            preset,
            seed,
        }
    }

    pub fn dir(&self, name: &str) -> Result<PathBuf, PipelineError> {
        let d = self.root.join(name);
        fs::create_dir_all(&d).map_err(|source| PipelineError::Io {
            path: d.display().to_string(),
            source,
        })?;
        Ok(d)
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn require(&self, rel: &str) -> Result<PathBuf, PipelineError> {
        let p = self.path(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(PipelineError::MissingInput(p.display().to_string()))
        }
    }

    fn read(&self, rel: &str) -> Result<Vec<TimeSeriesEvent>, PipelineError> {
        let p = self.require(rel)?;
        Ok(load_events(&p, &Default::default())?.events)
    }

    fn write_text(&self, rel: &str, text: &str) -> Result<(), PipelineError> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            self.dir(parent.strip_prefix(&self.root).unwrap_or(parent).to_str().unwrap_or(""))?;
        }
        fs::write(&p, text).map_err(|source| PipelineError::Io {
            path: p.display().to_string(),
            source,
        })
    }

    fn save_log(&self, name: &str, log: &TrainingLog) -> Result<(), PipelineError> {
        self.write_text(&format!("logs/{name}_log.csv"), &log.to_csv())
    }

    /// Writes `data/events.csv` from the synthetic generator.
    pub fn synth(&self) -> Result<usize, PipelineError> {
        let events = crate::data::synthesize_events(&self.cfg.synth, &self.cfg.kinematics)?;
        self.dir("data")?;
        write_events(&self.path("data/events.csv"), &events)?;
        Ok(events.len())
    }

    /// Loads a recorded trajectory CSV into `data/events.csv`; rejected
    /// events are listed in `data/rejected.csv`.
    pub fn ingest(&self, input: &Path) -> Result<(usize, usize), PipelineError> {
        let out = load_events(input, &self.cfg.ingest)?;
        self.dir("data")?;
        write_events(&self.path("data/events.csv"), &out.events)?;
        let mut rej = String::from("event_id,line,reason\n");
        for r in &out.rejected {
            let _ = writeln!(rej, "{},{},\"{}\"", r.event_id, r.line, r.reason.replace('"', "'"));
        }
        self.write_text("data/rejected.csv", &rej)?;
        Ok((out.events.len(), out.rejected.len()))
    }

    /// Writes `data/filtered.csv`; returns kept and dropped counts.
    pub fn filter(&self) -> Result<(usize, usize), PipelineError> {
        let events = self.read("data/events.csv")?;
        let n = events.len();
        let kept = filter_events(events, &self.cfg.filter);
        write_events(&self.path("data/filtered.csv"), &kept)?;
        Ok((kept.len(), n - kept.len()))
    }

    /// Splits the filtered events (or all events when no filter ran).
    pub fn split(&self) -> Result<[usize; 3], PipelineError> {
        let src = if self.path("data/filtered.csv").exists() {
            "data/filtered.csv"
        } else {
            "data/events.csv"
        };
        let ds = split(self.read(src)?, self.cfg.split.ratios, self.cfg.split.seed)?;
        write_events(&self.path("data/train.csv"), &ds.train)?;
        write_events(&self.path("data/validation.csv"), &ds.validation)?;
        write_events(&self.path("data/test.csv"), &ds.test)?;
        Ok([ds.train.len(), ds.validation.len(), ds.test.len()])
    }

    pub fn calibrate(&self, kind: RuleKind) -> Result<CalibrationResult, PipelineError> {
        let train = self.read("data/train.csv")?;
        let result = run_ga(kind, &kind.bounds(), &train, &self.cfg.kinematics, &self.cfg.ga)?;
        let name = kind.name().to_lowercase();
        self.write_text(&format!("models/{name}.params"), &result.to_text())?;
        self.write_text(&format!("logs/{name}_fitness.csv"), &result.history_csv())?;
        if !result.is_accepted() {
            log::warn!("{name}: best parameters still crash on {} events", result.crashes_at_best);
        }
        Ok(result)
    }

    pub fn train_rnn(&self) -> Result<NetPolicy, PipelineError> {
        let train = self.read("data/train.csv")?;
        let validation = self.read("data/validation.csv")?;
        let out = train_rnn_cloning(&train, &validation, &self.cfg.cloning)?;
        self.dir("models")?;
        out.policy.save(&self.path("models/rnn.json"))?;
        self.save_log("rnn", &out.log)?;
        Ok(out.policy)
    }

    pub fn train_ddpg(&self) -> Result<NetPolicy, PipelineError> {
        let train = self.read("data/train.csv")?;
        let out = train_ddpg_lowlevel(&train, &self.cfg.ddpg, &self.cfg.kinematics, &self.cfg.reward)?;
        self.dir("models")?;
        out.policy.save(&self.path("models/ddpg.json"))?;
        self.save_log("ddpg", &out.log)?;
        Ok(out.policy)
    }

    /// The low-level models trained so far, in roster order.
    pub fn roster(&self) -> Result<Vec<RosterEntry>, PipelineError> {
        let mut roster = Vec::new();
        for name in ROSTER_NAMES {
            let rule = self.path(&format!("models/{name}.params"));
            let net = self.path(&format!("models/{name}.json"));
            if rule.exists() {
                roster.push(RosterEntry::new(name, AnyModel::Rule(RuleParams::load(&rule)?)));
            } else if net.exists() {
                roster.push(RosterEntry::new(name, AnyModel::Net(NetPolicy::load(&net)?)));
            } else {
                log::warn!("{name} is not trained yet and is left out of the roster");
            }
        }
        if roster.is_empty() {
            return Err(PipelineError::MissingInput(self.path("models").display().to_string()));
        }
        Ok(roster)
    }

    pub fn train_ef_ddqn(&self) -> Result<EnsemblePolicy, PipelineError> {
        let train = self.read("data/train.csv")?;
        let out = train_ef_ddqn(&train, self.roster()?, &self.cfg.ddqn, &self.cfg.kinematics, &self.cfg.reward)?;
        out.policy.save_bundle(&self.path(&format!("models/{DDQN_NAME}")))?;
        self.save_log(DDQN_NAME, &out.log)?;
        Ok(out.policy)
    }

    pub fn train_ef_ppo(&self) -> Result<EnsemblePolicy, PipelineError> {
        let train = self.read("data/train.csv")?;
        let out = train_ef_ppo(&train, self.roster()?, &self.cfg.ppo, &self.cfg.kinematics, &self.cfg.reward)?;
        out.policy.save_bundle(&self.path(&format!("models/{PPO_NAME}")))?;
        self.save_log(PPO_NAME, &out.log)?;
        let a = out.audit;
        self.write_text(
            &format!("logs/{PPO_NAME}_simplex.csv"),
            &format!(
                "steps,min_weight,max_sum_error,blend_violations\n{},{},{},{}\n",
                a.steps, a.min_weight, a.max_sum_error, a.blend_violations
            ),
        )?;
        Ok(out.policy)
    }

    fn ensemble(&self, name: &str) -> Result<Option<EnsemblePolicy>, PipelineError> {
        let dir = self.path(&format!("models/{name}"));
        if dir.join("manifest.toml").exists() {
            Ok(Some(EnsemblePolicy::load_bundle(&dir)?))
        } else {
            Ok(None)
        }
    }

    /// Every trained model: the roster followed by the ensembles.
    pub fn candidates(&self) -> Result<Vec<Candidate>, PipelineError> {
        let mut out: Vec<Candidate> = self.roster()?.into_iter().map(|r| Candidate::new(r.name, r.model)).collect();
        for name in [DDQN_NAME, PPO_NAME] {
            if let Some(p) = self.ensemble(name)? {
                out.push(Candidate::new(name, p));
            }
        }
        Ok(out)
    }

    fn evaluate(&self) -> Result<(EvaluationReport, Vec<TimeSeriesEvent>), PipelineError> {
        let test = self.read("data/test.csv")?;
        let mut report = compare_models(&self.candidates()?, &test, &self.cfg.kinematics)?;
        report.meta = self.meta();
        Ok((report, test))
    }

    fn meta(&self) -> BTreeMap<String, String> {
        let c = &self.cfg;
        let mut m = BTreeMap::new();
        m.insert("preset".into(), format!("{:?}", self.preset).to_lowercase());
        m.insert("seed".into(), self.seed.map(|s| s.to_string()).unwrap_or_else(|| "config".into()));
        for (k, v) in [
            ("synth_seed", c.synth.seed),
            ("split_seed", c.split.seed),
            ("ga_seed", c.ga.seed),
            ("cloning_seed", c.cloning.seed),
            ("ddpg_seed", c.ddpg.seed),
            ("ddqn_seed", c.ddqn.seed),
            ("ppo_seed", c.ppo.seed),
        ] {
            m.insert(k.into(), v.to_string());
        }
        m
    }

    /// Writes `eval/metrics.csv`, `eval/per_event.csv` and `eval/meta.csv`.
    pub fn eval(&self) -> Result<EvaluationReport, PipelineError> {
        let (report, test) = self.evaluate()?;
        let dir = self.dir("eval")?;
        // tables only; figures come from the report stage
        emit_report(&report, &test, &dir, &ReportOptions { trajectory_events: 0 })?;
        for f in ["rmspe.svg"] {
            let _ = fs::remove_file(dir.join(f));
        }
        let _ = fs::remove_dir(dir.join("trajectories"));
        Ok(report)
    }

    /// Selection statistics of the discrete ensemble and weight statistics
    /// of the convex one, on the test events.
    pub fn stats(&self) -> Result<(), PipelineError> {
        let test = self.read("data/test.csv")?;
        let dir = self.dir("stats")?;
        let mut any = false;
        if let Some(p) = self.ensemble(DDQN_NAME)? {
            emit_selection(&selection_stats(&p, &test, &self.cfg.kinematics)?, &dir)?;
            any = true;
        }
        if let Some(p) = self.ensemble(PPO_NAME)? {
            emit_weights(&weight_stats(&p, &test, &self.cfg.kinematics)?, &dir)?;
            any = true;
        }
        if any {
            Ok(())
        } else {
            Err(PipelineError::MissingInput(self.path("models/ef_ddqn").display().to_string()))
        }
    }

    /// Full report: metric tables, trajectories, figures and, when the
    /// ensembles exist, their statistics.
    pub fn report(&self) -> Result<EvaluationReport, PipelineError> {
        let (report, test) = self.evaluate()?;
        let dir = self.dir("report")?;
        emit_report(
            &report,
            &test,
            &dir,
            &ReportOptions {
                trajectory_events: self.cfg.report.trajectory_events,
            },
        )?;
        if let Some(p) = self.ensemble(DDQN_NAME)? {
            emit_selection(&selection_stats(&p, &test, &self.cfg.kinematics)?, &dir)?;
        }
        if let Some(p) = self.ensemble(PPO_NAME)? {
            emit_weights(&weight_stats(&p, &test, &self.cfg.kinematics)?, &dir)?;
        }
        Ok(report)
    }
}

/// Checks that `text` is a metrics table with the expected header and
/// well-formed rows; returns the model names.
pub fn parse_metrics(text: &str) -> Result<Vec<String>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err("unexpected metrics header".into());
    }
    let mut names = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(format!("row {}: expected 6 columns", i + 1));
        }
        for c in &cols[1..] {
            let v: f64 = c.parse().map_err(|_| format!("row {}: {c:?} is not a number", i + 1))?;
            if !v.is_finite() || v < 0.0 {
                return Err(format!("row {}: {v} is not a finite non-negative value", i + 1));
            }
        }
        let rate: f64 = cols[5].parse().unwrap_or(2.0);
        if rate > 1.0 {
            return Err(format!("row {}: collision rate above one", i + 1));
        }
        names.push(cols[0].to_string());
    }
    Ok(names)
}
