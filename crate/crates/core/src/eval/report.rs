//! Writes evaluation results as CSV tables and SVG figures.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::plot::{bar_chart, line_plot, BarGroup, Series};
use super::{EvalError, EvaluationReport, SelectionStats, WeightStats};
use crate::data::TimeSeriesEvent;

pub const METRICS_HEADER: &str = "model,rmspe_spacing_mean,rmspe_spacing_std,rmspe_speed_mean,rmspe_speed_std,collision_rate";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    /// Events (in input order) that get trajectory CSVs and overlay plots.
    pub trajectory_events: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { trajectory_events: 3 }
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), EvalError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn mkdir(dir: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(dir).map_err(|source| EvalError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes `metrics.csv`, `per_event.csv`, `meta.csv`, per-event trajectory
/// tables and the RMSPE and trajectory figures into `dir`.
pub fn emit_report(
    report: &EvaluationReport,
    events: &[TimeSeriesEvent],
    dir: &Path,
    opts: &ReportOptions,
) -> Result<(), EvalError> {
    if report.models.is_empty() {
        return Err(EvalError::NothingToEvaluate("report has no models"));
    }
    mkdir(dir)?;

    let mut metrics = format!("{METRICS_HEADER}\n");
    for m in &report.models {
        let _ = writeln!(
            metrics,
            "{},{},{},{},{},{}",
            m.model, m.rmspe_spacing.mean, m.rmspe_spacing.std, m.rmspe_speed.mean, m.rmspe_speed.std, m.collision_rate
        );
    }
    write(dir, "metrics.csv", &metrics)?;

    let mut per_event = String::from("model,event_id,rmspe_spacing,rmspe_speed,collided,steps\n");
    for r in &report.per_event {
        let _ = writeln!(
            per_event,
            "{},{},{},{},{},{}",
            r.model,
            r.event_id,
            r.rmspe_spacing,
            r.rmspe_speed,
            r.collided as u8,
            r.rollout.steps()
        );
    }
    write(dir, "per_event.csv", &per_event)?;

    let mut meta = String::from("key,value\n");
    for (k, v) in &report.meta {
        let _ = writeln!(meta, "{k},{v}");
    }
    write(dir, "meta.csv", &meta)?;

    let names: Vec<&str> = report.models.iter().map(|m| m.model.as_str()).collect();
    let groups = vec![
        BarGroup {
            category: "spacing".into(),
            values: report.models.iter().map(|m| (m.rmspe_spacing.mean, m.rmspe_spacing.std)).collect(),
        },
        BarGroup {
            category: "speed".into(),
            values: report.models.iter().map(|m| (m.rmspe_speed.mean, m.rmspe_speed.std)).collect(),
        },
    ];
    write(dir, "rmspe.svg", &bar_chart("RMSPE by model", "RMSPE", &names, &groups))?;

    let traj = dir.join("trajectories");
    mkdir(&traj)?;
    for event in events.iter().take(opts.trajectory_events) {
        let runs: Vec<_> = report.per_event.iter().filter(|r| r.event_id == event.event_id).collect();
        let mut spacing = vec![Series {
            name: "observed".into(),
            points: (0..event.len()).map(|t| (t as f64 * event.dt, event.spacing[t])).collect(),
        }];
        let mut speed = vec![Series {
            name: "observed".into(),
            points: (0..event.len()).map(|t| (t as f64 * event.dt, event.fv_speed[t])).collect(),
        }];
        for r in &runs {
            let mut csv = String::from("time,obs_spacing,sim_spacing,obs_speed,sim_speed\n");
            for t in 0..r.rollout.spacing.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    t as f64 * event.dt,
                    event.spacing[t],
                    r.rollout.spacing[t],
                    event.fv_speed[t],
                    r.rollout.speed[t]
                );
            }
            write(&traj, &format!("{}__{}.csv", safe(&event.event_id), safe(&r.model)), &csv)?;
            spacing.push(Series {
                name: r.model.clone(),
                points: r.rollout.spacing.iter().enumerate().map(|(t, v)| (t as f64 * event.dt, *v)).collect(),
            });
            speed.push(Series {
                name: r.model.clone(),
                points: r.rollout.speed.iter().enumerate().map(|(t, v)| (t as f64 * event.dt, *v)).collect(),
            });
        }
        let x = Some((0.0, event.duration()));
        let id = safe(&event.event_id);
        write(
            &traj,
            &format!("{id}_spacing.svg"),
            &line_plot(&format!("Spacing, event {}", event.event_id), "time (s)", "spacing (m)", &spacing, x),
        )?;
        write(
            &traj,
            &format!("{id}_speed.svg"),
            &line_plot(&format!("Follower speed, event {}", event.event_id), "time (s)", "speed (m/s)", &speed, x),
        )?;
    }
    Ok(())
}

/// Writes `selection.csv` and `selection.svg`.
pub fn emit_selection(stats: &SelectionStats, dir: &Path) -> Result<(), EvalError> {
    mkdir(dir)?;
    let mut csv = String::from(
        "model,count,ratio_pct,spacing_mean,spacing_std,lv_speed_mean,lv_speed_std,rel_speed_mean,rel_speed_std,lv_speed_change_pct_mean,lv_speed_change_pct_std\n",
    );
    for m in &stats.models {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            m.model,
            m.count,
            m.ratio_pct,
            m.spacing.mean,
            m.spacing.std,
            m.lv_speed.mean,
            m.lv_speed.std,
            m.rel_speed.mean,
            m.rel_speed.std,
            m.lv_speed_change_pct.mean,
            m.lv_speed_change_pct.std
        );
    }
    write(dir, "selection.csv", &csv)?;
    let names: Vec<&str> = stats.models.iter().map(|m| m.model.as_str()).collect();
    let groups = vec![BarGroup {
        category: "selection ratio".into(),
        values: stats.models.iter().map(|m| (m.ratio_pct, 0.0)).collect(),
    }];
    write(dir, "selection.svg", &bar_chart("Model selection", "% of steps", &names, &groups))
}

/// Writes `weights.csv` and `weights.svg`.
pub fn emit_weights(stats: &WeightStats, dir: &Path) -> Result<(), EvalError> {
    mkdir(dir)?;
    let mut csv = String::from("model,weight_mean,weight_std,primary_pct,dominating_pct\n");
    for m in &stats.models {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            m.model, m.weight.mean, m.weight.std, m.primary_pct, m.dominating_pct
        );
    }
    write(dir, "weights.csv", &csv)?;
    let names: Vec<&str> = stats.models.iter().map(|m| m.model.as_str()).collect();
    let groups = vec![BarGroup {
        category: "weight".into(),
        values: stats.models.iter().map(|m| (m.weight.mean, m.weight.std)).collect(),
    }];
    write(dir, "weights.svg", &bar_chart("Blend weights", "weight", &names, &groups))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{compare_models, Candidate};
    use crate::kinematics::KinematicsConfig;
    use crate::models::ConstantModel;
    use std::collections::BTreeMap;

    fn event(id: &str) -> TimeSeriesEvent {
        TimeSeriesEvent::new(id, 0.04, vec![10.0; 500], vec![10.0; 500], vec![20.0; 500]).unwrap()
    }

    #[test]
    fn writes_tables_and_figures() {
        let dir = tempfile::tempdir().unwrap();
        let events = vec![event("a"), event("b")];
        let cands = vec![Candidate::new("coast", ConstantModel(0.0)), Candidate::new("brake", ConstantModel(-0.5))];
        let report = compare_models(&cands, &events, &KinematicsConfig::default()).unwrap();
        emit_report(&report, &events, dir.path(), &ReportOptions { trajectory_events: 1 }).unwrap();
        let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let mut lines = metrics.lines();
        assert_eq!(lines.next().unwrap(), METRICS_HEADER);
        assert!(lines.next().unwrap().starts_with("coast,0,0,0,0,0"));
        assert_eq!(fs::read_to_string(dir.path().join("per_event.csv")).unwrap().lines().count(), 5);
        assert!(dir.path().join("trajectories/a__brake.csv").exists());
        assert!(!dir.path().join("trajectories/b__brake.csv").exists());
        let svg = fs::read_to_string(dir.path().join("trajectories/a_spacing.svg")).unwrap();
        assert!(svg.contains(r#"data-x-max="20""#), "{}", &svg[..200]);
    }

    #[test]
    fn empty_report_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let report = EvaluationReport {
            models: vec![],
            per_event: vec![],
            meta: BTreeMap::new(),
        };
        assert!(emit_report(&report, &[], dir.path(), &ReportOptions::default()).is_err());
    }
}
