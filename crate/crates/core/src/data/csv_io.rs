use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeriesEvent, SAMPLE_DT};

/// Header names of the five required columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub event_id: String,
    pub t: String,
    pub lv_speed: String,
    pub fv_speed: String,
    pub spacing: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            event_id: "event_id".into(),
            t: "t".into(),
            lv_speed: "lv_speed".into(),
            fv_speed: "fv_speed".into(),
            spacing: "spacing".into(),
        }
    }
}

/// An event dropped during loading and why.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub event_id: String,
    /// 1-based line in the source file (header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome {
    pub events: Vec<TimeSeriesEvent>,
    pub rejected: Vec<Rejection>,
}

/// Largest tolerated deviation of a sampling interval, s.
pub const DT_TOLERANCE: f64 = 1e-6;

struct Row {
    line: u64,
    t: f64,
    lv: f64,
    fv: f64,
    s: f64,
}

pub fn load_events(path: &Path, schema: &ColumnMapping) -> Result<LoadOutcome, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_events(file, schema)
}

/// Reads events from CSV, grouping rows by event id (in order of first
/// appearance) and ordering each event by time.
///
/// Structural problems (missing columns, unparsable numbers, irregular
/// sampling) fail the whole load. Events with negative speeds or
/// non-positive spacing are dropped and reported in
/// [`LoadOutcome::rejected`].
pub fn read_events<R: Read>(reader: R, schema: &ColumnMapping) -> Result<LoadOutcome, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let idx = [
        col(&schema.event_id)?,
        col(&schema.t)?,
        col(&schema.lv_speed)?,
        col(&schema.fv_speed)?,
        col(&schema.spacing)?,
    ];
    let names = [&schema.t, &schema.lv_speed, &schema.fv_speed, &schema.spacing];

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Row>> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let mut nums = [0.0; 4];
        for k in 0..4 {
            let raw = field(k + 1);
            nums[k] = raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DataError::NonNumeric {
                line,
                column: names[k].clone(),
                value: raw.to_string(),
            })?;
        }
        let id = field(0).to_string();
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(Row {
            line,
            t: nums[0],
            lv: nums[1],
            fv: nums[2],
            s: nums[3],
        });
    }

    let mut outcome = LoadOutcome {
        events: Vec::new(),
        rejected: Vec::new(),
    };
    for id in order {
        let mut rows = groups.remove(&id).unwrap_or_default();
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        for pair in rows.windows(2) {
            let dt = pair[1].t - pair[0].t;
            if (dt - SAMPLE_DT).abs() > DT_TOLERANCE {
                return Err(DataError::NonUniformDt {
                    event_id: id,
                    line: pair[1].line,
                    dt,
                });
            }
        }
        if let Some(bad) = rows.iter().find(|r| r.lv < 0.0 || r.fv < 0.0 || r.s <= 0.0) {
            let reason = if bad.s <= 0.0 {
                format!("non-positive spacing {}", bad.s)
            } else {
                "negative speed".to_string()
            };
            log::warn!("rejecting event {id}: {reason} at line {}", bad.line);
            outcome.rejected.push(Rejection {
                event_id: id,
                line: bad.line,
                reason,
            });
            continue;
        }
        if rows.len() < 2 {
            outcome.rejected.push(Rejection {
                event_id: id,
                line: rows.first().map(|r| r.line).unwrap_or(0),
                reason: "fewer than two samples".into(),
            });
            continue;
        }
        let t0 = rows[0].t;
        let event = TimeSeriesEvent::new(
            id,
            SAMPLE_DT,
            rows.iter().map(|r| r.lv).collect(),
            rows.iter().map(|r| r.fv).collect(),
            rows.iter().map(|r| r.s).collect(),
        )?
        .with_start_time(t0);
        outcome.events.push(event);
    }
    Ok(outcome)
}

pub fn write_events_to<W: Write>(writer: W, events: &[TimeSeriesEvent]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["event_id", "t", "lv_speed", "fv_speed", "spacing"])?;
    for e in events {
        for k in 0..e.len() {
            w.write_record([
                e.event_id.clone(),
                format!("{}", e.time(k)),
                format!("{}", e.lv_speed[k]),
                format!("{}", e.fv_speed[k]),
                format!("{}", e.spacing[k]),
            ])?;
        }
    }
    w.flush().map_err(|e| DataError::Io {
        path: "<writer>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn write_events(path: &Path, events: &[TimeSeriesEvent]) -> Result<(), DataError> {
    let file = std::fs::File::create(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    write_events_to(std::io::BufWriter::new(file), events)
}
