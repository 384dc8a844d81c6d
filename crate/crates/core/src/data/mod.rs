//! Car-following events: ingestion, filtering, splitting and synthesis.

mod csv_io;
mod event;
mod prep;
mod synth;

use thiserror::Error;

pub use csv_io::{load_events, read_events, write_events, write_events_to, ColumnMapping, LoadOutcome, Rejection, DT_TOLERANCE};
pub use event::{derive_fields, DerivedFields, TimeSeriesEvent, MIN_EVENT_SAMPLES, SAMPLE_DT};
pub use prep::{filter_events, longest_low_speed_run, passes_filter, split, split_counts, Dataset, FilterConfig, SplitConfig};
pub use synth::{
    default_ground_truth, equilibrium_spacing, leader_speed, synthesize_events, LeaderProfile, ProfileParams, SynthConfig,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("line {line}: column {column:?} is not numeric ({value:?})")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("line {line}: event {event_id} has sampling interval {dt} s, expected 0.04 s")]
    NonUniformDt { event_id: String, line: u64, dt: f64 },
    #[error("event {event_id}: {reason}")]
    InvalidEvent { event_id: String, reason: String },
    #[error("need at least 3 events to split, got {0}")]
    TooFewEvents(usize),
    #[error("split ratios {0:?} must be in [0, 1] and sum to 1")]
    InvalidRatios([f64; 3]),
    #[error("synthesis: {0}")]
    Synth(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
