use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeriesEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// s
    pub min_duration: f64,
    /// Follower speed below which the vehicle counts as crawling, m/s.
    pub low_speed_threshold: f64,
    /// Longest tolerated contiguous low-speed run, s.
    pub max_low_speed_run: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_duration: 15.0,
            low_speed_threshold: 1.0,
            max_low_speed_run: 5.0,
        }
    }
}

/// Longest contiguous run of follower speed below `threshold`, s.
pub fn longest_low_speed_run(event: &TimeSeriesEvent, threshold: f64) -> f64 {
    let mut best = 0usize;
    let mut run = 0usize;
    for &v in &event.fv_speed {
        if v < threshold {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best as f64 * event.dt
}

pub fn passes_filter(event: &TimeSeriesEvent, cfg: &FilterConfig) -> bool {
    // tolerance absorbs the rounding in len * dt
    event.duration() + 1e-9 >= cfg.min_duration
        && longest_low_speed_run(event, cfg.low_speed_threshold) <= cfg.max_low_speed_run + 1e-9
}

/// Keeps events long enough and free of prolonged stoppage; whole events are
/// dropped, never trimmed.
pub fn filter_events(events: Vec<TimeSeriesEvent>, cfg: &FilterConfig) -> Vec<TimeSeriesEvent> {
    events.into_iter().filter(|e| passes_filter(e, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: [0.7, 0.15, 0.15],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<TimeSeriesEvent>,
    pub validation: Vec<TimeSeriesEvent>,
    pub test: Vec<TimeSeriesEvent>,
    pub split_seed: u64,
}

/// Bucket sizes: `floor(ratio * n)` each, remainder to train then
/// validation.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let mut counts = ratios.map(|r| (r * n as f64 + 1e-9).floor() as usize);
    let mut remainder = n - counts.iter().sum::<usize>();
    let mut k = 0;
    while remainder > 0 {
        counts[k % 2] += 1;
        remainder -= 1;
        k += 1;
    }
    counts
}

/// Deterministic seeded shuffle followed by a train/validation/test split.
pub fn split(mut events: Vec<TimeSeriesEvent>, ratios: [f64; 3], seed: u64) -> Result<Dataset, DataError> {
    if events.len() < 3 {
        return Err(DataError::TooFewEvents(events.len()));
    }
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::InvalidRatios(ratios));
    }
    let counts = split_counts(events.len(), ratios);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    events.shuffle(&mut rng);
    let test = events.split_off(counts[0] + counts[1]);
    let validation = events.split_off(counts[0]);
    Ok(Dataset {
        train: events,
        validation,
        test,
        split_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn event(id: usize, n: usize, fv: impl Fn(usize) -> f64) -> TimeSeriesEvent {
        TimeSeriesEvent::new(
            format!("e{id}"),
            0.04,
            vec![20.0; n],
            (0..n).map(fv).collect(),
            vec![15.0; n],
        )
        .unwrap()
    }

    #[test]
    fn short_events_are_removed() {
        let out = filter_events(vec![event(0, 250, |_| 20.0)], &FilterConfig::default());
        assert!(out.is_empty());
    }

    #[test]
    fn long_stoppage_is_removed() {
        // 20 s event with the follower stopped for 6 s
        let e = event(0, 500, |k| if (100..250).contains(&k) { 0.0 } else { 15.0 });
        assert!(filter_events(vec![e], &FilterConfig::default()).is_empty());
    }

    #[test]
    fn fluent_event_is_retained() {
        let e = event(0, 500, |_| 15.0);
        assert_eq!(filter_events(vec![e.clone()], &FilterConfig::default()), vec![e]);
    }

    #[test]
    fn fifteen_seconds_exactly_is_enough() {
        assert_eq!(filter_events(vec![event(0, 375, |_| 20.0)], &FilterConfig::default()).len(), 1);
        assert!(filter_events(vec![event(0, 374, |_| 20.0)], &FilterConfig::default()).is_empty());
    }

    #[test]
    fn split_counts_follow_floor_then_distribute() {
        assert_eq!(split_counts(100, [0.7, 0.15, 0.15]), [70, 15, 15]);
        assert_eq!(split_counts(20, [0.7, 0.15, 0.15]), [14, 3, 3]);
        assert_eq!(split_counts(11, [0.7, 0.15, 0.15]), [8, 2, 1]);
    }

    #[test]
    fn split_is_deterministic_and_proportional() {
        let events: Vec<_> = (0..100).map(|k| event(k, 10, |_| 20.0)).collect();
        let a = split(events.clone(), [0.7, 0.15, 0.15], 1).unwrap();
        let b = split(events, [0.7, 0.15, 0.15], 1).unwrap();
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (70, 15, 15));
        assert_eq!(a, b);
    }

    #[test]
    fn split_errors() {
        let events: Vec<_> = (0..2).map(|k| event(k, 10, |_| 20.0)).collect();
        assert!(matches!(split(events, [0.7, 0.15, 0.15], 0), Err(DataError::TooFewEvents(2))));
        let events: Vec<_> = (0..5).map(|k| event(k, 10, |_| 20.0)).collect();
        assert!(split(events, [0.5, 0.5, 0.5], 0).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_input(n in 3usize..60, seed in any::<u64>()) {
            let events: Vec<_> = (0..n).map(|k| event(k, 3, |_| 20.0)).collect();
            let d = split(events, [0.7, 0.15, 0.15], seed).unwrap();
            let ids: Vec<&str> = d.train.iter().chain(&d.validation).chain(&d.test).map(|e| e.event_id.as_str()).collect();
            let unique: HashSet<&str> = ids.iter().copied().collect();
            prop_assert_eq!(ids.len(), n);
            prop_assert_eq!(unique.len(), n);
            let expected = [0.7, 0.15, 0.15].map(|r| r * n as f64);
            for (got, want) in [d.train.len(), d.validation.len(), d.test.len()].iter().zip(expected) {
                prop_assert!((*got as f64 - want).abs() <= 1.0 + 1e-9);
            }
        }

        #[test]
        fn filter_is_idempotent(lens in proptest::collection::vec(300usize..450, 1..8), stop in 0usize..200) {
            let events: Vec<_> = lens.iter().enumerate()
                .map(|(k, &n)| event(k, n, |t| if t >= 50 && t < 50 + stop * (k % 2) { 0.2 } else { 12.0 }))
                .collect();
            let cfg = FilterConfig::default();
            let once = filter_events(events, &cfg);
            let twice = filter_events(once.clone(), &cfg);
            prop_assert_eq!(once, twice);
        }
    }
}
