//! Real-coded genetic algorithm that fits rule-based model parameters to
//! observed events by minimizing pooled spacing RMSPE plus a crash penalty.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TimeSeriesEvent;
use crate::kinematics::KinematicsConfig;
use crate::models::{CarFollowingModel, ModelError, ParamBound, RuleKind, RuleParams};
use crate::sim::{drive, Rollout, SimError};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("invalid GA configuration: {0}")]
    Config(String),
    #[error("no events to calibrate on")]
    NoEvents,
    #[error("expected {expected} bounds, got {got}")]
    Bounds { expected: usize, got: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub max_generations: usize,
    /// Stop after this many generations without strict improvement.
    pub stall_generations: usize,
    /// Per-gene mutation probability.
    pub mutation_prob: f64,
    /// Mutation standard deviation as a fraction of each bound's width.
    pub mutation_scale: f64,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub elitism: usize,
    /// Added to the fitness once per event whose rollout collides.
    pub crash_penalty: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 100,
            max_generations: 100,
            stall_generations: 100,
            mutation_prob: 0.2,
            mutation_scale: 0.1,
            tournament_size: 3,
            crossover_prob: 0.9,
            elitism: 1,
            crash_penalty: 1.0,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: &str| Err(CalibrationError::Config(m.into()));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) || !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be positive");
        }
        if self.elitism >= self.population {
            return bad("elitism must be smaller than the population");
        }
        if !(self.mutation_scale >= 0.0) || !(self.crash_penalty >= 0.0) {
            return bad("mutation_scale and crash_penalty must be non-negative");
        }
        Ok(())
    }
}

/// Rolls `model` through the event's recorded leader speeds starting from
/// its first observed state.
pub fn simulate_model_on_event<M: CarFollowingModel + ?Sized>(
    model: &M,
    event: &TimeSeriesEvent,
    kin: &KinematicsConfig,
) -> Result<Rollout, SimError> {
    drive(model, &event.lv_speed, event.initial_state(), kin)
}

/// Squared-error sums of one rollout against the observed spacing over the
/// simulated steps, leaving out the colliding step itself.
pub fn spacing_error_sums(rollout: &Rollout, event: &TimeSeriesEvent) -> (f64, f64) {
    let end = if rollout.collided {
        rollout.spacing.len() - 1
    } else {
        rollout.spacing.len()
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 1..end {
        let d = rollout.spacing[t] - event.spacing[t];
        num += d * d;
        den += event.spacing[t] * event.spacing[t];
    }
    (num, den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    /// Spacing RMSPE pooled over every simulated step of every event.
    pub rmspe: f64,
    pub collisions: usize,
    pub value: f64,
}

/// Pooled spacing RMSPE over all events plus `penalty` per colliding event.
///
/// Per-event sums are combined in sorted order, so the result does not
/// depend on the order of `events`.
pub fn fitness<M: CarFollowingModel + ?Sized>(
    model: &M,
    events: &[TimeSeriesEvent],
    kin: &KinematicsConfig,
    penalty: f64,
) -> Result<Fitness, CalibrationError> {
    if events.is_empty() {
        return Err(CalibrationError::NoEvents);
    }
    let mut parts = Vec::with_capacity(events.len());
    let mut collisions = 0;
    for e in events {
        let r = simulate_model_on_event(model, e, kin)?;
        collisions += r.collided as usize;
        parts.push(spacing_error_sums(&r, e));
    }
    parts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (num, den) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let rmspe = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    Ok(Fitness {
        rmspe,
        collisions,
        value: rmspe + penalty * collisions as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_rmspe: f64,
    pub crashes_at_best: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub best_params: RuleParams,
    pub best_fitness: f64,
    pub best_rmspe: f64,
    pub crashes_at_best: usize,
    /// Generation 0 is the initial population.
    pub fitness_history: Vec<GenerationRecord>,
}

impl CalibrationResult {
    /// Only collision-free calibrations are usable as low-level models.
    pub fn is_accepted(&self) -> bool {
        self.crashes_at_best == 0
    }

    /// Parameter file with the fitness summary as leading comments.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# best_fitness = {}", self.best_fitness);
        let _ = writeln!(s, "# best_rmspe = {}", self.best_rmspe);
        let _ = writeln!(s, "# crashes_at_best = {}", self.crashes_at_best);
        let _ = writeln!(s, "# generations = {}", self.fitness_history.len().saturating_sub(1));
        s.push_str(&self.best_params.to_param_text());
        s
    }

    pub fn history_csv(&self) -> String {
        let mut s = String::from("generation,best_fitness,mean_fitness,best_rmspe,crashes_at_best\n");
        for r in &self.fitness_history {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.generation, r.best_fitness, r.mean_fitness, r.best_rmspe, r.crashes_at_best
            );
        }
        s
    }

    /// Writes `<stem>.params` and `<stem>_fitness.csv` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), CalibrationError> {
        write_file(&dir.join(format!("{stem}.params")), &self.to_text())?;
        write_file(&dir.join(format!("{stem}_fitness.csv")), &self.history_csv())
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CalibrationError> {
    let io = |e| CalibrationError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

fn evaluate(
    kind: RuleKind,
    pop: &[Vec<f64>],
    events: &[TimeSeriesEvent],
    kin: &KinematicsConfig,
    penalty: f64,
) -> Vec<Fitness> {
    pop.par_iter()
        .map(|x| {
            let outcome = kind
                .from_vector(x)
                .map_err(CalibrationError::from)
                .and_then(|m| fitness(&m, events, kin, penalty));
            outcome.unwrap_or_else(|e| {
                log::debug!("candidate {x:?} failed: {e}");
                Fitness {
                    rmspe: f64::INFINITY,
                    collisions: events.len(),
                    value: f64::INFINITY,
                }
            })
        })
        .collect()
}

/// Index of the lowest fitness, lowest index on ties.
fn argmin(fit: &[Fitness]) -> usize {
    let mut best = 0;
    for (i, f) in fit.iter().enumerate() {
        if f.value < fit[best].value {
            best = i;
        }
    }
    best
}

fn tournament<R: Rng>(rng: &mut R, fit: &[Fitness], size: usize) -> usize {
    let mut best = rng.gen_range(0..fit.len());
    for _ in 1..size {
        let c = rng.gen_range(0..fit.len());
        if fit[c].value < fit[best].value || (fit[c].value == fit[best].value && c < best) {
            best = c;
        }
    }
    best
}

fn mutate<R: Rng>(rng: &mut R, x: &mut [f64], bounds: &[ParamBound], cfg: &GaConfig) {
    for (g, b) in x.iter_mut().zip(bounds) {
        if rng.gen_bool(cfg.mutation_prob) {
            let sigma = cfg.mutation_scale * b.width();
            if sigma > 0.0 {
                let noise = Normal::new(0.0, sigma).expect("positive sigma");
                *g += noise.sample(rng);
            }
        }
        *g = g.clamp(b.lo, b.hi);
    }
}

/// Runs the GA over `bounds` for `kind`.
///
/// Breeding draws every random number sequentially from one seeded stream
/// before the population is evaluated in parallel, so results do not
/// depend on thread scheduling.
pub fn run_ga(
    kind: RuleKind,
    bounds: &[ParamBound],
    events: &[TimeSeriesEvent],
    kin: &KinematicsConfig,
    cfg: &GaConfig,
) -> Result<CalibrationResult, CalibrationError> {
    cfg.validate()?;
    if events.is_empty() {
        return Err(CalibrationError::NoEvents);
    }
    let dims = kind.bounds().len();
    if bounds.len() != dims {
        return Err(CalibrationError::Bounds {
            expected: dims,
            got: bounds.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<Vec<f64>> = (0..cfg.population)
        .map(|_| {
            bounds
                .iter()
                .map(|b| if b.hi > b.lo { rng.gen_range(b.lo..=b.hi) } else { b.lo })
                .collect()
        })
        .collect();
    let mut fit = evaluate(kind, &pop, events, kin, cfg.crash_penalty);

    let record = |generation: usize, fit: &[Fitness]| {
        let b = argmin(fit);
        let finite: Vec<f64> = fit.iter().map(|f| f.value).filter(|v| v.is_finite()).collect();
        GenerationRecord {
            generation,
            best_fitness: fit[b].value,
            mean_fitness: if finite.is_empty() {
                f64::INFINITY
            } else {
                finite.iter().sum::<f64>() / finite.len() as f64
            },
            best_rmspe: fit[b].rmspe,
            crashes_at_best: fit[b].collisions,
        }
    };
    let mut history = vec![record(0, &fit)];
    let mut stall = 0;

    for generation in 1..=cfg.max_generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[a].value.total_cmp(&fit[b].value).then(a.cmp(&b)));
        let mut next: Vec<Vec<f64>> = order[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < cfg.population {
            let p1 = &pop[tournament(&mut rng, &fit, cfg.tournament_size)];
            let p2 = &pop[tournament(&mut rng, &fit, cfg.tournament_size)];
            let (mut c1, mut c2) = (p1.clone(), p2.clone());
            if rng.gen_bool(cfg.crossover_prob) {
                for j in 0..dims {
                    let u: f64 = rng.gen();
                    c1[j] = u * p1[j] + (1.0 - u) * p2[j];
                    c2[j] = (1.0 - u) * p1[j] + u * p2[j];
                }
            }
            mutate(&mut rng, &mut c1, bounds, cfg);
            mutate(&mut rng, &mut c2, bounds, cfg);
            next.push(c1);
            if next.len() < cfg.population {
                next.push(c2);
            }
        }
        pop = next;
        fit = evaluate(kind, &pop, events, kin, cfg.crash_penalty);
        let rec = record(generation, &fit);
        let prev_best = history.last().map(|r| r.best_fitness).unwrap_or(f64::INFINITY);
        if rec.best_fitness < prev_best {
            stall = 0;
        } else {
            stall += 1;
        }
        log::debug!("{kind} generation {generation}: best {}", rec.best_fitness);
        history.push(rec);
        if stall >= cfg.stall_generations {
            break;
        }
    }

    let b = argmin(&fit);
    let result = CalibrationResult {
        best_params: kind.from_vector(&pop[b])?,
        best_fitness: fit[b].value,
        best_rmspe: fit[b].rmspe,
        crashes_at_best: fit[b].collisions,
        fitness_history: history,
    };
    if !result.is_accepted() {
        log::warn!(
            "{kind}: best candidate still collides on {} event(s); result is not usable",
            result.crashes_at_best
        );
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize_events, LeaderProfile, SynthConfig};
    use crate::models::ConstantModel;
    use proptest::prelude::*;

    fn events(n: usize, seed: u64) -> Vec<TimeSeriesEvent> {
        let cfg = SynthConfig {
            n_events: n,
            duration: 15.0,
            seed,
            ..SynthConfig::default()
        };
        synthesize_events(&cfg, &KinematicsConfig::default()).unwrap()
    }

    #[test]
    fn ground_truth_reproduces_its_own_events() {
        let kin = KinematicsConfig::default();
        let cfg = SynthConfig::default();
        for e in events(5, 3) {
            let r = simulate_model_on_event(&cfg.ground_truth, &e, &kin).unwrap();
            assert!(!r.collided);
            for (a, b) in r.spacing.iter().zip(&e.spacing) {
                assert!((a - b).abs() < 1e-6);
            }
        }
        let f = fitness(&cfg.ground_truth, &events(5, 3), &kin, 1.0).unwrap();
        assert!(f.value < 1e-9);
    }

    /// Independent pooled RMSPE over pre-collision steps.
    fn oracle(model: &dyn CarFollowingModel, evs: &[TimeSeriesEvent], kin: &KinematicsConfig) -> (f64, usize) {
        let (mut n, mut d, mut c) = (0.0, 0.0, 0);
        for e in evs {
            let r = simulate_model_on_event(model, e, kin).unwrap();
            for t in 1..r.spacing.len() {
                if r.spacing[t] <= 0.0 {
                    c += 1;
                    break;
                }
                n += (r.spacing[t] - e.spacing[t]).powi(2);
                d += e.spacing[t].powi(2);
            }
        }
        ((n / d).sqrt(), c)
    }

    #[test]
    fn one_collision_adds_one_penalty() {
        let kin = KinematicsConfig::default();
        let truth = SynthConfig::default().ground_truth;
        let mut evs = events(9, 4);
        // a stopped leader a few metres ahead guarantees a crash at full throttle
        let crash = TimeSeriesEvent::new("crash", 0.04, vec![0.0; 400], vec![5.0; 400], vec![3.0; 400]).unwrap();
        let rammer = ConstantModel(4.0);
        let r = simulate_model_on_event(&rammer, &crash, &kin).unwrap();
        assert!(r.collided);
        evs.push(crash);
        #[derive(Debug)]
        struct Mixed(RuleParams);
        impl CarFollowingModel for Mixed {
            fn acceleration(&self, w: &crate::models::StateWindow) -> Result<f64, ModelError> {
                if w.newest().lv_speed() == 0.0 {
                    Ok(4.0)
                } else {
                    self.0.acceleration(w)
                }
            }
        }
        let m = Mixed(truth);
        let f = fitness(&m, &evs, &kin, 1.0).unwrap();
        let (rmspe, crashes) = oracle(&m, &evs, &kin);
        assert_eq!(crashes, 1);
        assert_eq!(f.collisions, 1);
        assert!((f.value - (rmspe + 1.0)).abs() < 1e-12);
        let doubled = fitness(&m, &evs, &kin, 2.0).unwrap();
        assert!(doubled.value > f.value);
    }

    #[test]
    fn fitness_ignores_event_order() {
        let kin = KinematicsConfig::default();
        let model = RuleParams::Idm(crate::models::highd_estimates::idm());
        let mut evs = events(6, 5);
        let a = fitness(&model, &evs, &kin, 1.0).unwrap();
        evs.reverse();
        evs.swap(0, 3);
        let b = fitness(&model, &evs, &kin, 1.0).unwrap();
        assert_eq!(a, b);
    }

    fn small_cfg(seed: u64) -> GaConfig {
        GaConfig {
            population: 12,
            max_generations: 4,
            seed,
            ..GaConfig::default()
        }
    }

    #[test]
    fn collapsed_bounds_return_the_point() {
        let kin = KinematicsConfig::default();
        let point = [1.0, 25.0, 4.0, 1.5, 2.0, 1.2];
        let bounds: Vec<ParamBound> = RuleKind::Idm
            .bounds()
            .into_iter()
            .zip(point)
            .map(|(b, x)| ParamBound { lo: x, hi: x, ..b })
            .collect();
        let cfg = GaConfig {
            max_generations: 1,
            ..small_cfg(1)
        };
        let r = run_ga(RuleKind::Idm, &bounds, &events(3, 1), &kin, &cfg).unwrap();
        assert_eq!(r.best_params.to_vector(), point.to_vec());
        assert_eq!(r.fitness_history.len(), 2);
    }

    #[test]
    fn same_seed_same_result_and_history_is_monotone() {
        let kin = KinematicsConfig::default();
        let evs = events(4, 2);
        let a = run_ga(RuleKind::Gipps, &RuleKind::Gipps.bounds(), &evs, &kin, &small_cfg(9)).unwrap();
        let b = run_ga(RuleKind::Gipps, &RuleKind::Gipps.bounds(), &evs, &kin, &small_cfg(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.fitness_history.windows(2).all(|w| w[1].best_fitness <= w[0].best_fitness));
        let min = a.fitness_history.iter().map(|r| r.best_fitness).fold(f64::INFINITY, f64::min);
        assert_eq!(a.best_fitness, min);
    }

    #[test]
    fn stall_stops_early() {
        let kin = KinematicsConfig::default();
        let cfg = GaConfig {
            stall_generations: 1,
            max_generations: 50,
            ..small_cfg(3)
        };
        let r = run_ga(RuleKind::Idm, &RuleKind::Idm.bounds(), &events(2, 6), &kin, &cfg).unwrap();
        assert!(r.fitness_history.len() < 51);
    }

    #[test]
    fn result_text_round_trips_params() {
        let kin = KinematicsConfig::default();
        let r = run_ga(RuleKind::Fvd, &RuleKind::Fvd.bounds(), &events(2, 8), &kin, &small_cfg(2)).unwrap();
        let back = RuleParams::from_param_text(&r.to_text()).unwrap();
        for (a, b) in back.to_vector().iter().zip(r.best_params.to_vector()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert_eq!(r.history_csv().lines().count(), r.fitness_history.len() + 1);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let kin = KinematicsConfig::default();
        let evs = events(1, 1);
        let bad = GaConfig {
            population: 1,
            ..GaConfig::default()
        };
        assert!(run_ga(RuleKind::Idm, &RuleKind::Idm.bounds(), &evs, &kin, &bad).is_err());
        assert!(run_ga(RuleKind::Idm, &RuleKind::Idm.bounds()[..3], &evs, &kin, &small_cfg(0)).is_err());
        assert!(run_ga(RuleKind::Idm, &RuleKind::Idm.bounds(), &[], &kin, &small_cfg(0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn offspring_stay_within_bounds(seed in any::<u64>(), genes in proptest::collection::vec(-50.0f64..300.0, 6)) {
            let bounds = RuleKind::Fvd.bounds();
            let cfg = GaConfig { mutation_prob: 1.0, mutation_scale: 3.0, ..GaConfig::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = genes;
            mutate(&mut rng, &mut x, &bounds, &cfg);
            for (g, b) in x.iter().zip(&bounds) {
                prop_assert!(b.contains(*g));
            }
        }
    }

    #[test]
    fn equilibrium_events_have_zero_fitness() {
        let kin = KinematicsConfig::default();
        let cfg = SynthConfig {
            n_events: 2,
            leader_profile: LeaderProfile::Constant,
            ..SynthConfig::default()
        };
        let evs = synthesize_events(&cfg, &kin).unwrap();
        assert!(fitness(&cfg.ground_truth, &evs, &kin, 1.0).unwrap().value < 1e-9);
    }
}
