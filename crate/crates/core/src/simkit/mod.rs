//! Scenario truth, measurement synthesis and the Monte Carlo engine.
//!
//! Every trajectory is sampled at `t = 0, T, …, horizon·T`, so a run carries
//! `horizon + 1` samples. The bank is initialised from the detection at
//! `t = 0` and stepped on every later sample.

mod config;

pub use config::{DivergenceMetric, Mode, PriorConfig, ScenarioConfig};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::gaussfilt::GaussianBelief;
use crate::kinematics::{course_to_velocity, knots_to_km_per_min, ModelKind, ObserverState};
use crate::lrtma::{FilterBank, FilterBankState};
use crate::sensing::{measure, wrap_angle, BearingPair};

/// Weight a side must reach to count as resolved.
pub const RESOLVED_WEIGHT: f64 = 0.99;

/// SplitMix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` under `master`.
pub fn run_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Ownship track: straight leg, constant-rate turn at constant speed between
/// the manoeuvre instants, straight leg on the final course.
pub fn gen_observer_track(cfg: &ScenarioConfig) -> Vec<ObserverState> {
    let speed = knots_to_km_per_min(cfg.observer_speed_kn);
    let c0 = cfg.observer_course_deg.to_radians();
    let cf = cfg.observer_final_course_deg.to_radians();
    let (ts, te) = (cfg.maneuver_start_min, cfg.maneuver_end_min);
    let rate = (cf - c0) / (te - ts);
    let leg = |c: f64, dt: f64| course_to_velocity(c, speed * dt);
    let arc = |t: f64| {
        let c = c0 + rate * (t - ts);
        if rate.abs() < 1e-12 {
            let (dx, dy) = leg(c0, t - ts);
            return (dx, dy, c);
        }
        let k = speed / rate;
        (k * (c0.cos() - c.cos()), k * (c.sin() - c0.sin()), c)
    };
    let (sx, sy) = leg(c0, ts);
    let (ax, ay, _) = arc(te);
    cfg.times()
        .map(|t| {
            let (x, y, course) = if t <= ts {
                let (dx, dy) = leg(c0, t);
                (dx, dy, c0)
            } else if t < te {
                let (dx, dy, c) = arc(t);
                (sx + dx, sy + dy, c)
            } else {
                let (dx, dy) = leg(cf, t - te);
                (sx + ax + dx, sy + ay + dy, cf)
            };
            ObserverState::from_course(x, y, speed, course)
        })
        .collect()
}

/// Draws process noise `w ~ N(0, Q)` for the CV/CT noise structure.
fn process_noise<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> DVector<f64> {
    let t = cfg.sampling_time_min;
    let q1 = cfg.q1;
    // Cholesky factor of q1·[[T³/3, T²/2], [T²/2, T]] per axis.
    let l11 = (q1 * t.powi(3) / 3.0).sqrt();
    let l21 = (3.0 * q1 * t).sqrt() / 2.0;
    let l22 = (q1 * t / 4.0).sqrt();
    let mut z = [0.0; 5];
    for v in z.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    let mut w = DVector::zeros(cfg.case.state_dim());
    w[0] = l11 * z[0];
    w[2] = l21 * z[0] + l22 * z[1];
    w[1] = l11 * z[2];
    w[3] = l21 * z[2] + l22 * z[3];
    if cfg.case == ModelKind::Ct && cfg.truth_turn_noise {
        w[4] = (cfg.q2 * t).sqrt() * z[4];
    }
    w
}

/// Absolute target track. Case II carries the true turn rate (rad/min, CT
/// sign convention) as a fifth component. Pass `None` for a noise-free track.
pub fn gen_target_track<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    observer_start: &ObserverState,
    mut rng: Option<&mut R>,
) -> Vec<DVector<f64>> {
    let model = cfg.motion_model();
    let bearing = cfg.initial_bearing_deg.to_radians();
    let (vx, vy) = course_to_velocity(
        cfg.target_course_deg.to_radians(),
        knots_to_km_per_min(cfg.target_speed_kn),
    );
    let mut x = DVector::zeros(model.state_dim());
    x[0] = observer_start.x + cfg.initial_range_km * bearing.sin();
    x[1] = observer_start.y + cfg.initial_range_km * bearing.cos();
    x[2] = vx;
    x[3] = vy;
    if model.kind == ModelKind::Ct {
        // Clockwise course rate is a negative CT turn rate.
        x[4] = -cfg.target_turn_rate_deg_per_min.to_radians();
    }
    let mut track = Vec::with_capacity(cfg.horizon_steps + 1);
    track.push(x.clone());
    for _ in 0..cfg.horizon_steps {
        x = model.propagate(&x);
        if let Some(r) = rng.as_deref_mut() {
            x += process_noise(cfg, r);
        }
        track.push(x.clone());
    }
    track
}

/// Relative state `target − observer`, keeping the target's turn rate.
pub fn relative_state(target: &DVector<f64>, obs: &ObserverState) -> DVector<f64> {
    let mut rel = target.clone();
    for (i, v) in obs.kinematic_vector().into_iter().enumerate() {
        rel[i] -= v;
    }
    rel
}

/// Truth and measurements of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub observer: Vec<ObserverState>,
    pub target: Vec<DVector<f64>>,
    pub truth: Vec<DVector<f64>>,
    pub measurements: Vec<BearingPair>,
    /// Slot (0 or 1) holding the target-side bearing for the whole run.
    pub true_slot: usize,
}

pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    let observer = gen_observer_track(cfg);
    let mut truth_rng = ChaCha8Rng::seed_from_u64(if cfg.resample_truth { seed } else { cfg.seed });
    let mut meas_rng = ChaCha8Rng::seed_from_u64(seed);
    meas_rng.set_stream(1);
    let target = gen_target_track(cfg, &observer[0], Some(&mut truth_rng));
    let truth: Vec<_> = target
        .iter()
        .zip(&observer)
        .map(|(x, o)| relative_state(x, o))
        .collect();
    let true_slot = usize::from(meas_rng.random::<bool>());
    let sigma = cfg.bearing_noise();
    let measurements = truth
        .iter()
        .zip(&observer)
        .enumerate()
        .map(|(k, (rel, o))| {
            let pair = measure(rel, o.heading, sigma, cfg.ghost_noise, k, &mut meas_rng)?;
            Ok(if true_slot == 0 { pair } else { pair.swapped() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario {
        observer,
        target,
        truth,
        measurements,
        true_slot,
    })
}

/// Estimate at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct StepEstimate {
    pub fused: GaussianBelief,
    /// Side filters (resolved mode only).
    pub sides: Option<[GaussianBelief; 2]>,
    pub weights: [f64; 2],
}

impl StepEstimate {
    fn from_bank(s: &FilterBankState) -> Self {
        Self {
            fused: s.fused.clone(),
            sides: Some(s.sides.clone()),
            weights: s.weights,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub scenario: Scenario,
    /// One entry per sample; shorter than the scenario only if a filter failed.
    pub estimates: Vec<StepEstimate>,
    /// Filter time in seconds (truth generation excluded).
    pub wall_time: f64,
    pub failure: Option<String>,
    pub terminal_range_error: f64,
    pub terminal_position_error: f64,
    pub diverged: bool,
}

impl RunRecord {
    /// Fused-minus-true error `(dx, dy, dvx, dvy)` per sample.
    pub fn errors(&self) -> Vec<[f64; 4]> {
        self.estimates
            .iter()
            .zip(&self.scenario.truth)
            .map(|(e, x)| {
                let m = &e.fused.mean;
                [m[0] - x[0], m[1] - x[1], m[2] - x[2], m[3] - x[3]]
            })
            .collect()
    }
}

/// Runs the configured filter over a prepared scenario. `init` overrides
/// the first-bearing initialisation of the two slots.
pub fn track_scenario(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    init: Option<[GaussianBelief; 2]>,
) -> (Vec<StepEstimate>, std::result::Result<(), Error>) {
    let bank = FilterBank::new(cfg.motion_model(), cfg.filter, cfg.filter_options(), cfg.bearing_noise());
    let prior = cfg.init_prior();
    let obs = &scenario.observer;
    let meas = &scenario.measurements;
    let mut out = Vec::with_capacity(meas.len());
    match cfg.mode {
        Mode::Resolved => {
            let mut state = bank.init(&meas[0], &prior, &obs[0]);
            if let Some(sides) = init {
                state.fused = crate::lrtma::fuse(&sides[0], &sides[1], state.weights)
                    .expect("init beliefs share a dimension");
                state.sides = sides;
            }
            out.push(StepEstimate::from_bank(&state));
            for k in 1..meas.len() {
                match bank.step(&state, &meas[k], &obs[k - 1], &obs[k]) {
                    Ok(next) => state = next,
                    Err(e) => return (out, Err(e)),
                }
                out.push(StepEstimate::from_bank(&state));
            }
        }
        Mode::KnownSide => {
            let slot = scenario.true_slot;
            let mut weights = [0.0; 2];
            weights[slot] = 1.0;
            let mut belief = match init {
                Some(sides) => sides[slot].clone(),
                None => crate::lrtma::init_side(meas[0].get(slot), &prior, &obs[0], &bank.model),
            };
            out.push(StepEstimate {
                fused: belief.clone(),
                sides: None,
                weights,
            });
            for k in 1..meas.len() {
                match bank.track(&belief, meas[k].get(slot), &obs[k - 1], &obs[k]) {
                    Ok((next, _)) => belief = next,
                    Err(e) => return (out, Err(e)),
                }
                out.push(StepEstimate {
                    fused: belief.clone(),
                    sides: None,
                    weights,
                });
            }
        }
    }
    (out, Ok(()))
}

/// Finishes a run record from a scenario and its tracking outcome.
pub fn assemble_run(
    cfg: &ScenarioConfig,
    seed: u64,
    scenario: Scenario,
    estimates: Vec<StepEstimate>,
    outcome: std::result::Result<(), Error>,
    wall_time: f64,
) -> RunRecord {
    let failure = outcome.err().map(|e| e.to_string());
    let (range_err, pos_err) = match (&failure, estimates.last(), scenario.truth.last()) {
        (None, Some(e), Some(x)) => {
            let m = &e.fused.mean;
            let range_err = (m[0].hypot(m[1]) - x[0].hypot(x[1])).abs();
            let pos_err = (m[0] - x[0]).hypot(m[1] - x[1]);
            (range_err, pos_err)
        }
        _ => (f64::INFINITY, f64::INFINITY),
    };
    let terminal = match cfg.divergence_metric {
        DivergenceMetric::Range => range_err,
        DivergenceMetric::Position => pos_err,
    };
    RunRecord {
        seed,
        scenario,
        estimates,
        wall_time,
        diverged: failure.is_some() || !(terminal <= cfg.track_bound_km),
        failure,
        terminal_range_error: range_err,
        terminal_position_error: pos_err,
    }
}

pub fn simulate_run(cfg: &ScenarioConfig, seed: u64) -> Result<RunRecord> {
    let scenario = generate_scenario(cfg, seed)?;
    let start = Instant::now();
    let (estimates, outcome) = track_scenario(cfg, &scenario, None);
    let wall_time = start.elapsed().as_secs_f64();
    Ok(assemble_run(cfg, seed, scenario, estimates, outcome, wall_time))
}

/// Compact per-run result kept by the Monte Carlo engine.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub index: usize,
    pub seed: u64,
    /// Fused error `(dx, dy, dvx, dvy)` per sample.
    pub errors: Vec<[f64; 4]>,
    pub final_weights: [f64; 2],
    pub true_slot: usize,
    /// First sample at which the larger weight reached [`RESOLVED_WEIGHT`].
    pub resolved_at: Option<usize>,
    pub terminal_range_error: f64,
    pub terminal_position_error: f64,
    /// Terminal error under the configured divergence metric.
    pub terminal_error: f64,
    pub diverged: bool,
    pub failure: Option<String>,
    pub wall_time: f64,
}

impl RunSummary {
    pub fn from_record(index: usize, cfg: &ScenarioConfig, rec: &RunRecord) -> Self {
        let final_weights = rec.estimates.last().map_or([0.5, 0.5], |e| e.weights);
        let resolved_at = rec
            .estimates
            .iter()
            .position(|e| e.weights[0].max(e.weights[1]) >= RESOLVED_WEIGHT);
        Self {
            index,
            seed: rec.seed,
            errors: rec.errors(),
            final_weights,
            true_slot: rec.scenario.true_slot,
            resolved_at,
            terminal_range_error: rec.terminal_range_error,
            terminal_position_error: rec.terminal_position_error,
            terminal_error: match cfg.divergence_metric {
                DivergenceMetric::Range => rec.terminal_range_error,
                DivergenceMetric::Position => rec.terminal_position_error,
            },
            diverged: rec.diverged,
            failure: rec.failure.clone(),
            wall_time: rec.wall_time,
        }
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// The larger final weight sits on the target side.
    pub fn picked_true_side(&self) -> bool {
        self.final_weights[self.true_slot] >= self.final_weights[1 - self.true_slot]
    }
}

fn summarize_run(cfg: &ScenarioConfig, index: usize) -> RunSummary {
    let seed = run_seed(cfg.seed, index as u64);
    match simulate_run(cfg, seed) {
        Ok(rec) => RunSummary::from_record(index, cfg, &rec),
        Err(e) => RunSummary {
            index,
            seed,
            errors: Vec::new(),
            final_weights: [0.5, 0.5],
            true_slot: 0,
            resolved_at: None,
            terminal_range_error: f64::INFINITY,
            terminal_position_error: f64::INFINITY,
            terminal_error: f64::INFINITY,
            diverged: true,
            failure: Some(e.to_string()),
            wall_time: 0.0,
        },
    }
}

const CHUNK: usize = 2048;

/// Runs `cfg.runs` independent runs on `workers` threads (0 = all cores) and
/// hands the summaries to `sink` in run-index order, one chunk at a time.
pub fn run_monte_carlo_streaming<F>(cfg: &ScenarioConfig, workers: usize, mut sink: F) -> Result<()>
where
    F: FnMut(RunSummary),
{
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    let mut start = 0;
    while start < cfg.runs {
        let end = (start + CHUNK).min(cfg.runs);
        let chunk: Vec<RunSummary> =
            pool.install(|| (start..end).into_par_iter().map(|i| summarize_run(cfg, i)).collect());
        chunk.into_iter().for_each(&mut sink);
        start = end;
    }
    Ok(())
}

pub fn run_monte_carlo(cfg: &ScenarioConfig, workers: usize) -> Result<Vec<RunSummary>> {
    let mut out = Vec::with_capacity(cfg.runs);
    run_monte_carlo_streaming(cfg, workers, |s| out.push(s))?;
    Ok(out)
}

/// Wrapped course of a velocity vector, clockwise from north.
pub fn velocity_course(vx: f64, vy: f64) -> f64 {
    wrap_angle(vx.atan2(vy))
}
