//! Alternating optimization over slack, digital precoder, analog phases and
//! sub-array positions.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::channel::{
    link_gains, sinrs_from_gains, sum_rate_from_gains, ChannelScenario, Point2, PreparedScenario,
    SubArrayCenters,
};
use crate::error::{Error, Result};
use crate::fp::{
    solve_analog, solve_digital, surrogate_from_gains, update_slack_from_gains, AnalogBeamformer,
    BisectionConfig, HybridBeamformer, PenaltySchedule, SlackState,
};
use crate::linalg::CMatrix;
use crate::positioning::{sweep_all_centers, PositionStepConfig};
use crate::units::dbm_to_watts;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Transmit power budget (W).
    pub max_power: f64,
    /// Stop when the sum rate changes by less than this (bits/s/Hz).
    pub tolerance: f64,
    pub max_iterations: usize,
    pub position: PositionStepConfig,
    pub penalty: PenaltySchedule,
    pub bisection: BisectionConfig,
    /// Seed for the random analog initialization.
    pub seed: u64,
    /// Position updates on (movable array) or off (fixed array).
    pub move_subarrays: bool,
    /// Independent initializations; the best final rate is kept.
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_power: dbm_to_watts(10.0),
            tolerance: 1e-3,
            max_iterations: 200,
            position: PositionStepConfig::default(),
            penalty: PenaltySchedule::default(),
            bisection: BisectionConfig::default(),
            seed: 0,
            move_subarrays: true,
            restarts: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::config("convergence tolerance must be positive"));
        }
        if self.max_iterations < 1 {
            return Err(Error::config("need at least one iteration"));
        }
        if !(self.max_power >= 0.0 && self.max_power.is_finite()) {
            return Err(Error::config("power budget must be non-negative"));
        }
        if self.restarts < 1 {
            return Err(Error::config("need at least one restart"));
        }
        self.position.validate()?;
        self.penalty.validate()
    }

    /// Seed used by restart `r`; restart 0 uses `seed` itself.
    pub fn restart_seed(&self, r: usize) -> u64 {
        if r == 0 {
            return self.seed;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(r as u64);
        rng.next_u64()
    }
}

/// Iterate of the alternating loop.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub centers: SubArrayCenters,
    pub beamformer: HybridBeamformer,
    pub slack: SlackState,
}

/// One record of the trace stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Surrogate (nats) after the iteration, at the slack used within it.
    pub surrogate: f64,
    /// Sum rate (bits/s/Hz) after the iteration.
    pub sum_rate: f64,
    pub sinrs: Vec<f64>,
    /// Multiplier of the power constraint in the digital update.
    pub lambda: f64,
    /// Penalty weight in the analog update.
    pub eta: f64,
    pub centers: Vec<Point2>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub beamformer: HybridBeamformer,
    pub centers: SubArrayCenters,
    pub initial_sum_rate: f64,
    pub final_sum_rate: f64,
    /// Sum rate after each iteration.
    pub sum_rate_trace: Vec<f64>,
    /// Surrogate after each iteration.
    pub surrogate_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub seconds: f64,
    /// Initialization seed of the reported run.
    pub seed: u64,
}

/// Matched-filter digital precoder scaled to spend the whole budget.
pub(crate) fn matched_filter(channels: &CMatrix, analog: &AnalogBeamformer, max_power: f64) -> CMatrix {
    let m = analog.num_chains();
    let k_users = channels.ncols();
    let mut w = CMatrix::zeros(m, k_users);
    for k in 0..k_users {
        let h: Vec<Complex64> = channels.column(k).iter().copied().collect();
        for (r, v) in analog.apply_adjoint(&h).into_iter().enumerate() {
            w[(r, k)] = v;
        }
    }
    if w.norm_squared() == 0.0 {
        w.fill(Complex64::new(1.0, 0.0));
    }
    let p = analog.precode(&w).norm_squared();
    w * Complex64::new((max_power / p).sqrt(), 0.0)
}

pub(crate) fn random_phases(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
}

/// Starting point at given centers: random phases, matched-filter digital
/// precoder at full power, and the matching slack.
pub fn initialize_at(
    scenario: &PreparedScenario,
    config: &SolverConfig,
    centers: SubArrayCenters,
) -> Result<SolverState> {
    centers.check(&scenario.geometry)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let phases = random_phases(&mut rng, scenario.geometry.num_antennas());
    let analog = AnalogBeamformer::sub_connected(&scenario.geometry, phases)?;
    let h = scenario.channels(&centers);
    let digital = matched_filter(&h, &analog, config.max_power);
    let beamformer = HybridBeamformer {
        analog,
        digital,
        max_power: config.max_power,
    };
    let slack = update_slack_from_gains(&link_gains(&h, &beamformer.precoded()), &scenario.noise);
    Ok(SolverState {
        centers,
        beamformer,
        slack,
    })
}

/// Starting point with every sub-array at its frame center.
pub fn initialize(scenario: &PreparedScenario, config: &SolverConfig) -> Result<SolverState> {
    initialize_at(scenario, config, scenario.geometry.frame_centers())
}

/// One outer iteration (1-based index `t`).
pub fn ao_iterate(
    scenario: &PreparedScenario,
    state: &mut SolverState,
    config: &SolverConfig,
    t: usize,
) -> Result<IterationRecord> {
    let wrap = |e: Error| Error::Iteration {
        iteration: t,
        source: Box::new(e),
    };
    let h = scenario.channels(&state.centers);
    let gains = link_gains(&h, &state.beamformer.precoded());
    state.slack = update_slack_from_gains(&gains, &scenario.noise);

    let dig = solve_digital(
        &h,
        &state.beamformer.analog,
        &state.slack,
        config.max_power,
        &config.bisection,
    )
    .map_err(wrap)?;
    state.beamformer.digital = dig.digital;

    let ana = solve_analog(
        &h,
        &state.beamformer.digital,
        &state.slack,
        &state.beamformer.analog,
        &config.penalty,
        t,
    )
    .map_err(wrap)?;
    state.beamformer.analog = AnalogBeamformer::sub_connected(&scenario.geometry, ana.phases).map_err(wrap)?;

    let h = if config.move_subarrays {
        let (centers, _) = sweep_all_centers(
            scenario,
            &state.centers,
            &state.beamformer,
            &state.slack,
            &config.position,
        )
        .map_err(wrap)?;
        state.centers = centers;
        scenario.channels(&state.centers)
    } else {
        h
    };

    let gains = link_gains(&h, &state.beamformer.precoded());
    Ok(IterationRecord {
        iteration: t,
        surrogate: surrogate_from_gains(&gains, &scenario.noise, &state.slack),
        sum_rate: sum_rate_from_gains(&gains, &scenario.noise),
        sinrs: sinrs_from_gains(&gains, &scenario.noise),
        lambda: dig.lambda,
        eta: ana.eta,
        centers: state.centers.0.clone(),
    })
}

/// Runs `step` until the sum rate settles or the iteration cap is hit.
pub(crate) fn run_loop(
    config: &SolverConfig,
    initial_rate: f64,
    mut step: impl FnMut(usize) -> Result<IterationRecord>,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<(Vec<f64>, Vec<f64>, Termination)> {
    let mut rates = Vec::new();
    let mut surrogates = Vec::new();
    let mut prev = initial_rate;
    for t in 1..=config.max_iterations {
        let rec = step(t)?;
        observer(&rec);
        rates.push(rec.sum_rate);
        surrogates.push(rec.surrogate);
        if (rec.sum_rate - prev).abs() < config.tolerance {
            return Ok((rates, surrogates, Termination::Converged));
        }
        prev = rec.sum_rate;
    }
    Ok((rates, surrogates, Termination::MaxIterations))
}

/// Runs the loop from a given state.
pub fn solve_from(
    scenario: &PreparedScenario,
    config: &SolverConfig,
    mut state: SolverState,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<RunResult> {
    config.validate()?;
    let start = Instant::now();
    let h = scenario.channels(&state.centers);
    let initial_sum_rate =
        sum_rate_from_gains(&link_gains(&h, &state.beamformer.precoded()), &scenario.noise);
    let (rates, surrogates, termination) = run_loop(
        config,
        initial_sum_rate,
        |t| ao_iterate(scenario, &mut state, config, t),
        observer,
    )?;
    Ok(RunResult {
        final_sum_rate: *rates.last().expect("at least one iteration"),
        iterations: rates.len(),
        sum_rate_trace: rates,
        surrogate_trace: surrogates,
        beamformer: state.beamformer,
        centers: state.centers,
        initial_sum_rate,
        termination,
        seconds: start.elapsed().as_secs_f64(),
        seed: config.seed,
    })
}

/// Best of `config.restarts` runs from frame-center starts.
pub fn solve_prepared(
    scenario: &PreparedScenario,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<RunResult> {
    config.validate()?;
    let mut best: Option<RunResult> = None;
    for r in 0..config.restarts {
        let cfg = SolverConfig {
            seed: config.restart_seed(r),
            ..config.clone()
        };
        let state = initialize(scenario, &cfg)?;
        let res = solve_from(scenario, &cfg, state, observer)?;
        if best.as_ref().is_none_or(|b| res.final_sum_rate > b.final_sum_rate) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Prepares the scenario and runs the alternating optimization.
pub fn solve(scenario: &ChannelScenario, config: &SolverConfig) -> Result<RunResult> {
    solve_prepared(&scenario.prepare()?, config, &mut |_| {})
}
