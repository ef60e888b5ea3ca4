//! Comparison schemes: fixed sub-connected array, fixed fully-connected array,
//! and a grid-search bound over sub-array positions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::channel::{
    link_gains, sinrs_from_gains, sum_rate_from_gains, ChannelScenario, Point2, PreparedScenario,
    SubArrayCenters,
};
use crate::error::{Error, Result};
use crate::fp::{
    surrogate_from_gains, update_slack_from_gains, AnalogBeamformer, AnalogProblem,
    DigitalProblem, HybridBeamformer, PowerMetric,
};
use crate::orchestrator::{
    matched_filter, random_phases, run_loop, solve_from, solve_prepared,
    IterationRecord, RunResult, SolverConfig, SolverState,
};
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    FpaSub,
    FpaFull,
    MaSub,
    UpperBound,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::FpaSub,
        BaselineKind::FpaFull,
        BaselineKind::MaSub,
        BaselineKind::UpperBound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::FpaSub => "fpa-sub",
            BaselineKind::FpaFull => "fpa-full",
            BaselineKind::MaSub => "ma-sub",
            BaselineKind::UpperBound => "upper-bound",
        }
    }

    /// Fixed-array schemes do not depend on the movable region size.
    pub fn is_fixed_array(self) -> bool {
        matches!(self, BaselineKind::FpaSub | BaselineKind::FpaFull)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown scheme `{s}`")))
    }
}

/// Fixed sub-connected array: the proposed loop with position updates off.
pub fn solve_fpa_sub(scenario: &ChannelScenario, config: &SolverConfig) -> Result<RunResult> {
    let cfg = SolverConfig {
        move_subarrays: false,
        ..config.clone()
    };
    solve_prepared(&scenario.prepare()?, &cfg, &mut |_| {})
}

/// Proposed scheme with movable sub-arrays.
pub fn solve_ma_sub(scenario: &ChannelScenario, config: &SolverConfig) -> Result<RunResult> {
    let cfg = SolverConfig {
        move_subarrays: true,
        ..config.clone()
    };
    solve_prepared(&scenario.prepare()?, &cfg, &mut |_| {})
}

struct FullState {
    beamformer: HybridBeamformer,
}

fn fully_connected(n: usize, m: usize, phases: Vec<f64>) -> AnalogBeamformer {
    AnalogBeamformer::FullyConnected {
        antennas: n,
        chains: m,
        phases,
    }
}

fn full_iterate(
    scenario: &PreparedScenario,
    h: &crate::linalg::CMatrix,
    state: &mut FullState,
    config: &SolverConfig,
    centers: &SubArrayCenters,
    t: usize,
) -> Result<IterationRecord> {
    let noise = &scenario.noise;
    let bf = &mut state.beamformer;
    let slack = update_slack_from_gains(&link_gains(h, &bf.precoded()), noise);

    let gram = bf.analog.gram();
    let dig = DigitalProblem::build(h, &bf.analog, &slack, PowerMetric::Gram(gram), config.max_power)
        .solve(&config.bisection)?;
    bf.digital = dig.digital;

    let problem = AnalogProblem::fully_connected(h, &bf.digital, &slack);
    let eta = config.penalty.eta(&problem, t);
    let ana = problem.solve(bf.analog.phases(), eta, config.penalty.inner_iterations)?;
    let mut candidate = bf.clone();
    candidate.analog = fully_connected(bf.analog.num_antennas(), bf.analog.num_chains(), ana.phases);
    // New phases change W_A^H W_A, so the power may leave the budget.
    let p = candidate.power();
    if p > config.max_power {
        candidate.digital *= Complex64::new((config.max_power / p).sqrt(), 0.0);
    }
    let before = surrogate_from_gains(&link_gains(h, &bf.precoded()), noise, &slack);
    let after = surrogate_from_gains(&link_gains(h, &candidate.precoded()), noise, &slack);
    if after >= before {
        *bf = candidate;
    }

    let gains = link_gains(h, &bf.precoded());
    Ok(IterationRecord {
        iteration: t,
        surrogate: surrogate_from_gains(&gains, noise, &slack),
        sum_rate: sum_rate_from_gains(&gains, noise),
        sinrs: sinrs_from_gains(&gains, noise),
        lambda: dig.lambda,
        eta,
        centers: centers.0.clone(),
    })
}

fn solve_fpa_full_once(
    scenario: &PreparedScenario,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<RunResult> {
    let start = Instant::now();
    let centers = scenario.geometry.frame_centers();
    let h = scenario.channels(&centers);
    let n = scenario.geometry.num_antennas();
    let m = scenario.geometry.num_subarrays();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let analog = fully_connected(n, m, random_phases(&mut rng, n * m));
    let digital = matched_filter(&h, &analog, config.max_power);
    let mut state = FullState {
        beamformer: HybridBeamformer {
            analog,
            digital,
            max_power: config.max_power,
        },
    };
    let initial_sum_rate =
        sum_rate_from_gains(&link_gains(&h, &state.beamformer.precoded()), &scenario.noise);
    let (rates, surrogates, termination) = run_loop(
        config,
        initial_sum_rate,
        |t| {
            full_iterate(scenario, &h, &mut state, config, &centers, t).map_err(|e| Error::Iteration {
                iteration: t,
                source: Box::new(e),
            })
        },
        observer,
    )?;
    Ok(RunResult {
        final_sum_rate: *rates.last().expect("at least one iteration"),
        iterations: rates.len(),
        sum_rate_trace: rates,
        surrogate_trace: surrogates,
        beamformer: state.beamformer,
        centers,
        initial_sum_rate,
        termination,
        seconds: start.elapsed().as_secs_f64(),
        seed: config.seed,
    })
}

/// Fixed fully-connected array. Same alternating scheme, with the digital
/// power measured through `W_A^H W_A` and the full `N x M` phase matrix in
/// the analog step.
pub fn solve_fpa_full(scenario: &ChannelScenario, config: &SolverConfig) -> Result<RunResult> {
    solve_fpa_full_prepared(&scenario.prepare()?, config)
}

pub fn solve_fpa_full_prepared(scenario: &PreparedScenario, config: &SolverConfig) -> Result<RunResult> {
    solve_fpa_full_observed(scenario, config, &mut |_| {})
}

pub fn solve_fpa_full_observed(
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
        let res = solve_fpa_full_once(scenario, &cfg, observer)?;
        if best.as_ref().is_none_or(|b| res.final_sum_rate > b.final_sum_rate) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    /// Every combination of per-sub-array candidates.
    Joint,
    /// Cycle over sub-arrays, moving one at a time to its best candidate.
    CoordinateWise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Candidates per axis in each region; 1 means the region center.
    pub points_per_axis: usize,
    pub mode: SearchMode,
    /// Cap on inner solves: joint combinations, or candidates per cycle times
    /// `max_cycles` in coordinate-wise mode.
    pub budget: usize,
    pub max_cycles: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points_per_axis: 5,
            mode: SearchMode::CoordinateWise,
            budget: 100_000,
            max_cycles: 20,
        }
    }
}

impl GridSpec {
    /// `p` evenly spaced points on `[lo, hi]` placed symmetrically about
    /// `mid`, so an odd count contains `mid` exactly.
    fn axis(lo: f64, hi: f64, mid: f64, p: usize) -> Vec<f64> {
        if p == 1 {
            return vec![mid];
        }
        let step = (hi - lo) / (p - 1) as f64;
        let half = (p - 1) as f64 / 2.0;
        (0..p)
            .map(|i| (mid + (i as f64 - half) * step).clamp(lo, hi))
            .collect()
    }

    /// Candidate centers for each sub-array, row by row from the lower corner.
    pub fn candidates(&self, scenario: &PreparedScenario) -> Vec<Vec<Point2>> {
        let g = &scenario.geometry;
        g.region_bounds
            .iter()
            .zip(&g.frame_origins)
            .map(|(r, o)| {
                let xs = Self::axis(r.min.x, r.max.x, o.x, self.points_per_axis);
                let ys = Self::axis(r.min.y, r.max.y, o.y, self.points_per_axis);
                ys.iter()
                    .flat_map(|&y| xs.iter().map(move |&x| Point2::new(x, y)))
                    .collect()
            })
            .collect()
    }

    /// Rejects grids whose search would exceed the budget.
    pub fn check_budget(&self, subarrays: usize) -> Result<()> {
        if self.points_per_axis < 1 {
            return Err(Error::config("grid needs at least one point per axis"));
        }
        let per = (self.points_per_axis * self.points_per_axis) as f64;
        let cost = match self.mode {
            SearchMode::Joint => per.powi(subarrays as i32),
            SearchMode::CoordinateWise => per * subarrays as f64 * self.max_cycles.max(1) as f64,
        };
        if cost > self.budget as f64 {
            return Err(Error::config(format!(
                "grid search needs {cost} inner solves, budget is {}",
                self.budget
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundResult {
    pub result: RunResult,
    pub grid: GridSpec,
    /// Distinct center assignments solved.
    pub evaluations: usize,
    /// Coordinate-wise passes (0 in joint mode).
    pub cycles: usize,
}

fn key(centers: &SubArrayCenters) -> Vec<u64> {
    centers.0.iter().flat_map(|p| [p.x.to_bits(), p.y.to_bits()]).collect()
}

struct Evaluator<'a> {
    scenario: &'a PreparedScenario,
    config: SolverConfig,
    seen: HashMap<Vec<u64>, f64>,
    best: Option<RunResult>,
}

impl Evaluator<'_> {
    fn offer(&mut self, res: RunResult) -> f64 {
        let rate = res.final_sum_rate;
        self.seen.insert(key(&res.centers), rate);
        if self.best.as_ref().is_none_or(|b| rate > b.final_sum_rate) {
            self.best = Some(res);
        }
        rate
    }

    fn eval(&mut self, centers: &SubArrayCenters) -> Result<f64> {
        if let Some(&r) = self.seen.get(&key(centers)) {
            return Ok(r);
        }
        let mut best: Option<RunResult> = None;
        for r in 0..self.config.restarts {
            let cfg = SolverConfig {
                seed: self.config.restart_seed(r),
                ..self.config.clone()
            };
            let state = crate::orchestrator::initialize_at(self.scenario, &cfg, centers.clone())?;
            let res = solve_from(self.scenario, &cfg, state, &mut |_| {})?;
            if best.as_ref().is_none_or(|b| res.final_sum_rate > b.final_sum_rate) {
                best = Some(res);
            }
        }
        Ok(self.offer(best.expect("at least one restart")))
    }
}

/// Best sum rate over a grid of sub-array positions, re-optimizing the
/// beamformers with positions fixed at every candidate.
///
/// When `incumbent` is given its centers join each sub-array's candidate
/// list, and its own assignment is refined from its beamformer, so the
/// returned rate is never below the incumbent's.
pub fn upper_bound(
    scenario: &ChannelScenario,
    grid: &GridSpec,
    config: &SolverConfig,
    incumbent: Option<&RunResult>,
) -> Result<UpperBoundResult> {
    upper_bound_prepared(&scenario.prepare()?, grid, config, incumbent)
}

pub fn upper_bound_prepared(
    scenario: &PreparedScenario,
    grid: &GridSpec,
    config: &SolverConfig,
    incumbent: Option<&RunResult>,
) -> Result<UpperBoundResult> {
    let m = scenario.geometry.num_subarrays();
    grid.check_budget(m)?;
    config.validate()?;
    let start = Instant::now();
    let cfg = SolverConfig {
        move_subarrays: false,
        ..config.clone()
    };
    let mut candidates = grid.candidates(scenario);
    let mut ev = Evaluator {
        scenario,
        config: cfg.clone(),
        seen: HashMap::new(),
        best: None,
    };

    if let Some(inc) = incumbent {
        inc.centers.check(&scenario.geometry)?;
        for (b, list) in candidates.iter_mut().enumerate() {
            let c = inc.centers.get(b);
            if !list.contains(&c) {
                list.push(c);
            }
        }
        let h = scenario.channels(&inc.centers);
        let slack = update_slack_from_gains(&link_gains(&h, &inc.beamformer.precoded()), &scenario.noise);
        let state = SolverState {
            centers: inc.centers.clone(),
            beamformer: inc.beamformer.clone(),
            slack,
        };
        let mut res = solve_from(scenario, &cfg, state, &mut |_| {})?;
        // Refinement is monotone up to rounding; never report below the start.
        if res.final_sum_rate < inc.final_sum_rate {
            res = RunResult {
                seconds: res.seconds,
                ..inc.clone()
            };
        }
        ev.offer(res);
    }

    let mut cycles = 0;
    match grid.mode {
        SearchMode::Joint => {
            let mut idx = vec![0usize; m];
            loop {
                let centers = SubArrayCenters(
                    idx.iter().enumerate().map(|(b, &i)| candidates[b][i]).collect(),
                );
                ev.eval(&centers)?;
                // Mixed-radix increment.
                let mut b = 0;
                while b < m {
                    idx[b] += 1;
                    if idx[b] < candidates[b].len() {
                        break;
                    }
                    idx[b] = 0;
                    b += 1;
                }
                if b == m {
                    break;
                }
            }
        }
        SearchMode::CoordinateWise => {
            let mut current = match &ev.best {
                Some(b) => b.centers.clone(),
                None => scenario.geometry.frame_centers(),
            };
            let mut best_rate = ev.eval(&current)?;
            while cycles < grid.max_cycles.max(1) {
                cycles += 1;
                let mut improved = false;
                for b in 0..m {
                    for &q in &candidates[b] {
                        let mut trial = current.clone();
                        trial.set(b, q);
                        let r = ev.eval(&trial)?;
                        if r > best_rate {
                            best_rate = r;
                            current = trial;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
        }
    }

    let evaluations = ev.seen.len();
    let mut result = ev.best.expect("at least one candidate");
    result.seconds = start.elapsed().as_secs_f64();
    Ok(UpperBoundResult {
        result,
        grid: grid.clone(),
        evaluations,
        cycles,
    })
}

/// Runs `kind` on one scenario.
pub fn run_scheme(
    kind: BaselineKind,
    scenario: &PreparedScenario,
    config: &SolverConfig,
    grid: &GridSpec,
) -> Result<RunResult> {
    match kind {
        BaselineKind::FpaSub => solve_prepared(
            scenario,
            &SolverConfig {
                move_subarrays: false,
                ..config.clone()
            },
            &mut |_| {},
        ),
        BaselineKind::MaSub => solve_prepared(
            scenario,
            &SolverConfig {
                move_subarrays: true,
                ..config.clone()
            },
            &mut |_| {},
        ),
        BaselineKind::FpaFull => solve_fpa_full_prepared(scenario, config),
        BaselineKind::UpperBound => {
            let ma = run_scheme(BaselineKind::MaSub, scenario, config, grid)?;
            Ok(upper_bound_prepared(scenario, grid, config, Some(&ma))?.result)
        }
    }
}
