//! Sub-array center updates: per-block surrogate, its analytic gradient, and
//! projected backtracking ascent.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{link_gains, Point2, PreparedScenario, SubArrayCenters};
use crate::error::{Error, Result};
use crate::fp::{HybridBeamformer, SlackState};
use crate::linalg::{unit, CMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PositionStepConfig {
    /// First trial step `kappa~` (m per unit gradient).
    pub initial_step: f64,
    /// Step multiplier after a rejected trial, in `(0, 1)`.
    pub shrink: f64,
    /// Maximum number of step reductions per center.
    pub max_backtracks: usize,
}

impl Default for PositionStepConfig {
    fn default() -> Self {
        PositionStepConfig {
            initial_step: 10.0,
            shrink: 0.5,
            max_backtracks: 30,
        }
    }
}

impl PositionStepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::config("initial position step must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::config("step shrink factor must lie in (0, 1)"));
        }
        if self.max_backtracks < 1 {
            return Err(Error::config("need at least one backtracking step"));
        }
        Ok(())
    }
}

/// Surrogate as a function of one sub-array center with everything else
/// held fixed, up to a center-independent constant.
pub struct CenterObjective<'a> {
    scenario: &'a PreparedScenario,
    block: usize,
    /// Analog weights of this block.
    weights: Vec<Complex64>,
    /// `w_k'[block]` for every user `k'`.
    digital_row: Vec<Complex64>,
    /// Gains with this block's contribution removed.
    others: CMatrix,
    mu: Vec<f64>,
    weight: Vec<Complex64>,
}

impl<'a> CenterObjective<'a> {
    pub fn new(
        scenario: &'a PreparedScenario,
        centers: &SubArrayCenters,
        beamformer: &HybridBeamformer,
        slack: &SlackState,
        block: usize,
    ) -> Result<Self> {
        let geom = &scenario.geometry;
        if block >= geom.num_subarrays() {
            return Err(Error::Precondition(format!("no sub-array with index {block}")));
        }
        if centers.len() != geom.num_subarrays() {
            return Err(Error::Dimension {
                context: "sub-array centers",
                expected: geom.num_subarrays(),
                actual: centers.len(),
            });
        }
        let crate::fp::AnalogBeamformer::SubConnected { block_size, phases } = &beamformer.analog
        else {
            return Err(Error::config("position updates need a sub-connected beamformer"));
        };
        let s = *block_size;
        let k_users = scenario.num_users();
        let weights: Vec<Complex64> = phases[block * s..(block + 1) * s].iter().map(|p| unit(*p)).collect();
        let digital_row: Vec<Complex64> = (0..k_users).map(|k| beamformer.digital[(block, k)]).collect();
        let h = scenario.channels(centers);
        let mut obj = CenterObjective {
            scenario,
            block,
            weights,
            digital_row,
            others: link_gains(&h, &beamformer.precoded()),
            mu: (0..k_users).map(|k| slack.mu(k)).collect(),
            weight: (0..k_users).map(|k| slack.weight(k)).collect(),
        };
        let e = obj.block_response(centers.get(block));
        for k in 0..k_users {
            for j in 0..k_users {
                obj.others[(k, j)] -= e[k] * obj.digital_row[j];
            }
        }
        Ok(obj)
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// `e_k(c) = h_k(t_b)^H p_b` for every user.
    fn block_response(&self, c: Point2) -> Vec<Complex64> {
        let geom = &self.scenario.geometry;
        let kw = geom.wavenumber();
        self.scenario
            .users
            .iter()
            .map(|u| {
                geom.delta
                    .iter()
                    .zip(&self.weights)
                    .map(|(d, p)| u.entry(c + *d, kw).conj() * p)
                    .sum()
            })
            .collect()
    }

    /// `e_k(c)` and its partial derivatives.
    fn block_response_with_gradient(&self, c: Point2) -> Vec<(Complex64, [Complex64; 2])> {
        let geom = &self.scenario.geometry;
        let kw = geom.wavenumber();
        self.scenario
            .users
            .iter()
            .map(|u| {
                let mut e = Complex64::new(0.0, 0.0);
                let mut de = [Complex64::new(0.0, 0.0); 2];
                for (d, p) in geom.delta.iter().zip(&self.weights) {
                    let (h, dh) = u.entry_with_gradient(c + *d, kw);
                    e += h.conj() * p;
                    de[0] += dh[0].conj() * p;
                    de[1] += dh[1].conj() * p;
                }
                (e, de)
            })
            .collect()
    }

    /// Objective value at center `c` (no feasibility check).
    pub fn value(&self, c: Point2) -> f64 {
        let e = self.block_response(c);
        let k_users = e.len();
        let mut total = 0.0;
        for k in 0..k_users {
            total += 2.0 * (self.weight[k].conj() * e[k] * self.digital_row[k]).re;
            let power: f64 = (0..k_users)
                .map(|j| (self.others[(k, j)] + e[k] * self.digital_row[j]).norm_sqr())
                .sum();
            total -= self.mu[k] * power;
        }
        total
    }

    /// Analytic gradient at `c`.
    pub fn gradient(&self, c: Point2) -> [f64; 2] {
        let ed = self.block_response_with_gradient(c);
        let k_users = ed.len();
        let mut g = [0.0; 2];
        for (k, (e, de)) in ed.iter().enumerate() {
            // d/dc of 2 Re{conj(weight) w_k e_k} - mu_k sum_k' |A_kk'|^2
            let mut coef = self.weight[k].conj() * self.digital_row[k];
            for j in 0..k_users {
                let a = self.others[(k, j)] + e * self.digital_row[j];
                coef -= a.conj() * self.digital_row[j] * self.mu[k];
            }
            for axis in 0..2 {
                g[axis] += 2.0 * (coef * de[axis]).re;
            }
        }
        g
    }
}

/// Per-block objective at a candidate center; errors if `candidate` is
/// outside the block's movable region.
pub fn position_objective(
    scenario: &PreparedScenario,
    centers: &SubArrayCenters,
    beamformer: &HybridBeamformer,
    slack: &SlackState,
    block: usize,
    candidate: Point2,
) -> Result<f64> {
    let obj = CenterObjective::new(scenario, centers, beamformer, slack, block)?;
    check_region(scenario, block, candidate)?;
    Ok(obj.value(candidate))
}

/// Analytic gradient of [`position_objective`] with respect to the center.
pub fn position_gradient(
    scenario: &PreparedScenario,
    centers: &SubArrayCenters,
    beamformer: &HybridBeamformer,
    slack: &SlackState,
    block: usize,
    candidate: Point2,
) -> Result<[f64; 2]> {
    let obj = CenterObjective::new(scenario, centers, beamformer, slack, block)?;
    Ok(obj.gradient(candidate))
}

fn check_region(scenario: &PreparedScenario, block: usize, c: Point2) -> Result<()> {
    if scenario.geometry.region_bounds[block].contains(c) {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "center ({:.6e}, {:.6e}) outside region of sub-array {block}",
            c.x, c.y
        )))
    }
}

/// Outcome of one center update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterStep {
    pub block: usize,
    pub center: Point2,
    pub moved: bool,
    pub step: f64,
    pub backtracks: usize,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// Gradient step with backtracking. A trial center is accepted only if it is
/// inside the region and does not lower the objective; otherwise the center
/// stays where it is.
pub fn descend_center(obj: &CenterObjective<'_>, center: Point2, config: &PositionStepConfig) -> Result<CenterStep> {
    let block = obj.block();
    check_region(obj.scenario, block, center)?;
    let region = obj.scenario.geometry.region_bounds[block];
    let base = obj.value(center);
    let g = obj.gradient(center);
    let mut out = CenterStep {
        block,
        center,
        moved: false,
        step: 0.0,
        backtracks: 0,
        objective_before: base,
        objective_after: base,
    };
    if g[0] == 0.0 && g[1] == 0.0 {
        return Ok(out);
    }
    let mut kappa = config.initial_step;
    for attempt in 0..=config.max_backtracks {
        let trial = Point2::new(center.x + kappa * g[0], center.y + kappa * g[1]);
        if region.contains(trial) {
            let v = obj.value(trial);
            if v >= base {
                out.center = trial;
                out.moved = trial != center;
                out.step = kappa;
                out.backtracks = attempt;
                out.objective_after = v;
                return Ok(out);
            }
        }
        kappa *= config.shrink;
    }
    out.backtracks = config.max_backtracks;
    Ok(out)
}

/// One Gauss-Seidel pass over all sub-arrays in flat index order.
pub fn sweep_all_centers(
    scenario: &PreparedScenario,
    centers: &SubArrayCenters,
    beamformer: &HybridBeamformer,
    slack: &SlackState,
    config: &PositionStepConfig,
) -> Result<(SubArrayCenters, Vec<CenterStep>)> {
    let mut current = centers.clone();
    let mut steps = Vec::with_capacity(current.len());
    for b in 0..current.len() {
        let obj = CenterObjective::new(scenario, &current, beamformer, slack, b)?;
        let step = descend_center(&obj, current.get(b), config)?;
        current.set(b, step.center);
        steps.push(step);
    }
    Ok((current, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        sample_scenario, Angle, ArrayGeometry, ChannelScenario, GeometryParams, PathResponse,
        PathSet, ScenarioConfig,
    };
    use crate::fp::{surrogate_value, update_slack, AnalogBeamformer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(seed: u64) -> (PreparedScenario, SubArrayCenters, HybridBeamformer, SlackState) {
        let cfg = ScenarioConfig {
            gain_variance: crate::channel::GainVariance::PowerGain,
            ..ScenarioConfig::default()
        };
        let sc = sample_scenario(&cfg, seed).unwrap();
        let prep = sc.prepare().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let mut centers = sc.geometry.frame_centers();
        for b in 0..centers.len() {
            let r = sc.geometry.region_bounds[b];
            centers.set(b, Point2::new(rng.random_range(r.min.x..r.max.x), rng.random_range(r.min.y..r.max.y)));
        }
        let phases = (0..16).map(|_| rng.random_range(0.0..6.28)).collect();
        let digital = CMatrix::from_fn(4, 4, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 0.02
        });
        let bf = HybridBeamformer {
            analog: AnalogBeamformer::sub_connected(&sc.geometry, phases).unwrap(),
            digital,
            max_power: 0.01,
        };
        let slack = update_slack(&prep, &centers, &bf);
        (prep, centers, bf, slack)
    }

    #[test]
    fn differences_match_surrogate() {
        for seed in 0..5 {
            let (prep, centers, bf, slack) = random_state(seed);
            let obj = CenterObjective::new(&prep, &centers, &bf, &slack, 1).unwrap();
            let r = prep.geometry.region_bounds[1];
            let a = r.min;
            let b = Point2::new(r.max.x, r.min.y + 0.3 * r.height());
            let mut ca = centers.clone();
            ca.set(1, a);
            let mut cb = centers.clone();
            cb.set(1, b);
            let ds = surrogate_value(&prep, &cb, &bf, &slack) - surrogate_value(&prep, &ca, &bf, &slack);
            let dl = obj.value(b) - obj.value(a);
            assert!((ds - dl).abs() <= 1e-9 * ds.abs().max(1.0), "{ds} vs {dl}");
        }
    }

    #[test]
    fn zero_digital_row_gives_zero_gradient() {
        let (prep, centers, mut bf, slack) = random_state(9);
        for k in 0..4 {
            bf.digital[(2, k)] = Complex64::new(0.0, 0.0);
        }
        let g = position_gradient(&prep, &centers, &bf, &slack, 2, centers.get(2)).unwrap();
        assert_eq!(g, [0.0, 0.0]);
        let obj = CenterObjective::new(&prep, &centers, &bf, &slack, 2).unwrap();
        let step = descend_center(&obj, centers.get(2), &PositionStepConfig::default()).unwrap();
        assert!(!step.moved);
        assert_eq!(step.center, centers.get(2));
    }

    #[test]
    fn outside_region_is_precondition_error() {
        let (prep, centers, bf, slack) = random_state(1);
        let err = position_objective(&prep, &centers, &bf, &slack, 0, Point2::new(1.0, 1.0));
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    fn single_path_scenario(direction: Angle) -> ChannelScenario {
        let geometry = ArrayGeometry::tiled(&GeometryParams {
            n_rf_h: 1,
            n_rf_v: 1,
            n_h: 1,
            n_v: 1,
            delta: Some(vec![Point2::new(0.0, 0.0)]),
            ..GeometryParams::default()
        })
        .unwrap();
        ChannelScenario {
            geometry,
            users: vec![PathSet {
                tx_paths: vec![direction],
                rx_paths: vec![Angle::new(0.0, 0.0)],
                rx_position: Point2::default(),
                path_response: PathResponse::diagonal(&[Complex64::new(0.8, 0.3)]),
                noise_power: 0.1,
                distance: None,
            }],
            seed: 0,
        }
    }

    #[test]
    fn single_path_gradient_is_parallel_to_direction() {
        let dir = Angle::new(0.6, 0.4);
        let sc = single_path_scenario(dir);
        let prep = sc.prepare().unwrap();
        let centers = sc.geometry.frame_centers();
        let bf = HybridBeamformer {
            analog: AnalogBeamformer::sub_connected(&sc.geometry, vec![1.0]).unwrap(),
            digital: CMatrix::from_element(1, 1, Complex64::new(0.5, 0.0)),
            max_power: 1.0,
        };
        // slack not at its optimum, so the phase of the gain matters
        let slack = SlackState {
            gamma: vec![1.0],
            omega: vec![Complex64::new(0.2, 0.7)],
        };
        let obj = CenterObjective::new(&prep, &centers, &bf, &slack, 0).unwrap();
        let c = Point2::new(0.001, -0.002);
        let g = obj.gradient(c);
        let rho = dir.direction();
        let cross = g[0] * rho[1] - g[1] * rho[0];
        assert!(cross.abs() <= 1e-9 * (g[0].hypot(g[1])));
        assert!(g[0].hypot(g[1]) > 0.0);
        // moving orthogonally to rho leaves the objective unchanged
        let ortho = Point2::new(-rho[1], rho[0]) * 1e-3;
        assert!((obj.value(c + ortho) - obj.value(c)).abs() < 1e-9);
    }

    #[test]
    fn boundary_with_outward_gradient_stays_put() {
        // rho = [1, 0]: objective is a sinusoid in x whose phase follows omega
        let sc = single_path_scenario(Angle::new(std::f64::consts::FRAC_PI_2, 0.0));
        let prep = sc.prepare().unwrap();
        let centers = sc.geometry.frame_centers();
        let bf = HybridBeamformer {
            analog: AnalogBeamformer::sub_connected(&sc.geometry, vec![0.0]).unwrap(),
            digital: CMatrix::from_element(1, 1, Complex64::new(0.5, 0.0)),
            max_power: 1.0,
        };
        let r = prep.geometry.region_bounds[0];
        let edge = Point2::new(r.max.x, 0.0);
        let mut tested = 0;
        for i in 0..16 {
            let slack = SlackState {
                gamma: vec![1.0],
                omega: vec![Complex64::from_polar(1.0, i as f64 * std::f64::consts::TAU / 16.0)],
            };
            let obj = CenterObjective::new(&prep, &centers, &bf, &slack, 0).unwrap();
            if obj.gradient(edge)[0] > 1.0 {
                let step = descend_center(&obj, edge, &PositionStepConfig::default()).unwrap();
                assert!(!step.moved);
                assert_eq!(step.center, edge);
                assert_eq!(step.backtracks, 30);
                tested += 1;
            }
        }
        assert!(tested > 0);
    }

    #[test]
    fn descend_never_lowers_objective() {
        for seed in 0..20 {
            let (prep, centers, bf, slack) = random_state(100 + seed);
            let b = (seed % 4) as usize;
            let obj = CenterObjective::new(&prep, &centers, &bf, &slack, b).unwrap();
            let step = descend_center(&obj, centers.get(b), &PositionStepConfig::default()).unwrap();
            assert!(obj.value(step.center) >= obj.value(centers.get(b)));
            assert!(prep.geometry.region_bounds[b].contains(step.center));
        }
    }

    #[test]
    fn sweep_is_monotone_and_feasible() {
        for seed in 0..10 {
            let (prep, centers, bf, slack) = random_state(200 + seed);
            let before = surrogate_value(&prep, &centers, &bf, &slack);
            let (after_c, steps) =
                sweep_all_centers(&prep, &centers, &bf, &slack, &PositionStepConfig::default()).unwrap();
            let after = surrogate_value(&prep, &after_c, &bf, &slack);
            assert!(after >= before - 1e-8);
            assert!(after_c.is_feasible(&prep.geometry));
            assert_eq!(steps.len(), 4);
        }
    }

    #[test]
    fn single_subarray_sweep_equals_one_descend() {
        let sc = single_path_scenario(Angle::new(0.4, 0.9));
        let prep = sc.prepare().unwrap();
        let centers = sc.geometry.frame_centers();
        let bf = HybridBeamformer {
            analog: AnalogBeamformer::sub_connected(&sc.geometry, vec![0.3]).unwrap(),
            digital: CMatrix::from_element(1, 1, Complex64::new(0.5, 0.1)),
            max_power: 1.0,
        };
        let slack = SlackState {
            gamma: vec![0.5],
            omega: vec![Complex64::new(0.3, -0.4)],
        };
        let cfg = PositionStepConfig::default();
        let obj = CenterObjective::new(&prep, &centers, &bf, &slack, 0).unwrap();
        let one = descend_center(&obj, centers.get(0), &cfg).unwrap();
        let (swept, _) = sweep_all_centers(&prep, &centers, &bf, &slack, &cfg).unwrap();
        assert_eq!(swept.get(0), one.center);
    }
}
