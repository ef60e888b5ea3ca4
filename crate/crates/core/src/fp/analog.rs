//! Analog phase update by the penalty method: alternate an unconstrained
//! quadratic step on an auxiliary vector with projection onto unit modulus.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::beamformer::AnalogBeamformer;
use super::slack::SlackState;
use crate::error::{Error, Result};
use crate::linalg::{hpd_factor, phase_of, unit, CMatrix, CVector};

/// How the penalty weight evolves over outer iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltySchedule {
    /// Starting weight relative to `sum_k mu_k ||h~_kk||^2 / N`.
    pub initial_scale: f64,
    /// Multiplier applied once per outer iteration.
    pub growth: f64,
    /// Cap on the accumulated multiplier.
    pub max_multiplier: f64,
    /// Alternations per analog update.
    pub inner_iterations: usize,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        PenaltySchedule {
            initial_scale: 1e-2,
            growth: 5.0,
            max_multiplier: 1e6,
            inner_iterations: 10,
        }
    }
}

impl PenaltySchedule {
    /// Penalty weight for 1-based outer iteration `t`.
    pub fn eta(&self, problem: &AnalogProblem, t: usize) -> f64 {
        let mult = self
            .growth
            .powi(t.saturating_sub(1).min(i32::MAX as usize) as i32)
            .min(self.max_multiplier);
        let scale = problem.scale();
        let base = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        self.initial_scale * base * mult
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_scale > 0.0 && self.growth >= 1.0 && self.max_multiplier >= 1.0) {
            return Err(Error::config("penalty schedule must be positive and non-shrinking"));
        }
        if self.inner_iterations == 0 {
            return Err(Error::config("penalty schedule needs at least one inner iteration"));
        }
        Ok(())
    }
}

/// Penalty bookkeeping for one analog update.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyState {
    pub phi: CVector,
    pub eta: f64,
    pub inner_iterations: usize,
}

/// `max_p 2 Re{b^H p} - p^H A p` over unit-modulus `p`, where `p` stacks the
/// analog weights in storage order.
#[derive(Clone, Debug)]
pub struct AnalogProblem {
    /// `A = sum_k mu_k sum_k' h~_kk' h~_kk'^H`
    pub quad: CMatrix,
    /// `b = sum_k beta~_k`
    pub lin: CVector,
    /// `sum_k mu_k ||h~_kk||^2`
    pub direct_energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogSolution {
    pub phases: Vec<f64>,
    pub eta: f64,
    /// Penalized objective after each alternation.
    pub penalized_trace: Vec<f64>,
    /// Data objective at the returned phases.
    pub objective: f64,
    /// Data objective at the incoming phases.
    pub initial_objective: f64,
}

impl AnalogProblem {
    /// Builds the problem from the effective vectors `h~_kk'` such that
    /// `h_k^H W_A w_k' = h~_kk'^H p`. `vectors[k][k']` holds `h~_kk'`.
    pub fn from_vectors(vectors: &[Vec<CVector>], slack: &SlackState) -> Self {
        let p = vectors[0][0].len();
        let k_users = vectors.len();
        let mut stacked = CMatrix::zeros(p, k_users * k_users);
        let mut lin = CVector::zeros(p);
        let mut direct_energy = 0.0;
        for (k, row) in vectors.iter().enumerate() {
            let mu = slack.mu(k);
            let s = mu.sqrt();
            for (j, v) in row.iter().enumerate() {
                stacked.set_column(k * k_users + j, &(v * Complex64::new(s, 0.0)));
            }
            lin += &row[k] * slack.weight(k);
            direct_energy += mu * row[k].norm_squared();
        }
        AnalogProblem {
            quad: &stacked * stacked.adjoint(),
            lin,
            direct_energy,
        }
    }

    /// Problem for the block-diagonal network; `h~_kk'[n] = conj(w_k'[b(n)]) h_k[n]`.
    pub fn sub_connected(
        channels: &CMatrix,
        digital: &CMatrix,
        slack: &SlackState,
        block_size: usize,
    ) -> Self {
        let (n, k_users) = channels.shape();
        let vectors: Vec<Vec<CVector>> = (0..k_users)
            .map(|k| {
                (0..k_users)
                    .map(|j| {
                        CVector::from_fn(n, |i, _| digital[(i / block_size, j)].conj() * channels[(i, k)])
                    })
                    .collect()
            })
            .collect();
        Self::from_vectors(&vectors, slack)
    }

    /// Problem for the fully-connected network with row-major `N x M`
    /// storage; `h~_kk'[n M + m] = h_k[n] conj(w_k'[m])`.
    pub fn fully_connected(channels: &CMatrix, digital: &CMatrix, slack: &SlackState) -> Self {
        let (n, k_users) = channels.shape();
        let m = digital.nrows();
        let vectors: Vec<Vec<CVector>> = (0..k_users)
            .map(|k| {
                (0..k_users)
                    .map(|j| {
                        CVector::from_fn(n * m, |idx, _| {
                            channels[(idx / m, k)] * digital[(idx % m, j)].conj()
                        })
                    })
                    .collect()
            })
            .collect();
        Self::from_vectors(&vectors, slack)
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    /// Reference magnitude for the penalty weight.
    pub fn scale(&self) -> f64 {
        self.direct_energy / self.dim() as f64
    }

    /// Data objective `2 Re{b^H x} - x^H A x`.
    pub fn objective(&self, x: &CVector) -> f64 {
        2.0 * self.lin.dotc(x).re - x.dotc(&(&self.quad * x)).re
    }

    /// Penalized objective `F(phi) - eta ||phi - p||^2`.
    pub fn penalized(&self, phi: &CVector, p: &CVector, eta: f64) -> f64 {
        self.objective(phi) - eta * (phi - p).norm_squared()
    }

    /// Runs `inner` alternations from `phases` with weight `eta`. The returned
    /// phases are the best iterate by data objective, the incoming phases
    /// included, so the update never lowers the data objective.
    pub fn solve(&self, phases: &[f64], eta: f64, inner: usize) -> Result<AnalogSolution> {
        if phases.len() != self.dim() {
            return Err(Error::Dimension {
                context: "analog phases",
                expected: self.dim(),
                actual: phases.len(),
            });
        }
        if !(eta > 0.0) {
            return Err(Error::config("penalty weight must be positive"));
        }
        let mut reg = self.quad.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += eta;
        }
        let chol = hpd_factor(reg)
            .ok_or_else(|| Error::Solver("penalized analog matrix is not positive definite".into()))?;

        let mut p = CVector::from_iterator(phases.len(), phases.iter().map(|x| unit(*x)));
        let initial_objective = self.objective(&p);
        let mut best_phases = phases.to_vec();
        let mut best_obj = initial_objective;
        let mut trace = Vec::with_capacity(inner);
        let mut state = PenaltyState {
            phi: p.clone(),
            eta,
            inner_iterations: inner,
        };
        for _ in 0..inner {
            let rhs = &self.lin + &p * Complex64::new(eta, 0.0);
            state.phi = chol.solve(&rhs);
            let new_phases: Vec<f64> = state.phi.iter().map(|z| phase_of(*z)).collect();
            p = CVector::from_iterator(new_phases.len(), new_phases.iter().map(|x| unit(*x)));
            trace.push(self.penalized(&state.phi, &p, eta));
            let obj = self.objective(&p);
            if obj > best_obj {
                best_obj = obj;
                best_phases = new_phases;
            }
        }
        Ok(AnalogSolution {
            phases: best_phases,
            eta: state.eta,
            penalized_trace: trace,
            objective: best_obj,
            initial_objective,
        })
    }
}

/// Analog update for the sub-connected network with the weight for outer
/// iteration `t` taken from `schedule`.
pub fn solve_analog(
    channels: &CMatrix,
    digital: &CMatrix,
    slack: &SlackState,
    current: &AnalogBeamformer,
    schedule: &PenaltySchedule,
    t: usize,
) -> Result<AnalogSolution> {
    let AnalogBeamformer::SubConnected { block_size, phases } = current else {
        return Err(Error::config("solve_analog expects a sub-connected analog beamformer"));
    };
    let problem = AnalogProblem::sub_connected(channels, digital, slack, *block_size);
    let eta = schedule.eta(&problem, t);
    problem.solve(phases, eta, schedule.inner_iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vectors(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Vec<Vec<CVector>> {
        (0..k)
            .map(|_| {
                (0..k)
                    .map(|_| CVector::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn penalty_only_problem_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_vectors(&mut rng, 2, 6);
        let slack = SlackState::zeros(2);
        let prob = AnalogProblem::from_vectors(&v, &slack);
        let phases: Vec<f64> = (0..6).map(|i| 0.7 * i as f64).collect();
        let sol = prob.solve(&phases, 1.0, 5).unwrap();
        for (a, b) in sol.phases.iter().zip(&phases) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn penalized_objective_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let v = random_vectors(&mut rng, 3, 8);
            let slack = SlackState {
                gamma: vec![1.0, 0.5, 2.0],
                omega: vec![c(0.3, 0.1), c(-0.2, 0.4), c(0.1, -0.1)],
            };
            let prob = AnalogProblem::from_vectors(&v, &slack);
            let phases: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..6.28)).collect();
            let eta = 0.1 * (trial + 1) as f64;
            let sol = prob.solve(&phases, eta, 10).unwrap();
            let p0 = CVector::from_iterator(8, phases.iter().map(|x| unit(*x)));
            let mut last = prob.objective(&p0);
            for j in &sol.penalized_trace {
                assert!(*j >= last - 1e-10 * last.abs().max(1.0));
                last = *j;
            }
            assert!(sol.objective >= sol.initial_objective);
            assert!(sol.phases.iter().all(|p| (0.0..std::f64::consts::TAU).contains(p)));
        }
    }

    #[test]
    fn bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_vectors(&mut rng, 1, 3);
        let prob = AnalogProblem::from_vectors(&v, &SlackState::zeros(1));
        assert!(prob.solve(&[0.0; 2], 1.0, 1).is_err());
        assert!(prob.solve(&[0.0; 3], 0.0, 1).is_err());
    }
}
