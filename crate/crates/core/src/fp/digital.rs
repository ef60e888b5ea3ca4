//! Digital precoder update: weighted-MMSE-like closed form with the power
//! multiplier found by bisection.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::beamformer::AnalogBeamformer;
use super::slack::SlackState;
use crate::error::{Error, Result};
use crate::linalg::{hpd_factor, CMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BisectionConfig {
    /// Stop when `|power - budget| <= rel_tol * budget` on the feasible side.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        BisectionConfig {
            rel_tol: 1e-12,
            max_iter: 100,
        }
    }
}

/// Power metric `w^H Q w` of the digital precoder.
#[derive(Clone, Debug)]
pub enum PowerMetric {
    /// `Q = I`
    Identity,
    /// General Hermitian positive-definite `Q`, e.g. `W_A^H W_A`.
    Gram(CMatrix),
}

/// `max_W sum_k 2 Re{beta_k^H w_k} - w_k^H Xi w_k  s.t.  sum_k w_k^H Q w_k <= budget`
#[derive(Clone, Debug)]
pub struct DigitalProblem {
    /// `Xi = sum_k mu_k xi_k xi_k^H`, `M x M`.
    pub xi: CMatrix,
    /// Columns `beta_k`, `M x K`.
    pub beta: CMatrix,
    pub metric: PowerMetric,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DigitalSolution {
    pub digital: CMatrix,
    /// Lagrange multiplier of the power constraint.
    pub lambda: f64,
    /// Bisection steps taken (0 when the constraint is inactive).
    pub iterations: usize,
}

impl DigitalProblem {
    /// Assembles the subproblem for an arbitrary analog network from the
    /// `N x K` channel matrix.
    pub fn build(
        channels: &CMatrix,
        analog: &AnalogBeamformer,
        slack: &SlackState,
        metric: PowerMetric,
        budget: f64,
    ) -> Self {
        let m = analog.num_chains();
        let k_users = channels.ncols();
        let mut xi = CMatrix::zeros(m, m);
        let mut beta = CMatrix::zeros(m, k_users);
        for k in 0..k_users {
            let h: Vec<Complex64> = channels.column(k).iter().copied().collect();
            // xi_k = W_A^H h_k
            let v = analog.apply_adjoint(&h);
            let mu = slack.mu(k);
            let wgt = slack.weight(k);
            for r in 0..m {
                beta[(r, k)] = wgt * v[r];
                for c in 0..m {
                    xi[(r, c)] += v[r] * v[c].conj() * mu;
                }
            }
        }
        DigitalProblem {
            xi,
            beta,
            metric,
            budget,
        }
    }

    /// Precoder `(Xi + lambda Q)^{-1} beta` and its power, or `None` if the
    /// regularized matrix is not positive definite.
    pub fn precoder_at(&self, lambda: f64) -> Option<(CMatrix, f64)> {
        let mut a = self.xi.clone();
        match &self.metric {
            PowerMetric::Identity => {
                for i in 0..a.nrows() {
                    a[(i, i)] += lambda;
                }
            }
            PowerMetric::Gram(q) => a += q * Complex64::new(lambda, 0.0),
        }
        let chol = hpd_factor(a)?;
        let w = chol.solve(&self.beta);
        let p = self.power_of(&w);
        Some((w, p))
    }

    pub fn power_of(&self, w: &CMatrix) -> f64 {
        match &self.metric {
            PowerMetric::Identity => w.norm_squared(),
            PowerMetric::Gram(q) => (w.adjoint() * q * w).trace().re,
        }
    }

    /// Subproblem objective `sum_k 2 Re{beta_k^H w_k} - w_k^H Xi w_k`.
    pub fn objective(&self, w: &CMatrix) -> f64 {
        let lin = self.beta.dotc(w).re;
        let quad = (w.adjoint() * &self.xi * w).trace().re;
        2.0 * lin - quad
    }

    /// Bracket end that is guaranteed power-feasible:
    /// `w^H Q w <= beta^H Q^{-1} beta / lambda^2`.
    fn feasible_multiplier(&self) -> Result<f64> {
        let s = match &self.metric {
            PowerMetric::Identity => self.beta.norm_squared(),
            PowerMetric::Gram(q) => {
                let chol = hpd_factor(q.clone())
                    .ok_or_else(|| Error::Solver("power metric is not positive definite".into()))?;
                self.beta.dotc(&chol.solve(&self.beta)).re
            }
        };
        Ok((s / self.budget).sqrt())
    }

    pub fn solve(&self, config: &BisectionConfig) -> Result<DigitalSolution> {
        let (m, k) = self.beta.shape();
        if self.budget <= 0.0 || self.beta.norm_squared() == 0.0 {
            return Ok(DigitalSolution {
                digital: CMatrix::zeros(m, k),
                lambda: 0.0,
                iterations: 0,
            });
        }
        if let Some((w, p)) = self.precoder_at(0.0) {
            if p <= self.budget {
                return Ok(DigitalSolution {
                    digital: w,
                    lambda: 0.0,
                    iterations: 0,
                });
            }
        }
        let mut hi = self.feasible_multiplier()?;
        let mut best = None;
        for _ in 0..64 {
            match self.precoder_at(hi) {
                Some((w, p)) if p <= self.budget => {
                    best = Some(w);
                    break;
                }
                _ => hi *= 2.0,
            }
        }
        let mut best =
            best.ok_or_else(|| Error::Solver("could not bracket the power multiplier".into()))?;
        let mut lo = 0.0;
        for it in 1..=config.max_iter {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(DigitalSolution {
                    digital: best,
                    lambda: hi,
                    iterations: it,
                });
            }
            match self.precoder_at(mid) {
                Some((w, p)) if p <= self.budget => {
                    hi = mid;
                    best = w;
                    if self.budget - p <= config.rel_tol * self.budget {
                        return Ok(DigitalSolution {
                            digital: best,
                            lambda: hi,
                            iterations: it,
                        });
                    }
                }
                _ => lo = mid,
            }
        }
        Ok(DigitalSolution {
            digital: best,
            lambda: hi,
            iterations: config.max_iter,
        })
    }
}

/// Digital update for the sub-connected array. The power constraint becomes
/// `||W_D||_F^2 <= P_max / (N_h N_v)` because `W_A^H W_A = N_h N_v I`.
pub fn solve_digital(
    channels: &CMatrix,
    analog: &AnalogBeamformer,
    slack: &SlackState,
    max_power: f64,
    config: &BisectionConfig,
) -> Result<DigitalSolution> {
    let block = match analog {
        AnalogBeamformer::SubConnected { block_size, .. } => *block_size,
        AnalogBeamformer::FullyConnected { .. } => {
            return Err(Error::config(
                "solve_digital expects a sub-connected analog beamformer",
            ))
        }
    };
    DigitalProblem::build(
        channels,
        analog,
        slack,
        PowerMetric::Identity,
        max_power / block as f64,
    )
    .solve(config)
}
