use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{link_gains, PreparedScenario, SubArrayCenters};
use crate::fp::HybridBeamformer;
use crate::linalg::CMatrix;

/// Auxiliary variables of the quadratic transform, one pair per user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackState {
    pub gamma: Vec<f64>,
    pub omega: Vec<Complex64>,
}

impl SlackState {
    pub fn zeros(users: usize) -> Self {
        SlackState {
            gamma: vec![0.0; users],
            omega: vec![Complex64::new(0.0, 0.0); users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.gamma.len()
    }

    /// `mu_k = (1 + gamma_k) |omega_k|^2`, the weight on the received power
    /// terms.
    pub fn mu(&self, k: usize) -> f64 {
        (1.0 + self.gamma[k]) * self.omega[k].norm_sqr()
    }

    /// `(1 + gamma_k) omega_k`, the weight on the desired-signal term. The
    /// linear terms are `2 Re{conj(weight_k) a_k}`.
    pub fn weight(&self, k: usize) -> Complex64 {
        self.omega[k] * (1.0 + self.gamma[k])
    }
}

/// Optimal slack for fixed beamformer and positions, from the gain matrix
/// `gains[(k, k')] = h_k^H W_A w_k'`.
pub fn update_slack_from_gains(gains: &CMatrix, noise: &[f64]) -> SlackState {
    let k_users = gains.nrows();
    let mut s = SlackState::zeros(k_users);
    for k in 0..k_users {
        let a = gains[(k, k)];
        if a == Complex64::new(0.0, 0.0) {
            continue;
        }
        let interference: f64 = (0..gains.ncols())
            .filter(|&j| j != k)
            .map(|j| gains[(k, j)].norm_sqr())
            .sum::<f64>()
            + noise[k];
        let b = interference + a.norm_sqr();
        // zero noise and zero interference leave gamma unbounded
        let denom = interference;
        s.gamma[k] = a.norm_sqr() / denom;
        s.omega[k] = a / b;
    }
    s
}

/// Optimal slack for the current placement and beamformer.
pub fn update_slack(
    scenario: &PreparedScenario,
    centers: &SubArrayCenters,
    beamformer: &HybridBeamformer,
) -> SlackState {
    let h = scenario.channels(centers);
    update_slack_from_gains(&link_gains(&h, &beamformer.precoded()), &scenario.noise)
}

/// Quadratic-transform surrogate in nats, including the slack-only terms.
pub fn surrogate_from_gains(gains: &CMatrix, noise: &[f64], slack: &SlackState) -> f64 {
    (0..gains.nrows())
        .map(|k| {
            let g = slack.gamma[k];
            let w = slack.omega[k];
            let a = gains[(k, k)];
            let b: f64 = (0..gains.ncols()).map(|j| gains[(k, j)].norm_sqr()).sum::<f64>() + noise[k];
            g.ln_1p() - g + (1.0 + g) * (2.0 * (w.conj() * a).re - w.norm_sqr() * b)
        })
        .sum()
}

pub fn surrogate_value(
    scenario: &PreparedScenario,
    centers: &SubArrayCenters,
    beamformer: &HybridBeamformer,
    slack: &SlackState,
) -> f64 {
    let h = scenario.channels(centers);
    surrogate_from_gains(&link_gains(&h, &beamformer.precoded()), &scenario.noise, slack)
}
