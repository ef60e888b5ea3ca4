use super::geometry::SubArrayCenters;
use super::scenario::PreparedScenario;
use crate::fp::HybridBeamformer;
use crate::linalg::CMatrix;

/// `K x K` matrix of effective gains, entry `(k, k')` is `h_k^H W_A w_k'`.
pub fn link_gains(channels: &CMatrix, precoded: &CMatrix) -> CMatrix {
    channels.adjoint() * precoded
}

/// Per-user SINR from the effective gains.
pub fn sinrs_from_gains(gains: &CMatrix, noise: &[f64]) -> Vec<f64> {
    (0..gains.nrows())
        .map(|k| {
            let desired = gains[(k, k)].norm_sqr();
            let interference: f64 = (0..gains.ncols())
                .filter(|&j| j != k)
                .map(|j| gains[(k, j)].norm_sqr())
                .sum();
            let denom = interference + noise[k];
            if denom > 0.0 {
                desired / denom
            } else if desired > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect()
}

/// Sum of `log2(1 + SINR_k)` in bits/s/Hz.
pub fn sum_rate_from_gains(gains: &CMatrix, noise: &[f64]) -> f64 {
    sinrs_from_gains(gains, noise)
        .into_iter()
        .map(|s| s.ln_1p() / std::f64::consts::LN_2)
        .sum()
}

/// Achievable sum rate (bits/s/Hz) for the given placement and beamformer.
pub fn sum_rate(
    scenario: &PreparedScenario,
    centers: &SubArrayCenters,
    beamformer: &HybridBeamformer,
) -> f64 {
    let h = scenario.channels(centers);
    sum_rate_from_gains(&link_gains(&h, &beamformer.precoded()), &scenario.noise)
}
