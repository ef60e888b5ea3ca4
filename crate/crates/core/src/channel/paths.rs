use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::geometry::{ArrayGeometry, Point2, SubArrayCenters};
use crate::error::{Error, Result};
use crate::linalg::{unit, CMatrix};

/// Elevation/azimuth pair of one propagation path (radians).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    pub elevation: f64,
    pub azimuth: f64,
}

impl Angle {
    pub const fn new(elevation: f64, azimuth: f64) -> Self {
        Angle {
            elevation,
            azimuth,
        }
    }

    /// Direction factor `[sin(theta) cos(phi), cos(theta)]`.
    pub fn direction(&self) -> [f64; 2] {
        [
            self.elevation.sin() * self.azimuth.cos(),
            self.elevation.cos(),
        ]
    }
}

/// Path-response matrix, `L_t x L_r`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathResponse {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl PathResponse {
    pub fn diagonal(gains: &[Complex64]) -> Self {
        let l = gains.len();
        let mut data = vec![Complex64::new(0.0, 0.0); l * l];
        for (i, g) in gains.iter().enumerate() {
            data[i * l + i] = *g;
        }
        PathResponse {
            rows: l,
            cols: l,
            data,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        PathResponse {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `Sigma f`
    fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * f[c]).sum())
            .collect()
    }
}

/// Multipath description of one user's link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub tx_paths: Vec<Angle>,
    pub rx_paths: Vec<Angle>,
    /// Receive antenna position in the user's local frame (m).
    pub rx_position: Point2,
    pub path_response: PathResponse,
    /// Noise power (W).
    pub noise_power: f64,
    /// BS-user distance (m), kept for inspection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

impl PathSet {
    pub fn validate(&self) -> Result<()> {
        if self.path_response.rows != self.tx_paths.len() {
            return Err(Error::Dimension {
                context: "path response rows vs transmit paths",
                expected: self.tx_paths.len(),
                actual: self.path_response.rows,
            });
        }
        if self.path_response.cols != self.rx_paths.len() {
            return Err(Error::Dimension {
                context: "path response columns vs receive paths",
                expected: self.rx_paths.len(),
                actual: self.path_response.cols,
            });
        }
        if self.path_response.data.len() != self.path_response.rows * self.path_response.cols {
            return Err(Error::Dimension {
                context: "path response storage",
                expected: self.path_response.rows * self.path_response.cols,
                actual: self.path_response.data.len(),
            });
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::config("noise power must be non-negative"));
        }
        Ok(())
    }

    /// Collapses the receive side: directions of the transmit paths and the
    /// coefficients `Sigma f` that weight them.
    pub fn response(&self, wavelength: f64) -> Result<UserResponse> {
        self.validate()?;
        let f = frv_receive(self, wavelength);
        Ok(UserResponse {
            directions: self.tx_paths.iter().map(Angle::direction).collect(),
            coeffs: self.path_response.apply(&f),
            noise_power: self.noise_power,
        })
    }
}

/// Transmit field-response vector at position `t`.
pub fn frv_transmit(t: Point2, paths: &[Angle], wavelength: f64) -> Vec<Complex64> {
    let k = std::f64::consts::TAU / wavelength;
    paths.iter().map(|a| unit(k * t.dot(a.direction()))).collect()
}

/// Receive field-response vector of a user.
pub fn frv_receive(user: &PathSet, wavelength: f64) -> Vec<Complex64> {
    frv_transmit(user.rx_position, &user.rx_paths, wavelength)
}

/// Per-user quantities the channel depends on once the receive side is fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct UserResponse {
    pub directions: Vec<[f64; 2]>,
    /// `Sigma_k f_k`, one entry per transmit path.
    pub coeffs: Vec<Complex64>,
    pub noise_power: f64,
}

impl UserResponse {
    /// Channel entry at antenna position `t`: `g(t)^H Sigma f`.
    #[inline]
    pub fn entry(&self, t: Point2, wavenumber: f64) -> Complex64 {
        self.directions
            .iter()
            .zip(&self.coeffs)
            .map(|(rho, q)| unit(-wavenumber * t.dot(*rho)) * q)
            .sum()
    }

    /// Channel entry and its partial derivatives with respect to `t`.
    #[inline]
    pub fn entry_with_gradient(&self, t: Point2, wavenumber: f64) -> (Complex64, [Complex64; 2]) {
        let mut h = Complex64::new(0.0, 0.0);
        let mut dx = Complex64::new(0.0, 0.0);
        let mut dy = Complex64::new(0.0, 0.0);
        for (rho, q) in self.directions.iter().zip(&self.coeffs) {
            let term = unit(-wavenumber * t.dot(*rho)) * q;
            h += term;
            // d/dt e^{-j k t.rho} = -j k rho e^{-j k t.rho}
            let dterm = Complex64::new(0.0, -wavenumber) * term;
            dx += dterm * rho[0];
            dy += dterm * rho[1];
        }
        (h, [dx, dy])
    }

    /// Channel between one sub-array centered at `center` and this user.
    pub fn subarray_channel(&self, center: Point2, geometry: &ArrayGeometry) -> Vec<Complex64> {
        let k = geometry.wavenumber();
        geometry
            .delta
            .iter()
            .map(|d| self.entry(center + *d, k))
            .collect()
    }

    /// Stacked channel over all sub-arrays in flat index order.
    pub fn full_channel(&self, centers: &SubArrayCenters, geometry: &ArrayGeometry) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(geometry.num_antennas());
        for c in &centers.0 {
            out.extend(self.subarray_channel(*c, geometry));
        }
        out
    }
}

/// Channel between sub-array centered at `center` and `user`.
pub fn subarray_channel(
    center: Point2,
    user: &PathSet,
    geometry: &ArrayGeometry,
) -> Result<Vec<Complex64>> {
    Ok(user
        .response(geometry.wavelength)?
        .subarray_channel(center, geometry))
}

/// Channel between the whole array and `user`.
pub fn full_channel(
    centers: &SubArrayCenters,
    user: &PathSet,
    geometry: &ArrayGeometry,
) -> Result<Vec<Complex64>> {
    if centers.len() != geometry.num_subarrays() {
        return Err(Error::Dimension {
            context: "sub-array centers",
            expected: geometry.num_subarrays(),
            actual: centers.len(),
        });
    }
    Ok(user
        .response(geometry.wavelength)?
        .full_channel(centers, geometry))
}

/// Stacks the channels of all users as columns of an `N x K` matrix.
pub fn channel_matrix(
    users: &[UserResponse],
    centers: &SubArrayCenters,
    geometry: &ArrayGeometry,
) -> CMatrix {
    let n = geometry.num_antennas();
    let mut h = CMatrix::zeros(n, users.len());
    for (k, u) in users.iter().enumerate() {
        for (i, z) in u.full_channel(centers, geometry).into_iter().enumerate() {
            h[(i, k)] = z;
        }
    }
    h
}
