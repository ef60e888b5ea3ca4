use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use super::geometry::{ArrayGeometry, GeometryParams, Point2, SubArrayCenters};
use super::paths::{channel_matrix, Angle, PathResponse, PathSet, UserResponse};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::units::db_to_linear;

/// How the per-path gain variance is derived from the path loss
/// `g = rho0 * d^-alpha`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainVariance {
    /// `g^2 / L`, the squared form.
    #[default]
    AmplitudeSquared,
    /// `g / L`, treating `g` as a power gain.
    PowerGain,
}

/// Parameters for random scenario generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub users: usize,
    pub paths: usize,
    /// Reference channel gain at 1 m (dB).
    pub rho0_db: f64,
    pub pathloss_exponent: f64,
    pub distance_min: f64,
    pub distance_max: f64,
    /// Noise power per user (W).
    pub noise_power: f64,
    pub gain_variance: GainVariance,
    pub geometry: GeometryParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            users: 4,
            paths: 6,
            rho0_db: -40.0,
            pathloss_exponent: 2.8,
            distance_min: 20.0,
            distance_max: 100.0,
            noise_power: 1e-11,
            gain_variance: GainVariance::AmplitudeSquared,
            geometry: GeometryParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users < 1 {
            return Err(Error::config("need at least one user"));
        }
        if self.paths < 1 {
            return Err(Error::config("need at least one path per user"));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::config("noise power must be non-negative"));
        }
        if !self.rho0_db.is_finite() || !self.pathloss_exponent.is_finite() {
            return Err(Error::config("path-loss parameters must be finite"));
        }
        if !(self.distance_min > 0.0 && self.distance_max >= self.distance_min) {
            return Err(Error::config("distance bounds must satisfy 0 < min <= max"));
        }
        Ok(())
    }

    /// Variance of each complex path gain at distance `d`.
    pub fn path_variance(&self, d: f64) -> f64 {
        let g = db_to_linear(self.rho0_db) * d.powf(-self.pathloss_exponent);
        match self.gain_variance {
            GainVariance::AmplitudeSquared => g * g / self.paths as f64,
            GainVariance::PowerGain => g / self.paths as f64,
        }
    }
}

/// Angles drawn from `f(theta, phi) = cos(theta) / (2 pi)` on
/// `theta, phi in [-pi/2, pi/2]`: `sin(theta)` is uniform on `[-1, 1]`.
pub fn sample_angle<R: Rng>(rng: &mut R) -> Angle {
    let s: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
    Angle::new(s.asin(), phi)
}

fn sample_cn<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// One realization of all user channels for a given array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelScenario {
    pub geometry: ArrayGeometry,
    pub users: Vec<PathSet>,
    pub seed: u64,
}

/// Draws a scenario. Identical `(config, seed)` pairs give identical scenarios.
pub fn sample_scenario(config: &ScenarioConfig, seed: u64) -> Result<ChannelScenario> {
    config.validate()?;
    let geometry = ArrayGeometry::tiled(&config.geometry)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut users = Vec::with_capacity(config.users);
    for _ in 0..config.users {
        let d: f64 = rng.random_range(config.distance_min..=config.distance_max);
        let tx_paths: Vec<Angle> = (0..config.paths).map(|_| sample_angle(&mut rng)).collect();
        let rx_paths: Vec<Angle> = (0..config.paths).map(|_| sample_angle(&mut rng)).collect();
        let var = config.path_variance(d);
        let gains: Vec<Complex64> = (0..config.paths).map(|_| sample_cn(&mut rng, var)).collect();
        users.push(PathSet {
            tx_paths,
            rx_paths,
            rx_position: Point2::default(),
            path_response: PathResponse::diagonal(&gains),
            noise_power: config.noise_power,
            distance: Some(d),
        });
    }
    Ok(ChannelScenario {
        geometry,
        users,
        seed,
    })
}

impl ChannelScenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.users.is_empty() {
            return Err(Error::config("scenario has no users"));
        }
        for u in &self.users {
            u.validate()?;
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Same users on a different array geometry.
    pub fn with_geometry(&self, geometry: ArrayGeometry) -> Self {
        ChannelScenario {
            geometry,
            users: self.users.clone(),
            seed: self.seed,
        }
    }

    /// Precomputes the per-user path data used by every solver.
    pub fn prepare(&self) -> Result<PreparedScenario> {
        self.validate()?;
        let users = self
            .users
            .iter()
            .map(|u| u.response(self.geometry.wavelength))
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedScenario {
            geometry: self.geometry.clone(),
            noise: users.iter().map(|u| u.noise_power).collect(),
            users,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: ChannelScenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical JSON form, as hex.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// A scenario with the receive side folded in, ready for channel evaluation.
#[derive(Clone, Debug)]
pub struct PreparedScenario {
    pub geometry: ArrayGeometry,
    pub users: Vec<UserResponse>,
    pub noise: Vec<f64>,
}

impl PreparedScenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// `N x K` matrix whose column `k` is `h_k(c)`.
    pub fn channels(&self, centers: &SubArrayCenters) -> CMatrix {
        channel_matrix(&self.users, centers, &self.geometry)
    }
}
