use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ArrayGeometry;
use crate::error::{Error, Result};
use crate::linalg::{unit, CMatrix, CVector};

/// Phase-shifter network between RF chains and antennas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure", rename_all = "kebab-case")]
pub enum AnalogBeamformer {
    /// Block-diagonal: chain `b` drives antennas `b*S .. (b+1)*S` only.
    /// `phases[b*S + s]` is the shifter on antenna `s` of sub-array `b`.
    SubConnected { block_size: usize, phases: Vec<f64> },
    /// Every chain drives every antenna. `phases` is row-major `N x M`.
    FullyConnected {
        antennas: usize,
        chains: usize,
        phases: Vec<f64>,
    },
}

impl AnalogBeamformer {
    pub fn sub_connected(geometry: &ArrayGeometry, phases: Vec<f64>) -> Result<Self> {
        if phases.len() != geometry.num_antennas() {
            return Err(Error::Dimension {
                context: "analog phases",
                expected: geometry.num_antennas(),
                actual: phases.len(),
            });
        }
        Ok(AnalogBeamformer::SubConnected {
            block_size: geometry.subarray_size(),
            phases,
        })
    }

    pub fn num_antennas(&self) -> usize {
        match self {
            AnalogBeamformer::SubConnected { phases, .. } => phases.len(),
            AnalogBeamformer::FullyConnected { antennas, .. } => *antennas,
        }
    }

    pub fn num_chains(&self) -> usize {
        match self {
            AnalogBeamformer::SubConnected { block_size, phases } => phases.len() / block_size,
            AnalogBeamformer::FullyConnected { chains, .. } => *chains,
        }
    }

    pub fn phases(&self) -> &[f64] {
        match self {
            AnalogBeamformer::SubConnected { phases, .. }
            | AnalogBeamformer::FullyConnected { phases, .. } => phases,
        }
    }

    /// Nonzero shifter weights `e^{j psi}` in storage order.
    pub fn entries(&self) -> Vec<Complex64> {
        self.phases().iter().map(|p| unit(*p)).collect()
    }

    /// `y = W_A x`
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        match self {
            AnalogBeamformer::SubConnected { block_size, phases } => phases
                .iter()
                .enumerate()
                .map(|(i, p)| unit(*p) * x[i / block_size])
                .collect(),
            AnalogBeamformer::FullyConnected {
                antennas,
                chains,
                phases,
            } => (0..*antennas)
                .map(|n| (0..*chains).map(|m| unit(phases[n * chains + m]) * x[m]).sum())
                .collect(),
        }
    }

    /// `x = W_A^H y`
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        match self {
            AnalogBeamformer::SubConnected { block_size, phases } => {
                let mut out = vec![Complex64::new(0.0, 0.0); phases.len() / block_size];
                for (i, p) in phases.iter().enumerate() {
                    out[i / block_size] += unit(-*p) * y[i];
                }
                out
            }
            AnalogBeamformer::FullyConnected {
                antennas,
                chains,
                phases,
            } => (0..*chains)
                .map(|m| (0..*antennas).map(|n| unit(-phases[n * chains + m]) * y[n]).sum())
                .collect(),
        }
    }

    /// Explicit `N x M` matrix.
    pub fn dense(&self) -> CMatrix {
        let (n, m) = (self.num_antennas(), self.num_chains());
        let mut w = CMatrix::zeros(n, m);
        match self {
            AnalogBeamformer::SubConnected { block_size, phases } => {
                for (i, p) in phases.iter().enumerate() {
                    w[(i, i / block_size)] = unit(*p);
                }
            }
            AnalogBeamformer::FullyConnected { chains, phases, .. } => {
                for (idx, p) in phases.iter().enumerate() {
                    w[(idx / chains, idx % chains)] = unit(*p);
                }
            }
        }
        w
    }

    /// `W_A W_D`, exploiting the block structure when present.
    pub fn precode(&self, digital: &CMatrix) -> CMatrix {
        match self {
            AnalogBeamformer::SubConnected { block_size, phases } => {
                let mut out = CMatrix::zeros(phases.len(), digital.ncols());
                for (i, p) in phases.iter().enumerate() {
                    let e = unit(*p);
                    let b = i / block_size;
                    for k in 0..digital.ncols() {
                        out[(i, k)] = e * digital[(b, k)];
                    }
                }
                out
            }
            AnalogBeamformer::FullyConnected { .. } => self.dense() * digital,
        }
    }

    /// `W_A^H W_A`
    pub fn gram(&self) -> CMatrix {
        match self {
            AnalogBeamformer::SubConnected { block_size, .. } => {
                let m = self.num_chains();
                CMatrix::identity(m, m) * Complex64::new(*block_size as f64, 0.0)
            }
            AnalogBeamformer::FullyConnected { .. } => {
                let w = self.dense();
                w.adjoint() * w
            }
        }
    }

    /// Largest deviation of any shifter weight from unit modulus.
    pub fn max_modulus_error(&self) -> f64 {
        self.entries()
            .iter()
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Hybrid analog + digital precoder under a total power budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "BeamformerSnapshot", try_from = "BeamformerSnapshot")]
pub struct HybridBeamformer {
    pub analog: AnalogBeamformer,
    /// `M x K`, column `k` is the digital precoder of user `k`.
    pub digital: CMatrix,
    /// Power budget (W).
    pub max_power: f64,
}

impl HybridBeamformer {
    pub fn num_users(&self) -> usize {
        self.digital.ncols()
    }

    /// `W_A W_D`
    pub fn precoded(&self) -> CMatrix {
        self.analog.precode(&self.digital)
    }

    /// Transmit power `||W_A W_D||_F^2`.
    pub fn power(&self) -> f64 {
        self.precoded().norm_squared()
    }

    /// Column `k` of the digital precoder.
    pub fn digital_column(&self, k: usize) -> CVector {
        self.digital.column(k).into_owned()
    }

    pub fn is_power_feasible(&self, rel_tol: f64) -> bool {
        self.power() <= self.max_power * (1.0 + rel_tol)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Serialized form of [`HybridBeamformer`]: the digital matrix is flattened
/// row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BeamformerSnapshot {
    pub analog: AnalogBeamformer,
    pub digital_rows: usize,
    pub digital_cols: usize,
    pub digital: Vec<Complex64>,
    pub max_power: f64,
}

impl From<HybridBeamformer> for BeamformerSnapshot {
    fn from(b: HybridBeamformer) -> Self {
        let (r, c) = b.digital.shape();
        let mut digital = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                digital.push(b.digital[(i, j)]);
            }
        }
        BeamformerSnapshot {
            analog: b.analog,
            digital_rows: r,
            digital_cols: c,
            digital,
            max_power: b.max_power,
        }
    }
}

impl TryFrom<BeamformerSnapshot> for HybridBeamformer {
    type Error = Error;

    fn try_from(s: BeamformerSnapshot) -> Result<Self> {
        if s.digital.len() != s.digital_rows * s.digital_cols {
            return Err(Error::Dimension {
                context: "digital beamformer storage",
                expected: s.digital_rows * s.digital_cols,
                actual: s.digital.len(),
            });
        }
        if s.analog.num_chains() != s.digital_rows {
            return Err(Error::Dimension {
                context: "digital rows vs RF chains",
                expected: s.analog.num_chains(),
                actual: s.digital_rows,
            });
        }
        Ok(HybridBeamformer {
            analog: s.analog,
            digital: CMatrix::from_row_slice(s.digital_rows, s.digital_cols, &s.digital),
            max_power: s.max_power,
        })
    }
}
