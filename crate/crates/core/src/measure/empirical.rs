use serde::{Deserialize, Serialize};

use crate::error::{ErgoError, Result};
use crate::measure::basis::{Moments, TestFunctionBasis};
use crate::measure::{kahan_sum, wrap01};
use crate::orbit::OrbitRecord;

/// Which orbit generated an empirical measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub map: String,
    pub seed: u64,
    pub len: usize,
}

/// A finite weighted atom list; weights are non-negative and sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    dim: usize,
    /// Point-major coordinates, `dim` per atom.
    coords: Vec<f64>,
    weights: Vec<f64>,
    provenance: Option<Provenance>,
}

const MASS_TOL: f64 = 1e-12;

impl EmpiricalMeasure {
    pub fn from_atoms(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&dim) || coords.len() != dim * weights.len() {
            return Err(ErgoError::DimensionMismatch {
                expected: dim * weights.len(),
                got: coords.len(),
            });
        }
        if weights.is_empty() {
            return Err(ErgoError::InvalidArgument("no atoms".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(ErgoError::InvalidArgument("negative atom weight".into()));
        }
        let total = kahan_sum(&weights);
        if (total - 1.0).abs() > MASS_TOL {
            return Err(ErgoError::InvalidArgument(format!(
                "atom weights sum to {total}, not 1"
            )));
        }
        Ok(EmpiricalMeasure {
            dim,
            coords: coords.into_iter().map(wrap01).collect(),
            weights,
            provenance: None,
        })
    }

    /// The Dirac mass `δ_x`.
    pub fn dirac(x: &[f64]) -> Result<Self> {
        Self::from_atoms(x.len(), x.to_vec(), vec![1.0])
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = Some(p);
        self
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> (&[f64], f64) {
        (&self.coords[i * self.dim..(i + 1) * self.dim], self.weights[i])
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords.chunks(self.dim).zip(self.weights.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        kahan_sum(&self.weights)
    }

    pub fn moments(&self, basis: &TestFunctionBasis) -> Result<Moments> {
        if basis.dim() != self.dim {
            return Err(ErgoError::DimensionMismatch {
                expected: basis.dim(),
                got: self.dim,
            });
        }
        let mut m = basis.zero_moments();
        let mut scratch = vec![0.0; 2 * basis.len_1d()];
        for (x, w) in self.atoms() {
            basis.accumulate(x, w, &mut m.values, &mut scratch);
        }
        Ok(m)
    }

    /// Replaces every atom by its image, keeping weights.
    pub(crate) fn map_atoms(&self, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let mut coords = vec![0.0; self.coords.len()];
        for (src, dst) in self.coords.chunks(self.dim).zip(coords.chunks_mut(self.dim)) {
            f(src, dst);
        }
        EmpiricalMeasure {
            dim: self.dim,
            coords,
            weights: self.weights.clone(),
            provenance: None,
        }
    }
}

/// The empirical measure `σ_n(x) = (1/n) Σ_{j<n} δ_{f^j x}` of an orbit.
pub fn empirical(orbit: &OrbitRecord) -> EmpiricalMeasure {
    let n = orbit.len();
    EmpiricalMeasure {
        dim: orbit.dim,
        coords: orbit.coords_f64(),
        weights: vec![1.0 / n as f64; n],
        provenance: Some(Provenance {
            map: orbit.map.clone(),
            seed: orbit.seed,
            len: n,
        }),
    }
}
