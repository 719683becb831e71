//! Truncated test-function family for the weak* distance
//! `dist(μ, ν) = Σ_i 2^{-i} |∫φ_i dμ − ∫φ_i dν|`.
//!
//! In one dimension the family is `φ_0 ≡ 1`, `φ_{2k-1} = (1 + cos 2πkx)/2`,
//! `φ_{2k} = (1 + sin 2πkx)/2` for `k = 1..K`. On the torus it is the tensor
//! product `φ_i(x) φ_j(y)` with weight `2^{-(i+j)}`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ErgoError, Result};

/// Default truncation order.
pub const DEFAULT_K: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestFunctionBasis {
    k: usize,
    dim: usize,
}

impl Default for TestFunctionBasis {
    fn default() -> Self {
        TestFunctionBasis {
            k: DEFAULT_K,
            dim: 1,
        }
    }
}

impl TestFunctionBasis {
    pub fn new(k: usize, dim: usize) -> Result<Self> {
        if k == 0 || k > 256 {
            return Err(ErgoError::InvalidArgument(format!(
                "basis truncation K = {k} must lie in 1..=256"
            )));
        }
        if !(1..=2).contains(&dim) {
            return Err(ErgoError::InvalidArgument(format!(
                "basis dimension {dim} must be 1 or 2"
            )));
        }
        Ok(TestFunctionBasis { k, dim })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of one-dimensional functions, `2K + 1`.
    pub fn len_1d(&self) -> usize {
        2 * self.k + 1
    }

    /// Total number of (tensorized) functions.
    pub fn len(&self) -> usize {
        self.len_1d().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> Vec<f64> {
        let w1: Vec<f64> = (0..self.len_1d()).map(|i| 2f64.powi(-(i as i32))).collect();
        if self.dim == 1 {
            w1
        } else {
            w1.iter()
                .flat_map(|&a| w1.iter().map(move |&b| a * b))
                .collect()
        }
    }

    /// Values `φ_i(x)` of the one-dimensional family.
    #[inline]
    pub fn eval_1d(&self, x: f64, out: &mut [f64]) {
        out[0] = 1.0;
        let (s1, c1) = (2.0 * PI * x).sin_cos();
        let (mut s, mut c) = (s1, c1);
        for k in 1..=self.k {
            out[2 * k - 1] = 0.5 * (1.0 + c);
            out[2 * k] = 0.5 * (1.0 + s);
            // angle addition
            let cn = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = cn;
        }
    }

    /// Adds `weight · φ(x)` into `acc`; `scratch` needs `2 · len_1d()` slots.
    #[inline]
    pub fn accumulate(&self, x: &[f64], weight: f64, acc: &mut [f64], scratch: &mut [f64]) {
        let l = self.len_1d();
        if self.dim == 1 {
            self.eval_1d(x[0], &mut scratch[..l]);
            for (a, v) in acc.iter_mut().zip(&scratch[..l]) {
                *a += weight * v;
            }
        } else {
            let (sx, sy) = scratch.split_at_mut(l);
            self.eval_1d(x[0], sx);
            self.eval_1d(x[1], &mut sy[..l]);
            for i in 0..l {
                let wi = weight * sx[i];
                for j in 0..l {
                    acc[i * l + j] += wi * sy[j];
                }
            }
        }
    }

    /// Exact integrals `∫_a^b φ_i dx` of the one-dimensional family.
    pub fn cell_integrals_1d(&self, a: f64, b: f64, out: &mut [f64]) {
        let h = b - a;
        out[0] = h;
        for k in 1..=self.k {
            let w = 2.0 * PI * k as f64;
            let (sb, cb) = (w * b).sin_cos();
            let (sa, ca) = (w * a).sin_cos();
            out[2 * k - 1] = 0.5 * h + (sb - sa) / (2.0 * w);
            out[2 * k] = 0.5 * h - (cb - ca) / (2.0 * w);
        }
    }

    pub fn zero_moments(&self) -> Moments {
        Moments {
            k: self.k,
            dim: self.dim,
            values: vec![0.0; self.len()],
        }
    }
}

/// Integrals `∫φ_i dμ` of a measure against a [`TestFunctionBasis`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub k: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Moments {
    pub fn basis(&self) -> TestFunctionBasis {
        TestFunctionBasis {
            k: self.k,
            dim: self.dim,
        }
    }

    /// Truncated weak* distance between two moment vectors.
    pub fn dist(&self, other: &Moments) -> Result<f64> {
        if self.dim != other.dim {
            return Err(ErgoError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if self.k != other.k {
            return Err(ErgoError::ResolutionMismatch {
                expected: self.k,
                got: other.k,
            });
        }
        let w = self.basis().weights();
        Ok(w.iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(wi, (a, b))| wi * (a - b).abs())
            .sum())
    }

    /// Convex combination `Σ c_i m_i` (the moments of the mixture measure).
    pub fn mixture(parts: &[&Moments], coeffs: &[f64]) -> Result<Moments> {
        let first = parts
            .first()
            .ok_or_else(|| ErgoError::InvalidArgument("empty mixture".into()))?;
        let mut out = first.basis().zero_moments();
        for (m, &c) in parts.iter().zip(coeffs) {
            if m.k != first.k || m.dim != first.dim {
                return Err(ErgoError::ResolutionMismatch {
                    expected: first.k,
                    got: m.k,
                });
            }
            for (o, v) in out.values.iter_mut().zip(&m.values) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// Moments of the Dirac mass at `x`.
    pub fn dirac(basis: &TestFunctionBasis, x: &[f64]) -> Moments {
        let mut m = basis.zero_moments();
        let mut scratch = vec![0.0; 2 * basis.len_1d()];
        basis.accumulate(x, 1.0, &mut m.values, &mut scratch);
        m
    }

    /// Moments of Lebesgue measure: `1/2` for every non-constant function.
    pub fn lebesgue(basis: &TestFunctionBasis) -> Moments {
        let l = basis.len_1d();
        let mut one = vec![0.5; l];
        one[0] = 1.0;
        let values = if basis.dim == 1 {
            one
        } else {
            one.iter()
                .flat_map(|&a| one.iter().map(move |&b| a * b))
                .collect()
        };
        Moments {
            k: basis.k,
            dim: basis.dim,
            values,
        }
    }
}
