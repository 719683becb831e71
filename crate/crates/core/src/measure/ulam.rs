use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ErgoError, Result};
use crate::measure::basis::{Moments, TestFunctionBasis};
use crate::point::{raw_to_f64, CirclePoint};

/// Piecewise-constant probability measure on a uniform partition of `S¹`
/// (`N` cells) or `T²` (`N × N` cells, row index = first coordinate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UlamMeasure {
    dim: usize,
    resolution: usize,
    masses: Vec<f64>,
}

impl UlamMeasure {
    /// Lebesgue measure at resolution `n`.
    pub fn lebesgue(dim: usize, n: usize) -> Result<Self> {
        let cells = checked_cells(dim, n)?;
        Ok(UlamMeasure {
            dim,
            resolution: n,
            masses: vec![1.0 / cells as f64; cells],
        })
    }

    /// Builds a measure from non-negative cell weights, normalizing to mass 1.
    pub fn from_masses(dim: usize, n: usize, masses: Vec<f64>) -> Result<Self> {
        let cells = checked_cells(dim, n)?;
        if masses.len() != cells {
            return Err(ErgoError::ResolutionMismatch {
                expected: cells,
                got: masses.len(),
            });
        }
        if masses.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(ErgoError::InvalidArgument(
                "cell masses must be finite and non-negative".into(),
            ));
        }
        let total = crate::measure::kahan_sum(&masses);
        if total <= 0.0 {
            return Err(ErgoError::InvalidArgument("zero total mass".into()));
        }
        Ok(UlamMeasure {
            dim,
            resolution: n,
            masses: masses.into_iter().map(|m| m / total).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn cell_count(&self) -> usize {
        self.masses.len()
    }

    pub fn total_mass(&self) -> f64 {
        crate::measure::kahan_sum(&self.masses)
    }

    /// Density (with respect to Lebesgue) on a cell.
    pub fn density(&self, cell: usize) -> f64 {
        self.masses[cell] * self.masses.len() as f64
    }

    /// Cell containing a point.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let n = self.resolution;
        x.iter().take(self.dim).fold(0, |acc, &xi| {
            acc * n + ((xi * n as f64) as usize).min(n - 1)
        })
    }

    pub fn moments(&self, basis: &TestFunctionBasis) -> Result<Moments> {
        if basis.dim() != self.dim {
            return Err(ErgoError::DimensionMismatch {
                expected: basis.dim(),
                got: self.dim,
            });
        }
        let n = self.resolution;
        let l = basis.len_1d();
        let h = 1.0 / n as f64;
        // per-axis cell averages of every basis function
        let mut avg = vec![0.0; n * l];
        for i in 0..n {
            let row = &mut avg[i * l..(i + 1) * l];
            basis.cell_integrals_1d(i as f64 * h, (i + 1) as f64 * h, row);
            row.iter_mut().for_each(|v| *v /= h);
        }
        let mut m = basis.zero_moments();
        if self.dim == 1 {
            for (i, &mass) in self.masses.iter().enumerate() {
                for (mv, a) in m.values.iter_mut().zip(&avg[i * l..(i + 1) * l]) {
                    *mv += mass * a;
                }
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    let mass = self.masses[i * n + j];
                    if mass == 0.0 {
                        continue;
                    }
                    let (ax, ay) = (&avg[i * l..(i + 1) * l], &avg[j * l..(j + 1) * l]);
                    for a in 0..l {
                        let wa = mass * ax[a];
                        for b in 0..l {
                            m.values[a * l + b] += wa * ay[b];
                        }
                    }
                }
            }
        }
        Ok(m)
    }

    /// Cells met by the arc `[lo, lo + len]` with the covered fraction of each.
    fn axis_overlaps(&self, lo: CirclePoint, len: u128) -> Vec<(usize, f64)> {
        let n = self.resolution;
        let mut out = Vec::new();
        if n == 1 {
            out.push((0, raw_to_f64(len)));
            return out;
        }
        if n.is_power_of_two() {
            let shift = 128 - n.trailing_zeros();
            let (mut start, mut remaining) = (lo.0, len);
            while remaining > 0 {
                let cell = (start >> shift) as usize;
                let cell_end = ((cell as u128 + 1) << shift) & if cell + 1 == n { 0 } else { u128::MAX };
                let room = cell_end.wrapping_sub(start);
                let room = if room == 0 { u128::MAX } else { room };
                let seg = remaining.min(room);
                out.push((cell, raw_to_f64(seg) * n as f64));
                remaining -= seg;
                start = start.wrapping_add(seg);
            }
        } else {
            let (mut a, b) = (lo.to_f64(), lo.to_f64() + raw_to_f64(len));
            while a < b {
                let cell_f = (a * n as f64).floor();
                let end = ((cell_f + 1.0) / n as f64).min(b);
                out.push(((cell_f as usize) % n, (end - a) * n as f64));
                a = end;
            }
        }
        out
    }

    /// Mass of the box `Π_i [lo_i, lo_i + len_i]` (arcs may wrap).
    pub fn box_mass(&self, lo: &[CirclePoint], len: &[u128]) -> f64 {
        let n = self.resolution;
        match self.dim {
            1 => self
                .axis_overlaps(lo[0], len[0])
                .iter()
                .map(|&(c, frac)| self.masses[c] * frac)
                .sum(),
            _ => {
                let ox = self.axis_overlaps(lo[0], len[0]);
                let oy = self.axis_overlaps(lo[1], len[1]);
                let mut s = 0.0;
                for &(i, fx) in &ox {
                    for &(j, fy) in &oy {
                        s += self.masses[i * n + j] * fx * fy;
                    }
                }
                s
            }
        }
    }

    /// Mass of the lifted interval `[a, b]`, `a ≤ b`, on the circle.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b - a >= 1.0 {
            return 1.0;
        }
        let lo = CirclePoint::from_f64(a);
        self.box_mass(&[lo], &[crate::point::f64_to_raw(b - a)])
    }

    pub fn sampler(&self) -> UlamSampler {
        let mut acc = 0.0;
        let cdf = self
            .masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        UlamSampler {
            dim: self.dim,
            resolution: self.resolution,
            cdf,
        }
    }
}

fn checked_cells(dim: usize, n: usize) -> Result<usize> {
    if !(1..=2).contains(&dim) {
        return Err(ErgoError::InvalidArgument(format!("dimension {dim} must be 1 or 2")));
    }
    if n == 0 || n > (1 << 24) {
        return Err(ErgoError::InvalidArgument(format!("resolution {n} out of range")));
    }
    n.checked_pow(dim as u32)
        .filter(|&c| c <= 1 << 26)
        .ok_or_else(|| ErgoError::InvalidArgument(format!("{n}^{dim} cells is too many")))
}

/// Inverse-CDF sampling: pick a cell by mass, then a uniform point inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct UlamSampler {
    dim: usize,
    resolution: usize,
    cdf: Vec<f64>,
}

impl UlamSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [CirclePoint; 2] {
        let total = *self.cdf.last().unwrap();
        let u = rng.random::<f64>() * total;
        let cell = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let n = self.resolution;
        let idx = if self.dim == 1 {
            [cell, 0]
        } else {
            [cell / n, cell % n]
        };
        let mut out = [CirclePoint::ZERO; 2];
        for d in 0..self.dim {
            let within = rng.random::<f64>();
            out[d] = CirclePoint::from_f64((idx[d] as f64 + within) / n as f64);
        }
        out
    }
}
