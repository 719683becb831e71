//! The transfer operator `L_φ g(x) = Σ_{f(y)=x} e^{φ(y)} g(y)` on
//! piecewise-constant functions, its dual eigenproblem and the checks built
//! on the resulting conformal measure.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ErgoError, Result};
use crate::maps::MapModel;
use crate::measure::{kahan_sum, UlamMeasure};
use crate::orbit::dyn_ball;
use crate::point::CirclePoint;
use crate::potential::Potential;
use crate::rng::substream;

/// Power-iteration stopping rule.
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100_000;

/// Largest supported number of cells.
const MAX_CELLS: usize = 1 << 24;

/// Sparse collocation matrix of `L_φ`: row `i` holds `e^{φ(y)}` at the cell of
/// every preimage `y` of the centre of cell `i`.
#[derive(Clone, Debug)]
pub struct TransferDiscretization {
    map: MapModel,
    potential: Potential,
    resolution: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl TransferDiscretization {
    pub fn new(map: &MapModel, potential: &Potential, n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(ErgoError::InvalidArgument(format!(
                "resolution N = {n} must be a power of 2"
            )));
        }
        let dim = map.dimension();
        let cells = n
            .checked_pow(dim as u32)
            .filter(|&c| c <= MAX_CELLS)
            .ok_or_else(|| ErgoError::InvalidArgument(format!("{n}^{dim} cells is too many")))?;
        let branches = map.branch_count();
        let h = 1.0 / n as f64;
        let mut row_ptr = Vec::with_capacity(cells + 1);
        let mut cols = Vec::with_capacity(cells * branches);
        let mut vals = Vec::with_capacity(cells * branches);
        row_ptr.push(0);
        let mut centre = [0.0; 2];
        let mut y = [0.0; 2];
        for i in 0..cells {
            if dim == 1 {
                centre[0] = (i as f64 + 0.5) * h;
            } else {
                centre[0] = ((i / n) as f64 + 0.5) * h;
                centre[1] = ((i % n) as f64 + 0.5) * h;
            }
            for b in 0..branches {
                map.inverse_branch(b, &centre[..dim], &mut y[..dim]);
                let w = potential.eval(map, &y[..dim]).exp();
                let col = y[..dim]
                    .iter()
                    .fold(0, |acc, &v| acc * n + ((v * n as f64) as usize).min(n - 1));
                cols.push(col as u32);
                vals.push(if w.is_finite() { w } else { 0.0 });
            }
            row_ptr.push(cols.len());
        }
        Ok(TransferDiscretization {
            map: map.clone(),
            potential: potential.clone(),
            resolution: n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn map(&self) -> &MapModel {
        &self.map
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cells(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Entries of row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// Column sums `Σ_i L_ij`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cells()];
        for (&c, &v) in self.cols.iter().zip(&self.vals) {
            s[c as usize] += v;
        }
        s
    }

    /// Whether the operator is known to have a spectral gap.
    pub fn spectral_gap_expected(&self) -> bool {
        self.map.is_uniformly_expanding()
    }

    fn apply_into(&self, g: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(c, v)| v * g[c]).sum();
        }
    }

    fn apply_dual_into(&self, nu: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &w) in nu.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (c, v) in self.row(i) {
                out[c] += v * w;
            }
        }
    }
}

/// `L_φ g` for a cell function `g`.
pub fn transfer_apply(disc: &TransferDiscretization, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != disc.cells() {
        return Err(ErgoError::ResolutionMismatch {
            expected: disc.cells(),
            got: g.len(),
        });
    }
    let mut out = vec![0.0; g.len()];
    disc.apply_into(g, &mut out);
    Ok(out)
}

/// Dual eigenmeasure `L*_φ ν = λν` of a discretized transfer operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConformalSolution {
    pub map: String,
    pub potential: String,
    pub resolution: usize,
    pub lambda: f64,
    pub pressure: f64,
    /// `‖L*ν − λν‖₁` at the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    /// Set for maps with a neutral or singular point.
    pub no_spectral_gap_guarantee: bool,
    pub nu: UlamMeasure,
}

fn normalize_l1(v: &mut [f64]) -> f64 {
    let s = kahan_sum(v);
    v.iter_mut().for_each(|x| *x /= s);
    s
}

fn dual_power_iteration(
    disc: &TransferDiscretization,
    mut nu: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, f64, usize) {
    normalize_l1(&mut nu);
    let mut next = vec![0.0; nu.len()];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        disc.apply_dual_into(&nu, &mut next);
        lambda = kahan_sum(&next);
        residual = next
            .iter()
            .zip(&nu)
            .map(|(a, b)| (a - lambda * b).abs())
            .sum::<f64>();
        std::mem::swap(&mut nu, &mut next);
        normalize_l1(&mut nu);
        if residual <= tol {
            return (nu, lambda, residual, it);
        }
    }
    (nu, lambda, residual, max_iter)
}

/// Solves the dual eigenproblem by power iteration from the uniform vector.
pub fn conformal_solve(map: &MapModel, potential: &Potential, n: usize) -> Result<ConformalSolution> {
    let disc = TransferDiscretization::new(map, potential, n)?;
    conformal_solve_disc(&disc)
}

pub fn conformal_solve_disc(disc: &TransferDiscretization) -> Result<ConformalSolution> {
    let start = vec![1.0; disc.cells()];
    solve_from(disc, start)
}

/// Power iteration started from a random positive vector; used to confirm the
/// leading eigenvalue does not depend on the start.
pub fn conformal_solve_restart(disc: &TransferDiscretization, seed: u64) -> Result<ConformalSolution> {
    let mut rng = substream(seed, 0);
    let start = (0..disc.cells()).map(|_| 0.1 + rng.random::<f64>()).collect();
    solve_from(disc, start)
}

fn solve_from(disc: &TransferDiscretization, start: Vec<f64>) -> Result<ConformalSolution> {
    let (nu, lambda, residual, iterations) =
        dual_power_iteration(disc, start, RESIDUAL_TOL, MAX_ITERATIONS);
    if !(residual <= RESIDUAL_TOL) || !(lambda > 0.0) {
        return Err(ErgoError::NonConvergence {
            iterations,
            residual,
        });
    }
    Ok(ConformalSolution {
        map: disc.map.name(),
        potential: disc.potential.label(),
        resolution: disc.resolution,
        lambda,
        pressure: lambda.ln(),
        residual,
        iterations,
        no_spectral_gap_guarantee: !disc.spectral_gap_expected(),
        nu: UlamMeasure::from_masses(disc.map.dimension(), disc.resolution, nu)?,
    })
}

/// Leading right eigenvector `L h = λ h` (normalized to mean 1).
pub fn eigendensity(disc: &TransferDiscretization, lambda: f64) -> Result<Vec<f64>> {
    let cells = disc.cells();
    let mut h = vec![1.0; cells];
    let mut next = vec![0.0; cells];
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        disc.apply_into(&h, &mut next);
        next.iter_mut().for_each(|v| *v /= lambda);
        let s = kahan_sum(&next) / cells as f64;
        next.iter_mut().for_each(|v| *v /= s);
        residual = next.iter().zip(&h).map(|(a, b)| (a - b).abs()).sum::<f64>() / cells as f64;
        std::mem::swap(&mut h, &mut next);
        if residual <= RESIDUAL_TOL {
            return Ok(h);
        }
        if it == MAX_ITERATIONS {
            break;
        }
    }
    Err(ErgoError::NonConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// The measure `h·ν` (cellwise product of right and left eigenvectors): the
/// discrete equilibrium state of `φ`.
pub fn equilibrium_measure(disc: &TransferDiscretization, sol: &ConformalSolution) -> Result<UlamMeasure> {
    let h = eigendensity(disc, sol.lambda)?;
    let masses = h.iter().zip(sol.nu.masses()).map(|(a, b)| a * b).collect();
    UlamMeasure::from_masses(sol.nu.dim(), sol.resolution, masses)
}

/// 5-point Gauss–Legendre rule on `[-1, 1]`.
const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// `∫_a^b g dν` for the piecewise-constant `ν`, Gauss–Legendre on every cell
/// piece of the lifted interval `[a, b]`.
fn integrate_against(nu: &UlamMeasure, a: f64, b: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    let n = nu.resolution() as f64;
    let mut total = 0.0;
    let mut lo = a;
    while lo < b {
        let k = (lo * n).floor();
        let hi = ((k + 1.0) / n).min(b);
        if hi <= lo {
            break;
        }
        let cell = (k.rem_euclid(n)) as usize;
        let density = nu.density(cell);
        if density > 0.0 {
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let s: f64 = GAUSS5
                .iter()
                .map(|&(t, w)| w * g(crate::measure::wrap01(mid + half * t)))
                .sum();
            total += density * half * s;
        }
        lo = hi;
    }
    total
}

/// Samples cells `A` lying inside one branch and compares `ν(f(A))` with
/// `∫_A λ e^{-φ} dν`; returns the largest relative error.
pub fn jacobian_check(sol: &ConformalSolution, disc: &TransferDiscretization, samples: usize, seed: u64) -> Result<f64> {
    let f = disc.map.circle("jacobian_check")?;
    if sol.resolution != disc.resolution {
        return Err(ErgoError::ResolutionMismatch {
            expected: disc.resolution,
            got: sol.resolution,
        });
    }
    let n = sol.resolution;
    if !n.is_multiple_of(f.degree()) {
        return Err(ErgoError::InvalidArgument(
            "cells must not straddle branch boundaries".into(),
        ));
    }
    let mut rng = substream(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let cell = rng.random_range(0..n);
        let (a, b) = (cell as f64 / n as f64, (cell + 1) as f64 / n as f64);
        if sol.nu.masses()[cell] == 0.0 {
            continue;
        }
        let fa = f.eval(a);
        let mut len = crate::measure::wrap01(f.eval(b) - fa);
        if len == 0.0 {
            len = 1.0;
        }
        let image = sol.nu.interval_mass(fa, fa + len);
        let pot = &disc.potential;
        let jac = integrate_against(&sol.nu, a, b, |x| sol.lambda * (-pot.eval(&disc.map, &[x])).exp());
        let rel = (image - jac).abs() / jac.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Ratios `r_n = ν(B(x,n,ε)) / exp(S_nφ(x) − nP)` for `n = 1..=n_max`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GibbsReport {
    pub epsilon: f64,
    pub pressure: f64,
    pub ratios: Vec<f64>,
    /// `log r_n / n`.
    pub log_ratio_rate: Vec<f64>,
    /// First `n` whose ball met a singular point; the sequence stops before it.
    pub truncated_at: Option<usize>,
    pub alpha: f64,
    /// Smallest `δ ≥ 0` with `α e^{-nδ} ≤ r_n ≤ e^{nδ}` for every recorded `n`.
    pub min_delta: f64,
}

/// Gibbs ratios along the orbit of `x`.
///
/// The ball mass is computed from the conformal identity
/// `ν(B) = λ^{-(n-1)} ∫_{f^{n-1}B} e^{S_{n-1}φ(g(z))} dν(z)`, with `g` the
/// inverse branch along the orbit, so balls far below the cell size still
/// get a meaningful mass.
pub fn gibbs_check(
    sol: &ConformalSolution,
    disc: &TransferDiscretization,
    x: CirclePoint,
    n_max: usize,
    epsilon: f64,
    alpha: f64,
) -> Result<GibbsReport> {
    let f = disc.map.circle("gibbs_check")?;
    if n_max == 0 {
        return Err(ErgoError::InvalidArgument("n_max must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ErgoError::InvalidArgument(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    let pot = &disc.potential;
    let map = &disc.map;
    let mut orbit = vec![x];
    for j in 1..n_max {
        orbit.push(f.eval_point(orbit[j - 1]));
    }
    let anchors: Vec<f64> = orbit.iter().map(|p| p.to_f64()).collect();
    let phi: Vec<f64> = anchors.iter().map(|&a| pot.eval(map, &[a])).collect();
    let mut ratios = Vec::with_capacity(n_max);
    let mut truncated_at = None;
    for n in 1..=n_max {
        let ball = dyn_ball(map, &[x], n, epsilon)?;
        if ball.touches_singular {
            truncated_at = Some(n);
            break;
        }
        // push the ball forward to time n-1
        let mut lo = ball.lower(0);
        let mut hi = CirclePoint(ball.center[0].0.wrapping_add(ball.right[0]));
        for _ in 1..n {
            lo = f.eval_point(lo);
            hi = f.eval_point(hi);
        }
        let a = lo.to_f64();
        let len = crate::point::raw_to_f64(hi.0.wrapping_sub(lo.0));
        let mass = integrate_against(&sol.nu, a, a + len, |z| {
            let mut y = z;
            let mut s = 0.0;
            for k in (0..n - 1).rev() {
                y = f.local_inverse(y, anchors[k]);
                s += pot.eval(map, &[y]);
            }
            s.exp()
        }) / sol.lambda.powi(n as i32 - 1);
        let snphi = kahan_sum(&phi[..n]);
        ratios.push(mass / (snphi - n as f64 * sol.pressure).exp());
    }
    let log_ratio_rate: Vec<f64> = ratios
        .iter()
        .enumerate()
        .map(|(i, r)| r.ln() / (i + 1) as f64)
        .collect();
    let min_delta = ratios
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let n = (i + 1) as f64;
            (r.ln() / n).max((alpha / r).ln() / n).max(0.0)
        })
        .fold(0.0, f64::max);
    Ok(GibbsReport {
        epsilon,
        pressure: sol.pressure,
        ratios,
        log_ratio_rate,
        truncated_at,
        alpha,
        min_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{make_map, MapSpec};

    fn doubling() -> MapModel {
        make_map(&MapSpec::Doubling).unwrap()
    }

    #[test]
    fn apply_examples() {
        let f = doubling();
        let d0 = TransferDiscretization::new(&f, &Potential::Zero, 64).unwrap();
        let ones = vec![1.0; 64];
        assert!(transfer_apply(&d0, &ones).unwrap().iter().all(|&v| v == 2.0));
        let ind: Vec<f64> = (0..64).map(|i| if i < 32 { 1.0 } else { 0.0 }).collect();
        assert!(transfer_apply(&d0, &ind).unwrap().iter().all(|&v| v == 1.0));
        assert!(d0.column_sums().iter().all(|&s| (s - 2.0).abs() < 1e-10));
        let dn = TransferDiscretization::new(&f, &Potential::Constant { value: -2f64.ln() }, 64).unwrap();
        assert!(transfer_apply(&dn, &ones)
            .unwrap()
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(matches!(
            transfer_apply(&dn, &[1.0; 3]),
            Err(ErgoError::ResolutionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_dyadic_resolution() {
        assert!(TransferDiscretization::new(&doubling(), &Potential::Zero, 100).is_err());
    }

    #[test]
    fn doubling_zero_potential() {
        let sol = conformal_solve(&doubling(), &Potential::Zero, 256).unwrap();
        assert!((sol.lambda - 2.0).abs() < 1e-10);
        assert!((sol.pressure - 2f64.ln()).abs() < 1e-10);
        let disc = TransferDiscretization::new(&doubling(), &Potential::Zero, 256).unwrap();
        assert!(jacobian_check(&sol, &disc, 50, 1).unwrap() < 1e-10);
    }

    #[test]
    fn restart_agrees() {
        let disc = TransferDiscretization::new(&doubling(), &Potential::Cos { amplitude: 1.0, frequency: 1 }, 512).unwrap();
        let a = conformal_solve_disc(&disc).unwrap();
        let b = conformal_solve_restart(&disc, 9).unwrap();
        assert!((a.lambda - b.lambda).abs() < 1e-8);
    }

    #[test]
    fn psi_pressure_vanishes_on_expanding_maps() {
        let f = make_map(&MapSpec::NueDeform { a: 0.1 }).unwrap();
        let sol = conformal_solve(&f, &Potential::Psi, 4096).unwrap();
        assert!(sol.pressure.abs() < 1e-3, "{}", sol.pressure);
        assert!(!sol.no_spectral_gap_guarantee);
    }

    #[test]
    fn gibbs_ratio_is_constant_for_normalized_doubling() {
        let f = doubling();
        let pot = Potential::Constant { value: -2f64.ln() };
        let disc = TransferDiscretization::new(&f, &pot, 1024).unwrap();
        let sol = conformal_solve_disc(&disc).unwrap();
        let rep = gibbs_check(&sol, &disc, CirclePoint::from_f64(0.3141), 25, 0.1, 0.1).unwrap();
        assert_eq!(rep.ratios.len(), 25);
        for r in &rep.ratios {
            assert!((r - 0.4).abs() < 1e-6, "{r}");
        }
    }

    #[test]
    fn equilibrium_of_psi_on_doubling_is_lebesgue() {
        let f = doubling();
        let disc = TransferDiscretization::new(&f, &Potential::Psi, 128).unwrap();
        let sol = conformal_solve_disc(&disc).unwrap();
        let mu = equilibrium_measure(&disc, &sol).unwrap();
        assert!(mu.masses().iter().all(|m| (m - 1.0 / 128.0).abs() < 1e-12));
    }
}
