//! Combinatorial pressure and entropy (separated and spanning sets), local
//! entropy from dynamical balls, and the Pesin defect with `K_r` membership.

use serde::{Deserialize, Serialize};

use crate::error::{ErgoError, Result};
use crate::maps::{CircleMap, MapModel};
use crate::measure::{
    kahan_sum, partition_entropy, pushforward, Measure, ReferenceMeasure,
};
use crate::orbit::{dyn_ball, MAX_BALL_RADIUS};
use crate::point::CirclePoint;
use crate::potential::Potential;
use crate::stats::{extrapolate_inverse_n, LinearFit};

/// Largest `n · log₂(branches)` handled by exhaustive preimage enumeration.
pub const ENUMERATION_BITS: f64 = 30.0;

/// Upper bound on the number of points a greedy walk may produce.
const MAX_WALK_POINTS: u64 = 1 << 26;

/// Ball extents below this cannot be resolved in double precision.
const MIN_BALL_EXTENT: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetPath {
    /// Preimage tree `f^{-(n-1)}(G)` of an equally spaced grid `G`.
    Enumeration,
    /// Walk along the circle from ball endpoint to ball endpoint.
    Greedy,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathChoice {
    #[default]
    Auto,
    Enumeration,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub n: usize,
    pub epsilon: f64,
    /// Cardinality of the constructed set.
    pub points: u64,
    /// `(1/n) log Σ_{x∈E} e^{S_nφ(x)}`.
    pub value: f64,
    pub path: SetPath,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonFit {
    pub epsilon: f64,
    pub fit: Option<LinearFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    /// `separated` or `spanning`.
    pub method: String,
    pub map: String,
    pub potential: String,
    pub eps_ladder: Vec<f64>,
    pub n_ladder: Vec<usize>,
    pub points: Vec<LadderPoint>,
    pub fits: Vec<EpsilonFit>,
    /// Extrapolation to `n → ∞` at the smallest `ε`.
    pub extrapolated: f64,
    pub uncertainty: f64,
    pub warnings: Vec<String>,
}

impl PressureEstimate {
    pub fn point(&self, n: usize, epsilon: f64) -> Option<&LadderPoint> {
        self.points.iter().find(|p| p.n == n && p.epsilon == epsilon)
    }
}

/// Streaming `log Σ exp`.
#[derive(Clone, Copy)]
struct Lse {
    max: f64,
    sum: f64,
}

impl Lse {
    fn new() -> Self {
        Lse {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    fn push(&mut self, v: f64) {
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else if v.is_finite() {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

fn validate_ladders(eps: &[f64], ns: &[usize]) -> Result<()> {
    if eps.is_empty() || ns.is_empty() {
        return Err(ErgoError::InvalidArgument("empty ladder".into()));
    }
    if let Some(&e) = eps.iter().find(|&&e| !(e > 0.0 && e < MAX_BALL_RADIUS)) {
        return Err(ErgoError::RadiusTooLarge {
            radius: e,
            limit: MAX_BALL_RADIUS,
        });
    }
    if ns.contains(&0) {
        return Err(ErgoError::InvalidArgument("n ladder entries must be >= 1".into()));
    }
    Ok(())
}

fn enumeration_allowed(map: &MapModel, n: usize) -> bool {
    n as f64 * (map.branch_count() as f64).log2() <= ENUMERATION_BITS + 1e-9
}

/// Grid size `m` whose pitch `1/m` strictly exceeds `ε`.
fn grid_size(eps: f64) -> usize {
    let mut m = (1.0 / eps).floor() as usize;
    if m as f64 * eps >= 1.0 {
        m -= 1;
    }
    m.max(1)
}

/// `(count, log Σ e^{S_nφ})` over `f^{-(n-1)}(G)`.
fn enumerate_separated(map: &MapModel, pot: &Potential, n: usize, eps: f64) -> (u64, f64) {
    let dim = map.dimension();
    let m = grid_size(eps);
    let branches = map.branch_count();
    let mut lse = Lse::new();
    let mut count = 0u64;

    fn descend(
        map: &MapModel,
        pot: &Potential,
        branches: usize,
        t: [f64; 2],
        level: usize,
        acc: f64,
        lse: &mut Lse,
        count: &mut u64,
    ) {
        if level == 0 {
            lse.push(acc);
            *count += 1;
            return;
        }
        let dim = map.dimension();
        let mut y = [0.0; 2];
        for b in 0..branches {
            map.inverse_branch(b, &t[..dim], &mut y[..dim]);
            let s = acc + pot.eval(map, &y[..dim]);
            descend(map, pot, branches, y, level - 1, s, lse, count);
        }
    }

    let total = m.pow(dim as u32);
    for g in 0..total {
        let mut t = [0.0; 2];
        if dim == 1 {
            t[0] = g as f64 / m as f64;
        } else {
            t[0] = (g / m) as f64 / m as f64;
            t[1] = (g % m) as f64 / m as f64;
        }
        let phi = pot.eval(map, &t[..dim]);
        descend(map, pot, branches, t, n - 1, phi, &mut lse, &mut count);
    }
    (count, lse.value())
}

/// Left and right extents of the dynamical ball `B(x, n, ε)` in double
/// precision; `orbit` receives `x, f(x), …, f^{n-1}(x)`.
fn ball_extent(f: &CircleMap, x: f64, n: usize, eps: f64, orbit: &mut Vec<f64>) -> (f64, f64) {
    orbit.clear();
    orbit.push(x);
    for j in 1..n {
        let prev = orbit[j - 1];
        orbit.push(f.eval(prev));
    }
    let (mut l, mut r) = (eps, eps);
    for j in (0..n - 1).rev() {
        let (anchor, image) = (orbit[j], orbit[j + 1]);
        let lo = f.local_inverse(crate::measure::wrap01(image - l), anchor);
        let hi = f.local_inverse(crate::measure::wrap01(image + r), anchor);
        let dl = (anchor - lo).rem_euclid(1.0);
        let dr = (hi - anchor).rem_euclid(1.0);
        l = dl.min(eps);
        r = dr.min(eps);
    }
    (l, r)
}

/// Greedy walk along `S¹` in increasing order.
///
/// Separated: each accepted point lies just past the right end of the
/// previous point's ball. Spanning: each centre is the right end of the ball
/// of the first uncovered point, so its own ball reaches back to it.
fn greedy_walk(f: &CircleMap, pot: &Potential, map: &MapModel, n: usize, eps: f64, spanning: bool) -> Result<(u64, f64)> {
    let mut orbit = Vec::with_capacity(n);
    let mut lse = Lse::new();
    let mut count = 0u64;
    let weigh = |orbit: &[f64], lse: &mut Lse| {
        let s: f64 = orbit.iter().map(|&y| pot.eval(map, &[y])).sum();
        lse.push(s);
    };
    let step = |v: f64| v * (1.0 + 1e-9) + 4.0 * f64::EPSILON;
    let check = |l: f64, r: f64| -> Result<()> {
        if l.min(r) < MIN_BALL_EXTENT {
            return Err(ErgoError::BlockTooLarge(format!(
                "dynamical balls at n = {n}, ε = {eps} fall below double precision"
            )));
        }
        Ok(())
    };
    if spanning {
        let (_, r0) = ball_extent(f, 0.0, n, eps, &mut orbit);
        let s0 = r0;
        let (l, r) = ball_extent(f, s0, n, eps, &mut orbit);
        check(l, r)?;
        weigh(&orbit, &mut lse);
        count += 1;
        let stop = 1.0 + s0 - l;
        let mut u = s0 + step(r);
        while u < stop {
            let (_, ru) = ball_extent(f, u.rem_euclid(1.0), n, eps, &mut orbit);
            let s = u + ru;
            let (l, r) = ball_extent(f, s.rem_euclid(1.0), n, eps, &mut orbit);
            check(l, r)?;
            weigh(&orbit, &mut lse);
            count += 1;
            if count > MAX_WALK_POINTS {
                return Err(ErgoError::BlockTooLarge(format!("more than {MAX_WALK_POINTS} centres")));
            }
            u = s + step(r);
        }
    } else {
        let (l0, r0) = ball_extent(f, 0.0, n, eps, &mut orbit);
        check(l0, r0)?;
        weigh(&orbit, &mut lse);
        count += 1;
        let stop = 1.0 - l0;
        let mut a = step(r0);
        while a < stop {
            let (l, r) = ball_extent(f, a, n, eps, &mut orbit);
            check(l, r)?;
            weigh(&orbit, &mut lse);
            count += 1;
            if count > MAX_WALK_POINTS {
                return Err(ErgoError::BlockTooLarge(format!("more than {MAX_WALK_POINTS} points")));
            }
            a += step(r);
        }
    }
    Ok((count, lse.value()))
}

fn assemble(
    method: &str,
    map: &MapModel,
    pot: &Potential,
    eps: &[f64],
    ns: &[usize],
    points: Vec<LadderPoint>,
) -> PressureEstimate {
    let mut warnings = Vec::new();
    let mut fits = Vec::new();
    let mut limits = Vec::new();
    for &e in eps {
        let vals: Vec<f64> = ns
            .iter()
            .map(|&n| {
                points
                    .iter()
                    .find(|p| p.n == n && p.epsilon == e)
                    .map_or(f64::NAN, |p| p.value)
            })
            .collect();
        match extrapolate_inverse_n(ns, &vals) {
            Ok(fit) => {
                limits.push((e, fit.intercept, fit.intercept_stderr));
                fits.push(EpsilonFit { epsilon: e, fit: Some(fit) });
            }
            Err(err) => {
                warnings.push(format!("ε = {e}: {err}; using the largest-n value"));
                limits.push((e, *vals.last().unwrap(), f64::NAN));
                fits.push(EpsilonFit { epsilon: e, fit: None });
            }
        }
    }
    let (_, best, se) = limits
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let spread = limits.iter().map(|l| (l.1 - best).abs()).fold(0.0, f64::max);
    PressureEstimate {
        method: method.into(),
        map: map.name(),
        potential: pot.label(),
        eps_ladder: eps.to_vec(),
        n_ladder: ns.to_vec(),
        points,
        fits,
        extrapolated: best,
        uncertainty: if se.is_nan() { f64::NAN } else { se + spread },
        warnings,
    }
}

/// Pressure from maximal `(n, ε)`-separated sets.
pub fn pressure_separated(map: &MapModel, pot: &Potential, eps: &[f64], ns: &[usize]) -> Result<PressureEstimate> {
    pressure_separated_with(map, pot, eps, ns, PathChoice::Auto)
}

pub fn pressure_separated_with(
    map: &MapModel,
    pot: &Potential,
    eps: &[f64],
    ns: &[usize],
    choice: PathChoice,
) -> Result<PressureEstimate> {
    validate_ladders(eps, ns)?;
    let mut points = Vec::new();
    for &e in eps {
        for &n in ns {
            let path = match choice {
                PathChoice::Auto if enumeration_allowed(map, n) => SetPath::Enumeration,
                PathChoice::Auto | PathChoice::Greedy => SetPath::Greedy,
                PathChoice::Enumeration => {
                    if !enumeration_allowed(map, n) {
                        return Err(ErgoError::BlockTooLarge(format!(
                            "n = {n} exceeds the enumeration bound"
                        )));
                    }
                    SetPath::Enumeration
                }
            };
            let (count, lse) = match path {
                SetPath::Enumeration => enumerate_separated(map, pot, n, e),
                SetPath::Greedy => {
                    let f = map.circle("greedy separated sets")?;
                    greedy_walk(f, pot, map, n, e, false)?
                }
            };
            points.push(LadderPoint {
                n,
                epsilon: e,
                points: count,
                value: lse / n as f64,
                path,
            });
        }
    }
    Ok(assemble("separated", map, pot, eps, ns, points))
}

/// Topological entropy from greedy `(n, ε)`-spanning sets.
pub fn entropy_spanning(map: &MapModel, eps: &[f64], ns: &[usize]) -> Result<PressureEstimate> {
    validate_ladders(eps, ns)?;
    let f = map.circle("spanning sets")?;
    let pot = Potential::Zero;
    let mut points = Vec::new();
    for &e in eps {
        for &n in ns {
            let (count, lse) = greedy_walk(f, &pot, map, n, e, true)?;
            points.push(LadderPoint {
                n,
                epsilon: e,
                points: count,
                value: lse / n as f64,
                path: SetPath::Greedy,
            });
        }
    }
    Ok(assemble("spanning", map, &pot, eps, ns, points))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalEntropyPoint {
    pub n: usize,
    pub delta: f64,
    pub ball_mass: f64,
    /// `-(1/n) log ν(B(x, n, δ))`.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalEntropy {
    pub x: Vec<f64>,
    pub reference: String,
    pub points: Vec<LocalEntropyPoint>,
    /// Extrapolation to `n → ∞` at the smallest `δ`.
    pub plateau: f64,
    pub uncertainty: f64,
    /// Some ball had zero reference mass or met a singular point.
    pub variance_flag: bool,
}

/// `-(1/n) log ν(B(x, n, δ))` from exact ball geometry, extrapolated in `1/n`.
pub fn local_entropy(
    map: &MapModel,
    nu: &ReferenceMeasure,
    x: &[CirclePoint],
    deltas: &[f64],
    ns: &[usize],
) -> Result<LocalEntropy> {
    validate_ladders(deltas, ns)?;
    if nu.dim() != map.dimension() {
        return Err(ErgoError::DimensionMismatch {
            expected: map.dimension(),
            got: nu.dim(),
        });
    }
    let mut points = Vec::new();
    let mut flag = false;
    let mut limits = Vec::new();
    for &d in deltas {
        let mut vals = Vec::new();
        let mut used = Vec::new();
        for &n in ns {
            let ball = dyn_ball(map, x, n, d)?;
            flag |= ball.touches_singular;
            let lo: Vec<CirclePoint> = (0..x.len()).map(|i| ball.lower(i)).collect();
            let len: Vec<u128> = ball.left.iter().zip(&ball.right).map(|(l, r)| l + r).collect();
            let mass = nu.box_mass(&lo, &len);
            if !(mass > 0.0) {
                flag = true;
                continue;
            }
            let value = -mass.ln() / n as f64;
            points.push(LocalEntropyPoint {
                n,
                delta: d,
                ball_mass: mass,
                value,
            });
            vals.push(value);
            used.push(n);
        }
        let (lim, se) = match extrapolate_inverse_n(&used, &vals) {
            Ok(fit) => (fit.intercept, fit.intercept_stderr),
            Err(_) => (vals.last().copied().unwrap_or(f64::NAN), f64::NAN),
        };
        limits.push((d, lim, se));
    }
    let (_, plateau, se) = limits
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let spread = limits.iter().map(|l| (l.1 - plateau).abs()).fold(0.0, f64::max);
    Ok(LocalEntropy {
        x: x.iter().map(|p| p.to_f64()).collect(),
        reference: nu.label(),
        points,
        plateau,
        uncertainty: se + spread,
        variance_flag: flag,
    })
}

/// Largest local-entropy plateau over a finite sample of points: a sample
/// maximum standing in for the essential supremum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMaximum {
    pub value: f64,
    pub label: String,
    pub per_point: Vec<f64>,
}

pub fn local_entropy_sample_max(
    map: &MapModel,
    nu: &ReferenceMeasure,
    xs: &[Vec<CirclePoint>],
    deltas: &[f64],
    ns: &[usize],
) -> Result<SampleMaximum> {
    let per_point = xs
        .iter()
        .map(|x| local_entropy(map, nu, x, deltas, ns).map(|l| l.plateau))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleMaximum {
        value: per_point.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        label: format!("sample maximum over {} points", xs.len()),
        per_point,
    })
}

/// A reported estimate with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub method: String,
    pub ladder: Vec<f64>,
    pub uncertainty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrVerdict {
    pub r: f64,
    pub member: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub map: String,
    pub measure: String,
    pub entropy: Estimate,
    pub integral_psi: Estimate,
    pub lyapunov_sum: Estimate,
    /// `entropy.value + integral_psi.value`.
    pub defect: f64,
    pub pressure: Estimate,
    pub kr: Vec<KrVerdict>,
    /// Atoms or nodes skipped because `log|det Df|` was not finite there.
    pub excluded_atoms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PesinConfig {
    /// Cells per axis of the partition.
    pub partition: usize,
    /// Largest block length; the entropy is read at this length.
    pub q_max: usize,
    pub r_ladder: Vec<f64>,
    /// Overrides the pressure used for `K_r` membership.
    pub pressure: Option<f64>,
    /// Resolution of the spectral pressure for non-expanding maps.
    pub spectral_resolution: usize,
    /// L¹ tolerance for accepting an Ulam measure as invariant.
    pub invariance_tol: f64,
}

impl Default for PesinConfig {
    fn default() -> Self {
        PesinConfig {
            partition: 2,
            q_max: 10,
            r_ladder: vec![0.5, 0.2, 0.1, 0.05],
            pressure: None,
            spectral_resolution: 1 << 12,
            invariance_tol: 1e-6,
        }
    }
}

/// Per-coordinate `∫ log f_i' dμ`, plus the number of atoms left out.
fn coordinate_log_derivatives(map: &MapModel, mu: &Measure) -> (Vec<f64>, usize) {
    let dim = map.dimension();
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); dim];
    let mut mass = 0.0;
    let mut excluded = 0;
    let mut add = |x: &[f64], w: f64, terms: &mut Vec<Vec<f64>>| {
        let logs: Vec<f64> = map
            .factors()
            .iter()
            .zip(x)
            .map(|(f, &xi)| f.deriv(xi).ln())
            .collect();
        if logs.iter().all(|v| v.is_finite()) {
            for (t, l) in terms.iter_mut().zip(logs) {
                t.push(w * l);
            }
            mass += w;
        } else {
            excluded += 1;
        }
    };
    match mu {
        Measure::Empirical(m) => {
            for (x, w) in m.atoms() {
                add(x, w, &mut terms);
            }
        }
        Measure::Ulam(m) => {
            let n = m.resolution();
            let q = crate::measure::PUSHFORWARD_NODES;
            for (c, &mc) in m.masses().iter().enumerate() {
                if mc == 0.0 {
                    continue;
                }
                let w = mc / q.pow(dim as u32) as f64;
                for a in 0..q {
                    let xa = ((if dim == 1 { c } else { c / n }) as f64 + (a as f64 + 0.5) / q as f64) / n as f64;
                    if dim == 1 {
                        add(&[xa], w, &mut terms);
                    } else {
                        for b in 0..q {
                            let yb = ((c % n) as f64 + (b as f64 + 0.5) / q as f64) / n as f64;
                            add(&[xa, yb], w, &mut terms);
                        }
                    }
                }
            }
        }
    }
    let mass = if mass > 0.0 { mass } else { 1.0 };
    (terms.iter().map(|t| kahan_sum(t) / mass).collect(), excluded)
}

/// Pesin defect `h_μ + ∫ψ dμ` with `ψ = -log|det Df|`.
pub fn pesin_defect(map: &MapModel, mu: &Measure, cfg: &PesinConfig) -> Result<DefectReport> {
    if cfg.q_max == 0 || cfg.partition == 0 {
        return Err(ErgoError::InvalidArgument("partition and q_max must be positive".into()));
    }
    let label = match mu {
        Measure::Empirical(m) => {
            let p = m.provenance().ok_or_else(|| {
                ErgoError::UnsupportedMeasure("empirical measure without orbit provenance".into())
            })?;
            if p.map != map.name() {
                return Err(ErgoError::UnsupportedMeasure(format!(
                    "measure was generated by `{}`, not `{}`",
                    p.map,
                    map.name()
                )));
            }
            format!("empirical(seed={}, n={})", p.seed, p.len)
        }
        Measure::Ulam(m) => {
            let Measure::Ulam(img) = pushforward(mu, map)? else {
                unreachable!()
            };
            let l1: f64 = img
                .masses()
                .iter()
                .zip(m.masses())
                .map(|(a, b)| (a - b).abs())
                .sum();
            if l1 > cfg.invariance_tol {
                return Err(ErgoError::UnsupportedMeasure(format!(
                    "Ulam measure is not invariant (L1 pushforward residual {l1:e})"
                )));
            }
            format!("ulam(N={})", m.resolution())
        }
    };

    let mut hq = Vec::with_capacity(cfg.q_max);
    for q in 1..=cfg.q_max {
        hq.push(partition_entropy(mu, map, cfg.partition, q)?);
    }
    let h = *hq.last().unwrap();
    let h_unc = if hq.len() >= 2 {
        (hq[hq.len() - 1] - hq[hq.len() - 2]).abs()
    } else {
        f64::NAN
    };

    let (logs, excluded) = coordinate_log_derivatives(map, mu);
    let int_psi = -logs.iter().sum::<f64>();
    let lyap: f64 = logs.iter().map(|l| l.max(0.0)).sum();

    let (pressure, p_method) = match cfg.pressure {
        Some(p) => (p, "configured".to_string()),
        None if map.is_uniformly_expanding() => (0.0, "psi convention for expanding maps".to_string()),
        None => {
            let sol = crate::transfer::conformal_solve(map, &Potential::Psi, cfg.spectral_resolution)?;
            (sol.pressure, format!("spectral (N={})", cfg.spectral_resolution))
        }
    };
    let defect = h + int_psi;
    let kr = cfg
        .r_ladder
        .iter()
        .map(|&r| KrVerdict {
            r,
            member: defect >= pressure - r,
        })
        .collect();
    Ok(DefectReport {
        map: map.name(),
        measure: label,
        entropy: Estimate {
            value: h,
            method: format!("block entropy, N={}, q=1..{}", cfg.partition, cfg.q_max),
            ladder: hq,
            uncertainty: h_unc,
        },
        integral_psi: Estimate {
            value: int_psi,
            method: match mu {
                Measure::Empirical(_) => "atom average of -log|det Df|".into(),
                Measure::Ulam(_) => "cell midpoint quadrature of -log|det Df|".into(),
            },
            ladder: Vec::new(),
            uncertainty: 0.0,
        },
        lyapunov_sum: Estimate {
            value: lyap,
            method: "sum of positive coordinate exponents".into(),
            ladder: logs,
            uncertainty: 0.0,
        },
        defect,
        pressure: Estimate {
            value: pressure,
            method: p_method,
            ladder: Vec::new(),
            uncertainty: 0.0,
        },
        kr,
        excluded_atoms: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{make_map, MapSpec};
    use crate::measure::{EmpiricalMeasure, UlamMeasure};

    fn doubling() -> MapModel {
        make_map(&MapSpec::Doubling).unwrap()
    }

    #[test]
    fn grid_pitch_exceeds_epsilon() {
        assert_eq!(grid_size(1.0 / 128.0), 127);
        assert_eq!(grid_size(0.3), 3);
        assert!(1.0 / grid_size(0.1) as f64 > 0.1);
    }

    #[test]
    fn doubling_entropy_by_enumeration() {
        let est = pressure_separated(&doubling(), &Potential::Zero, &[1.0 / 128.0], &[10, 11, 12, 13, 14]).unwrap();
        assert!((est.extrapolated - 2f64.ln()).abs() < 1e-9);
        let p = est.point(10, 1.0 / 128.0).unwrap();
        assert_eq!(p.points, 127 * 512);
        assert_eq!(p.path, SetPath::Enumeration);
    }

    #[test]
    fn greedy_paths_match_geometry() {
        let f = doubling();
        let sep = pressure_separated_with(&f, &Potential::Zero, &[0.05], &[6, 8, 10, 12], PathChoice::Greedy).unwrap();
        let span = entropy_spanning(&f, &[0.05], &[6, 8, 10, 12]).unwrap();
        for (a, b) in sep.points.iter().zip(&span.points) {
            assert!(b.points <= a.points);
        }
        assert!((sep.extrapolated - 2f64.ln()).abs() < 0.03);
        assert!((span.extrapolated - 2f64.ln()).abs() < 0.03);
    }

    #[test]
    fn local_entropy_of_lebesgue_doubling() {
        let le = local_entropy(
            &doubling(),
            &ReferenceMeasure::lebesgue(1),
            &[CirclePoint::from_f64(0.3)],
            &[0.1, 0.05],
            &[1, 5, 10, 15, 20],
        )
        .unwrap();
        assert!((le.points[0].value + (0.2f64).ln()).abs() < 1e-12);
        assert!((le.plateau - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn dirac_defect() {
        let f = doubling();
        let d = EmpiricalMeasure::dirac(&[0.0]).unwrap().with_provenance(crate::measure::Provenance {
            map: f.name(),
            seed: 0,
            len: 1,
        });
        let rep = pesin_defect(&f, &d.into(), &PesinConfig::default()).unwrap();
        assert!((rep.defect + 2f64.ln()).abs() < 1e-12);
        assert!(!rep.kr[0].member);
        assert_eq!(rep.defect, rep.entropy.value + rep.integral_psi.value);
    }

    #[test]
    fn lebesgue_ulam_defect_and_rejections() {
        let f = doubling();
        let leb: Measure = UlamMeasure::lebesgue(1, 256).unwrap().into();
        let rep = pesin_defect(&f, &leb, &PesinConfig::default()).unwrap();
        assert!(rep.defect.abs() < 1e-3);
        let bare: Measure = EmpiricalMeasure::dirac(&[0.0]).unwrap().into();
        assert!(matches!(
            pesin_defect(&f, &bare, &PesinConfig::default()),
            Err(ErgoError::UnsupportedMeasure(_))
        ));
        let skew: Measure = UlamMeasure::from_masses(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap().into();
        assert!(pesin_defect(&f, &skew, &PesinConfig::default()).is_err());
    }
}
