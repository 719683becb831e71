//! Measures as data: empirical and Ulam measures, the weak* distance,
//! Birkhoff averages, pushforwards and partition entropies.

pub mod basis;
pub mod empirical;
pub mod ulam;

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use basis::{Moments, TestFunctionBasis, DEFAULT_K};
pub use empirical::{empirical, EmpiricalMeasure, Provenance};
pub use ulam::{UlamMeasure, UlamSampler};

use crate::error::{ErgoError, Result};
use crate::maps::MapModel;
use crate::orbit::OrbitRecord;
use crate::point::CirclePoint;

/// Arc-length distance on `S¹ = [0,1)`.
#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Reduces `x` into `[0, 1)`.
#[inline]
pub fn wrap01(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Compensated summation.
pub fn kahan_sum(xs: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for &x in xs {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// A probability measure on `S¹` or `T²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    Empirical(EmpiricalMeasure),
    Ulam(UlamMeasure),
}

impl From<EmpiricalMeasure> for Measure {
    fn from(m: EmpiricalMeasure) -> Self {
        Measure::Empirical(m)
    }
}

impl From<UlamMeasure> for Measure {
    fn from(m: UlamMeasure) -> Self {
        Measure::Ulam(m)
    }
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Empirical(m) => m.dim(),
            Measure::Ulam(m) => m.dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Measure::Empirical(_) => "empirical",
            Measure::Ulam(_) => "ulam",
        }
    }

    pub fn moments(&self, basis: &TestFunctionBasis) -> Result<Moments> {
        match self {
            Measure::Empirical(m) => m.moments(basis),
            Measure::Ulam(m) => m.moments(basis),
        }
    }

    /// Writes the atom list or the cell masses as CSV with a header row.
    pub fn write_csv<W: Write>(&self, out: W, seed: Option<u64>) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(out);
        let dim = self.dim();
        let seed = seed.map(|s| s.to_string()).unwrap_or_default();
        let coord_names: &[&str] = if dim == 1 { &["x"] } else { &["x", "y"] };
        match self {
            Measure::Empirical(m) => {
                let mut header = vec!["kind", "resolution", "seed", "index"];
                header.extend_from_slice(coord_names);
                header.push("weight");
                w.write_record(&header)?;
                for (i, (x, wt)) in m.atoms().enumerate() {
                    let mut rec = vec![
                        "empirical".to_string(),
                        m.len().to_string(),
                        seed.clone(),
                        i.to_string(),
                    ];
                    rec.extend(x.iter().map(|v| format!("{v:e}")));
                    rec.push(format!("{wt:e}"));
                    w.write_record(&rec)?;
                }
            }
            Measure::Ulam(m) => {
                let mut header = vec!["kind", "resolution", "seed", "cell"];
                let lows: &[&str] = if dim == 1 { &["x_lo"] } else { &["x_lo", "y_lo"] };
                header.extend_from_slice(lows);
                header.push("mass");
                w.write_record(&header)?;
                let n = m.resolution();
                for (c, mass) in m.masses().iter().enumerate() {
                    let mut rec = vec![
                        "ulam".to_string(),
                        n.to_string(),
                        seed.clone(),
                        c.to_string(),
                    ];
                    if dim == 1 {
                        rec.push(format!("{:e}", c as f64 / n as f64));
                    } else {
                        rec.push(format!("{:e}", (c / n) as f64 / n as f64));
                        rec.push(format!("{:e}", (c % n) as f64 / n as f64));
                    }
                    rec.push(format!("{mass:e}"));
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Truncated weak* distance `Σ_i 2^{-i} |∫φ_i dμ − ∫φ_i dν|`.
pub fn weak_star_dist(mu: &Measure, nu: &Measure, basis: &TestFunctionBasis) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(ErgoError::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    mu.moments(basis)?.dist(&nu.moments(basis)?)
}

/// Stream averaged by [`birkhoff`].
pub enum Observable<'a> {
    LogDet,
    LogDfInv,
    /// A user test function of the (double-precision) orbit point.
    Test(&'a dyn Fn(&[f64]) -> f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffAverage {
    pub mean: f64,
    /// Steps that entered the mean.
    pub count: usize,
    /// Flagged singular steps left out.
    pub excluded: usize,
}

/// Arithmetic mean of an orbit stream, skipping flagged steps of the
/// derivative streams.
pub fn birkhoff(orbit: &OrbitRecord, obs: Observable<'_>) -> Result<BirkhoffAverage> {
    let n = orbit.len();
    let mut terms = Vec::with_capacity(n);
    match obs {
        Observable::LogDet | Observable::LogDfInv => {
            let stream = if matches!(obs, Observable::LogDet) {
                &orbit.log_det
            } else {
                &orbit.log_dfinv
            };
            let mut flagged = orbit.flagged.iter().peekable();
            for (j, v) in stream.iter().enumerate() {
                if flagged.peek() == Some(&&j) {
                    flagged.next();
                    continue;
                }
                terms.push(*v);
            }
        }
        Observable::Test(f) => {
            for j in 0..n {
                terms.push(f(&orbit.point_f64(j)));
            }
        }
    }
    let count = terms.len();
    if count == 0 {
        return Err(ErgoError::InvalidArgument(
            "every orbit step is flagged singular".into(),
        ));
    }
    Ok(BirkhoffAverage {
        mean: kahan_sum(&terms) / count as f64,
        count,
        excluded: n - count,
    })
}

#[inline]
fn cell_index(x: f64, n: usize) -> u64 {
    ((x * n as f64) as u64).min(n as u64 - 1)
}

/// Node budget per axis for Ulam cylinder counting.
const MAX_NODES_1D: usize = 1 << 22;
const MAX_NODES_2D_AXIS: usize = 1 << 11;

/// Quadrature nodes `(point, weight)` representing an Ulam measure, `per_cell`
/// midpoints per axis in every cell.
fn ulam_nodes(m: &UlamMeasure, per_cell: usize) -> (Vec<f64>, Vec<f64>) {
    let n = m.resolution();
    let dim = m.dim();
    let q = per_cell;
    let offsets: Vec<f64> = (0..q).map(|k| (k as f64 + 0.5) / q as f64).collect();
    let node_w = 1.0 / (q.pow(dim as u32)) as f64;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (c, &mass) in m.masses().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        if dim == 1 {
            for o in &offsets {
                coords.push((c as f64 + o) / n as f64);
                weights.push(mass * node_w);
            }
        } else {
            let (i, j) = (c / n, c % n);
            for ox in &offsets {
                for oy in &offsets {
                    coords.push((i as f64 + ox) / n as f64);
                    coords.push((j as f64 + oy) / n as f64);
                    weights.push(mass * node_w);
                }
            }
        }
    }
    (coords, weights)
}

/// Block entropy `(1/q) H(P^q, μ)` for the uniform partition `P` into `N`
/// cells per axis.
///
/// Cylinders are found by coding forward orbits: the atoms of an empirical
/// measure, or midpoint quadrature nodes of an Ulam measure (refined until
/// every cylinder of a full-branch dyadic map holds several nodes).
pub fn partition_entropy(mu: &Measure, map: &MapModel, n: usize, q: usize) -> Result<f64> {
    let dim = map.dimension();
    if mu.dim() != dim {
        return Err(ErgoError::DimensionMismatch {
            expected: dim,
            got: mu.dim(),
        });
    }
    if n == 0 || q == 0 {
        return Err(ErgoError::InvalidArgument("N and q must be positive".into()));
    }
    let bits = q as f64 * (n as f64).log2() * dim as f64;
    if bits > 30.0 + 1e-9 {
        return Err(ErgoError::BlockTooLarge(format!(
            "q·log2(N^dim) = {bits:.1} exceeds 30 (N = {n}, q = {q})"
        )));
    }
    let owned;
    let (coords, weights): (&[f64], &[f64]) = match mu {
        Measure::Empirical(m) => {
            owned = (
                m.atoms().flat_map(|(x, _)| x.to_vec()).collect::<Vec<_>>(),
                m.atoms().map(|(_, w)| w).collect::<Vec<_>>(),
            );
            (&owned.0, &owned.1)
        }
        Measure::Ulam(m) => {
            let res = m.resolution();
            let cylinders_axis = (n as f64).powi(q as i32);
            let cap = if dim == 1 { MAX_NODES_1D } else { MAX_NODES_2D_AXIS };
            let target = (4.0 * cylinders_axis).min(cap as f64) as usize;
            let per_cell = target.div_ceil(res).max(8);
            owned = ulam_nodes(m, per_cell);
            (&owned.0, &owned.1)
        }
    };
    let base = (n as u64).pow(dim as u32);
    let mut coded: Vec<(u64, f64)> = Vec::with_capacity(weights.len());
    let mut x = [0.0; 2];
    let mut y = [0.0; 2];
    for (p, &w) in coords.chunks(dim).zip(weights) {
        x[..dim].copy_from_slice(p);
        let mut code = 0u64;
        for step in 0..q {
            let sym = x[..dim].iter().fold(0u64, |acc, &xi| acc * n as u64 + cell_index(xi, n));
            code = code * base + sym;
            if step + 1 < q {
                map.eval(&x[..dim], &mut y[..dim]);
                x = y;
            }
        }
        coded.push((code, w));
    }
    coded.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut terms = Vec::new();
    let mut i = 0;
    while i < coded.len() {
        let mut mass = 0.0;
        let code = coded[i].0;
        while i < coded.len() && coded[i].0 == code {
            mass += coded[i].1;
            i += 1;
        }
        if mass > 0.0 {
            terms.push(-mass * mass.ln());
        }
    }
    Ok(kahan_sum(&terms).max(0.0) / q as f64)
}

/// Quadrature nodes per cell and axis for Ulam pushforwards.
pub const PUSHFORWARD_NODES: usize = 8;

/// Image measure `f_*μ`.
pub fn pushforward(mu: &Measure, map: &MapModel) -> Result<Measure> {
    let dim = map.dimension();
    if mu.dim() != dim {
        return Err(ErgoError::DimensionMismatch {
            expected: dim,
            got: mu.dim(),
        });
    }
    Ok(match mu {
        Measure::Empirical(m) => Measure::Empirical(m.map_atoms(|x, y| map.eval(x, y))),
        Measure::Ulam(m) => {
            let n = m.resolution();
            let (coords, weights) = ulam_nodes(m, PUSHFORWARD_NODES);
            let mut masses = vec![0.0; m.cell_count()];
            let mut y = [0.0; 2];
            for (p, &w) in coords.chunks(dim).zip(&weights) {
                map.eval(p, &mut y[..dim]);
                masses[m.cell_of(&y[..dim])] += w;
            }
            Measure::Ulam(UlamMeasure::from_masses(dim, n, masses)?)
        }
    })
}

/// Reference measure `ν` used to draw seeds and to weigh dynamical balls.
#[derive(Clone, Debug)]
pub enum ReferenceMeasure {
    Lebesgue { dim: usize },
    Ulam {
        measure: UlamMeasure,
        sampler: UlamSampler,
    },
}

impl ReferenceMeasure {
    pub fn lebesgue(dim: usize) -> Self {
        ReferenceMeasure::Lebesgue { dim }
    }

    pub fn ulam(measure: UlamMeasure) -> Self {
        let sampler = measure.sampler();
        ReferenceMeasure::Ulam { measure, sampler }
    }

    pub fn dim(&self) -> usize {
        match self {
            ReferenceMeasure::Lebesgue { dim } => *dim,
            ReferenceMeasure::Ulam { measure, .. } => measure.dim(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ReferenceMeasure::Lebesgue { .. } => "lebesgue".into(),
            ReferenceMeasure::Ulam { measure, .. } => format!("ulam(N={})", measure.resolution()),
        }
    }

    /// Draws a point with full 128-bit resolution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [CirclePoint; 2] {
        match self {
            ReferenceMeasure::Lebesgue { dim } => {
                let mut p = [CirclePoint::ZERO; 2];
                for c in p.iter_mut().take(*dim) {
                    *c = CirclePoint::random(rng);
                }
                p
            }
            ReferenceMeasure::Ulam { sampler, .. } => sampler.sample(rng),
        }
    }

    /// Mass of a box given by lower corners and raw arc lengths.
    pub fn box_mass(&self, lo: &[CirclePoint], len: &[u128]) -> f64 {
        match self {
            ReferenceMeasure::Lebesgue { dim } => len[..*dim]
                .iter()
                .map(|&l| crate::point::raw_to_f64(l))
                .product(),
            ReferenceMeasure::Ulam { measure, .. } => measure.box_mass(lo, len),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{make_map, MapSpec};
    use crate::orbit::iterate;
    use crate::rng::substream;

    fn doubling() -> MapModel {
        make_map(&MapSpec::Doubling).unwrap()
    }

    #[test]
    fn helpers() {
        assert_eq!(wrap01(-1e-300), 0.0);
        assert_eq!(wrap01(1.25), 0.25);
        assert!((circle_dist(0.95, 0.05) - 0.1).abs() < 1e-15);
        let xs = vec![0.1; 10];
        assert!((kahan_sum(&xs) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn empirical_of_period_two_orbit() {
        let o = iterate(
            &doubling(),
            &[CirclePoint::from_ratio(1, 3)],
            2,
            1,
        )
        .unwrap();
        let e = empirical(&o);
        assert_eq!(e.len(), 2);
        let atoms: Vec<_> = e.atoms().collect();
        assert!((atoms[0].0[0] - 1.0 / 3.0).abs() < 1e-15 && atoms[0].1 == 0.5);
        assert!((atoms[1].0[0] - 2.0 / 3.0).abs() < 1e-15 && atoms[1].1 == 0.5);
    }

    #[test]
    fn dirac_entropy_is_zero_and_lebesgue_is_log2() {
        let f = doubling();
        let d: Measure = EmpiricalMeasure::dirac(&[0.0]).unwrap().into();
        assert_eq!(partition_entropy(&d, &f, 4, 5).unwrap(), 0.0);
        let leb: Measure = UlamMeasure::lebesgue(1, 64).unwrap().into();
        for q in [1, 5, 12, 20] {
            let h = partition_entropy(&leb, &f, 2, q).unwrap();
            assert!((h - 2f64.ln()).abs() < 1e-12, "q = {q}: {h}");
        }
        assert!(matches!(
            partition_entropy(&leb, &f, 4, 16),
            Err(ErgoError::BlockTooLarge(_))
        ));
    }

    #[test]
    fn lebesgue_pushforward_is_lebesgue() {
        let f = doubling();
        let leb: Measure = UlamMeasure::lebesgue(1, 1024).unwrap().into();
        let Measure::Ulam(img) = pushforward(&leb, &f).unwrap() else {
            panic!()
        };
        assert!(img.masses().iter().all(|m| (m - 1.0 / 1024.0).abs() < 1e-12));
        let d: Measure = EmpiricalMeasure::dirac(&[0.0]).unwrap().into();
        assert_eq!(pushforward(&d, &f).unwrap(), d);
    }

    #[test]
    fn birkhoff_streams() {
        let f = doubling();
        let mut rng = substream(3, 0);
        let o = iterate(&f, &[CirclePoint::random(&mut rng)], 1000, 3).unwrap();
        let b = birkhoff(&o, Observable::LogDet).unwrap();
        assert!((b.mean - 2f64.ln()).abs() < 1e-15);
        assert_eq!(b.excluded, 0);
        let one = |_: &[f64]| 1.0;
        assert_eq!(birkhoff(&o, Observable::Test(&one)).unwrap().mean, 1.0);
    }

    #[test]
    fn weak_star_mismatch() {
        let a: Measure = UlamMeasure::lebesgue(1, 4).unwrap().into();
        let b: Measure = UlamMeasure::lebesgue(2, 4).unwrap().into();
        assert!(weak_star_dist(&a, &b, &TestFunctionBasis::default()).is_err());
        assert_eq!(
            weak_star_dist(&a, &a, &TestFunctionBasis::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn csv_has_header() {
        let m: Measure = UlamMeasure::lebesgue(1, 2).unwrap().into();
        let mut buf = Vec::new();
        m.write_csv(&mut buf, Some(7)).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("kind,resolution,seed,cell,x_lo,mass\r\n"));
        assert_eq!(s.lines().count(), 3);
    }

    #[test]
    fn reference_masses() {
        let leb = ReferenceMeasure::lebesgue(1);
        let len = crate::point::f64_to_raw(0.25);
        assert_eq!(leb.box_mass(&[CirclePoint::ZERO], &[len]), 0.25);
        let u = ReferenceMeasure::ulam(UlamMeasure::lebesgue(1, 8).unwrap());
        assert!((u.box_mass(&[CirclePoint::from_f64(0.9)], &[len]) - 0.25).abs() < 1e-15);
    }
}
