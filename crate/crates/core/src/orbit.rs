//! Orbit generation and dynamical balls.

use serde::{Deserialize, Serialize};

use crate::error::{ErgoError, Result};
use crate::maps::MapModel;
use crate::point::{f64_to_raw, raw_to_f64, CirclePoint};
use crate::rng::{substream, TaskRng, REFILL_STREAM};

/// Distance below which an orbit point counts as hitting a singular point.
pub const SINGULAR_CLEARANCE: f64 = 1e-27;

/// Streaming orbit: yields `x, f(x), f²(x), …` with refreshed trailing bits
/// after every step.
pub struct Orbit<'a> {
    map: &'a MapModel,
    current: [CirclePoint; 2],
    rng: TaskRng,
}

impl<'a> Orbit<'a> {
    pub fn new(map: &'a MapModel, start: &[CirclePoint], seed: u64) -> Self {
        let mut current = [CirclePoint::ZERO; 2];
        current[..start.len()].copy_from_slice(start);
        Orbit {
            map,
            current,
            rng: substream(seed, REFILL_STREAM),
        }
    }

    /// The point the next call to [`Orbit::step`] will return.
    pub fn peek(&self) -> &[CirclePoint] {
        &self.current[..self.map.dimension()]
    }

    /// Returns the current point and advances.
    #[inline]
    pub fn step(&mut self) -> [CirclePoint; 2] {
        let out = self.current;
        for (i, f) in self.map.factors().iter().enumerate() {
            self.current[i] = f.eval_point(out[i]).refill_trailing_bits(&mut self.rng);
        }
        out
    }
}

/// A recorded orbit segment with its derivative streams.
///
/// Entry `j` of every stream is evaluated at `f^j(x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub map: String,
    pub dim: usize,
    pub seed: u64,
    /// `n * dim` coordinates, point-major.
    pub points: Vec<CirclePoint>,
    /// `log ‖Df(f^j x)⁻¹‖`
    pub log_dfinv: Vec<f64>,
    /// `log |det Df(f^j x)|`
    pub log_det: Vec<f64>,
    /// Combined inverse-branch index of `f^j x`.
    pub branches: Vec<u32>,
    /// Steps at which the orbit hit a singular point.
    pub flagged: Vec<usize>,
}

impl OrbitRecord {
    pub fn len(&self) -> usize {
        self.log_det.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_det.is_empty()
    }

    pub fn point(&self, j: usize) -> &[CirclePoint] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn point_f64(&self, j: usize) -> Vec<f64> {
        self.point(j).iter().map(|p| p.to_f64()).collect()
    }

    /// All orbit points in double precision, point-major.
    pub fn coords_f64(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.to_f64()).collect()
    }

    pub fn is_flagged(&self, j: usize) -> bool {
        self.flagged.binary_search(&j).is_ok()
    }
}

/// Records `n` points of the orbit of `x`.
///
/// Deterministic in `(map, x, n, seed)`; the seed drives the trailing-bit
/// refill only.
pub fn iterate(map: &MapModel, x: &[CirclePoint], n: usize, seed: u64) -> Result<OrbitRecord> {
    if n == 0 {
        return Err(ErgoError::InvalidArgument("orbit length must be >= 1".into()));
    }
    let dim = map.dimension();
    if x.len() != dim {
        return Err(ErgoError::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    let mut rec = OrbitRecord {
        map: map.name(),
        dim,
        seed,
        points: Vec::with_capacity(n * dim),
        log_dfinv: Vec::with_capacity(n),
        log_det: Vec::with_capacity(n),
        branches: Vec::with_capacity(n),
        flagged: Vec::new(),
    };
    let mut orbit = Orbit::new(map, x, seed);
    let mut coords = [0.0; 2];
    for j in 0..n {
        let p = orbit.step();
        rec.points.extend_from_slice(&p[..dim]);
        for i in 0..dim {
            coords[i] = p[i].to_f64();
        }
        let c = &coords[..dim];
        let ld = map.log_det(c);
        let linv = map.deriv_norm_inv(c).ln();
        if !ld.is_finite() || !linv.is_finite() || map.near_singular(c, SINGULAR_CLEARANCE) {
            rec.flagged.push(j);
        }
        rec.log_det.push(ld);
        rec.log_dfinv.push(linv);
        rec.branches.push(map.branch_of(c) as u32);
    }
    Ok(rec)
}

/// Connected component of a dynamical ball around an orbit point, one
/// interval per coordinate: `[center - left, center + right]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DynBall {
    pub center: Vec<CirclePoint>,
    /// Raw fixed-point half-lengths (fractions of `2¹²⁸`).
    pub left: Vec<u128>,
    pub right: Vec<u128>,
    /// A pulled-back interval contained a singular point.
    pub touches_singular: bool,
}

impl DynBall {
    /// Side lengths of the box.
    pub fn lengths(&self) -> Vec<f64> {
        self.left
            .iter()
            .zip(&self.right)
            .map(|(&l, &r)| raw_to_f64(l) + raw_to_f64(r))
            .collect()
    }

    /// Lebesgue measure of the box.
    pub fn lebesgue(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Lower endpoint of coordinate `i`.
    pub fn lower(&self, i: usize) -> CirclePoint {
        CirclePoint(self.center[i].0.wrapping_sub(self.left[i]))
    }

    pub fn contains(&self, y: &[CirclePoint]) -> bool {
        y.iter().enumerate().all(|(i, &yi)| {
            let off = self.center[i].signed_offset_to(yi);
            if off >= 0 {
                (off as u128) <= self.right[i]
            } else {
                off.unsigned_abs() <= self.left[i]
            }
        })
    }
}

/// Largest admissible radius for [`dyn_ball`].
pub const MAX_BALL_RADIUS: f64 = 0.25;

/// The component containing `x` of `{y : d(f^j x, f^j y) ≤ δ, 0 ≤ j < n}`.
///
/// Built backwards: start from the δ-ball at `f^{n-1}(x)`, pull it back one
/// step through the local inverse along the orbit and intersect with the
/// δ-ball around the earlier orbit point.
pub fn dyn_ball(map: &MapModel, x: &[CirclePoint], n: usize, delta: f64) -> Result<DynBall> {
    if n == 0 {
        return Err(ErgoError::InvalidArgument("n must be >= 1".into()));
    }
    if !(delta > 0.0) {
        return Err(ErgoError::InvalidArgument("delta must be positive".into()));
    }
    if delta >= MAX_BALL_RADIUS {
        return Err(ErgoError::RadiusTooLarge {
            radius: delta,
            limit: MAX_BALL_RADIUS,
        });
    }
    if x.len() != map.dimension() {
        return Err(ErgoError::DimensionMismatch {
            expected: map.dimension(),
            got: x.len(),
        });
    }
    let radius = f64_to_raw(delta);
    let mut ball = DynBall {
        center: x.to_vec(),
        left: Vec::with_capacity(x.len()),
        right: Vec::with_capacity(x.len()),
        touches_singular: false,
    };
    for (i, f) in map.factors().iter().enumerate() {
        let mut orbit = Vec::with_capacity(n);
        orbit.push(x[i]);
        for j in 1..n {
            orbit.push(f.eval_point(orbit[j - 1]));
        }
        let (mut left, mut right) = (radius, radius);
        let singular: Vec<CirclePoint> = f
            .singular_points()
            .into_iter()
            .map(CirclePoint::from_f64)
            .collect();
        for j in (0..n - 1).rev() {
            let (anchor, image) = (orbit[j], orbit[j + 1]);
            let lo = f.local_inverse_point(CirclePoint(image.0.wrapping_sub(left)), anchor, image);
            let hi = f.local_inverse_point(CirclePoint(image.0.wrapping_add(right)), anchor, image);
            left = anchor.0.wrapping_sub(lo.0).min(radius);
            right = hi.0.wrapping_sub(anchor.0).min(radius);
            for s in &singular {
                let off = anchor.signed_offset_to(*s);
                let inside = if off >= 0 {
                    (off as u128) <= right
                } else {
                    off.unsigned_abs() <= left
                };
                ball.touches_singular |= inside;
            }
        }
        ball.left.push(left);
        ball.right.push(right);
    }
    Ok(ball)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{make_map, MapSpec};

    fn doubling() -> MapModel {
        make_map(&MapSpec::Doubling).unwrap()
    }

    #[test]
    fn period_two_orbit() {
        let rec = iterate(&doubling(), &[CirclePoint::from_ratio(1, 3)], 4, 1).unwrap();
        let xs = rec.coords_f64();
        for (j, want) in [1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0].iter().enumerate() {
            assert!((xs[j] - want).abs() < 1e-15);
        }
        assert!(rec.log_det.iter().all(|&v| v == 2f64.ln()));
        assert_eq!(rec.branches, vec![0, 1, 0, 1]);
    }

    #[test]
    fn long_doubling_orbit_does_not_collapse() {
        let m = doubling();
        let mut rng = substream(3, 0);
        let x = CirclePoint::random(&mut rng);
        let mut orbit = Orbit::new(&m, &[x], 99);
        let mut last = [CirclePoint::ZERO; 2];
        let mut zeros = 0;
        for _ in 0..1_000_000 {
            last = orbit.step();
            zeros += usize::from(last[0].to_f64() < 1e-9);
        }
        assert_ne!(last[0], CirclePoint::ZERO);
        assert!(zeros < 10);
    }

    #[test]
    fn orbits_reproduce_bit_for_bit() {
        let m = make_map(&MapSpec::NueDeform { a: 0.2 }).unwrap();
        let x = [CirclePoint::from_f64(0.123)];
        let a = iterate(&m, &x, 500, 42).unwrap();
        let b = iterate(&m, &x, 500, 42).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.log_det, b.log_det);
        let c = iterate(&m, &x, 500, 43).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn intermittent_escape_is_monotone() {
        let m = make_map(&MapSpec::Intermittent { alpha: 2.0 }).unwrap();
        let rec = iterate(&m, &[CirclePoint::from_f64(1e-6)], 100, 0).unwrap();
        let xs = rec.coords_f64();
        assert!(xs.windows(2).all(|w| w[1] > w[0] && w[1] < 0.5));
    }

    #[test]
    fn input_validation() {
        let m = doubling();
        assert!(iterate(&m, &[CirclePoint::ZERO], 0, 0).is_err());
        assert!(iterate(&m, &[CirclePoint::ZERO; 2], 3, 0).is_err());
        assert!(matches!(
            dyn_ball(&m, &[CirclePoint::ZERO], 3, 0.3),
            Err(ErgoError::RadiusTooLarge { .. })
        ));
    }

    #[test]
    fn singular_hits_are_flagged() {
        let m = make_map(&MapSpec::SqrtCircle).unwrap();
        // 3/4 -> sqrt(1/2); the preimage of 1/2 on branch 1 is 5/8.
        let rec = iterate(&m, &[CirclePoint::from_ratio(5, 8)], 3, 0).unwrap();
        assert_eq!(rec.flagged, vec![1]);
    }

    #[test]
    fn doubling_ball_lengths() {
        let m = doubling();
        let x = [CirclePoint::from_f64(0.3141)];
        let b1 = dyn_ball(&m, &x, 1, 0.1).unwrap();
        assert!((b1.lengths()[0] - 0.2).abs() < 1e-15);
        let b5 = dyn_ball(&m, &x, 5, 0.1).unwrap();
        assert!((b5.lengths()[0] - 0.0125).abs() < 1e-15);
        // brute-force membership count on a 1e-6 grid
        let g = 1_000_000;
        let count = (0..g)
            .filter(|&k| {
                let mut y = (k as f64 + 0.5) / g as f64;
                let mut z = x[0].to_f64();
                (0..5).all(|_| {
                    let ok = crate::measure::circle_dist(y, z) <= 0.1;
                    y = (2.0 * y).fract();
                    z = (2.0 * z).fract();
                    ok
                })
            })
            .count();
        assert!((count as f64 / g as f64 - 0.0125).abs() <= 2e-6);
    }

    #[test]
    fn ball_at_fixed_point_and_near_cut() {
        let m = doubling();
        for &x0 in &[0.0, 0.4999, 0.9999] {
            let b = dyn_ball(&m, &[CirclePoint::from_f64(x0)], 10, 0.1).unwrap();
            let want = 0.2 * 2f64.powi(-9);
            assert!((b.lengths()[0] - want).abs() < 1e-17, "x0={x0}");
        }
    }

    #[test]
    fn product_ball_is_a_box() {
        let spec = MapSpec::Product {
            factors: vec![MapSpec::Doubling, MapSpec::Doubling],
        };
        let m = make_map(&spec).unwrap();
        let x = [CirclePoint::from_f64(0.2), CirclePoint::from_f64(0.7)];
        let b = dyn_ball(&m, &x, 4, 0.05).unwrap();
        let side = 0.1 / 8.0;
        assert!((b.lebesgue() - side * side).abs() < 1e-17);
        assert!(b.contains(&x));
    }
}
