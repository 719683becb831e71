//! Map families: the doubling map, the intermittent family `T_α`, the
//! square-root circle map, and the smooth deformation `2x + a sin 2πx`.
//!
//! Every family is a degree-2 covering of the circle whose inverse branches
//! are cut at the preimages `0` and `1/2` of the origin. Branch `b` maps
//! `[b/2, (b+1)/2)` increasingly onto `[0, 1)`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{ErgoError, Result};
use crate::point::CirclePoint;
use crate::precision::{Dd, TWO_PI};

/// Serializable description of a map, as it appears in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Doubling,
    /// `x + 2^α x^{1+α}` on `[0, 1/2)`, `x - 2^α (1-x)^{1+α}` on `[1/2, 1)`.
    Intermittent { alpha: f64 },
    /// The map `2√x - 1 | 1 - 2√|x|` on `[-1, 1]/(-1 ~ 1)`, in the coordinate
    /// `u = (x + 1)/2`.
    SqrtCircle,
    /// `2x + a sin(2πx) mod 1`.
    NueDeform { a: f64 },
    /// Coordinatewise product of two one-dimensional families.
    Product { factors: Vec<MapSpec> },
}

impl MapSpec {
    pub fn name(&self) -> String {
        match self {
            MapSpec::Doubling => "doubling".into(),
            MapSpec::Intermittent { alpha } => format!("intermittent(alpha={alpha})"),
            MapSpec::SqrtCircle => "sqrt_circle".into(),
            MapSpec::NueDeform { a } => format!("nue_deform(a={a})"),
            MapSpec::Product { factors } => {
                let names: Vec<_> = factors.iter().map(MapSpec::name).collect();
                format!("product({})", names.join(","))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Family {
    Doubling,
    Intermittent { alpha: f64, scale: f64 },
    SqrtCircle,
    NueDeform { a: f64 },
}

/// A one-dimensional member of one of the families.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleMap {
    family: Family,
}

const NEWTON_MAX_ITERS: usize = 100;

impl CircleMap {
    fn new(spec: &MapSpec) -> Result<Self> {
        let family = match *spec {
            MapSpec::Doubling => Family::Doubling,
            MapSpec::Intermittent { alpha } => {
                if !(alpha > 0.0 && alpha <= 16.0) {
                    return Err(ErgoError::ParamOutOfRange {
                        name: "alpha",
                        value: alpha,
                        reason: "must lie in (0, 16]",
                    });
                }
                Family::Intermittent {
                    alpha,
                    scale: 2f64.powf(alpha),
                }
            }
            MapSpec::SqrtCircle => Family::SqrtCircle,
            MapSpec::NueDeform { a } => {
                // a >= 1/π creates folds (f' < 0) and breaks the covering structure
                if !(0.0..1.0 / PI).contains(&a) {
                    return Err(ErgoError::ParamOutOfRange {
                        name: "a",
                        value: a,
                        reason: "must lie in [0, 1/pi) so that f' > 0",
                    });
                }
                Family::NueDeform { a }
            }
            MapSpec::Product { .. } => {
                return Err(ErgoError::InvalidArgument(
                    "product factors must be one-dimensional".into(),
                ))
            }
        };
        Ok(CircleMap { family })
    }

    /// Number of inverse branches.
    pub fn degree(&self) -> usize {
        2
    }

    /// Left endpoint of the domain of branch `b`.
    pub fn branch_start(&self, b: usize) -> f64 {
        b as f64 / 2.0
    }

    #[inline]
    pub fn branch_of(&self, x: f64) -> usize {
        usize::from(x >= 0.5)
    }

    #[inline]
    pub fn branch_of_point(&self, x: CirclePoint) -> usize {
        (x.0 >> 127) as usize
    }

    /// Points where derivative data is undefined or infinite.
    pub fn singular_points(&self) -> Vec<f64> {
        match self.family {
            Family::SqrtCircle => vec![0.5],
            _ => Vec::new(),
        }
    }

    /// The family has an indifferent fixed point (`f'(0) = 1`).
    pub fn has_neutral_point(&self) -> bool {
        matches!(
            self.family,
            Family::Intermittent { .. } | Family::SqrtCircle
        )
    }

    /// `inf f' > 1`.
    pub fn is_uniformly_expanding(&self) -> bool {
        match self.family {
            Family::Doubling => true,
            Family::NueDeform { a } => 2.0 - 2.0 * PI * a > 1.0,
            _ => false,
        }
    }

    /// `sup f'` (infinite for the square-root map).
    pub fn lipschitz(&self) -> f64 {
        match self.family {
            Family::Doubling => 2.0,
            Family::Intermittent { alpha, .. } => 2.0 + alpha,
            Family::SqrtCircle => f64::INFINITY,
            Family::NueDeform { a } => 2.0 + 2.0 * PI * a,
        }
    }

    /// `inf f'`.
    pub fn min_derivative(&self) -> f64 {
        match self.family {
            Family::Doubling => 2.0,
            Family::Intermittent { .. } | Family::SqrtCircle => 1.0,
            Family::NueDeform { a } => 2.0 - 2.0 * PI * a,
        }
    }

    /// Lifted branch value `F_b(y) ∈ [0, 1]` and its derivative (f64).
    #[inline]
    fn lift(&self, y: f64) -> (f64, f64) {
        match self.family {
            Family::Doubling => {
                let v = 2.0 * y;
                (if v >= 1.0 { v - 1.0 } else { v }, 2.0)
            }
            Family::Intermittent { alpha, scale } => {
                if y < 0.5 {
                    let p = y.powf(alpha);
                    (y + scale * p * y, 1.0 + scale * (1.0 + alpha) * p)
                } else {
                    let z = 1.0 - y;
                    let p = z.powf(alpha);
                    (y - scale * p * z, 1.0 + scale * (1.0 + alpha) * p)
                }
            }
            Family::SqrtCircle => {
                if y < 0.5 {
                    let r = (1.0 - 2.0 * y).sqrt();
                    (1.0 - r, 1.0 / r)
                } else {
                    let r = (2.0 * y - 1.0).sqrt();
                    (r, 1.0 / r)
                }
            }
            Family::NueDeform { a } => {
                let (s, c) = (2.0 * PI * y).sin_cos();
                let v = 2.0 * y + a * s;
                (
                    if y >= 0.5 { v - 1.0 } else { v },
                    2.0 + 2.0 * PI * a * c,
                )
            }
        }
    }

    /// `f(x)` in double precision, wrapped into `[0, 1)`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let v = self.lift(x).0;
        if v >= 1.0 {
            v - 1.0
        } else if v < 0.0 {
            v + 1.0
        } else {
            v
        }
    }

    /// `f'(x) > 0`; infinite at the singular point of the square-root map.
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        self.lift(x).1
    }

    /// Inverse branch `b` at `t ∈ [0, 1)`, double precision.
    pub fn inverse(&self, b: usize, t: f64) -> f64 {
        debug_assert!(b < 2);
        match self.family {
            Family::Doubling => (t + b as f64) / 2.0,
            Family::SqrtCircle => {
                if b == 0 {
                    0.5 - 0.5 * (1.0 - t) * (1.0 - t)
                } else {
                    0.5 + 0.5 * t * t
                }
            }
            Family::Intermittent { .. } => {
                if b == 0 {
                    self.intermittent_half_inverse(t)
                } else {
                    1.0 - self.intermittent_half_inverse(1.0 - t)
                }
            }
            Family::NueDeform { a } => {
                let target = t + b as f64;
                let (mut lo, mut hi) = (b as f64 / 2.0, (b as f64 + 1.0) / 2.0);
                let mut y = target / 2.0;
                for _ in 0..NEWTON_MAX_ITERS {
                    let (s, c) = (2.0 * PI * y).sin_cos();
                    let r = 2.0 * y + a * s - target;
                    if r > 0.0 {
                        hi = y;
                    } else {
                        lo = y;
                    }
                    let mut next = y - r / (2.0 + 2.0 * PI * a * c);
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - y).abs() <= 1e-17 {
                        y = next;
                        break;
                    }
                    y = next;
                }
                y
            }
        }
    }

    /// Solves `z + 2^α z^{1+α} = s` for `z ∈ [0, 1/2]`.
    fn intermittent_half_inverse(&self, s: f64) -> f64 {
        let Family::Intermittent { alpha, scale } = self.family else {
            unreachable!()
        };
        if s <= 0.0 {
            return 0.0;
        }
        // convex increasing: Newton from the right converges monotonically
        let mut z = s.min(0.5);
        for _ in 0..NEWTON_MAX_ITERS {
            let p = z.powf(alpha);
            let r = z + scale * p * z - s;
            let next = (z - r / (1.0 + scale * (1.0 + alpha) * p)).max(0.0);
            if (next - z).abs() <= 1e-18 {
                return next;
            }
            z = next;
        }
        z
    }

    /// Local inverse near `anchor`: the preimage of `t` on the branch of `f`
    /// that passes through `anchor`, continued across the branch cut.
    pub fn local_inverse(&self, t: f64, anchor: f64) -> f64 {
        let c = self.eval(anchor);
        let mut b = self.branch_of(anchor);
        let mut off = t - c;
        off -= off.round();
        let lifted = c + off;
        let t = if lifted >= 1.0 {
            b += 1;
            lifted - 1.0
        } else if lifted < 0.0 {
            b += self.degree() - 1;
            lifted + 1.0
        } else {
            lifted
        };
        self.inverse(b % self.degree(), t)
    }

    /// High-precision `f(x)`.
    pub fn eval_point(&self, x: CirclePoint) -> CirclePoint {
        match self.family {
            Family::Doubling => CirclePoint(x.0 << 1),
            Family::Intermittent { alpha, scale } => {
                if x.0 >> 127 == 0 {
                    let y = x.to_dd();
                    let term = y.powf(1.0 + alpha).mul_f64(scale);
                    x.wrapping_add(CirclePoint::from_dd(term))
                } else {
                    let z = CirclePoint(x.0.wrapping_neg()).to_dd();
                    let term = z.powf(1.0 + alpha).mul_f64(scale);
                    x.wrapping_sub(CirclePoint::from_dd(term))
                }
            }
            Family::SqrtCircle => {
                if x.0 >> 127 == 0 {
                    if x.0 == 0 {
                        return CirclePoint::ZERO;
                    }
                    // 1 - 2u, exact in fixed point
                    let v = CirclePoint((x.0 << 1).wrapping_neg()).to_dd();
                    CirclePoint::from_dd(-v.sqrt())
                } else {
                    let v = CirclePoint(x.0 << 1).to_dd();
                    CirclePoint::from_dd(v.sqrt())
                }
            }
            Family::NueDeform { a } => {
                let s = (x.to_dd() * TWO_PI).sin().mul_f64(a);
                CirclePoint(x.0 << 1).wrapping_add(CirclePoint::from_dd(s))
            }
        }
    }

    /// High-precision inverse branch `b` at `t`.
    pub fn inverse_point(&self, b: usize, t: CirclePoint) -> CirclePoint {
        debug_assert!(b < 2);
        match self.family {
            Family::Doubling => CirclePoint((t.0 >> 1) | ((b as u128) << 127)),
            Family::SqrtCircle => {
                if b == 0 {
                    // 1/2 - (1 - t)^2 / 2
                    let w = if t.0 == 0 {
                        Dd::ONE
                    } else {
                        CirclePoint(t.0.wrapping_neg()).to_dd()
                    };
                    CirclePoint::HALF.wrapping_sub(CirclePoint::from_dd(w.sqr().ldexp(-1)))
                } else {
                    CirclePoint::HALF.wrapping_add(CirclePoint::from_dd(t.to_dd().sqr().ldexp(-1)))
                }
            }
            Family::Intermittent { alpha, scale } => {
                let solve = |s: Dd, guess: f64| -> Dd {
                    let mut z = Dd::from_f64(guess);
                    for _ in 0..3 {
                        if z.hi <= 0.0 {
                            return Dd::ZERO;
                        }
                        let p = z.powf(alpha);
                        let r = z + (p * z).mul_f64(scale) - s;
                        let d = Dd::ONE + p.mul_f64(scale * (1.0 + alpha));
                        z = z - r / d;
                    }
                    z
                };
                if b == 0 {
                    let s = t.to_dd();
                    let z = solve(s, self.intermittent_half_inverse(s.to_f64()));
                    CirclePoint::from_dd(z)
                } else {
                    let s = if t.0 == 0 {
                        Dd::ONE
                    } else {
                        CirclePoint(t.0.wrapping_neg()).to_dd()
                    };
                    let z = solve(s, self.intermittent_half_inverse(s.to_f64()));
                    CirclePoint(CirclePoint::from_dd(z).0.wrapping_neg())
                }
            }
            Family::NueDeform { a } => {
                let target = t.to_dd() + Dd::from_f64(b as f64);
                let mut y = Dd::from_f64(self.inverse(b, t.to_f64()));
                for _ in 0..3 {
                    let (s, c) = (y * TWO_PI).sin_cos();
                    let r = y.ldexp(1) + s.mul_f64(a) - target;
                    let d = Dd::from_f64(2.0) + (c * TWO_PI).mul_f64(a);
                    y = y - r / d;
                }
                CirclePoint::from_dd(y)
            }
        }
    }

    /// High-precision local inverse; `image` must equal `eval_point(anchor)`.
    pub fn local_inverse_point(
        &self,
        t: CirclePoint,
        anchor: CirclePoint,
        image: CirclePoint,
    ) -> CirclePoint {
        let mut b = self.branch_of_point(anchor);
        let off = image.signed_offset_to(t);
        if off > 0 && t.0 < image.0 {
            b += 1;
        } else if off < 0 && t.0 > image.0 {
            b += self.degree() - 1;
        }
        self.inverse_point(b % self.degree(), t)
    }

    /// Whether `x` lies within `tol` of a singular point.
    pub fn near_singular(&self, x: f64, tol: f64) -> bool {
        self.singular_points()
            .iter()
            .any(|&s| crate::measure::circle_dist(x, s) <= tol)
    }
}

/// An evaluable dynamical system on `S¹` or `T²`.
///
/// Immutable after construction; share it freely across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct MapModel {
    spec: MapSpec,
    factors: Vec<CircleMap>,
}

/// Builds a map from its serialized description.
pub fn make_map(spec: &MapSpec) -> Result<MapModel> {
    let factors = match spec {
        MapSpec::Product { factors } => {
            if factors.len() != 2 {
                return Err(ErgoError::InvalidArgument(format!(
                    "product maps take exactly 2 factors, got {}",
                    factors.len()
                )));
            }
            factors.iter().map(CircleMap::new).collect::<Result<_>>()?
        }
        s => vec![CircleMap::new(s)?],
    };
    Ok(MapModel {
        spec: spec.clone(),
        factors,
    })
}

/// Builds a map from a family name and named parameters.
pub fn make_map_named(name: &str, params: &BTreeMap<String, f64>) -> Result<MapModel> {
    let get = |key: &'static str| params.get(key).copied().ok_or(ErgoError::MissingParam(key));
    let spec = match name {
        "doubling" => MapSpec::Doubling,
        "intermittent" => MapSpec::Intermittent {
            alpha: get("alpha")?,
        },
        "sqrt_circle" => MapSpec::SqrtCircle,
        "nue_deform" => MapSpec::NueDeform { a: get("a")? },
        other => return Err(ErgoError::UnknownFamily(other.to_string())),
    };
    make_map(&spec)
}

impl MapModel {
    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn name(&self) -> String {
        self.spec.name()
    }

    pub fn dimension(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[CircleMap] {
        &self.factors
    }

    /// The underlying circle map of a one-dimensional model.
    pub fn circle(&self, what: &'static str) -> Result<&CircleMap> {
        match self.factors.as_slice() {
            [f] => Ok(f),
            _ => Err(ErgoError::NotOneDimensional { what }),
        }
    }

    /// Total number of inverse branches.
    pub fn branch_count(&self) -> usize {
        self.factors.iter().map(CircleMap::degree).product()
    }

    /// Combined branch index of a point.
    pub fn branch_of(&self, x: &[f64]) -> usize {
        self.factors
            .iter()
            .zip(x)
            .fold(0, |acc, (f, &xi)| acc * f.degree() + f.branch_of(xi))
    }

    /// Inverse branch `b` (combined index) evaluated at `t`.
    pub fn inverse_branch(&self, b: usize, t: &[f64], out: &mut [f64]) {
        let mut rest = b;
        for i in (0..self.factors.len()).rev() {
            let d = self.factors[i].degree();
            out[i] = self.factors[i].inverse(rest % d, t[i]);
            rest /= d;
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        for ((f, &xi), o) in self.factors.iter().zip(x).zip(out.iter_mut()) {
            *o = f.eval(xi);
        }
    }

    pub fn eval_point(&self, x: &[CirclePoint], out: &mut [CirclePoint]) {
        for ((f, &xi), o) in self.factors.iter().zip(x).zip(out.iter_mut()) {
            *o = f.eval_point(xi);
        }
    }

    /// `‖Df(x)⁻¹‖` for the max-norm: `max_i 1/f_i'(x_i)`.
    pub fn deriv_norm_inv(&self, x: &[f64]) -> f64 {
        self.factors
            .iter()
            .zip(x)
            .map(|(f, &xi)| 1.0 / f.deriv(xi))
            .fold(0.0, f64::max)
    }

    /// `log |det Df(x)| = Σ_i log f_i'(x_i)`.
    pub fn log_det(&self, x: &[f64]) -> f64 {
        self.factors
            .iter()
            .zip(x)
            .map(|(f, &xi)| f.deriv(xi).ln())
            .sum()
    }

    pub fn is_uniformly_expanding(&self) -> bool {
        self.factors.iter().all(CircleMap::is_uniformly_expanding)
    }

    pub fn has_neutral_point(&self) -> bool {
        self.factors.iter().any(CircleMap::has_neutral_point)
    }

    /// Singular points of each coordinate factor.
    pub fn singular_points(&self) -> Vec<Vec<f64>> {
        self.factors.iter().map(CircleMap::singular_points).collect()
    }

    pub fn near_singular(&self, x: &[f64], tol: f64) -> bool {
        self.factors
            .iter()
            .zip(x)
            .any(|(f, &xi)| f.near_singular(xi, tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_1d() -> Vec<MapModel> {
        [
            MapSpec::Doubling,
            MapSpec::Intermittent { alpha: 1.0 },
            MapSpec::Intermittent { alpha: 0.75 },
            MapSpec::Intermittent { alpha: 2.0 },
            MapSpec::SqrtCircle,
            MapSpec::NueDeform { a: 0.2 },
            MapSpec::NueDeform { a: 0.05 },
        ]
        .iter()
        .map(|s| make_map(s).unwrap())
        .collect()
    }

    #[test]
    fn doubling_values() {
        let m = make_map(&MapSpec::Doubling).unwrap();
        let f = m.circle("test").unwrap();
        assert!((f.eval(0.3) - 0.6).abs() < 1e-15);
        assert_eq!(m.log_det(&[0.123]), 2f64.ln());
        assert_eq!(m.log_det(&[0.876]), 2f64.ln());
    }

    #[test]
    fn intermittent_values() {
        let m = make_map(&MapSpec::Intermittent { alpha: 1.0 }).unwrap();
        let f = m.circle("test").unwrap();
        assert!((f.eval(0.25) - 0.375).abs() < 1e-15);
        assert_eq!(f.deriv(0.0), 1.0);
        // both branches are onto [0, 1)
        assert!(f.eval(0.5).abs() < 1e-15);
        assert!((f.lift(0.5 - 1e-12).0 - 1.0).abs() < 1e-10);
        let p = f.eval_point(CirclePoint::from_f64(0.25));
        assert!((p.to_f64() - 0.375).abs() < 1e-17);
    }

    #[test]
    fn nue_deform_has_contracting_region() {
        let m = make_map(&MapSpec::NueDeform { a: 0.2 }).unwrap();
        let f = m.circle("test").unwrap();
        let n = 1_000_000;
        let min = (0..n)
            .map(|i| f.deriv(i as f64 / n as f64))
            .fold(f64::INFINITY, f64::min);
        assert!((min - (2.0 - 0.4 * PI)).abs() < 1e-9);
        assert!(min < 1.0);
        assert!(!m.is_uniformly_expanding());
    }

    #[test]
    fn parameter_validation() {
        assert!(matches!(
            make_map(&MapSpec::Intermittent { alpha: 0.0 }),
            Err(ErgoError::ParamOutOfRange { name: "alpha", .. })
        ));
        assert!(make_map(&MapSpec::NueDeform { a: 0.4 }).is_err());
        assert!(make_map(&MapSpec::NueDeform { a: -0.1 }).is_err());
        assert!(matches!(
            make_map_named("tent", &BTreeMap::new()),
            Err(ErgoError::UnknownFamily(_))
        ));
        assert!(matches!(
            make_map_named("nue_deform", &BTreeMap::new()),
            Err(ErgoError::MissingParam("a"))
        ));
        let bad = MapSpec::Product {
            factors: vec![MapSpec::Doubling],
        };
        assert!(make_map(&bad).is_err());
    }

    #[test]
    fn inverse_branches_roundtrip_to_2_pow_minus_100() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tol = 1u128 << 28; // 2^-100 as a fraction of 2^128
        for m in all_1d() {
            let f = m.circle("test").unwrap();
            for _ in 0..2000 {
                let t = CirclePoint(rng.random());
                for b in 0..f.degree() {
                    let y = f.inverse_point(b, t);
                    if f.near_singular(y.to_f64(), 1e-9) {
                        continue;
                    }
                    assert_eq!(f.branch_of_point(y), b, "{} t={t:?}", m.name());
                    let back = f.eval_point(y);
                    assert!(
                        back.raw_distance(t) <= tol,
                        "{}: branch {b} t={t:?} err={:e}",
                        m.name(),
                        back.distance(t)
                    );
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for m in all_1d() {
            let f = m.circle("test").unwrap();
            for i in 1..400 {
                let x = i as f64 / 400.0 + 1.3e-4;
                if f.near_singular(x, 1e-3) || (x - 0.5).abs() < 1e-3 {
                    continue;
                }
                let h = 1e-6;
                let fd = {
                    let mut d = f.eval(x + h) - f.eval(x - h);
                    d -= d.round();
                    d / (2.0 * h)
                };
                let rel = (fd - f.deriv(x)).abs() / f.deriv(x);
                assert!(rel <= 1e-6, "{} x={x} rel={rel:e}", m.name());
                // log_det is log f'
                assert!((m.log_det(&[x]) - f.deriv(x).ln()).abs() < 1e-15);
                assert!((m.deriv_norm_inv(&[x]) * f.deriv(x) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn f64_and_point_evaluation_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in all_1d() {
            let f = m.circle("test").unwrap();
            for _ in 0..500 {
                let x = CirclePoint(rng.random());
                let a = f.eval_point(x).to_f64();
                let b = f.eval(x.to_f64());
                let mut d = a - b;
                d -= d.round();
                assert!(d.abs() < 1e-12, "{} x={x:?}", m.name());
                for bidx in 0..2 {
                    let t = x.to_f64();
                    let yi = f.inverse(bidx, t);
                    let yp = f.inverse_point(bidx, x).to_f64();
                    assert!((yi - yp).abs() < 1e-13, "{} b={bidx} t={t}", m.name());
                }
            }
        }
    }

    #[test]
    fn local_inverse_crosses_branch_cut() {
        let m = make_map(&MapSpec::Doubling).unwrap();
        let f = m.circle("test").unwrap();
        assert!((f.local_inverse(0.02, 0.49) - 0.51).abs() < 1e-15);
        assert!((f.local_inverse(0.98, 0.51) - 0.49).abs() < 1e-15);
        assert!((f.local_inverse(0.02, 0.99) - 0.01).abs() < 1e-15);
        let (t, a) = (CirclePoint::from_f64(0.02), CirclePoint::from_f64(0.49));
        let y = f.local_inverse_point(t, a, f.eval_point(a));
        assert!((y.to_f64() - 0.51).abs() < 1e-15);
    }

    #[test]
    fn product_map() {
        let spec = MapSpec::Product {
            factors: vec![MapSpec::Doubling, MapSpec::NueDeform { a: 0.1 }],
        };
        let m = make_map(&spec).unwrap();
        assert_eq!(m.dimension(), 2);
        assert_eq!(m.branch_count(), 4);
        let x = [0.3, 0.7];
        let f2 = &m.factors()[1];
        assert!((m.log_det(&x) - (2f64.ln() + f2.deriv(0.7).ln())).abs() < 1e-15);
        assert_eq!(m.deriv_norm_inv(&x), 0.5f64.max(1.0 / f2.deriv(0.7)));
        let mut y = [0.0; 2];
        let mut z = [0.0; 2];
        m.eval(&x, &mut y);
        m.inverse_branch(m.branch_of(&x), &y, &mut z);
        assert!((z[0] - x[0]).abs() < 1e-14 && (z[1] - x[1]).abs() < 1e-14);
        assert!(m.circle("test").is_err());
    }
}
