//! σ-hyperbolic times: `h` is one when every trailing window satisfies
//! `Π_{j=h-k}^{h-1} ‖Df(f^j x)⁻¹‖ ≤ σ^k` for `1 ≤ k ≤ h`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ErgoError, Result};
use crate::maps::MapModel;
use crate::measure::{birkhoff, kahan_sum, Observable};
use crate::orbit::{iterate, OrbitRecord};
use crate::point::CirclePoint;
use crate::rng::{child_seed, substream};
use crate::stats::percentile;

/// Log-space values are compared as integers at this scale.
const LOG_SCALE: f64 = (1u64 << 48) as f64;

/// Tie-breaking slack toward rejection, `1e-12` in scaled units.
const SLACK: i128 = 282;

#[inline]
fn quantize(v: f64) -> i64 {
    (v * LOG_SCALE).round() as i64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicTimeRecord {
    pub sigma: f64,
    pub n: usize,
    pub times: Vec<usize>,
    /// `#times / n`, the frequency at horizon `n`.
    pub theta: f64,
    /// Number of windows checked for each listed time (equal to the time).
    pub depth: Vec<usize>,
    pub horizon_label: String,
}

/// Hyperbolic times `h ∈ 1..=n` of a `log ‖Df⁻¹‖` stream.
///
/// With `T(m) = Σ_{j<m} (q_j − q_σ)` on quantized logs, `h` qualifies iff
/// `T(h) + slack ≤ min_{m<h} T(m)`, a single pass with a running minimum. Any
/// flagged step `j` disqualifies every `h > j`.
pub fn scan_log_stream(log_dfinv: &[f64], flagged: &[usize], sigma: f64) -> Result<Vec<usize>> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(ErgoError::InvalidArgument(format!("σ = {sigma} must lie in (0, 1)")));
    }
    let q_sigma = quantize(sigma.ln()) as i128;
    let first_flag = flagged.iter().copied().min().unwrap_or(usize::MAX);
    let mut times = Vec::new();
    let mut t: i128 = 0;
    let mut running_min: i128 = 0;
    for (j, &v) in log_dfinv.iter().enumerate() {
        if j >= first_flag || !v.is_finite() {
            break;
        }
        t += quantize(v) as i128 - q_sigma;
        let h = j + 1;
        if t + SLACK <= running_min {
            times.push(h);
        }
        running_min = running_min.min(t);
    }
    Ok(times)
}

pub fn scan_hyperbolic_times(orbit: &OrbitRecord, sigma: f64) -> Result<HyperbolicTimeRecord> {
    let times = scan_log_stream(&orbit.log_dfinv, &orbit.flagged, sigma)?;
    let n = orbit.len();
    Ok(HyperbolicTimeRecord {
        sigma,
        n,
        theta: times.len() as f64 / n as f64,
        depth: times.clone(),
        times,
        horizon_label: format!("horizon n = {n}"),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySummary {
    pub map: String,
    pub sigma: f64,
    pub n: usize,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub thetas: Vec<f64>,
    pub mean: f64,
    pub p5: f64,
    /// 5th percentile of `θ̂` is positive.
    pub positive_frequency: bool,
    pub horizon_label: String,
}

/// Seed point and refill seed of sample `i` under a master seed.
pub fn sample_start(map: &MapModel, master: u64, i: u64) -> (Vec<CirclePoint>, u64) {
    let mut rng = substream(master, i);
    let x = (0..map.dimension()).map(|_| CirclePoint::random(&mut rng)).collect();
    (x, child_seed(master, i))
}

/// `θ̂` over Lebesgue-random seeds.
pub fn ht_frequency(map: &MapModel, sigma: f64, n: usize, samples: usize, master: u64) -> Result<FrequencySummary> {
    if samples == 0 || n == 0 {
        return Err(ErgoError::InvalidArgument("samples and n must be positive".into()));
    }
    let mut thetas = Vec::with_capacity(samples);
    let mut seeds = Vec::with_capacity(samples);
    for i in 0..samples as u64 {
        let (x, seed) = sample_start(map, master, i);
        let orbit = iterate(map, &x, n, seed)?;
        thetas.push(scan_hyperbolic_times(&orbit, sigma)?.theta);
        seeds.push(seed);
    }
    let mean = kahan_sum(&thetas) / samples as f64;
    let p5 = percentile(&thetas, 5.0);
    Ok(FrequencySummary {
        map: map.name(),
        sigma,
        n,
        master_seed: master,
        seeds,
        thetas,
        mean,
        p5,
        positive_frequency: p5 > 0.0,
        horizon_label: format!("horizon n = {n}"),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub sigma: f64,
    /// `(m, (1/m) Σ_{j<m} log‖Df⁻¹‖)` at `m = n/4, n/2, n`.
    pub checkpoints: Vec<(usize, f64)>,
    pub member: bool,
    pub horizon_label: String,
}

/// Membership in `H(σ)` at the horizon of the orbit.
pub fn expanding_membership(orbit: &OrbitRecord, sigma: f64) -> Result<MembershipVerdict> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(ErgoError::InvalidArgument(format!("σ = {sigma} must lie in (0, 1)")));
    }
    let n = orbit.len();
    let mut checkpoints = Vec::new();
    let mut marks: Vec<usize> = vec![(n / 4).max(1), (n / 2).max(1), n];
    marks.dedup();
    for m in marks {
        let prefix = OrbitRecord {
            map: orbit.map.clone(),
            dim: orbit.dim,
            seed: orbit.seed,
            points: Vec::new(),
            log_dfinv: orbit.log_dfinv[..m].to_vec(),
            log_det: orbit.log_det[..m].to_vec(),
            branches: Vec::new(),
            flagged: orbit.flagged.iter().copied().filter(|&j| j < m).collect(),
        };
        checkpoints.push((m, birkhoff(&prefix, Observable::LogDfInv)?.mean));
    }
    let last = checkpoints.last().unwrap().1;
    Ok(MembershipVerdict {
        sigma,
        member: last < sigma.ln(),
        checkpoints,
        horizon_label: format!("in H(σ) at horizon n = {n}"),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub h: usize,
    pub sigma: f64,
    /// Worst `d_k / (σ^{k/2} d_0)` for each `δ₁`.
    pub per_delta: Vec<(f64, f64)>,
    pub worst_ratio: f64,
    pub pairs: usize,
    /// A pulled-back pair came near a singular point or crossed a flagged step.
    pub inconclusive: bool,
}

/// Below this separation pairs are tracked by derivatives along their midpoint.
const LINEAR_REGIME: f64 = 1e-9;

/// Pulls pairs from `B(f^h x, δ₁)` back along the orbit's branch word and
/// checks `d(f^{h-k}y, f^{h-k}z) ≤ σ^{k/2} d(f^h y, f^h z)`.
pub fn contraction_check(
    map: &MapModel,
    orbit: &OrbitRecord,
    h: usize,
    sigma: f64,
    deltas: &[f64],
    pairs: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let f = map.circle("contraction_check")?;
    if h == 0 || h >= orbit.len() {
        return Err(ErgoError::InvalidArgument(format!(
            "h = {h} must lie in 1..{}",
            orbit.len()
        )));
    }
    let times = scan_log_stream(&orbit.log_dfinv[..h], &orbit.flagged, sigma)?;
    if times.last() != Some(&h) {
        return Err(ErgoError::InvalidArgument(format!("{h} is not a {sigma}-hyperbolic time")));
    }
    let anchors: Vec<f64> = (0..=h).map(|j| orbit.point(j)[0].to_f64()).collect();
    let log_sigma_half = 0.5 * sigma.ln();
    let mut rng = substream(seed, 0);
    let mut inconclusive = false;
    let mut per_delta = Vec::new();
    for &d1 in deltas {
        if !(d1 > 0.0 && d1 < crate::orbit::MAX_BALL_RADIUS) {
            return Err(ErgoError::RadiusTooLarge {
                radius: d1,
                limit: crate::orbit::MAX_BALL_RADIUS,
            });
        }
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let centre = anchors[h];
            let mut y = crate::measure::wrap01(centre + d1 * (2.0 * rng.random::<f64>() - 1.0));
            let mut z = crate::measure::wrap01(centre + d1 * (2.0 * rng.random::<f64>() - 1.0));
            let d0 = crate::measure::circle_dist(y, z);
            if d0 == 0.0 {
                continue;
            }
            let log_d0 = d0.ln();
            let mut log_d = log_d0;
            let mut linear = false;
            let mut mid = y;
            for k in 1..=h {
                let anchor = anchors[h - k];
                if linear {
                    mid = f.local_inverse(mid, anchor);
                    log_d -= f.deriv(mid).ln();
                } else {
                    y = f.local_inverse(y, anchor);
                    z = f.local_inverse(z, anchor);
                    let d = crate::measure::circle_dist(y, z);
                    log_d = d.ln();
                    if d < LINEAR_REGIME {
                        linear = true;
                        mid = crate::measure::wrap01(y + 0.5 * (z - y));
                    }
                }
                let probe = if linear { mid } else { y };
                let width = if linear { 0.0 } else { crate::measure::circle_dist(y, z) };
                if f.near_singular(probe, width.max(crate::orbit::SINGULAR_CLEARANCE)) {
                    inconclusive = true;
                }
                let ratio = (log_d - log_d0 - k as f64 * log_sigma_half).exp();
                worst = worst.max(ratio);
            }
            worst = worst.max(1.0);
        }
        per_delta.push((d1, worst));
    }
    Ok(ContractionReport {
        h,
        sigma,
        worst_ratio: per_delta.iter().map(|p| p.1).fold(0.0, f64::max),
        per_delta,
        pairs,
        inconclusive,
    })
}
