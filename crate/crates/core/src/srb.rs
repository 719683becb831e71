//! Detection of SRB-like and weak-SRB-like measures: pseudo-basin masses and
//! their decay rates, large-deviation rates for the doubling map, and
//! clustering of empirical measures.

use serde::{Deserialize, Serialize};

use crate::error::{ErgoError, Result};
use crate::maps::{MapModel, MapSpec};
use crate::measure::{Measure, Moments, ReferenceMeasure, TestFunctionBasis};
use crate::orbit::Orbit;
use crate::point::CirclePoint;
use crate::rng::{child_seed, substream};
use crate::stats::{linear_fit, upper_half_start, wilson_interval};

/// A fitted decay rate below this fails the weak-SRB-like test.
pub const WEAK_SRB_THRESHOLD: f64 = -0.02;

/// Running moment sums of `σ_n(x)` along one orbit, read out at sorted
/// checkpoints.
struct MomentStream {
    basis: TestFunctionBasis,
    acc: Vec<f64>,
    scratch: Vec<f64>,
    coords: [f64; 2],
}

impl MomentStream {
    fn new(basis: &TestFunctionBasis) -> Self {
        MomentStream {
            basis: *basis,
            acc: vec![0.0; basis.len()],
            scratch: vec![0.0; 2 * basis.len_1d()],
            coords: [0.0; 2],
        }
    }

    /// Streams the orbit and returns `σ_m` moments for every checkpoint `m`.
    fn run(&mut self, map: &MapModel, x: &[CirclePoint], seed: u64, checkpoints: &[usize]) -> Vec<Moments> {
        let dim = map.dimension();
        self.acc.iter_mut().for_each(|a| *a = 0.0);
        let mut orbit = Orbit::new(map, x, seed);
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut done = 0;
        for &m in checkpoints {
            while done < m {
                let p = orbit.step();
                for i in 0..dim {
                    self.coords[i] = p[i].to_f64();
                }
                self.basis
                    .accumulate(&self.coords[..dim], 1.0, &mut self.acc, &mut self.scratch);
                done += 1;
            }
            let mut mom = self.basis.zero_moments();
            for (v, a) in mom.values.iter_mut().zip(&self.acc) {
                *v = a / m as f64;
            }
            out.push(mom);
        }
        out
    }
}

fn sorted_ladder(ns: &[usize]) -> Result<Vec<usize>> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(ErgoError::InvalidArgument("n ladder must be non-empty and positive".into()));
    }
    let mut v = ns.to_vec();
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

/// Start point and refill seed of sample `i`.
fn draw(nu: &ReferenceMeasure, master: u64, i: u64) -> ([CirclePoint; 2], u64) {
    let mut rng = substream(master, i);
    (nu.sample(&mut rng), child_seed(master, i))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassPoint {
    pub n: usize,
    pub hits: u64,
    pub samples: u64,
    pub mass: f64,
    /// 95% Wilson interval.
    pub wilson: (f64, f64),
    /// `(1/n) log mass`, `None` when there were no hits.
    pub log_rate: Option<f64>,
}

/// One sample's distance to the target at one horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub seed: u64,
    pub n: usize,
    pub dist: f64,
    pub hit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoBasinEstimate {
    pub map: String,
    pub target: String,
    pub reference: String,
    pub basis_k: usize,
    pub epsilon: f64,
    pub n_ladder: Vec<usize>,
    pub points: Vec<MassPoint>,
    /// Least-squares slope of `log mass` against `n` over the upper half of
    /// the ladder, positive-mass points only.
    pub decay_rate: Option<f64>,
    /// Some ladder point had no hits.
    pub zero_mass_flag: bool,
    #[serde(skip)]
    pub rows: Vec<SampleRow>,
}

/// Pseudo-basin masses `ν(A_{ε,n}(μ))` for every `ε` of a ladder, all
/// computed from one shared set of samples.
#[allow(clippy::too_many_arguments)]
pub fn pseudo_basin_masses(
    map: &MapModel,
    target: &Measure,
    target_label: &str,
    eps: &[f64],
    ns: &[usize],
    samples: usize,
    master: u64,
    nu: &ReferenceMeasure,
    basis: &TestFunctionBasis,
) -> Result<Vec<PseudoBasinEstimate>> {
    if samples == 0 {
        return Err(ErgoError::InvalidArgument("samples must be positive".into()));
    }
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(ErgoError::InvalidArgument("ε ladder must be positive".into()));
    }
    let dim = map.dimension();
    if target.dim() != dim || nu.dim() != dim || basis.dim() != dim {
        return Err(ErgoError::DimensionMismatch {
            expected: dim,
            got: target.dim(),
        });
    }
    let ladder = sorted_ladder(ns)?;
    let target_m = target.moments(basis)?;
    let mut stream = MomentStream::new(basis);
    // dists[i][j]: sample i, ladder point j
    let mut dists = Vec::with_capacity(samples);
    let mut seeds = Vec::with_capacity(samples);
    for i in 0..samples as u64 {
        let (x, seed) = draw(nu, master, i);
        let moments = stream.run(map, &x[..dim], seed, &ladder);
        dists.push(
            moments
                .iter()
                .map(|m| m.dist(&target_m))
                .collect::<Result<Vec<_>>>()?,
        );
        seeds.push(seed);
    }
    let mut out = Vec::with_capacity(eps.len());
    for &e in eps {
        let mut points = Vec::with_capacity(ladder.len());
        let mut rows = Vec::with_capacity(samples * ladder.len());
        for (j, &n) in ladder.iter().enumerate() {
            let mut hits = 0u64;
            for (d, &seed) in dists.iter().zip(&seeds) {
                let hit = d[j] < e;
                hits += u64::from(hit);
                rows.push(SampleRow {
                    seed,
                    n,
                    dist: d[j],
                    hit,
                });
            }
            let mass = hits as f64 / samples as f64;
            points.push(MassPoint {
                n,
                hits,
                samples: samples as u64,
                mass,
                wilson: wilson_interval(hits, samples as u64),
                log_rate: (hits > 0).then(|| mass.ln() / n as f64),
            });
        }
        let start = upper_half_start(points.len());
        let (xs, ys): (Vec<f64>, Vec<f64>) = points[start..]
            .iter()
            .filter(|p| p.hits > 0)
            .map(|p| (p.n as f64, p.mass.ln()))
            .unzip();
        let decay_rate = linear_fit(&xs, &ys).ok().map(|f| f.slope);
        out.push(PseudoBasinEstimate {
            map: map.name(),
            target: target_label.to_string(),
            reference: nu.label(),
            basis_k: basis.k(),
            epsilon: e,
            n_ladder: ladder.clone(),
            zero_mass_flag: points.iter().any(|p| p.hits == 0),
            points,
            decay_rate,
            rows,
        });
    }
    Ok(out)
}

/// Single-`ε` convenience wrapper around [`pseudo_basin_masses`].
#[allow(clippy::too_many_arguments)]
pub fn pseudo_basin_mass(
    map: &MapModel,
    target: &Measure,
    target_label: &str,
    eps: f64,
    ns: &[usize],
    samples: usize,
    master: u64,
    nu: &ReferenceMeasure,
    basis: &TestFunctionBasis,
) -> Result<PseudoBasinEstimate> {
    let mut v = pseudo_basin_masses(map, target, target_label, &[eps], ns, samples, master, nu, basis)?;
    Ok(v.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakSrbVerdict {
    pub positive: bool,
    /// `(ε, fitted rate)`; a missing rate counts as failing.
    pub rates: Vec<(f64, Option<f64>)>,
    pub threshold: f64,
    pub horizon: usize,
    pub resolution_tag: String,
}

/// Weak-SRB-like iff every fitted rate is at least [`WEAK_SRB_THRESHOLD`].
pub fn weak_srb_verdict(estimates: &[PseudoBasinEstimate]) -> Result<WeakSrbVerdict> {
    let first = estimates
        .first()
        .ok_or_else(|| ErgoError::InvalidArgument("no estimates".into()))?;
    if estimates.iter().any(|e| e.n_ladder != first.n_ladder) {
        return Err(ErgoError::InvalidArgument(
            "estimates must share one n ladder".into(),
        ));
    }
    let rates: Vec<(f64, Option<f64>)> = estimates.iter().map(|e| (e.epsilon, e.decay_rate)).collect();
    let positive = rates
        .iter()
        .all(|(_, r)| r.is_some_and(|r| r >= WEAK_SRB_THRESHOLD));
    let horizon = *first.n_ladder.last().unwrap();
    let eps: Vec<String> = rates.iter().map(|(e, _)| e.to_string()).collect();
    Ok(WeakSrbVerdict {
        positive,
        threshold: WEAK_SRB_THRESHOLD,
        horizon,
        resolution_tag: format!(
            "weak-SRB-like at resolution ε ∈ {{{}}}, K = {}, horizon {horizon}, threshold {WEAK_SRB_THRESHOLD}",
            eps.join(", "),
            first.basis_k
        ),
        rates,
    })
}

/// Binomial coefficient, exact for `n ≤ 120`.
pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Natural-log entropy `H(p) = -p ln p - (1-p) ln(1-p)`.
pub fn entropy_nats(p: f64) -> f64 {
    let t = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    t(p) + t(1.0 - p)
}

/// Largest `n` for which exact binomial counts are reported.
pub const LDP_EXACT_MAX_N: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdpPoint {
    pub n: usize,
    /// Smallest number of zero digits meeting the frequency `p₀`.
    pub threshold: u32,
    pub exact_count: Option<u128>,
    pub exact_probability: Option<f64>,
    pub exact_rate: Option<f64>,
    pub mc_hits: u64,
    pub mc_samples: u64,
    pub mc_fraction: f64,
    pub wilson: (f64, f64),
    /// The exact probability lies inside the Wilson interval.
    pub exact_within_wilson: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdpReport {
    pub p0: f64,
    /// `H(p₀) − log 2`.
    pub limit_rate: f64,
    pub points: Vec<LdpPoint>,
}

/// Lebesgue measure of `{x : #{j < n : f^j x ∈ [0, 1/2)} ≥ p₀ n}` under the
/// doubling map, exactly by binomial counting and by Monte Carlo.
pub fn ldp_rate(map: &MapModel, p0: f64, ns: &[usize], mc_samples: u64, master: u64) -> Result<LdpReport> {
    if *map.spec() != MapSpec::Doubling {
        return Err(ErgoError::InvalidArgument("ldp_rate is defined for the doubling map only".into()));
    }
    if !(p0 > 0.5 && p0 <= 1.0) {
        return Err(ErgoError::InvalidArgument(format!(
            "p0 = {p0} gives no decay; it must lie in (1/2, 1]"
        )));
    }
    let ladder = sorted_ladder(ns)?;
    let n_max = *ladder.last().unwrap();
    // zero-digit counts of every sample at every ladder point
    let mut zeros_at: Vec<Vec<u32>> = Vec::with_capacity(mc_samples as usize);
    let lebesgue = ReferenceMeasure::lebesgue(1);
    for i in 0..mc_samples {
        let (x, seed) = draw(&lebesgue, master, i);
        let mut orbit = Orbit::new(map, &x[..1], seed);
        let mut zeros = 0u32;
        let mut row = vec![0u32; ladder.len()];
        let mut next = 0;
        for j in 1..=n_max {
            let p = orbit.step();
            zeros += u32::from(p[0].0 >> 127 == 0);
            if j == ladder[next] {
                row[next] = zeros;
                next += 1;
            }
        }
        zeros_at.push(row);
    }
    let points = ladder
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let threshold = (p0 * n as f64 - 1e-9).ceil().max(0.0) as u32;
            let hits = zeros_at.iter().filter(|r| r[j] >= threshold).count() as u64;
            let wilson = wilson_interval(hits, mc_samples);
            let exact_count = (n <= LDP_EXACT_MAX_N)
                .then(|| (threshold..=n as u32).map(|k| binomial(n as u32, k)).sum::<u128>());
            let exact_probability = exact_count.map(|c| c as f64 / 2f64.powi(n as i32));
            LdpPoint {
                n,
                threshold,
                exact_count,
                exact_probability,
                exact_rate: exact_probability.map(|p| p.ln() / n as f64),
                mc_hits: hits,
                mc_samples,
                mc_fraction: if mc_samples > 0 { hits as f64 / mc_samples as f64 } else { f64::NAN },
                wilson,
                exact_within_wilson: exact_probability
                    .filter(|_| mc_samples > 0)
                    .map(|p| wilson.0 <= p && p <= wilson.1),
            }
        })
        .collect();
    Ok(LdpReport {
        p0,
        limit_rate: entropy_nats(p0) - 2f64.ln(),
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Sample indices in seed order.
    pub members: Vec<usize>,
    pub mass: f64,
    pub centroid: Moments,
    pub diameter: f64,
    pub max_dist_to_centroid: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub map: String,
    pub horizon: usize,
    pub epsilon: f64,
    pub basis_k: usize,
    pub seeds: Vec<u64>,
    pub clusters: Vec<Cluster>,
    /// Equal-weight mixture of every sample.
    pub overall_centroid: Moments,
    /// Largest `dist(σ_{n/2}(x_i), σ_n(x_i))`.
    pub successive_horizon_gap: f64,
    /// The horizon looks too short: the gap exceeds `ε/2`.
    pub unstable_flag: bool,
    /// Some sample lies farther than `ε` from its cluster centroid.
    pub centroid_radius_flag: bool,
    #[serde(skip)]
    pub distances: Vec<Vec<f64>>,
    #[serde(skip)]
    pub sample_moments: Vec<Moments>,
}

/// Minimum number of samples for [`srb_cluster`].
pub const MIN_CLUSTER_SAMPLES: usize = 50;

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn cluster_at(
    map: &MapModel,
    horizon: usize,
    eps: f64,
    basis: &TestFunctionBasis,
    seeds: &[u64],
    half: &[Moments],
    full: Vec<Moments>,
) -> Result<ClusterReport> {
    let s = full.len();
    let mut dist = vec![vec![0.0; s]; s];
    for i in 0..s {
        for j in i + 1..s {
            let d = full[i].dist(&full[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut parent: Vec<usize> = (0..s).collect();
    for i in 0..s {
        for j in i + 1..s {
            if dist[i][j] <= eps {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut order: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in 0..s {
        let r = find(&mut parent, i);
        match order.iter().position(|&o| o == r) {
            Some(p) => members[p].push(i),
            None => {
                order.push(r);
                members.push(vec![i]);
            }
        }
    }
    let mut clusters = Vec::with_capacity(members.len());
    let mut radius_flag = false;
    for m in members {
        let parts: Vec<&Moments> = m.iter().map(|&i| &full[i]).collect();
        let w = vec![1.0 / m.len() as f64; m.len()];
        let centroid = Moments::mixture(&parts, &w)?;
        let mut diameter: f64 = 0.0;
        for (a, &i) in m.iter().enumerate() {
            for &j in &m[a + 1..] {
                diameter = diameter.max(dist[i][j]);
            }
        }
        let max_dc = parts
            .iter()
            .map(|p| p.dist(&centroid))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        radius_flag |= max_dc > eps;
        clusters.push(Cluster {
            mass: m.len() as f64 / s as f64,
            members: m,
            centroid,
            diameter,
            max_dist_to_centroid: max_dc,
        });
    }
    let all: Vec<&Moments> = full.iter().collect();
    let overall_centroid = Moments::mixture(&all, &vec![1.0 / s as f64; s])?;
    let gap = half
        .iter()
        .zip(&full)
        .map(|(a, b)| a.dist(b))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(ClusterReport {
        map: map.name(),
        horizon,
        epsilon: eps,
        basis_k: basis.k(),
        seeds: seeds.to_vec(),
        clusters,
        overall_centroid,
        successive_horizon_gap: gap,
        unstable_flag: gap > eps / 2.0,
        centroid_radius_flag: radius_flag,
        distances: dist,
        sample_moments: full,
    })
}

/// Clusters `σ_n(x_i)` for Lebesgue-random seeds at every horizon of a list,
/// reusing one streamed orbit per seed.
pub fn srb_cluster_horizons(
    map: &MapModel,
    horizons: &[usize],
    samples: usize,
    eps: f64,
    master: u64,
    basis: &TestFunctionBasis,
) -> Result<Vec<ClusterReport>> {
    if samples < MIN_CLUSTER_SAMPLES {
        return Err(ErgoError::InvalidArgument(format!(
            "srb_cluster needs at least {MIN_CLUSTER_SAMPLES} samples, got {samples}"
        )));
    }
    if !(eps > 0.0) {
        return Err(ErgoError::InvalidArgument("ε must be positive".into()));
    }
    let hs = sorted_ladder(horizons)?;
    let mut checkpoints: Vec<usize> = hs.iter().flat_map(|&h| [(h / 2).max(1), h]).collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let nu = ReferenceMeasure::lebesgue(map.dimension());
    let mut stream = MomentStream::new(basis);
    let mut per_sample = Vec::with_capacity(samples);
    let mut seeds = Vec::with_capacity(samples);
    for i in 0..samples as u64 {
        let (x, seed) = draw(&nu, master, i);
        per_sample.push(stream.run(map, &x[..map.dimension()], seed, &checkpoints));
        seeds.push(seed);
    }
    let at = |m: usize| checkpoints.iter().position(|&c| c == m).unwrap();
    hs.iter()
        .map(|&h| {
            let (ih, ifull) = (at((h / 2).max(1)), at(h));
            let half: Vec<Moments> = per_sample.iter().map(|v| v[ih].clone()).collect();
            let full: Vec<Moments> = per_sample.iter().map(|v| v[ifull].clone()).collect();
            cluster_at(map, h, eps, basis, &seeds, &half, full)
        })
        .collect()
}

pub fn srb_cluster(
    map: &MapModel,
    horizon: usize,
    samples: usize,
    eps: f64,
    master: u64,
    basis: &TestFunctionBasis,
) -> Result<ClusterReport> {
    Ok(srb_cluster_horizons(map, &[horizon], samples, eps, master, basis)?.remove(0))
}

/// Clusters the empirical measures of explicitly given seed points.
pub fn cluster_points(
    map: &MapModel,
    points: &[Vec<CirclePoint>],
    horizon: usize,
    eps: f64,
    master: u64,
    basis: &TestFunctionBasis,
) -> Result<ClusterReport> {
    let mut stream = MomentStream::new(basis);
    let cps = [(horizon / 2).max(1), horizon];
    let mut half = Vec::new();
    let mut full = Vec::new();
    let mut seeds = Vec::new();
    for (i, x) in points.iter().enumerate() {
        let seed = child_seed(master, i as u64);
        let mut m = stream.run(map, x, seed, &cps);
        full.push(m.pop().unwrap());
        half.push(m.pop().unwrap());
        seeds.push(seed);
    }
    cluster_at(map, horizon, eps, basis, &seeds, &half, full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::make_map;
    use crate::measure::{EmpiricalMeasure, UlamMeasure};

    fn doubling() -> MapModel {
        make_map(&MapSpec::Doubling).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(20, 18), 190);
        assert_eq!(binomial(20, 0), 1);
        assert_eq!(binomial(5, 7), 0);
        assert_eq!(binomial(100, 50), 100891344545564193334812497256);
    }

    #[test]
    fn ldp_exact_counts() {
        let r = ldp_rate(&doubling(), 0.9, &[20], 0, 1).unwrap();
        assert_eq!(r.points[0].exact_count, Some(211));
        assert!((r.limit_rate + 0.368064).abs() < 1e-6);
        let one = ldp_rate(&doubling(), 1.0, &[10], 0, 1).unwrap();
        assert!((one.points[0].exact_rate.unwrap() + 2f64.ln()).abs() < 1e-15);
        assert!(ldp_rate(&doubling(), 0.5, &[10], 0, 1).is_err());
    }

    #[test]
    fn masses_are_monotone_in_epsilon() {
        let f = doubling();
        let leb: Measure = UlamMeasure::lebesgue(1, 64).unwrap().into();
        let est = pseudo_basin_masses(
            &f,
            &leb,
            "lebesgue",
            &[0.05, 0.1, 0.2],
            &[5, 10, 20],
            400,
            3,
            &ReferenceMeasure::lebesgue(1),
            &TestFunctionBasis::default(),
        )
        .unwrap();
        for w in est.windows(2) {
            for (a, b) in w[0].points.iter().zip(&w[1].points) {
                assert!(a.hits <= b.hits);
            }
        }
    }

    #[test]
    fn diameter_bound_gives_full_mass() {
        let f = doubling();
        let target: Measure = EmpiricalMeasure::dirac(&[0.3]).unwrap().into();
        let basis = TestFunctionBasis::default();
        // every truncated distance is below Σ 2^{-i} = 2
        let est = pseudo_basin_mass(&f, &target, "dirac", 2.0, &[1], 100, 1, &ReferenceMeasure::lebesgue(1), &basis).unwrap();
        assert_eq!(est.points[0].mass, 1.0);
    }

    #[test]
    fn identical_periodic_seeds_form_one_cluster() {
        let f = doubling();
        let p = vec![vec![CirclePoint::from_ratio(1, 3)]; 10];
        let r = cluster_points(&f, &p, 1, 0.01, 1, &TestFunctionBasis::default()).unwrap();
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0].diameter, 0.0);
        assert!(srb_cluster(&f, 10, 10, 0.1, 1, &TestFunctionBasis::default()).is_err());
    }
}
