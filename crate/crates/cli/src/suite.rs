//! The acceptance suite: ten criteria, each a list of pinned numerical
//! checks with a JSON report. Criterion 10 re-runs the others and compares
//! their serialized reports byte for byte.

use std::time::{Duration, Instant};

use ergolab_core::hyperbolic::{sample_start, scan_log_stream};
use ergolab_core::measure::{empirical, EmpiricalMeasure, Measure, Moments, Provenance, ReferenceMeasure, TestFunctionBasis, UlamMeasure};
use ergolab_core::rng::{child_seed, substream};
use ergolab_core::transfer::conformal_solve_disc;
use ergolab_core::*;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, Context};
use crate::report::to_value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    fn le(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: format!("<= {bound:e}"),
            pass: value <= bound,
        }
    }

    fn ge(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: format!(">= {bound:e}"),
            pass: value >= bound,
        }
    }

    fn gt(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: format!("> {bound:e}"),
            pass: value > bound,
        }
    }

    fn truth(name: &str, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            bound: "== 1".into(),
            pass: ok,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub report: Value,
}

pub const TITLES: [&str; 10] = [
    "pressure agreement",
    "conformal exactness",
    "Gibbs certification",
    "Pesin formula",
    "hyperbolic-time scan correctness",
    "NUE frequency",
    "large deviations",
    "unique SRB-like clustering",
    "statistical stability",
    "determinism",
];

/// Wall-clock budget of each criterion on a single desk CPU.
pub fn budget(id: u32) -> Duration {
    Duration::from_secs(match id {
        1 => 120,
        2 => 10,
        3 => 5,
        4 => 180,
        5 => 60,
        6 => 120,
        7 => 180,
        8 => 300,
        9 => 300,
        _ => 1800,
    })
}

fn finish(id: u32, checks: Vec<Check>, report: Value) -> CriterionResult {
    CriterionResult {
        id,
        title: TITLES[id as usize - 1].into(),
        pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
        checks,
        report,
    }
}

fn doubling() -> MapModel {
    make_map(&MapSpec::Doubling).expect("doubling is always valid")
}

fn neg_log2() -> Potential {
    Potential::Constant { value: -std::f64::consts::LN_2 }
}

pub const C1_EPS: [f64; 3] = [1.0 / 16.0, 1.0 / 64.0, 1.0 / 128.0];
pub const C1_N: [usize; 5] = [8, 10, 12, 14, 16];

fn c1() -> Result<CriterionResult, CliError> {
    let f = doubling();
    let cases = [
        ("zero", Potential::Zero),
        ("neg_log2", neg_log2()),
        ("cos", Potential::Cos { amplitude: 1.0, frequency: 1 }),
    ];
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (name, pot) in cases {
        let sep = pressure_separated(&f, &pot, &C1_EPS, &C1_N).at("suite.c1")?;
        let spectral = conformal_solve(&f, &pot, 1 << 12).at("suite.c1")?;
        checks.push(Check::le(&format!("{name}: |separated - log λ|"), (sep.extrapolated - spectral.pressure).abs(), 0.02));
        if name == "neg_log2" {
            checks.push(Check::le("neg_log2: |spectral|", spectral.pressure.abs(), 1e-3));
            checks.push(Check::le("neg_log2: |separated|", sep.extrapolated.abs(), 0.03));
        }
        rows.push(json!({
            "potential": name,
            "separated": sep.extrapolated,
            "separated_uncertainty": sep.uncertainty,
            "spectral": spectral.pressure,
            "lambda": spectral.lambda,
        }));
    }
    Ok(finish(1, checks, json!({"eps": C1_EPS, "n": C1_N, "resolution": 4096, "rows": rows})))
}

fn c2() -> Result<CriterionResult, CliError> {
    let f = doubling();
    let n = 1 << 12;
    let disc = TransferDiscretization::new(&f, &neg_log2(), n).at("suite.c2")?;
    let sol = conformal_solve_disc(&disc).at("suite.c2")?;
    let cell_dev = sol.nu.masses().iter().map(|m| (m - 1.0 / n as f64).abs()).fold(0.0, f64::max);
    let jac = jacobian_check(&sol, &disc, 1000, 2).at("suite.c2")?;
    let checks = vec![
        Check::le("|λ - 1|", (sol.lambda - 1.0).abs(), 1e-10),
        Check::le("max |ν(cell) - 1/N|", cell_dev, 1e-10),
        Check::le("jacobian_check", jac, 1e-8),
    ];
    Ok(finish(
        2,
        checks,
        json!({"lambda": sol.lambda, "residual": sol.residual, "iterations": sol.iterations, "cell_deviation": cell_dev, "jacobian": jac}),
    ))
}

fn c3() -> Result<CriterionResult, CliError> {
    let f = doubling();
    let disc = TransferDiscretization::new(&f, &neg_log2(), 1 << 12).at("suite.c3")?;
    let sol = conformal_solve_disc(&disc).at("suite.c3")?;
    let rep = gibbs_check(&sol, &disc, CirclePoint::from_f64(0.3), 30, 0.1, 0.4).at("suite.c3")?;
    let worst = rep.ratios.iter().map(|r| (r - 0.4).abs()).fold(0.0, f64::max);
    let checks = vec![
        Check::truth("30 ratios, no truncation", rep.ratios.len() == 30 && rep.truncated_at.is_none()),
        Check::le("max |r_n - 0.4|", worst, 1e-6),
    ];
    Ok(finish(3, checks, json!({"gibbs": to_value(&rep), "worst_deviation": worst})))
}

fn c4(master: u64) -> Result<CriterionResult, CliError> {
    let f = doubling();
    let cfg = PesinConfig::default();
    let mut defects = Vec::new();
    for i in 0..20 {
        let (x, seed) = sample_start(&f, master, i);
        let orbit = iterate(&f, &x, 100_000, seed).at("suite.c4")?;
        let rep = pesin_defect(&f, &empirical(&orbit).into(), &cfg).at("suite.c4")?;
        defects.push(rep.defect);
    }
    let worst = defects.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let dirac = EmpiricalMeasure::dirac(&[0.0]).at("suite.c4")?.with_provenance(Provenance {
        map: f.name(),
        seed: master,
        len: 1,
    });
    let d = pesin_defect(&f, &dirac.into(), &cfg).at("suite.c4")?;
    let in_k05 = d.kr.iter().find(|v| v.r == 0.5).map(|v| v.member);
    let checks = vec![
        Check::le("max |defect| over 20 orbits", worst, 0.05),
        Check::le("|δ_0 defect + log 2|", (d.defect + std::f64::consts::LN_2).abs(), 1e-6),
        Check::truth("δ_0 not in K_0.5", in_k05 == Some(false)),
    ];
    Ok(finish(4, checks, json!({"defects": defects, "dirac": to_value(&d)})))
}

/// Every trailing window checked directly on the quantized grid.
pub fn quadratic_scan(logs: &[f64], sigma: f64) -> Vec<usize> {
    let scale = (1u64 << 48) as f64;
    let q = |v: f64| (v * scale).round() as i128;
    let qs = q(sigma.ln());
    (1..=logs.len())
        .filter(|&h| (1..=h).all(|k| logs[h - k..h].iter().map(|&v| q(v) - qs).sum::<i128>() + 282 <= 0))
        .collect()
}

fn c5(master: u64) -> Result<CriterionResult, CliError> {
    let mut rng = substream(master, 5);
    let mut mismatches = 0u64;
    let mut total_times = 0usize;
    for _ in 0..10_000 {
        let n = rng.random_range(1..100);
        let sigma = rng.random_range(0.3..0.95);
        let logs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..0.6)).collect();
        let fast = scan_log_stream(&logs, &[], sigma).at("suite.c5")?;
        total_times += fast.len();
        mismatches += u64::from(fast != quadratic_scan(&logs, sigma));
    }
    let f = doubling();
    let (x, seed) = sample_start(&f, master, 5);
    let orbit = iterate(&f, &x, 10_000, seed).at("suite.c5")?;
    let rec = scan_hyperbolic_times(&orbit, 0.75).at("suite.c5")?;
    let checks = vec![
        Check::le("scan/oracle mismatches over 10^4 streams", mismatches as f64, 0.0),
        Check::le("|θ̂ - 1| for doubling at σ = 0.75", (rec.theta - 1.0).abs(), 0.0),
    ];
    Ok(finish(5, checks, json!({"mismatches": mismatches, "times_found": total_times, "doubling_theta": rec.theta, "horizon": rec.horizon_label})))
}

fn c6(master: u64) -> Result<CriterionResult, CliError> {
    let f = make_map(&MapSpec::NueDeform { a: 0.2 }).at("suite.c6")?;
    let a = ht_frequency(&f, 0.9, 10_000, 100, child_seed(master, 6)).at("suite.c6")?;
    let b = ht_frequency(&f, 0.9, 10_000, 100, child_seed(master, 106)).at("suite.c6")?;
    let rel = (a.mean - b.mean).abs() / (0.5 * (a.mean + b.mean));
    let checks = vec![
        Check::gt("5th percentile θ̂ (seed A)", a.p5, 0.0),
        Check::gt("5th percentile θ̂ (seed B)", b.p5, 0.0),
        Check::le("relative gap of means", rel, 0.05),
    ];
    Ok(finish(
        6,
        checks,
        json!({
            "a": {"master_seed": a.master_seed, "mean": a.mean, "p5": a.p5},
            "b": {"master_seed": b.master_seed, "mean": b.mean, "p5": b.p5},
            "horizon": a.horizon_label,
        }),
    ))
}

fn c7(master: u64) -> Result<CriterionResult, CliError> {
    let f = doubling();
    let ldp = ldp_rate(&f, 0.9, &[4, 8, 12, 16, 20], 1_000_000, child_seed(master, 7)).at("suite.c7")?;
    let p20 = ldp.points.iter().find(|p| p.n == 20).expect("n = 20 is on the ladder");
    let exact_rate = p20.exact_rate.unwrap_or(f64::NAN);
    let basis = TestFunctionBasis::default();
    let ns = [4, 8, 12, 16, 20];
    let leb_ref = ReferenceMeasure::lebesgue(1);
    let dirac: Measure = EmpiricalMeasure::dirac(&[0.0]).at("suite.c7")?.into();
    let leb: Measure = UlamMeasure::lebesgue(1, 64).at("suite.c7")?.into();
    let d0 = pseudo_basin_mass(&f, &dirac, "dirac0", 0.1, &ns, 100_000, child_seed(master, 70), &leb_ref, &basis).at("suite.c7")?;
    let lb = pseudo_basin_mass(&f, &leb, "lebesgue", 0.1, &ns, 20_000, child_seed(master, 71), &leb_ref, &basis).at("suite.c7")?;
    let v_d0 = weak_srb_verdict(std::slice::from_ref(&d0)).at("suite.c7")?;
    let v_lb = weak_srb_verdict(std::slice::from_ref(&lb)).at("suite.c7")?;
    let checks = vec![
        Check::le(
            "relative error of exact rate at n = 20 vs limit",
            ((exact_rate - ldp.limit_rate) / ldp.limit_rate).abs(),
            0.2,
        ),
        Check::truth("exact probability inside Monte Carlo Wilson interval", p20.exact_within_wilson == Some(true)),
        Check::le("δ_0 pseudo-basin rate at ε = 0.1", d0.decay_rate.unwrap_or(f64::NAN), -0.1),
        Check::ge("Lebesgue pseudo-basin rate at ε = 0.1", lb.decay_rate.unwrap_or(f64::NAN), -0.02),
        Check::truth("weak-SRB verdicts: Lebesgue yes, δ_0 no", v_lb.positive && !v_d0.positive),
    ];
    Ok(finish(
        7,
        checks,
        json!({"ldp": to_value(&ldp), "dirac0": to_value(&d0), "lebesgue": to_value(&lb)}),
    ))
}

fn c8(master: u64) -> Result<CriterionResult, CliError> {
    let basis = TestFunctionBasis::default();
    let f = doubling();
    let r = srb_cluster(&f, 100_000, 50, 0.05, child_seed(master, 8), &basis).at("suite.c8")?;
    let leb = Moments::lebesgue(&basis);
    let centroid_dist = r.clusters[0].centroid.dist(&leb).at("suite.c8")?;
    let g = make_map(&MapSpec::Intermittent { alpha: 2.0 }).at("suite.c8")?;
    let reps = srb_cluster_horizons(&g, &[1000, 10_000, 100_000], 50, 0.05, child_seed(master, 80), &basis).at("suite.c8")?;
    let d0 = Moments::dirac(&basis, &[0.0]);
    let dists = reps
        .iter()
        .map(|r| r.overall_centroid.dist(&d0))
        .collect::<ergolab_core::Result<Vec<f64>>>()
        .at("suite.c8")?;
    let checks = vec![
        Check::le("doubling cluster count", r.clusters.len() as f64, 1.0),
        Check::le("doubling centroid distance to Lebesgue", centroid_dist, 0.02),
        Check::truth("intermittent distance to δ_0 strictly decreasing", dists.windows(2).all(|w| w[1] < w[0])),
    ];
    Ok(finish(
        8,
        checks,
        json!({
            "doubling": {"clusters": r.clusters.len(), "masses": r.clusters.iter().map(|c| c.mass).collect::<Vec<_>>(), "centroid_dist": centroid_dist, "unstable_flag": r.unstable_flag},
            "intermittent": {"horizons": [1000, 10_000, 100_000], "dist_to_dirac0": dists},
        }),
    ))
}

pub const C9_A: [f64; 3] = [0.02, 0.01, 0.005];

fn c9(master: u64) -> Result<CriterionResult, CliError> {
    let basis = TestFunctionBasis::default();
    let seed = child_seed(master, 9);
    let base = srb_cluster(&make_map(&MapSpec::NueDeform { a: 0.0 }).at("suite.c9")?, 100_000, 50, 0.05, seed, &basis)
        .at("suite.c9")?;
    let mut gaps = Vec::new();
    let mut counts = vec![base.clusters.len()];
    for a in C9_A {
        let r = srb_cluster(&make_map(&MapSpec::NueDeform { a }).at("suite.c9")?, 100_000, 50, 0.05, seed, &basis).at("suite.c9")?;
        gaps.push(r.overall_centroid.dist(&base.overall_centroid).at("suite.c9")?);
        counts.push(r.clusters.len());
    }
    let checks = vec![
        Check::truth("gaps strictly decreasing as a → 0", gaps.windows(2).all(|w| w[1] < w[0])),
        Check::le("final gap", *gaps.last().unwrap(), 0.05),
    ];
    Ok(finish(9, checks, json!({"a": C9_A, "gaps": gaps, "cluster_counts": counts})))
}

pub fn run_criterion(id: u32, master: u64) -> Result<CriterionResult, CliError> {
    match id {
        1 => c1(),
        2 => c2(),
        3 => c3(),
        4 => c4(master),
        5 => c5(master),
        6 => c6(master),
        7 => c7(master),
        8 => c8(master),
        9 => c9(master),
        10 => determinism(&[2, 3, 5], master, &[]),
        _ => Err(CliError::config("suite.criteria", format!("unknown criterion {id}"))),
    }
}

fn report_bytes(r: &CriterionResult) -> Vec<u8> {
    serde_json::to_vec(r).expect("results serialize")
}

/// Re-runs criteria and compares report bytes with earlier results (or with
/// a fresh first run when none are given).
pub fn determinism(ids: &[u32], master: u64, earlier: &[CriterionResult]) -> Result<CriterionResult, CliError> {
    let mut checks = Vec::new();
    for &id in ids {
        let first = match earlier.iter().find(|r| r.id == id) {
            Some(r) => report_bytes(r),
            None => report_bytes(&run_criterion(id, master)?),
        };
        let second = report_bytes(&run_criterion(id, master)?);
        checks.push(Check::truth(&format!("criterion {id} report identical"), first == second));
    }
    Ok(finish(10, checks, json!({"rerun": ids})))
}

/// One suite run: results plus wall-clock times (kept out of the reports).
pub struct SuiteRun {
    pub results: Vec<CriterionResult>,
    pub elapsed: Vec<Duration>,
}

pub fn run_suite(ids: &[u32], master: u64) -> Result<SuiteRun, CliError> {
    let mut results = Vec::new();
    let mut elapsed = Vec::new();
    for &id in ids.iter().filter(|&&i| i != 10) {
        let t = Instant::now();
        results.push(run_criterion(id, master)?);
        elapsed.push(t.elapsed());
    }
    if ids.contains(&10) {
        let t = Instant::now();
        let rerun: Vec<u32> = results.iter().map(|r| r.id).collect();
        let r = if rerun.is_empty() {
            run_criterion(10, master)?
        } else {
            determinism(&rerun, master, &results)?
        };
        results.push(r);
        elapsed.push(t.elapsed());
    }
    Ok(SuiteRun { results, elapsed })
}
