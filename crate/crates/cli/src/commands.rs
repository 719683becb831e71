//! One function per subcommand. Each returns a JSON result plus CSV tables;
//! writing them is left to the caller.

use ergolab_core::hyperbolic::sample_start;
use ergolab_core::measure::{empirical, EmpiricalMeasure, Measure, Provenance, ReferenceMeasure, TestFunctionBasis, UlamMeasure};
use ergolab_core::pressure::{pressure_separated_with, PathChoice};
use ergolab_core::transfer::{conformal_solve_disc, conformal_solve_restart, equilibrium_measure, eigendensity};
use ergolab_core::*;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Context};
use crate::report::{num, to_value};

/// A CSV table held in memory until the run succeeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, Default)]
pub struct Output {
    pub result: Value,
    pub tables: Vec<Table>,
    /// Pre-rendered CSV files.
    pub raw: Vec<(String, Vec<u8>)>,
    /// One-paragraph human summary for stdout.
    pub summary: String,
}

fn map_of(cfg: &ExperimentConfig) -> Result<MapModel, CliError> {
    make_map(&cfg.map).at("map")
}

fn power_of_two(key: &str, n: usize) -> Result<(), CliError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(CliError::config(key, format!("resolution N = {n} must be a power of 2")));
    }
    Ok(())
}

fn non_empty<T>(key: &str, v: &[T]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::config(key, "ladder must not be empty"));
    }
    Ok(())
}

fn solve(map: &MapModel, pot: &Potential, n: usize, key: &str) -> Result<(TransferDiscretization, ConformalSolution), CliError> {
    power_of_two(key, n)?;
    let disc = TransferDiscretization::new(map, pot, n).at(key)?;
    let sol = conformal_solve_disc(&disc).at(key)?;
    Ok((disc, sol))
}

fn solution_summary(sol: &ConformalSolution) -> Value {
    json!({
        "map": sol.map,
        "potential": sol.potential,
        "resolution": sol.resolution,
        "lambda": sol.lambda,
        "pressure": sol.pressure,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "no_spectral_gap_guarantee": sol.no_spectral_gap_guarantee,
    })
}

fn ladder_table(name: &str, est: &PressureEstimate) -> Table {
    let mut t = Table::new(name, &["epsilon", "n", "points", "value", "path"]);
    for p in &est.points {
        t.push(vec![num(p.epsilon), p.n.to_string(), p.points.to_string(), num(p.value), format!("{:?}", p.path).to_lowercase()]);
    }
    t
}

pub fn pressure(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let map = map_of(cfg)?;
    let s = &cfg.pressure;
    non_empty("pressure.eps", &s.eps)?;
    non_empty("pressure.n", &s.n)?;
    let choice = match s.path.as_str() {
        "auto" => PathChoice::Auto,
        "enumeration" => PathChoice::Enumeration,
        "greedy" => PathChoice::Greedy,
        other => return Err(CliError::config("pressure.path", format!("unknown path `{other}`"))),
    };
    let est = pressure_separated_with(&map, &cfg.potential, &s.eps, &s.n, choice).at("pressure")?;
    let spectral = if s.spectral_resolution > 0 && map.dimension() == 1 {
        Some(solve(&map, &cfg.potential, s.spectral_resolution, "pressure.spectral_resolution")?.1)
    } else {
        None
    };
    let difference = spectral.as_ref().map(|sol| est.extrapolated - sol.pressure);
    let summary = match &spectral {
        Some(sol) => format!(
            "separated pressure {:.6} ± {:.2e}; spectral {:.6} at N = {}",
            est.extrapolated, est.uncertainty, sol.pressure, sol.resolution
        ),
        None => format!("separated pressure {:.6} ± {:.2e}", est.extrapolated, est.uncertainty),
    };
    Ok(Output {
        result: json!({
            "separated": to_value(&est),
            "spectral": spectral.as_ref().map(solution_summary),
            "difference": difference,
        }),
        tables: vec![ladder_table("ladder.csv", &est)],
        raw: vec![],
        summary,
    })
}

pub fn conformal(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let map = map_of(cfg)?;
    let s = &cfg.conformal;
    let (disc, sol) = solve(&map, &cfg.potential, s.resolution, "conformal.resolution")?;
    let mut restarts = Vec::new();
    for i in 0..s.restarts as u64 {
        let r = conformal_solve_restart(&disc, rng::child_seed(cfg.run.seed, i)).at("conformal")?;
        let l1: f64 = r.nu.masses().iter().zip(sol.nu.masses()).map(|(a, b)| (a - b).abs()).sum();
        restarts.push(json!({"lambda": r.lambda, "l1_distance": l1, "iterations": r.iterations}));
    }
    let jacobian = if s.jacobian_samples > 0 {
        Some(jacobian_check(&sol, &disc, s.jacobian_samples, cfg.run.seed).at("conformal")?)
    } else {
        None
    };
    let h = eigendensity(&disc, sol.lambda).at("conformal")?;
    let eq = equilibrium_measure(&disc, &sol).at("conformal")?;
    let n = sol.resolution;
    let max_cell_dev = sol.nu.masses().iter().map(|m| (m * n as f64 - 1.0).abs()).fold(0.0, f64::max);
    let mut density = Table::new("density.csv", &["cell", "x_lo", "nu", "h", "equilibrium"]);
    for (i, ((nu, hv), e)) in sol.nu.masses().iter().zip(&h).zip(eq.masses()).enumerate() {
        density.push(vec![i.to_string(), num(i as f64 / n as f64), num(*nu), num(*hv), num(*e)]);
    }
    let mut nu_csv = Vec::new();
    Measure::from(sol.nu.clone()).write_csv(&mut nu_csv, Some(cfg.run.seed)).at("conformal")?;
    Ok(Output {
        summary: format!(
            "λ = {:.12}, P = {:.10}, residual {:.1e} after {} iterations",
            sol.lambda, sol.pressure, sol.residual, sol.iterations
        ),
        result: json!({
            "solution": solution_summary(&sol),
            "max_relative_cell_deviation_from_uniform": max_cell_dev,
            "jacobian_max_relative_error": jacobian,
            "restarts": restarts,
        }),
        tables: vec![density],
        raw: vec![("nu.csv".into(), nu_csv)],
    })
}

pub fn gibbs(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let map = map_of(cfg)?;
    let s = &cfg.gibbs;
    let (disc, sol) = solve(&map, &cfg.potential, s.resolution, "gibbs.resolution")?;
    let rep = gibbs_check(&sol, &disc, CirclePoint::from_f64(s.x), s.n_max, s.epsilon, s.alpha).at("gibbs")?;
    let mut t = Table::new("ratios.csv", &["n", "ratio", "log_ratio_rate"]);
    for (i, (r, l)) in rep.ratios.iter().zip(&rep.log_ratio_rate).enumerate() {
        t.push(vec![(i + 1).to_string(), num(*r), num(*l)]);
    }
    let (lo, hi) = rep
        .ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    Ok(Output {
        summary: format!("Gibbs ratios in [{lo:.9}, {hi:.9}] over {} steps", rep.ratios.len()),
        result: json!({"solution": solution_summary(&sol), "gibbs": to_value(&rep), "ratio_min": lo, "ratio_max": hi}),
        tables: vec![t],
        raw: vec![],
    })
}

pub fn entropy(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let map = map_of(cfg)?;
    let s = &cfg.entropy;
    non_empty("entropy.eps", &s.eps)?;
    non_empty("entropy.n", &s.n)?;
    let span = entropy_spanning(&map, &s.eps, &s.n).at("entropy")?;
    let sep = pressure_separated(&map, &Potential::Zero, &s.eps, &s.n).at("entropy")?;
    let mut tables = vec![ladder_table("spanning.csv", &span), ladder_table("separated.csv", &sep)];
    let local = if s.local_samples > 0 {
        let nu = ReferenceMeasure::lebesgue(map.dimension());
        let xs: Vec<Vec<CirclePoint>> = (0..s.local_samples as u64).map(|i| sample_start(&map, cfg.run.seed, i).0).collect();
        let mut t = Table::new("local.csv", &["point", "delta", "n", "ball_mass", "value"]);
        let mut per = Vec::new();
        for (i, x) in xs.iter().enumerate() {
            let le = local_entropy(&map, &nu, x, &s.deltas, &s.local_n).at("entropy")?;
            for p in &le.points {
                t.push(vec![i.to_string(), num(p.delta), p.n.to_string(), num(p.ball_mass), num(p.value)]);
            }
            per.push(le);
        }
        tables.push(t);
        let max = per.iter().map(|l| l.plateau).fold(f64::NEG_INFINITY, f64::max);
        Some(json!({
            "sample_max": max,
            "label": format!("sample maximum over {} Lebesgue-random points", xs.len()),
            "points": to_value(&per),
        }))
    } else {
        None
    };
    Ok(Output {
        summary: format!(
            "spanning entropy {:.6} ± {:.1e}; separated {:.6} ± {:.1e}",
            span.extrapolated, span.uncertainty, sep.extrapolated, sep.uncertainty
        ),
        result: json!({"spanning": to_value(&span), "separated": to_value(&sep), "local": local}),
        tables,
        raw: vec![],
    })
}

pub fn pesin(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let map = map_of(cfg)?;
    let s = &cfg.pesin;
    let pc = PesinConfig {
        partition: s.partition,
        q_max: s.q_max,
        r_ladder: s.r.clone(),
        pressure: s.pressure,
        spectral_resolution: s.spectral_resolution,
        invariance_tol: s.invariance_tol,
    };
    let mut measures: Vec<(Option<u64>, Measure)> = Vec::new();
    match s.measure.as_str() {
        "orbit" => {
            if s.samples == 0 || s.n == 0 {
                return Err(CliError::config("pesin.samples", "samples and n must be positive"));
            }
            for i in 0..s.samples as u64 {
                let (x, seed) = sample_start(&map, cfg.run.seed, i);
                let orbit = iterate(&map, &x, s.n, seed).at("pesin")?;
                measures.push((Some(seed), empirical(&orbit).into()));
            }
        }
        "dirac" => {
            if s.dirac_x.len() != map.dimension() {
                return Err(CliError::config("pesin.dirac_x", "coordinate count must match the map dimension"));
            }
            let pt: Vec<CirclePoint> = s.dirac_x.iter().map(|&v| CirclePoint::from_f64(v)).collect();
            let mut image = vec![CirclePoint::ZERO; pt.len()];
            map.eval_point(&pt, &mut image);
            if pt.iter().zip(&image).any(|(a, b)| a.distance(*b) > 1e-12) {
                return Err(CliError::config("pesin.dirac_x", "a Dirac mass is invariant only at a fixed point"));
            }
            let d = EmpiricalMeasure::dirac(&s.dirac_x).at("pesin.dirac_x")?.with_provenance(Provenance {
                map: map.name(),
                seed: cfg.run.seed,
                len: 1,
            });
            measures.push((None, d.into()));
        }
        "lebesgue" => {
            power_of_two("pesin.ulam_resolution", s.ulam_resolution)?;
            measures.push((None, UlamMeasure::lebesgue(map.dimension(), s.ulam_resolution).at("pesin.ulam_resolution")?.into()));
        }
        other => return Err(CliError::config("pesin.measure", format!("unknown measure `{other}`"))),
    }
    let mut reports = Vec::new();
    let mut defects = Table::new(
        "defects.csv",
        &["sample", "seed", "entropy", "entropy_uncertainty", "integral_psi", "lyapunov_sum", "defect", "pressure"],
    );
    let mut kr = Table::new("kr.csv", &["sample", "r", "member"]);
    for (i, (seed, mu)) in measures.iter().enumerate() {
        let rep = pesin_defect(&map, mu, &pc).at("pesin")?;
        defects.push(vec![
            i.to_string(),
            seed.map(|s| s.to_string()).unwrap_or_default(),
            num(rep.entropy.value),
            num(rep.entropy.uncertainty),
            num(rep.integral_psi.value),
            num(rep.lyapunov_sum.value),
            num(rep.defect),
            num(rep.pressure.value),
        ]);
        for v in &rep.kr {
            kr.push(vec![i.to_string(), num(v.r), v.member.to_string()]);
        }
        reports.push(rep);
    }
    let max_abs = reports.iter().map(|r| r.defect.abs()).fold(0.0, f64::max);
    let mean = reports.iter().map(|r| r.defect).sum::<f64>() / reports.len() as f64;
    Ok(Output {
        summary: format!("{} measure(s); mean defect {mean:.6}, max |defect| {max_abs:.6}", reports.len()),
        result: json!({"reports": to_value(&reports), "mean_defect": mean, "max_abs_defect": max_abs}),
        tables: vec![defects, kr],
        raw: vec![],
    })
}

pub fn hyp_times(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let map = map_of(cfg)?;
    let s = &cfg.hyp_times;
    if !(s.sigma > 0.0 && s.sigma < 1.0) {
        return Err(CliError::config("hyp_times.sigma", format!("σ = {} must lie in (0, 1)", s.sigma)));
    }
    let freq = ht_frequency(&map, s.sigma, s.n, s.samples, cfg.run.seed).at("hyp_times")?;
    let (x, seed) = sample_start(&map, cfg.run.seed, 0);
    let orbit = iterate(&map, &x, s.n, seed).at("hyp_times")?;
    let member = expanding_membership(&orbit, s.sigma).at("hyp_times")?;
    let mut t = Table::new("thetas.csv", &["sample", "seed", "theta"]);
    for (i, (seed, th)) in freq.seeds.iter().zip(&freq.thetas).enumerate() {
        t.push(vec![i.to_string(), seed.to_string(), num(*th)]);
    }
    Ok(Output {
        summary: format!(
            "θ̂ mean {:.6}, 5th percentile {:.6} ({})",
            freq.mean, freq.p5, freq.horizon_label
        ),
        result: json!({"frequency": to_value(&freq), "membership_sample_0": to_value(&member)}),
        tables: vec![t],
        raw: vec![],
    })
}

fn target_measure(cfg: &ExperimentConfig, dim: usize) -> Result<(Measure, String), CliError> {
    let s = &cfg.srb_scan;
    match s.target.as_str() {
        "lebesgue" => Ok((UlamMeasure::lebesgue(dim, 64).at("srb_scan.target")?.into(), "lebesgue".into())),
        "dirac" => {
            if s.target_x.len() != dim {
                return Err(CliError::config("srb_scan.target_x", "coordinate count must match the map dimension"));
            }
            let label = format!("dirac{:?}", s.target_x);
            Ok((EmpiricalMeasure::dirac(&s.target_x).at("srb_scan.target_x")?.into(), label))
        }
        other => Err(CliError::config("srb_scan.target", format!("unknown target `{other}`"))),
    }
}

pub fn srb_scan(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let map = map_of(cfg)?;
    let s = &cfg.srb_scan;
    let dim = map.dimension();
    non_empty("srb_scan.eps", &s.eps)?;
    non_empty("srb_scan.n", &s.n)?;
    let basis = TestFunctionBasis::new(s.basis_k, dim).at("srb_scan.basis_k")?;
    let (target, label) = target_measure(cfg, dim)?;
    let nu = match s.reference.as_str() {
        "lebesgue" => ReferenceMeasure::lebesgue(dim),
        "conformal" => ReferenceMeasure::ulam(solve(&map, &cfg.potential, s.reference_resolution, "srb_scan.reference_resolution")?.1.nu),
        other => return Err(CliError::config("srb_scan.reference", format!("unknown reference `{other}`"))),
    };
    let est = pseudo_basin_masses(&map, &target, &label, &s.eps, &s.n, s.samples, cfg.run.seed, &nu, &basis).at("srb_scan")?;
    let verdict = weak_srb_verdict(&est).at("srb_scan")?;
    let alt = if s.alt_basis_k > 0 {
        let b = TestFunctionBasis::new(s.alt_basis_k, dim).at("srb_scan.alt_basis_k")?;
        let e = pseudo_basin_masses(&map, &target, &label, &s.eps, &s.n, s.samples, cfg.run.seed, &nu, &b).at("srb_scan")?;
        Some(weak_srb_verdict(&e).at("srb_scan")?)
    } else {
        None
    };
    let mut rows = Table::new("rows.csv", &["epsilon", "seed", "n", "dist", "hit"]);
    let mut masses = Table::new(
        "masses.csv",
        &["epsilon", "n", "hits", "samples", "mass", "wilson_lo", "wilson_hi", "log_rate"],
    );
    for e in &est {
        for r in &e.rows {
            rows.push(vec![num(e.epsilon), r.seed.to_string(), r.n.to_string(), num(r.dist), r.hit.to_string()]);
        }
        for p in &e.points {
            masses.push(vec![
                num(e.epsilon),
                p.n.to_string(),
                p.hits.to_string(),
                p.samples.to_string(),
                num(p.mass),
                num(p.wilson.0),
                num(p.wilson.1),
                p.log_rate.map(num).unwrap_or_default(),
            ]);
        }
    }
    let mut tables = vec![rows, masses];
    let mut clusters = Vec::new();
    if !s.cluster_horizons.is_empty() {
        let target_m = target.moments(&basis).at("srb_scan")?;
        let reps = srb_cluster_horizons(&map, &s.cluster_horizons, s.cluster_samples, s.cluster_eps, cfg.run.seed, &basis)
            .at("srb_scan")?;
        let mut t = Table::new(
            "clusters.csv",
            &["horizon", "cluster", "size", "mass", "diameter", "max_dist_to_centroid", "centroid_dist_to_target"],
        );
        for r in &reps {
            for (i, c) in r.clusters.iter().enumerate() {
                t.push(vec![
                    r.horizon.to_string(),
                    i.to_string(),
                    c.members.len().to_string(),
                    num(c.mass),
                    num(c.diameter),
                    num(c.max_dist_to_centroid),
                    num(c.centroid.dist(&target_m).at("srb_scan")?),
                ]);
            }
            clusters.push(json!({
                "report": to_value(r),
                "overall_centroid_dist_to_target": r.overall_centroid.dist(&target_m).at("srb_scan")?,
            }));
        }
        tables.push(t);
    }
    let basis_agreement = alt.as_ref().map(|a| a.positive == verdict.positive);
    Ok(Output {
        summary: format!(
            "{}: {} ({})",
            label,
            if verdict.positive { "weak-SRB-like" } else { "not weak-SRB-like" },
            verdict.resolution_tag
        ),
        result: json!({
            "estimates": to_value(&est),
            "verdict": to_value(&verdict),
            "alt_basis_verdict": alt.as_ref().map(to_value),
            "basis_agreement": basis_agreement,
            "clusters": clusters,
        }),
        tables,
        raw: vec![],
    })
}

pub fn ldp(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let map = map_of(cfg)?;
    if cfg.map != MapSpec::Doubling {
        return Err(CliError::config("map.family", "ldp is defined for the doubling map only"));
    }
    let s = &cfg.ldp;
    if !(s.p0 > 0.5 && s.p0 <= 1.0) {
        return Err(CliError::config("ldp.p0", format!("p0 = {} must lie in (1/2, 1]", s.p0)));
    }
    non_empty("ldp.n", &s.n)?;
    let rep = ldp_rate(&map, s.p0, &s.n, s.samples, cfg.run.seed).at("ldp")?;
    let mut t = Table::new(
        "ldp.csv",
        &[
            "n", "threshold", "exact_count", "exact_probability", "exact_rate", "mc_hits", "mc_samples",
            "mc_fraction", "wilson_lo", "wilson_hi",
        ],
    );
    for p in &rep.points {
        t.push(vec![
            p.n.to_string(),
            p.threshold.to_string(),
            p.exact_count.map(|c| c.to_string()).unwrap_or_default(),
            p.exact_probability.map(num).unwrap_or_default(),
            p.exact_rate.map(num).unwrap_or_default(),
            p.mc_hits.to_string(),
            p.mc_samples.to_string(),
            num(p.mc_fraction),
            num(p.wilson.0),
            num(p.wilson.1),
        ]);
    }
    let last = rep.points.last().expect("ladder is non-empty");
    Ok(Output {
        summary: format!(
            "limit rate {:.6}; at n = {}: exact rate {}, Monte Carlo fraction {:.3e}",
            rep.limit_rate,
            last.n,
            last.exact_rate.map(|r| format!("{r:.6}")).unwrap_or_else(|| "n/a".into()),
            last.mc_fraction
        ),
        result: to_value(&rep),
        tables: vec![t],
        raw: vec![],
    })
}
