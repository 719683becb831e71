use std::path::Path;
use std::process::{Command, Output};

use ergolab_cli::config::{ExperimentConfig, Overrides};
use proptest::prelude::*;

fn ergolab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergolab"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn conformal_rejects_non_dyadic_resolution() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "[conformal]\nresolution = 3000\n");
    let out = ergolab(&["conformal", "--config", "c.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("conformal.resolution"), "{err}");
    assert!(!dir.path().join("o/conformal/report.json").exists());
}

#[test]
fn pesin_happy_path_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p.toml", "[map]\nfamily = \"doubling\"\n[pesin]\nsamples = 2\nn = 20000\n");
    let out = ergolab(&["pesin", "--config", "p.toml", "--seed", "11", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("o/pesin/report.json"));
    assert_eq!(report["schema"], 1);
    assert_eq!(report["subcommand"], "pesin");
    assert_eq!(report["config"]["run"]["seed"], 11);
    assert_eq!(report["config_sha256"].as_str().unwrap().len(), 64);
    for r in report["result"]["reports"].as_array().unwrap() {
        assert!(r["defect"].as_f64().unwrap().abs() < 0.05);
    }
    let csv = std::fs::read_to_string(dir.path().join("o/pesin/defects.csv")).unwrap();
    assert!(csv.starts_with("sample,seed,entropy,"));
    assert_eq!(csv.lines().count(), 3);
    // only finished artifacts remain in the directory
    let names: Vec<String> = std::fs::read_dir(dir.path().join("o/pesin"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| n.ends_with(".csv") || n.ends_with(".json")), "{names:?}");
}

#[test]
fn unknown_key_and_bad_family_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.toml", "[gibbs]\nepsilonn = 0.1\n");
    let out = ergolab(&["gibbs", "--config", "a.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilonn"));
    let out = ergolab(&["ldp", "--set", "map.family=\"sqrt_circle\""], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("map.family"));
    let out = ergolab(&["pressure", "--set", "map.family=\"nue_deform\"", "--set", "map.a=0.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("map.a"));
}

#[test]
fn subcommands_do_not_touch_each_other() {
    let dir = tempfile::tempdir().unwrap();
    let a = ergolab(&["gibbs", "--out", "o", "--set", "gibbs.resolution=256", "--set", "potential.name=\"constant\"", "--set", "potential.value=-0.6931471805599453"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let before = std::fs::read(dir.path().join("o/gibbs/report.json")).unwrap();
    let b = ergolab(&["ldp", "--out", "o", "--set", "ldp.samples=1000", "--set", "ldp.n=[8,12]"], dir.path());
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("o/gibbs/report.json")).unwrap(), before);
    let gibbs = read_json(&dir.path().join("o/gibbs/report.json"));
    assert!((gibbs["result"]["ratio_max"].as_f64().unwrap() - 0.4).abs() < 1e-9);
}

#[test]
fn suite_subset_passes_and_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = ergolab(&["suite", "--out", "o", "--set", "suite.criteria=[2,3,10]"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("PASS").count(), 3, "{stdout}");
    let checks = std::fs::read_to_string(dir.path().join("o/suite/checks.csv")).unwrap();
    assert!(checks.starts_with("criterion,title,check,value,bound,pass\r\n"));
}

#[test]
fn srb_scan_and_hyp_times_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["srb-scan", "--out", "o", "--seed", "5", "--set", "srb_scan.samples=300", "--set", "srb_scan.cluster_horizons=[200]"];
    ergolab(&args, dir.path());
    let first = std::fs::read(dir.path().join("o/srb-scan/rows.csv")).unwrap();
    let report = std::fs::read(dir.path().join("o/srb-scan/report.json")).unwrap();
    ergolab(&args, dir.path());
    assert_eq!(std::fs::read(dir.path().join("o/srb-scan/rows.csv")).unwrap(), first);
    assert_eq!(std::fs::read(dir.path().join("o/srb-scan/report.json")).unwrap(), report);
    let h = ergolab(&["hyp-times", "--out", "o", "--set", "hyp_times.samples=5", "--set", "hyp_times.n=500"], dir.path());
    assert_eq!(h.status.code(), Some(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn configs_round_trip(seed in 0u64..1 << 62, eps in prop::collection::vec(0.001f64..0.5, 1..5), n in prop::collection::vec(1usize..40, 1..6), a in 0.0f64..0.3) {
        let mut c = ExperimentConfig::default();
        c.run.seed = seed;
        c.pressure.eps = eps;
        c.pressure.n = n;
        c.map = ergolab_core::MapSpec::NueDeform { a };
        let text = toml::to_string(&c).unwrap();
        let back = ExperimentConfig::from_toml_str(&text, &Overrides::default()).unwrap();
        prop_assert_eq!(back, c);
    }
}
