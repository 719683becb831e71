//! Experiment configuration: one TOML document with a `[map]`, a
//! `[potential]`, a `[run]` section and one section per subcommand. Every
//! field except the map family has a default.

use std::path::{Path, PathBuf};

use ergolab_core::{MapSpec, Potential};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "doubling")]
    pub map: MapSpec,
    #[serde(default = "zero_potential")]
    pub potential: Potential,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub pressure: PressureSection,
    #[serde(default)]
    pub conformal: ConformalSection,
    #[serde(default)]
    pub gibbs: GibbsSection,
    #[serde(default)]
    pub entropy: EntropySection,
    #[serde(default)]
    pub pesin: PesinSection,
    #[serde(default)]
    pub hyp_times: HypTimesSection,
    #[serde(default)]
    pub srb_scan: SrbScanSection,
    #[serde(default)]
    pub ldp: LdpSection,
    #[serde(default)]
    pub suite: SuiteSection,
}

fn doubling() -> MapSpec {
    MapSpec::Doubling
}

fn zero_potential() -> Potential {
    Potential::Zero
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            map: doubling(),
            potential: zero_potential(),
            run: RunSection::default(),
            pressure: PressureSection::default(),
            conformal: ConformalSection::default(),
            gibbs: GibbsSection::default(),
            entropy: EntropySection::default(),
            pesin: PesinSection::default(),
            hyp_times: HypTimesSection::default(),
            srb_scan: SrbScanSection::default(),
            ldp: LdpSection::default(),
            suite: SuiteSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            out: PathBuf::from("ergolab-out"),
        }
    }
}

fn default_eps() -> Vec<f64> {
    vec![1.0 / 16.0, 1.0 / 64.0, 1.0 / 128.0]
}

fn default_n() -> Vec<usize> {
    vec![8, 10, 12, 14, 16]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PressureSection {
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    /// `auto`, `enumeration` or `greedy`.
    pub path: String,
    /// Also solve the transfer operator at this resolution (0 disables).
    pub spectral_resolution: usize,
}

impl Default for PressureSection {
    fn default() -> Self {
        PressureSection {
            eps: default_eps(),
            n: default_n(),
            path: "auto".into(),
            spectral_resolution: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConformalSection {
    pub resolution: usize,
    /// Extra solves from random starting vectors.
    pub restarts: usize,
    pub jacobian_samples: usize,
}

impl Default for ConformalSection {
    fn default() -> Self {
        ConformalSection {
            resolution: 4096,
            restarts: 2,
            jacobian_samples: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsSection {
    pub resolution: usize,
    pub x: f64,
    pub n_max: usize,
    pub epsilon: f64,
    pub alpha: f64,
}

impl Default for GibbsSection {
    fn default() -> Self {
        GibbsSection {
            resolution: 4096,
            x: 0.3,
            n_max: 30,
            epsilon: 0.1,
            alpha: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropySection {
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    /// Lebesgue-random points for the local-entropy sample maximum.
    pub local_samples: usize,
    pub deltas: Vec<f64>,
    pub local_n: Vec<usize>,
}

impl Default for EntropySection {
    fn default() -> Self {
        EntropySection {
            eps: default_eps(),
            n: default_n(),
            local_samples: 8,
            deltas: vec![0.1, 0.05],
            local_n: vec![1, 5, 10, 15, 20],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PesinSection {
    /// `orbit`, `dirac` or `lebesgue`.
    pub measure: String,
    pub samples: usize,
    pub n: usize,
    pub dirac_x: Vec<f64>,
    pub ulam_resolution: usize,
    pub partition: usize,
    pub q_max: usize,
    pub r: Vec<f64>,
    pub pressure: Option<f64>,
    pub spectral_resolution: usize,
    pub invariance_tol: f64,
}

impl Default for PesinSection {
    fn default() -> Self {
        PesinSection {
            measure: "orbit".into(),
            samples: 20,
            n: 100_000,
            dirac_x: vec![0.0],
            ulam_resolution: 256,
            partition: 2,
            q_max: 10,
            r: vec![0.5, 0.2, 0.1, 0.05],
            pressure: None,
            spectral_resolution: 4096,
            invariance_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypTimesSection {
    pub sigma: f64,
    pub n: usize,
    pub samples: usize,
}

impl Default for HypTimesSection {
    fn default() -> Self {
        HypTimesSection {
            sigma: 0.75,
            n: 10_000,
            samples: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrbScanSection {
    /// `lebesgue` or `dirac`.
    pub target: String,
    pub target_x: Vec<f64>,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub samples: usize,
    pub basis_k: usize,
    /// Second truncation order for the cross-basis comparison (0 disables).
    pub alt_basis_k: usize,
    /// `lebesgue` or `conformal` (the eigenmeasure of `[potential]`).
    pub reference: String,
    pub reference_resolution: usize,
    pub cluster_horizons: Vec<usize>,
    pub cluster_samples: usize,
    pub cluster_eps: f64,
}

impl Default for SrbScanSection {
    fn default() -> Self {
        SrbScanSection {
            target: "lebesgue".into(),
            target_x: vec![0.0],
            eps: vec![0.2, 0.1],
            n: vec![4, 8, 12, 16, 20],
            samples: 20_000,
            basis_k: 32,
            alt_basis_k: 16,
            reference: "lebesgue".into(),
            reference_resolution: 4096,
            cluster_horizons: vec![1000, 10_000],
            cluster_samples: 50,
            cluster_eps: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpSection {
    pub p0: f64,
    pub n: Vec<usize>,
    pub samples: u64,
}

impl Default for LdpSection {
    fn default() -> Self {
        LdpSection {
            p0: 0.9,
            n: vec![4, 8, 12, 16, 20, 24],
            samples: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    pub criteria: Vec<u32>,
}

impl Default for SuiteSection {
    fn default() -> Self {
        SuiteSection {
            criteria: (1..=10).collect(),
        }
    }
}

/// Sets `a.b.c = value` inside a TOML table, creating sections as needed.
fn set_dotted(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(key, "malformed key"));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(key, format!("`{part}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Parses the right-hand side of `--set key=value` as a TOML value, falling
/// back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub set: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config("<document>", e.to_string()))?;
        for item in &overrides.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::config(item, "override must look like key=value"))?;
            set_dotted(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        if let Some(seed) = overrides.seed {
            let seed = i64::try_from(seed).map_err(|_| CliError::config("run.seed", "seed must be below 2^63"))?;
            set_dotted(&mut table, "run.seed", toml::Value::Integer(seed))?;
        }
        if let Some(out) = &overrides.out {
            set_dotted(&mut table, "run.out", toml::Value::String(out.display().to_string()))?;
        }
        ExperimentConfig::deserialize(toml::Value::Table(table)).map_err(|e| {
            let msg = e.to_string();
            let key = e
                .span()
                .map(|_| "<document>".to_string())
                .unwrap_or_else(|| key_from_message(&msg));
            CliError::config(key, msg.trim().to_string())
        })
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    /// Canonical JSON form, embedded in every report.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is always serializable")
    }
}

/// Best-effort key extraction from a serde message such as
/// "unknown field `alpah`, expected ..." or "... for key `map.alpha`".
fn key_from_message(msg: &str) -> String {
    if let Some(rest) = msg.split("for key `").nth(1) {
        if let Some(k) = rest.split('`').next() {
            return k.to_string();
        }
    }
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(k) = rest.split('`').next() {
                return k.to_string();
            }
        }
    }
    "<document>".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_toml_str("", &Overrides::default()).unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn flags_override_file() {
        let text = "[run]\nseed = 3\n[map]\nfamily = \"nue_deform\"\na = 0.1\n";
        let o = Overrides {
            seed: Some(9),
            out: Some("x".into()),
            set: vec!["map.a=0.2".into(), "conformal.resolution=1024".into()],
        };
        let c = ExperimentConfig::from_toml_str(text, &o).unwrap();
        assert_eq!(c.run.seed, 9);
        assert_eq!(c.run.out, PathBuf::from("x"));
        assert_eq!(c.map, MapSpec::NueDeform { a: 0.2 });
        assert_eq!(c.conformal.resolution, 1024);
    }

    #[test]
    fn bad_keys_are_named() {
        let e = ExperimentConfig::from_toml_str("[conformal]\nresolutoin = 5\n", &Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("resolutoin"), "{e}");
        let e = ExperimentConfig::from_toml_str("[map]\nfamily = \"tent\"\n", &Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("tent"), "{e}");
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text, &Overrides::default()).unwrap(), c);
    }
}
