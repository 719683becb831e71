use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ErgoError, Result};
use crate::maps::MapModel;

/// Continuous potentials `φ` for pressure, conformal measures and Gibbs checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    Constant { value: f64 },
    /// `amplitude · cos(2π · frequency · x)`, summed over coordinates.
    Cos {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one_u32")]
        frequency: u32,
    },
    /// The geometric potential `ψ = -log |det Df|`.
    Psi,
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

impl Potential {
    pub fn from_name(name: &str, value: Option<f64>) -> Result<Self> {
        Ok(match name {
            "zero" => Potential::Zero,
            "constant" => Potential::Constant {
                value: value.ok_or(ErgoError::MissingParam("value"))?,
            },
            "cos" => Potential::Cos {
                amplitude: value.unwrap_or(1.0),
                frequency: 1,
            },
            "psi" => Potential::Psi,
            other => return Err(ErgoError::UnknownPotential(other.to_string())),
        })
    }

    pub fn label(&self) -> String {
        match self {
            Potential::Zero => "zero".into(),
            Potential::Constant { value } => format!("constant({value})"),
            Potential::Cos {
                amplitude,
                frequency,
            } => format!("cos(amplitude={amplitude},frequency={frequency})"),
            Potential::Psi => "psi".into(),
        }
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self, Potential::Psi)
    }

    #[inline]
    pub fn eval(&self, map: &MapModel, x: &[f64]) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Constant { value } => value,
            Potential::Cos {
                amplitude,
                frequency,
            } => x
                .iter()
                .map(|&xi| amplitude * (2.0 * PI * frequency as f64 * xi).cos())
                .sum(),
            Potential::Psi => -map.log_det(x),
        }
    }

    /// Birkhoff sum `S_nφ(x)` along a double-precision orbit of the
    /// one-dimensional map.
    pub fn birkhoff_sum_1d(&self, map: &MapModel, x: f64, n: usize) -> f64 {
        let f = &map.factors()[0];
        let mut y = x;
        let mut s = 0.0;
        for _ in 0..n {
            s += self.eval(map, &[y]);
            y = f.eval(y);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{make_map, MapSpec};

    #[test]
    fn values() {
        let m = make_map(&MapSpec::Doubling).unwrap();
        assert_eq!(Potential::Psi.eval(&m, &[0.3]), -(2f64.ln()));
        let c = Potential::from_name("cos", None).unwrap();
        assert!((c.eval(&m, &[0.5]) + 1.0).abs() < 1e-15);
        assert!(Potential::from_name("constant", None).is_err());
        assert!(matches!(
            Potential::from_name("nope", None),
            Err(ErgoError::UnknownPotential(_))
        ));
        let s = Potential::Constant { value: -2f64.ln() }.birkhoff_sum_1d(&m, 0.1, 7);
        assert!((s + 7.0 * 2f64.ln()).abs() < 1e-14);
    }
}
