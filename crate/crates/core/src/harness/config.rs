use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curve::CurveSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Calibrate,
    Sample,
    Condition,
    Verify,
    Profile,
    Oracle,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Calibrate => "calibrate",
            Mode::Sample => "sample",
            Mode::Condition => "condition",
            Mode::Verify => "verify",
            Mode::Profile => "profile",
            Mode::Oracle => "oracle",
        }
    }
}

/// How the second endpoint coordinate follows `n1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AspectRule {
    /// `n2 = round(c_γ n1)`.
    #[default]
    Round,
    /// Explicit `n2` for every entry of the `n1` list.
    Explicit(Vec<u64>),
}

/// One capped instance for the exact-enumeration comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub curve: CurveSpec,
    pub n: [u64; 2],
    #[serde(default = "default_cap")]
    pub cap_radius: u32,
    #[serde(default = "default_cap")]
    pub nu_cap: u32,
}

fn default_cap() -> u32 {
    4
}

/// Local-CLT study settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcltSettings {
    pub n1: u64,
    pub replicates: u64,
    /// Half-width of the grid of cells around the mean.
    #[serde(default = "default_half_width")]
    pub half_width: i64,
}

fn default_half_width() -> i64 {
    2
}

fn default_epsilons() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

fn default_max_attempts() -> u64 {
    10_000_000
}

fn default_workers() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub curve: CurveSpec,
    pub n1: Vec<u64>,
    #[serde(default)]
    pub aspect: AspectRule,
    pub replicates: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Rejection budget per conditioned line.
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u64,
    /// Run the limit-shape study under the endpoint-conditioned measure.
    #[serde(default)]
    pub conditioned: bool,
    #[serde(default)]
    pub lclt: Vec<LcltSettings>,
    #[serde(default)]
    pub oracle: Vec<OracleInstance>,
    /// Accepted draws per oracle instance.
    #[serde(default)]
    pub oracle_draws: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n1.is_empty() && self.lclt.is_empty() && self.oracle.is_empty() {
            return bad("n1 list is empty".into());
        }
        if self.n1.windows(2).any(|w| w[0] >= w[1]) || self.n1.first() == Some(&0) {
            return bad(format!("n1 list must be positive and strictly increasing, got {:?}", self.n1));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad(format!("epsilons must be positive, got {:?}", self.epsilons));
        }
        if let AspectRule::Explicit(n2) = &self.aspect {
            if n2.len() != self.n1.len() || n2.contains(&0) {
                return bad("explicit n2 list must match n1 and be positive".into());
            }
        }
        Ok(())
    }

    /// Endpoints `(n1, n2)` of the study, following the aspect rule.
    pub fn endpoints(&self, c_gamma: f64) -> Vec<[u64; 2]> {
        match &self.aspect {
            AspectRule::Round => self.n1.iter().map(|&n| [n, ((c_gamma * n as f64).round() as u64).max(1)]).collect(),
            AspectRule::Explicit(n2) => self.n1.iter().copied().zip(n2.iter().copied()).map(|(a, b)| [a, b]).collect(),
        }
    }
}

/// Engineering tolerances for the acceptance checks, versioned separately
/// from the code that applies them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub version: u32,
    pub calibration_residual: f64,
    pub tabulated_calibration_residual: f64,
    pub parabola_constancy: f64,
    pub mobius_relative: f64,
    pub inverse_zeta2: f64,
    pub mean_length_gap: f64,
    pub endpoint_bias_slope: f64,
    pub covariance_ratio: [f64; 2],
    pub lclt_ratio: [f64; 2],
    pub lclt_scaling_tolerance: f64,
    pub lclt_min_expected_hits: f64,
    pub limit_shape_epsilon: f64,
    pub limit_shape_fraction: f64,
    pub conditioned_min_accepted: u64,
    pub oracle_sigma: f64,
}

const THRESHOLDS_JSON: &str = include_str!("../../thresholds.json");

impl Thresholds {
    pub fn pinned() -> Self {
        serde_json::from_str(THRESHOLDS_JSON).expect("bundled thresholds file is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_thresholds_parse() {
        let t = Thresholds::pinned();
        assert_eq!(t.version, 1);
        assert_eq!(t.covariance_ratio, [0.9, 1.1]);
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = ExperimentConfig::from_json(
            r#"{"curve": {"preset": {"name": "parabola", "c": 2.0}}, "n1": [10, 20], "replicates": 3}"#,
        )
        .unwrap();
        assert_eq!(cfg.endpoints(2.0), vec![[10, 20], [20, 40]]);
        assert_eq!(cfg.epsilons, vec![0.2, 0.1, 0.05]);
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
        let bad = r#"{"curve": {"preset": {"name": "circle_arc"}}, "n1": [20, 10], "replicates": 3}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::InvalidConfig(_))));
        let bad = r#"{"curve": {"preset": {"name": "circle_arc"}}, "n1": [10], "replicates": 0}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::InvalidConfig(_))));
        let tab = r#"{"curve": {"tabulated": {"points": [[0,0],[1,1]], "k0": 0.1}}, "n1": [10], "replicates": 1}"#;
        assert!(ExperimentConfig::from_json(tab).is_ok());
    }
}
