//! Scenario files: which construction to build, with which parameters and
//! sample plan, and per-check tolerance overrides.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::almost_kahler::ChainMomentMap;
use crate::twist::TwistMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub builder: String,
    #[serde(default)]
    pub params: BuilderParams,
    #[serde(default)]
    pub plan: PlanSpec,
    /// Tolerance overrides keyed by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

/// Builder parameters; each builder reads the ones it understands and
/// rejects the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<TwistMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_map: Option<ChainMomentMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl BuilderParams {
    /// Names of the parameters that are set.
    pub fn set_names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let flags = [
            ("n", self.n.is_some()),
            ("a", self.a.is_some()),
            ("z_range", self.z_range.is_some()),
            ("base", self.base.is_some()),
            ("twist", self.twist.is_some()),
            ("mode", self.mode.is_some()),
            ("moment_map", self.moment_map.is_some()),
            ("m", self.m.is_some()),
        ];
        for (name, set) in flags {
            if set {
                v.push(name);
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub seed: u64,
    pub samples: usize,
}

impl Default for PlanSpec {
    fn default() -> Self {
        PlanSpec { seed: 1, samples: 20 }
    }
}

impl Scenario {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.plan.samples == 0 {
            return Err(CliError::Param("plan.samples must be positive".into()));
        }
        if let Some([lo, hi]) = self.params.z_range {
            if !(lo < hi) {
                return Err(CliError::Param(format!("z_range [{lo}, {hi}] is empty")));
            }
        }
        for (k, v) in &self.tolerances {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(CliError::Param(format!("tolerance for {k} must be a nonnegative number")));
            }
        }
        Ok(())
    }
}
