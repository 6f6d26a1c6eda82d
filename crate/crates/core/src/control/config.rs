use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::command::{CommandKind, GestureMapping};
use super::grid::{ActionGrid, SpeedPolicy};
use super::planner::FlightParams;

/// Everything between a classifier output and a trajectory segment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawControl", into = "RawControl")]
pub struct ControlConfig {
    pub mapping: GestureMapping,
    pub grid: ActionGrid,
    pub policy: SpeedPolicy,
    pub flight: FlightParams,
}

// TOML table keys are strings, so the mapping travels as {"0": "land", ...}
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    #[serde(default)]
    mapping: Option<BTreeMap<String, CommandKind>>,
    #[serde(default)]
    grid: Option<ActionGrid>,
    #[serde(default)]
    policy: SpeedPolicy,
    #[serde(default)]
    flight: FlightParams,
}

impl TryFrom<RawControl> for ControlConfig {
    type Error = Error;
    fn try_from(raw: RawControl) -> Result<Self> {
        let mapping = match raw.mapping {
            None => GestureMapping::default(),
            Some(m) => {
                let table = m
                    .into_iter()
                    .map(|(k, v)| {
                        k.trim()
                            .parse::<usize>()
                            .map(|id| (id, v))
                            .map_err(|_| Error::invalid(format!("mapping.{k}"), "key must be a class id"))
                    })
                    .collect::<Result<BTreeMap<_, _>>>()?;
                GestureMapping::new(table)?
            }
        };
        let cfg = ControlConfig {
            mapping,
            grid: raw.grid.unwrap_or_default(),
            policy: raw.policy,
            flight: raw.flight,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<ControlConfig> for RawControl {
    fn from(c: ControlConfig) -> Self {
        RawControl {
            mapping: Some(c.mapping.entries().map(|(id, k)| (id.to_string(), k)).collect()),
            grid: Some(c.grid),
            policy: c.policy,
            flight: c.flight,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.flight.validate()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ControlConfig::from_toml_str("").unwrap(), ControlConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let c = ControlConfig::default();
        let s = c.to_toml_string().unwrap();
        assert_eq!(ControlConfig::from_toml_str(&s).unwrap(), c);
    }

    #[test]
    fn custom_mapping_and_errors() {
        let c = ControlConfig::from_toml_str(
            "policy = \"proximity\"\n[mapping]\n0 = \"takeoff\"\n1 = \"land\"\n[flight]\nv_unit = 0.5\n",
        )
        .unwrap();
        assert_eq!(c.mapping.get(0), Some(CommandKind::Takeoff));
        assert_eq!(c.mapping.len(), 2);
        assert_eq!(c.flight.v_unit, 0.5);
        assert_eq!(c.policy, SpeedPolicy::Proximity);

        assert!(ControlConfig::from_toml_str("[mapping]\nx = \"land\"\n").is_err());
        assert!(ControlConfig::from_toml_str("[mapping]\n0 = \"hover\"\n").is_err());
        assert!(ControlConfig::from_toml_str("[grid]\nn = 3\nspeeds = [1,1,1,1,1,1,1,1,1]\n").is_err());
    }
}
