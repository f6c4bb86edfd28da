//! Experiment configuration: a single JSON document, every field optional.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::channel::{LinkModel, OpticsConfig, RadianceSchedule, SourceConfig};
use crate::error::{Error, Result};
use crate::finite_key::SecurityParams;
use crate::orbit::{ConstellationConfig, GroundStation};
use crate::strategy::{BlockingPolicy, GridSpec, SearchGrids};

/// Two station names, written `A:B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StationPair {
    pub a: String,
    pub b: String,
}

impl StationPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Self {
        StationPair {
            a: a.into(),
            b: b.into(),
        }
    }

    /// File-name friendly form, `A-B`.
    pub fn slug(&self) -> String {
        format!("{}-{}", self.a, self.b)
    }
}

impl fmt::Display for StationPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.a, self.b)
    }
}

impl FromStr for StationPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((a, b)) if !a.is_empty() && !b.is_empty() && !b.contains(':') => {
                Ok(StationPair::new(a, b))
            }
            _ => Err(Error::validation(
                "pairs",
                format!("`{s}` is not of the form A:B"),
            )),
        }
    }
}

impl Serialize for StationPair {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StationPair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadianceConfig {
    pub interval_scales: [f64; 4],
    /// Background photons per second per detector at scale 1.
    pub base_flux: f64,
}

impl Default for RadianceConfig {
    fn default() -> Self {
        RadianceConfig {
            interval_scales: RadianceSchedule::default().interval_scales,
            base_flux: LinkModel::default().base_flux,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub constellation: ConstellationConfig,
    /// Altitudes to sweep (m). Empty means `constellation.altitude` alone.
    pub altitudes: Vec<f64>,
    pub stations: Vec<GroundStation>,
    pub pairs: Vec<StationPair>,
    pub source: SourceConfig,
    pub optics: OpticsConfig,
    pub radiance: RadianceConfig,
    pub basis_bias: f64,
    pub security: SecurityParams,
    pub grids: GridSpec,
    pub policies: Vec<BlockingPolicy>,
    pub horizon: u64,
    pub time_step: u64,
    pub min_elevation: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            constellation: ConstellationConfig::default(),
            altitudes: vec![500_000.0, 800_000.0, 1_000_000.0, 1_300_000.0],
            stations: vec![
                GroundStation::washington_dc(),
                GroundStation::toronto(),
                GroundStation::houston(),
            ],
            pairs: vec![
                StationPair::new("Toronto", "DC"),
                StationPair::new("DC", "Houston"),
                StationPair::new("Toronto", "Houston"),
            ],
            source: SourceConfig::default(),
            optics: OpticsConfig::default(),
            radiance: RadianceConfig::default(),
            basis_bias: 0.5,
            security: SecurityParams::default(),
            grids: GridSpec::default(),
            policies: vec![BlockingPolicy::two_block(), BlockingPolicy::three_block()],
            horizon: 86_400,
            time_step: 1,
            min_elevation: 20.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<inline>".into(),
            detail: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.constellation.validate()?;
        for (i, alt) in self.altitudes.iter().enumerate() {
            if !(*alt > 0.0 && alt.is_finite()) {
                return Err(Error::validation(format!("altitudes[{i}]"), "must be > 0 meters"));
            }
        }
        for (i, gs) in self.stations.iter().enumerate() {
            gs.validate()?;
            if self.stations[..i].iter().any(|o| o.name == gs.name) {
                return Err(Error::validation(
                    format!("stations.{}", gs.name),
                    "station names must be unique",
                ));
            }
        }
        for pair in &self.pairs {
            for name in [&pair.a, &pair.b] {
                if self.station(name).is_none() {
                    return Err(Error::validation(
                        format!("pairs.{pair}"),
                        format!("references undeclared station `{name}`"),
                    ));
                }
            }
            if pair.a == pair.b {
                return Err(Error::validation(
                    format!("pairs.{pair}"),
                    "a pair needs two distinct stations",
                ));
            }
        }
        self.link_model().validate()?;
        self.security.validate()?;
        self.search_grids()?;
        if self.time_step == 0 {
            return Err(Error::validation("time_step", "must be >= 1 second"));
        }
        if self.horizon == 0 || !self.horizon.is_multiple_of(self.time_step) {
            return Err(Error::validation(
                "horizon",
                "must be positive and divisible by time_step",
            ));
        }
        Ok(())
    }

    pub fn station(&self, name: &str) -> Option<&GroundStation> {
        self.stations.iter().find(|s| s.name == name)
    }

    pub fn resolve_pair(&self, pair: &StationPair) -> Result<(&GroundStation, &GroundStation)> {
        let find = |n: &str| {
            self.station(n).ok_or_else(|| {
                Error::validation(
                    format!("pairs.{pair}"),
                    format!("references undeclared station `{n}`"),
                )
            })
        };
        Ok((find(&pair.a)?, find(&pair.b)?))
    }

    pub fn altitudes(&self) -> Vec<f64> {
        if self.altitudes.is_empty() {
            vec![self.constellation.altitude]
        } else {
            self.altitudes.clone()
        }
    }

    pub fn constellation_at(&self, altitude: f64) -> ConstellationConfig {
        self.constellation.with_altitude(altitude)
    }

    pub fn link_model(&self) -> LinkModel {
        LinkModel {
            source: self.source,
            optics: self.optics,
            radiance: RadianceSchedule {
                interval_scales: self.radiance.interval_scales,
            },
            base_flux: self.radiance.base_flux,
            basis_bias: self.basis_bias,
            min_elevation: self.min_elevation,
        }
    }

    pub fn search_grids(&self) -> Result<SearchGrids> {
        SearchGrids::from_spec(&self.grids)
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"altitudes": [800000], "pairs": ["Toronto:DC"]}"#)
            .unwrap();
        assert_eq!(cfg.altitudes(), vec![800_000.0]);
        assert_eq!(cfg.pairs, vec![StationPair::new("Toronto", "DC")]);
        assert_eq!(cfg.constellation.rings, 20);
        assert_eq!(cfg.constellation.sats_per_ring, 20);
        assert_eq!(cfg.source.pair_rate, 1e9);
        assert_eq!(cfg.source.pump_power, 0.01);
        assert_eq!(cfg.min_elevation, 20.0);
        assert_eq!(cfg.horizon, 86_400);
        assert_eq!(cfg.radiance.interval_scales, [1.0, 20.0, 100.0, 1.0]);
        assert_eq!(cfg.policies.len(), 2);
    }

    #[test]
    fn undeclared_station_is_named() {
        let err = ExperimentConfig::from_json(r#"{"pairs": ["Toronto:Ottawa"]}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Toronto:Ottawa") && msg.contains("Ottawa"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn validation_errors_name_the_field() {
        let cases = [
            (r#"{"horizon": 100, "time_step": 7}"#, "horizon"),
            (r#"{"security": {"eps_sec": 1.5}}"#, "security.eps_sec"),
            (r#"{"policies": [[0.98, 0.9]]}"#, "ascending"),
            (r#"{"optics": {"rx_efficiency": 0}}"#, "optics.rx_efficiency"),
            (r#"{"altitudes": [-1]}"#, "altitudes[0]"),
            (r#"{"pairs": ["DC"]}"#, "A:B"),
            (r#"{"unknown_key": 1}"#, "unknown"),
        ];
        for (json, needle) in cases {
            let msg = ExperimentConfig::from_json(json).unwrap_err().to_string();
            assert!(msg.contains(needle), "{json}: {msg}");
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.min_elevation = 25.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn pretty_json_round_trips() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig::from_json(&a.to_json_pretty()).unwrap();
        assert_eq!(a, b);
    }
}
