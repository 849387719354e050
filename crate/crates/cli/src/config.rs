use std::collections::BTreeMap;
use std::path::Path;

use risknet::baselines::BaselineConfig;
use risknet::predictor::PredictorHyper;
use risknet::prob_risk::FusionConfig;
use risknet::risk_field::RiskFieldParams;
use risknet::scenario::{KindTable, TrackSchema};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Input and output options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    /// Frame rate of track CSVs, Hz. When unset, a `<stem>.meta.json` next
    /// to the CSV is consulted, then 25 Hz is assumed.
    pub frame_rate: Option<f64>,
    /// Canonical key to CSV column overrides.
    pub schema: BTreeMap<String, String>,
    /// `x`/`y` columns hold the bounding-box corner.
    pub bbox_corner: bool,
    /// Rasters as little-endian f32 instead of CSV.
    pub binary: bool,
    /// Sampling rate of generated archetypes, Hz.
    pub archetype_rate: f64,
    /// Length of generated archetypes, s; each archetype has its own default.
    pub archetype_duration: Option<f64>,
    /// Archetype parameter overrides.
    pub archetype_params: BTreeMap<String, f64>,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            frame_rate: None,
            schema: BTreeMap::new(),
            bbox_corner: false,
            binary: false,
            archetype_rate: 10.0,
            archetype_duration: None,
            archetype_params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub risk: RiskFieldParams<f64>,
    pub baselines: BaselineConfig<f64>,
    pub predictor: PredictorHyper,
    pub fusion: FusionConfig,
    pub io: IoConfig,
    /// Default mass per kind when a log has no mass column, kg.
    pub masses: KindTable<f64>,
    /// Governs every random choice; copied into the predictor seed.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            risk: RiskFieldParams::default(),
            baselines: BaselineConfig::default(),
            predictor: PredictorHyper::default(),
            fusion: FusionConfig::default(),
            io: IoConfig::default(),
            masses: KindTable::default_masses(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Checks every section after flag overrides have been applied.
    pub fn finish(mut self) -> Result<Self, CliError> {
        self.predictor.seed = self.seed;
        self.risk.validate()?;
        self.baselines.validate()?;
        self.predictor.validate()?;
        self.fusion.validate()?;
        if let Some(r) = self.io.frame_rate {
            if !(r > 0.0) || !r.is_finite() {
                return Err(CliError::Usage("io.frame_rate must be positive".into()));
            }
        }
        if self.masses.values().iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(CliError::Usage("masses must be positive".into()));
        }
        self.schema()?;
        Ok(self)
    }

    pub fn schema(&self) -> Result<TrackSchema, CliError> {
        let pairs: Vec<String> = self.io.schema.iter().map(|(k, v)| format!("{k}={v}")).collect();
        Ok(TrackSchema::default().with_overrides(&pairs)?)
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Parses `key=value`.
pub fn split_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| format!("`{s}` is not key=value"))
}

/// Number that also accepts `inf`.
pub fn parse_extended(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let bad: Result<RunConfig, _> = serde_json::from_str(r#"{"risk": {"betta": 2.0}}"#);
        assert!(bad.is_err());
        let bad: Result<RunConfig, _> = serde_json::from_str(r#"{"sead": 1}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn partial_config_fills_defaults_and_echo_roundtrips() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"seed": 4, "baselines": {"ttc_threshold": "inf"}}"#).unwrap();
        let cfg = cfg.finish().unwrap();
        assert_eq!(cfg.predictor.seed, 4);
        assert!(cfg.baselines.ttc_threshold.is_infinite());
        let back: RunConfig = serde_json::from_value(cfg.echo()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        let cfg: RunConfig = serde_json::from_str(r#"{"risk": {"beta": -1.0}}"#).unwrap();
        assert!(cfg.finish().is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"io": {"schema": {"nope": "x"}}}"#).unwrap();
        assert!(cfg.finish().is_err());
    }

    #[test]
    fn pairs_and_numbers() {
        assert_eq!(split_pair("ttc=inf").unwrap(), ("ttc".into(), "inf".into()));
        assert!(split_pair("ttc").is_err());
        assert!(split_pair("=3").is_err());
        assert_eq!(parse_extended("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_extended("2.5").unwrap(), 2.5);
        assert!(parse_extended("x").is_err());
    }
}
