//! Resolved audit configuration and its content digest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{
    bands_by_width, bands_from_edges, validate_bands, ConditioningOptions, Covariate, ToneDetectorOptions,
    DEFAULT_BAND_EDGES, DEFAULT_PERMUTATIONS, DEFAULT_ROTATION_GRID_DEG,
};
use crate::dataset::{Band, FeatureConfig};
use crate::error::{Error, Result};
use crate::learn::{CvOptions, FitOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandScanConfig {
    pub edges_hz: Vec<f64>,
    /// Replaces `edges_hz` with equal-width bands over `[edges_hz[0], last edge]`.
    pub width_hz: Option<f64>,
}

impl Default for BandScanConfig {
    fn default() -> Self {
        Self { edges_hz: DEFAULT_BAND_EDGES.to_vec(), width_hz: None }
    }
}

impl BandScanConfig {
    pub fn bands(&self) -> Result<Vec<Band>> {
        if self.edges_hz.len() < 2 {
            return Err(Error::param("band scan needs at least two edges"));
        }
        let bands = match self.width_hz {
            Some(w) => bands_by_width(self.edges_hz[0], self.edges_hz[self.edges_hz.len() - 1], w)?,
            None => bands_from_edges(&self.edges_hz),
        };
        validate_bands(&bands)?;
        Ok(bands)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToneAuditConfig {
    pub detector: ToneDetectorOptions,
    /// Detections from different sessions within this distance form one tone.
    pub cluster_tolerance_hz: f64,
}

impl Default for ToneAuditConfig {
    fn default() -> Self {
        Self { detector: ToneDetectorOptions::default(), cluster_tolerance_hz: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RotationConfig {
    pub features: [String; 2],
    pub grid_deg: Vec<f64>,
}

impl Default for RotationConfig {
    fn default() -> Self {
        Self { features: ["mfcc08_mean".into(), "mfcc11_mean".into()], grid_deg: DEFAULT_ROTATION_GRID_DEG.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterfactualConfig {
    pub permutations: usize,
    /// JSON map of session id to counterfactual subject and label.
    pub relabel: Option<PathBuf>,
    /// Without a relabel file: every session becomes its own subject and the
    /// first `healthy_sessions` (in input order) are Healthy.
    pub healthy_sessions: Option<usize>,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        Self { permutations: DEFAULT_PERMUTATIONS, relabel: None, healthy_sessions: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub features: FeatureConfig,
    pub fit: FitOptions,
    pub band_scan: BandScanConfig,
    pub tones: ToneAuditConfig,
    pub covariate: Covariate,
    pub conditioning: ConditioningOptions,
    pub mixing_repeats: usize,
    pub rotation: RotationConfig,
    pub counterfactual: CounterfactualConfig,
    /// Significance level for label association (tones, counterfactual).
    pub alpha: f64,
    /// Covariate accuracy at or above which the covariate is flagged as predictable.
    pub predictability_flag: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            fit: FitOptions::default(),
            band_scan: BandScanConfig::default(),
            tones: ToneAuditConfig::default(),
            covariate: Covariate::Device,
            conditioning: ConditioningOptions::default(),
            mixing_repeats: 500,
            rotation: RotationConfig::default(),
            counterfactual: CounterfactualConfig::default(),
            alpha: 0.05,
            predictability_flag: 0.8,
        }
    }
}

impl AuditConfig {
    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn cv(&self) -> CvOptions {
        CvOptions { fit: self.fit, keep_models: false, parallel: true }
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.band_scan.bands()?;
        let c = &self.conditioning;
        if !(c.control_fraction > 0.0 && c.control_fraction < 1.0) {
            return Err(Error::param(format!("control fraction {} outside (0,1)", c.control_fraction)));
        }
        if !(0.0..=1.0).contains(&c.quantile) {
            return Err(Error::param(format!("quantile {} outside [0,1]", c.quantile)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha must lie in (0,1)"));
        }
        Ok(())
    }

    /// Digest of the resolved configuration.
    pub fn digest(&self) -> String {
        config_digest(&serde_json::to_value(self).expect("config serializes"))
    }
}

/// SHA-256 of the compact JSON rendering with object keys sorted, so the
/// digest ignores key order in the source file.
pub fn config_digest(value: &serde_json::Value) -> String {
    let canonical = canonicalize(value).to_string();
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn canonicalize(value: &serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k.clone(), canonicalize(v))).collect())
        }
        Value::Array(items) => Value::Array(items.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}
