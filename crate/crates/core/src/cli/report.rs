//! The audit report written as `report.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::AuditConfig;
use crate::audit::{
    BandScanResult, ConditioningResult, CounterfactualResult, Covariate, MixingCurve, Prevalence, RotationResult,
    ToneDetection,
};
use crate::error::{Error, Result};
use crate::labels::Health;
use crate::learn::CvResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Where the audited data came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: Option<String>,
    pub subjects: Option<usize>,
    pub manifest: Option<String>,
    pub table: Option<String>,
    pub n_sessions: Option<usize>,
    pub n_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section<T> {
    pub seed: u64,
    pub result: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTones {
    pub session_id: String,
    pub health: Health,
    pub detections: Vec<ToneDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneCluster {
    pub center_hz: f64,
    pub prevalence: Prevalence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateReport {
    pub covariate: Covariate,
    pub values: Vec<String>,
    pub cv: CvResult,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Sections {
    pub band_scan: Option<Section<BandScanResult>>,
    pub tones: Option<Section<Vec<SessionTones>>>,
    pub prevalence: Option<Section<Vec<ToneCluster>>>,
    pub covariate: Option<Section<CovariateReport>>,
    pub conditioning: Option<Section<ConditioningResult>>,
    pub mixing_curve: Option<Section<MixingCurve>>,
    pub rotation: Option<Section<RotationResult>>,
    pub counterfactual: Option<Section<CounterfactualResult>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasFlag {
    pub section: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub master_seed: u64,
    pub config_digest: String,
    pub config: AuditConfig,
    pub provenance: Provenance,
    pub sections: Sections,
    pub flags: Vec<BiasFlag>,
    /// Sections that were not run, with the reason.
    pub skipped: BTreeMap<String, String>,
    /// Wall-clock seconds per section; the only non-deterministic field.
    pub timing: BTreeMap<String, f64>,
}

impl AuditReport {
    pub fn new(config: AuditConfig, master_seed: u64, provenance: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            config_digest: config.digest(),
            config,
            provenance,
            sections: Sections::default(),
            flags: Vec::new(),
            skipped: BTreeMap::new(),
            timing: BTreeMap::new(),
        }
    }

    pub fn flag(&mut self, section: &str, message: impl Into<String>) {
        self.flags.push(BiasFlag { section: section.to_string(), message: message.into() });
    }

    pub fn skip(&mut self, section: &str, reason: impl Into<String>) {
        self.skipped.insert(section.to_string(), reason.into());
    }

    pub fn has_flags(&self) -> bool {
        !self.flags.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fields unknown to this version are ignored.
    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// The report JSON with the timing field removed, for reproducibility checks.
pub fn report_without_timing(json: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(json)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timing");
    }
    Ok(v.to_string())
}
