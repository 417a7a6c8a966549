use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Health, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub subject_id: String,
    pub side: Side,
    pub device_id: String,
    pub health_label: Health,
    /// Relative paths resolve against the manifest's directory.
    pub wav_path: PathBuf,
    pub n_repetitions: usize,
    /// Cut points in seconds, `n_repetitions + 1` of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition_boundaries: Option<Vec<f64>>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sessions: Vec<SessionRecord>,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub healthy: usize,
    pub unhealthy: usize,
}

impl Manifest {
    pub fn new(sessions: Vec<SessionRecord>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let m = Self { sessions, base_dir: base_dir.into() };
        m.check_ids()?;
        Ok(m)
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn wav_path(&self, record: &SessionRecord) -> PathBuf {
        if record.wav_path.is_absolute() {
            record.wav_path.clone()
        } else {
            self.base_dir.join(&record.wav_path)
        }
    }

    pub fn class_counts(&self) -> ClassCounts {
        let unhealthy = self.sessions.iter().filter(|s| s.health_label.is_unhealthy()).count();
        ClassCounts { healthy: self.sessions.len() - unhealthy, unhealthy }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    fn check_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in &self.sessions {
            if !seen.insert(s.session_id.as_str()) {
                return Err(Error::Manifest {
                    session: Some(s.session_id.clone()),
                    reason: "duplicate session_id".into(),
                });
            }
        }
        Ok(())
    }

    fn check_records(&self) -> Result<()> {
        for s in &self.sessions {
            let fail = |reason: String| Error::Manifest { session: Some(s.session_id.clone()), reason };
            if s.n_repetitions == 0 {
                return Err(fail("n_repetitions must be at least 1".into()));
            }
            if let Some(b) = &s.repetition_boundaries {
                if b.len() != s.n_repetitions + 1 {
                    return Err(fail(format!(
                        "{} repetition boundaries given, expected n_repetitions + 1 = {}",
                        b.len(),
                        s.n_repetitions + 1
                    )));
                }
            }
            let wav = self.wav_path(s);
            if !wav.is_file() {
                return Err(fail(format!("wav file {} does not exist", wav.display())));
            }
        }
        Ok(())
    }
}

/// Loads and validates a manifest; errors name the offending session.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Manifest { session: None, reason: format!("not valid JSON: {e}") })?;
    let raw = root
        .get("sessions")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Manifest { session: None, reason: "missing 'sessions' array".into() })?;
    let mut sessions = Vec::with_capacity(raw.len());
    for (i, v) in raw.iter().enumerate() {
        let record: SessionRecord = serde_json::from_value(v.clone()).map_err(|e| Error::Manifest {
            session: Some(
                v.get("session_id").and_then(|s| s.as_str()).map_or_else(|| format!("#{i}"), str::to_string),
            ),
            reason: e.to_string(),
        })?;
        sessions.push(record);
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = Manifest::new(sessions, base)?;
    manifest.check_records()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, health: Health) -> serde_json::Value {
        serde_json::json!({
            "session_id": id, "subject_id": "s1", "side": "left", "device_id": "d",
            "health_label": health, "wav_path": "a.wav", "n_repetitions": 2
        })
    }

    #[test]
    fn duplicate_ids_name_the_session() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.wav"), b"").unwrap();
        let path = dir.path().join("m.json");
        let doc = serde_json::json!({"sessions": [record("x1", Health::Healthy), record("x1", Health::Unhealthy)]});
        fs::write(&path, doc.to_string()).unwrap();
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("x1") && err.contains("duplicate"), "{err}");
    }

    #[test]
    fn empty_manifest_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, r#"{"sessions": []}"#).unwrap();
        let m = load_manifest(&path).unwrap();
        assert!(m.sessions.is_empty());
        assert_eq!(m.class_counts(), ClassCounts::default());
    }

    #[test]
    fn bad_label_names_the_session() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut r = record("bad-one", Health::Healthy);
        r["health_label"] = "Sick".into();
        fs::write(&path, serde_json::json!({"sessions": [r]}).to_string()).unwrap();
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("bad-one"), "{err}");
    }

    #[test]
    fn missing_wav_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, serde_json::json!({"sessions": [record("x", Health::Healthy)]}).to_string()).unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::Manifest { .. })));
    }
}
