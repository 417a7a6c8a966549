use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cohort::plan_sessions;
use super::render::{RenderOptions, Renderer, RepetitionTruth};
use super::world::WorldSpec;
use crate::dataset::{write_wav_f32, Manifest, SessionRecord};
use crate::error::{Error, Result};
use crate::labels::{Health, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTruth {
    pub session_id: String,
    pub subject_id: String,
    pub side: Side,
    pub device_id: String,
    pub health: Health,
    pub day: usize,
    pub repetitions: Vec<RepetitionTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub world: WorldSpec,
    pub sessions: Vec<SessionTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub manifest_path: PathBuf,
    pub ground_truth_path: PathBuf,
    pub n_sessions: usize,
}

/// Renders every session to `out_dir/wav/<session_id>.wav` (32-bit float)
/// and writes `manifest.json` and `ground_truth.json` next to them.
pub fn write_dataset(world: &WorldSpec, out_dir: &Path) -> Result<DatasetSummary> {
    let plans = plan_sessions(world)?;
    let renderer = Renderer::new(world)?;
    let wav_dir = out_dir.join("wav");
    fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;

    let rendered: Vec<(SessionRecord, SessionTruth)> = plans
        .par_iter()
        .map(|plan| {
            let session = renderer.render(plan, RenderOptions::default())?;
            let rel = PathBuf::from("wav").join(format!("{}.wav", session.session_id));
            write_wav_f32(&out_dir.join(&rel), &session.signal)?;
            let mut metadata = BTreeMap::new();
            metadata.insert("day".to_string(), serde_json::json!(plan.day + 1));
            metadata.insert("seed".to_string(), serde_json::json!(world.seed));
            let record = SessionRecord {
                session_id: session.session_id.clone(),
                subject_id: session.subject_id.clone(),
                side: session.side,
                device_id: session.device_id.clone(),
                health_label: session.health,
                wav_path: rel,
                n_repetitions: session.n_repetitions,
                repetition_boundaries: None,
                metadata,
            };
            let truth = SessionTruth {
                session_id: session.session_id,
                subject_id: session.subject_id,
                side: session.side,
                device_id: session.device_id,
                health: session.health,
                day: plan.day,
                repetitions: session.ground_truth.repetitions,
            };
            Ok((record, truth))
        })
        .collect::<Result<_>>()?;

    let (records, truths): (Vec<_>, Vec<_>) = rendered.into_iter().unzip();
    let manifest = Manifest::new(records, out_dir)?;
    let manifest_path = out_dir.join("manifest.json");
    manifest.write(&manifest_path)?;
    let ground_truth_path = out_dir.join("ground_truth.json");
    let gt = GroundTruthFile { world: world.clone(), sessions: truths };
    fs::write(&ground_truth_path, serde_json::to_string_pretty(&gt)? + "\n")
        .map_err(|e| Error::io(&ground_truth_path, e))?;
    Ok(DatasetSummary { manifest_path, ground_truth_path, n_sessions: gt.sessions.len() })
}
