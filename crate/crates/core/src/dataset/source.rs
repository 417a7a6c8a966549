//! Session sources feeding the feature pipeline: recordings on disk or a
//! synthetic world rendered on demand (never held in memory all at once).

use rayon::prelude::*;

use super::features::{FeatureConfig, FeatureExtractor, RowLabels};
use super::manifest::Manifest;
use super::segment::segment_repetitions;
use super::table::FeatureTable;
use super::wav::ingest_wav;
use crate::dsp::Signal;
use crate::error::{Error, Result};
use crate::labels::{Health, Side};
use crate::sigsynth::{plan_sessions, RenderOptions, Renderer, SessionPlan, WorldSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SessionInfo {
    pub session_id: String,
    pub subject_id: String,
    pub side: Side,
    pub device_id: String,
    pub health: Health,
}

impl SessionInfo {
    pub fn row(&self, repetition: usize) -> RowLabels {
        RowLabels {
            session_id: self.session_id.clone(),
            subject_id: self.subject_id.clone(),
            side: self.side,
            device_id: self.device_id.clone(),
            health: self.health,
            repetition,
        }
    }
}

pub trait SessionSource: Sync {
    fn n_sessions(&self) -> usize;
    fn info(&self, index: usize) -> SessionInfo;
    fn sample_rate(&self, index: usize) -> Result<f64>;
    /// Full recording of one session.
    fn signal(&self, index: usize) -> Result<Signal>;
    /// Repetition segments of one session.
    fn segments(&self, index: usize) -> Result<Vec<Signal>>;
}

pub struct ManifestSource<'a> {
    manifest: &'a Manifest,
}

impl<'a> ManifestSource<'a> {
    pub fn new(manifest: &'a Manifest) -> Self {
        Self { manifest }
    }
}

impl SessionSource for ManifestSource<'_> {
    fn n_sessions(&self) -> usize {
        self.manifest.sessions.len()
    }

    fn info(&self, index: usize) -> SessionInfo {
        let r = &self.manifest.sessions[index];
        SessionInfo {
            session_id: r.session_id.clone(),
            subject_id: r.subject_id.clone(),
            side: r.side,
            device_id: r.device_id.clone(),
            health: r.health_label,
        }
    }

    fn sample_rate(&self, index: usize) -> Result<f64> {
        let r = &self.manifest.sessions[index];
        let path = self.manifest.wav_path(r);
        let reader = hound::WavReader::open(&path).map_err(|e| Error::Manifest {
            session: Some(r.session_id.clone()),
            reason: format!("{}: {e}", path.display()),
        })?;
        Ok(f64::from(reader.spec().sample_rate))
    }

    fn signal(&self, index: usize) -> Result<Signal> {
        let r = &self.manifest.sessions[index];
        ingest_wav(&self.manifest.wav_path(r)).map_err(|e| Error::Manifest {
            session: Some(r.session_id.clone()),
            reason: e.to_string(),
        })
    }

    fn segments(&self, index: usize) -> Result<Vec<Signal>> {
        let r = &self.manifest.sessions[index];
        let signal = self.signal(index)?;
        segment_repetitions(&signal, r.n_repetitions, r.repetition_boundaries.as_deref())
            .map_err(|e| Error::Manifest { session: Some(r.session_id.clone()), reason: e.to_string() })
    }
}

pub struct WorldSource<'a> {
    renderer: Renderer<'a>,
    plans: Vec<SessionPlan>,
}

impl<'a> WorldSource<'a> {
    pub fn new(world: &'a WorldSpec) -> Result<Self> {
        Ok(Self { renderer: Renderer::new(world)?, plans: plan_sessions(world)? })
    }

    pub fn plans(&self) -> &[SessionPlan] {
        &self.plans
    }
}

impl SessionSource for WorldSource<'_> {
    fn n_sessions(&self) -> usize {
        self.plans.len()
    }

    fn info(&self, index: usize) -> SessionInfo {
        let p = &self.plans[index];
        SessionInfo {
            session_id: p.session_id.clone(),
            subject_id: p.subject_id.clone(),
            side: p.side,
            device_id: p.device.id().to_string(),
            health: p.health,
        }
    }

    fn sample_rate(&self, _index: usize) -> Result<f64> {
        Ok(self.renderer.world().sample_rate)
    }

    fn signal(&self, index: usize) -> Result<Signal> {
        Ok(self.renderer.render(&self.plans[index], RenderOptions::default())?.signal)
    }

    fn segments(&self, index: usize) -> Result<Vec<Signal>> {
        segment_repetitions(&self.signal(index)?, self.renderer.world().cohort.n_repetitions, None)
    }
}

/// Extracts one feature table per configuration, loading every session once.
/// Rows follow session order, then repetition order.
pub fn extract_tables(source: &dyn SessionSource, configs: &[FeatureConfig]) -> Result<Vec<FeatureTable>> {
    for c in configs {
        c.validate()?;
    }
    let per_session: Vec<Vec<Vec<Vec<f64>>>> = (0..source.n_sessions())
        .into_par_iter()
        .map(|i| {
            let segs = source.segments(i)?;
            let fs = segs.first().map_or(1.0, Signal::sample_rate);
            configs
                .iter()
                .map(|cfg| {
                    let ex = FeatureExtractor::new(cfg, fs)?;
                    segs.iter().map(|s| ex.extract(s).map(|v| v.values)).collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    e @ Error::Manifest { .. } => e,
                    other => Error::Manifest { session: Some(source.info(i).session_id), reason: other.to_string() },
                })
        })
        .collect::<Result<_>>()?;

    let mut tables: Vec<FeatureTable> = configs.iter().map(|c| FeatureTable::new(c.names())).collect();
    for (i, per_cfg) in per_session.into_iter().enumerate() {
        let info = source.info(i);
        for (t, rows) in tables.iter_mut().zip(per_cfg) {
            for (r, values) in rows.into_iter().enumerate() {
                t.labels.push(info.row(r));
                t.values.push(values);
            }
        }
    }
    Ok(tables)
}

pub fn extract_table(source: &dyn SessionSource, config: &FeatureConfig) -> Result<FeatureTable> {
    Ok(extract_tables(source, std::slice::from_ref(config))?.remove(0))
}
