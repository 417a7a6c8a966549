//! Waveform rendering of planned sessions.
//!
//! Every observed source contributes one component; device-tilt sources shape
//! the acoustic mix through a linear-phase FIR instead of adding energy.
//! The recorded signal is `shape(sum of acoustic components) + sensor noise`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cohort::{plan_sessions, sample_session_events, SessionPlan};
use super::events::CompositeEvent;
use super::world::{KneeParams, SourceKind, WorldSpec};
use crate::dsp::{FirFilter, Signal};
use crate::error::{Error, Result};
use crate::labels::{Health, Side};
use crate::rng::{stream, tag};

/// Taps of the device-tilt shaping filter.
pub const TILT_TAPS: usize = 257;
/// Tilt gains are clamped to this many dB either way.
pub const TILT_LIMIT_DB: f64 = 40.0;

/// Click bursts are cut once the envelope decays below e^-12.
const CLICK_DECAY_NEPERS: f64 = 12.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Keep the per-source component waveforms and sensor noise in the ground truth.
    pub keep_components: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Click {
    /// Onset relative to the start of the repetition.
    pub time_s: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionTruth {
    pub repetition: usize,
    pub active: CompositeEvent,
    pub observed: CompositeEvent,
    pub clicks: Vec<Click>,
    /// RMS of each rendered source component before device shaping.
    pub component_rms: BTreeMap<String, f64>,
    pub tilt_db_per_khz: f64,
    pub device_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentWave {
    pub source: String,
    /// Session-length waveform after device shaping.
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub repetitions: Vec<RepetitionTruth>,
    pub components: Option<Vec<ComponentWave>>,
    pub sensor_noise: Option<Vec<f64>>,
}

impl GroundTruth {
    pub fn source_rendered(&self, name: &str) -> bool {
        self.repetitions.iter().any(|r| r.component_rms.get(name).is_some_and(|v| *v > 0.0))
    }
}

#[derive(Debug, Clone)]
pub struct RecordingSession {
    pub session_id: String,
    pub subject_id: String,
    pub side: Side,
    pub device_id: String,
    pub health: Health,
    pub day: usize,
    pub signal: Signal,
    pub n_repetitions: usize,
    pub ground_truth: GroundTruth,
}

/// Renders every session of the world, in plan order.
pub fn sample_cohort(world: &WorldSpec) -> Result<Vec<RecordingSession>> {
    sample_cohort_with(world, RenderOptions::default())
}

pub fn sample_cohort_with(world: &WorldSpec, opts: RenderOptions) -> Result<Vec<RecordingSession>> {
    let plans = plan_sessions(world)?;
    let renderer = Renderer::new(world)?;
    plans.par_iter().map(|p| renderer.render(p, opts)).collect()
}

/// Renders sessions of one world; cheap to share across threads.
pub struct Renderer<'a> {
    world: &'a WorldSpec,
    day_levels: Vec<HashMap<usize, f64>>,
    tilt_filters: std::sync::Mutex<HashMap<(u64, u64), Arc<FirFilter>>>,
}

impl<'a> Renderer<'a> {
    pub fn new(world: &'a WorldSpec) -> Result<Self> {
        world.validate()?;
        let days = world.cohort.sessions_per_leg;
        let day_levels = world
            .base_sources
            .iter()
            .enumerate()
            .map(|(k, s)| match &s.kind {
                SourceKind::Broadband(bp) => (0..days)
                    .map(|d| {
                        let offset = if bp.day_offsets_db.is_empty() {
                            0.0
                        } else {
                            bp.day_offsets_db[d % bp.day_offsets_db.len()]
                        };
                        let z: f64 = stream(world.seed, &[tag::DAY, d as u64, k as u64]).sample(StandardNormal);
                        (d, bp.level_dbfs + offset + bp.day_jitter_db * z)
                    })
                    .collect(),
                _ => HashMap::new(),
            })
            .collect();
        Ok(Self { world, day_levels, tilt_filters: Default::default() })
    }

    pub fn world(&self) -> &WorldSpec {
        self.world
    }

    /// Broadband RMS level in dBFS for a source on a recording day.
    pub fn day_level_dbfs(&self, source: usize, day: usize) -> Option<f64> {
        self.day_levels.get(source)?.get(&day).copied()
    }

    fn tilt_filter(&self, slope: f64, gain_db: f64) -> Result<Arc<FirFilter>> {
        let key = (slope.to_bits(), gain_db.to_bits());
        if let Some(f) = self.tilt_filters.lock().expect("tilt cache poisoned").get(&key) {
            return Ok(f.clone());
        }
        let filt = Arc::new(FirFilter::from_magnitude(
            |f| {
                let db = (gain_db + slope * f / 1000.0).clamp(-TILT_LIMIT_DB, TILT_LIMIT_DB);
                10f64.powf(db / 20.0)
            },
            TILT_TAPS,
            self.world.sample_rate,
        )?);
        self.tilt_filters.lock().expect("tilt cache poisoned").insert(key, filt.clone());
        Ok(filt)
    }

    pub fn render(&self, plan: &SessionPlan, opts: RenderOptions) -> Result<RecordingSession> {
        let world = self.world;
        let n = world.n_sources();
        let fs = world.sample_rate;
        let rep_len = world.repetition_len();
        let n_reps = world.cohort.n_repetitions;
        let total = rep_len * n_reps;
        let events = sample_session_events(world, plan);
        let phases: Vec<f64> = (0..n)
            .map(|k| stream(world.seed, &[tag::WAVEFORM, plan.index as u64, u64::MAX, k as u64]).random::<f64>() * 2.0 * PI)
            .collect();

        let mut signal = vec![0.0; total];
        let mut components: Option<Vec<Vec<f64>>> = opts.keep_components.then(|| vec![vec![0.0; total]; n]);
        let mut noise_keep = opts.keep_components.then(|| vec![0.0; total]);
        let mut truths = Vec::with_capacity(n_reps);
        let noise_rms = world.noise_rms();

        for (r, ev) in events.iter().enumerate() {
            let start = r * rep_len;
            let (mut tilt, mut gain) = (0.0, 0.0);
            for (k, src) in world.base_sources.iter().enumerate() {
                if ev.observed >> k & 1 == 1 {
                    if let SourceKind::DeviceTilt(tp) = &src.kind {
                        tilt += tp.slope_db_per_khz[plan.device.index()];
                        gain += tp.gain_db[plan.device.index()];
                    }
                }
            }
            let shaper = if tilt != 0.0 || gain != 0.0 { Some(self.tilt_filter(tilt, gain)?) } else { None };

            let mut mix = vec![0.0; rep_len];
            let mut clicks = Vec::new();
            let mut component_rms = BTreeMap::new();
            for (k, src) in world.base_sources.iter().enumerate() {
                if ev.observed >> k & 1 == 0 {
                    continue;
                }
                let mut rng = stream(world.seed, &[tag::WAVEFORM, plan.index as u64, r as u64, k as u64]);
                let wave = match &src.kind {
                    SourceKind::Knee(kp) => {
                        let boosted = world.causal_link_enabled && kp.health_effect && plan.health.is_unhealthy();
                        let (wave, c) = render_knee(kp, boosted, rep_len, fs, &mut rng);
                        clicks = c;
                        wave
                    }
                    SourceKind::Tone(tp) => (0..rep_len)
                        .map(|i| {
                            let t = (start + i) as f64 / fs;
                            tp.amplitude * (2.0 * PI * tp.frequency_hz * t + phases[k]).sin()
                        })
                        .collect(),
                    SourceKind::Broadband(_) => {
                        let level = self.day_levels[k][&plan.day];
                        let rms = 10f64.powf(level / 20.0);
                        (0..rep_len).map(|_| rms * rng.sample::<f64, _>(StandardNormal)).collect()
                    }
                    SourceKind::DeviceTilt(_) => continue,
                };
                component_rms.insert(src.name.clone(), rms(&wave));
                for (m, w) in mix.iter_mut().zip(&wave) {
                    *m += w;
                }
                if let Some(comps) = components.as_mut() {
                    let shaped = match &shaper {
                        Some(f) => f.apply(&wave),
                        None => wave,
                    };
                    comps[k][start..start + rep_len].copy_from_slice(&shaped);
                }
            }
            let shaped_mix = match &shaper {
                Some(f) => f.apply(&mix),
                None => mix,
            };
            let mut noise_rng = stream(world.seed, &[tag::SENSOR_NOISE, plan.index as u64, r as u64]);
            for (i, m) in shaped_mix.iter().enumerate() {
                let z = if noise_rms > 0.0 { noise_rms * noise_rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                signal[start + i] = m + z;
                if let Some(nk) = noise_keep.as_mut() {
                    nk[start + i] = z;
                }
            }
            truths.push(RepetitionTruth {
                repetition: r,
                active: CompositeEvent::from_mask(ev.active, n),
                observed: CompositeEvent::from_mask(ev.observed, n),
                clicks,
                component_rms,
                tilt_db_per_khz: tilt,
                device_gain_db: gain,
            });
        }

        let components = components.map(|comps| {
            comps
                .into_iter()
                .zip(&world.base_sources)
                .filter(|(_, s)| !matches!(s.kind, SourceKind::DeviceTilt(_)))
                .map(|(samples, s)| ComponentWave { source: s.name.clone(), samples })
                .collect()
        });

        Ok(RecordingSession {
            session_id: plan.session_id.clone(),
            subject_id: plan.subject_id.clone(),
            side: plan.side,
            device_id: plan.device.id().to_string(),
            health: plan.health,
            day: plan.day,
            signal: Signal::mono(signal, fs)?,
            n_repetitions: n_reps,
            ground_truth: GroundTruth { repetitions: truths, components, sensor_noise: noise_keep },
        })
    }
}

/// Poisson click train of damped sinusoids, truncated at the repetition end.
fn render_knee(kp: &KneeParams, boosted: bool, len: usize, fs: f64, rng: &mut impl Rng) -> (Vec<f64>, Vec<Click>) {
    let (amp, rate) = if boosted {
        (kp.click_amplitude * kp.amplitude_factor, kp.click_rate_hz * kp.rate_factor)
    } else {
        (kp.click_amplitude, kp.click_rate_hz)
    };
    let duration = len as f64 / fs;
    let gaps = Exp::new(rate).expect("validated positive rate");
    let mut wave = vec![0.0; len];
    let mut clicks = Vec::new();
    let tail = (CLICK_DECAY_NEPERS / kp.damping_per_s * fs).ceil() as usize;
    let mut t = gaps.sample(rng);
    while t < duration {
        let z: f64 = rng.sample(StandardNormal);
        let a = amp * (kp.amplitude_jitter * z).exp();
        let onset = (t * fs).ceil() as usize;
        for (i, w) in wave.iter_mut().enumerate().skip(onset).take(tail) {
            let tau = i as f64 / fs - t;
            *w += a * (-kp.damping_per_s * tau).exp() * (2.0 * PI * kp.center_hz * tau).sin();
        }
        clicks.push(Click { time_s: t, amplitude: a });
        t += gaps.sample(rng);
    }
    (wave, clicks)
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Verifies `sum(components) + noise == signal` and returns the relative L2 error.
pub fn mixing_residual(session: &RecordingSession) -> Result<f64> {
    let gt = &session.ground_truth;
    let (Some(comps), Some(noise)) = (&gt.components, &gt.sensor_noise) else {
        return Err(Error::param("session was rendered without component waveforms"));
    };
    let sig = session.signal.channel(0);
    let mut err = 0.0;
    let mut norm = 0.0;
    for (i, s) in sig.iter().enumerate() {
        let rebuilt: f64 = comps.iter().map(|c| c.samples[i]).sum::<f64>() + noise[i];
        err += (s - rebuilt).powi(2);
        norm += s * s;
    }
    Ok(if norm > 0.0 { (err / norm).sqrt() } else { err.sqrt() })
}
