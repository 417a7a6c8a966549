#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

use vibroaudit::dataset::{FeatureTable, RowLabels};
use vibroaudit::rng::stream;
use vibroaudit::sigsynth::{
    Activation, BaseSource, BroadbandParams, CohortSpec, DeviceAssignment, KneeParams, Pairing, SensorChannel,
    SourceKind, ToneParams, WorldSpec,
};
use vibroaudit::{Health, Side};

/// A cheap world (8 kHz, 0.25 s repetitions) with a knee and `n_tones` tones.
pub fn small_world(n_tones: usize, seed: u64) -> WorldSpec {
    let mut sources = vec![BaseSource::new("knee", SourceKind::Knee(KneeParams::default()), Activation::constant(0.7))];
    for k in 0..n_tones {
        sources.push(BaseSource::new(
            format!("tone{k}"),
            SourceKind::Tone(ToneParams { frequency_hz: 2500.0 + 300.0 * k as f64, amplitude: 0.02 }),
            Activation { healthy: 0.3, unhealthy: 0.8 },
        ));
    }
    sources.push(BaseSource::new(
        "ambient",
        SourceKind::Broadband(BroadbandParams { level_dbfs: -50.0, day_offsets_db: Vec::new(), day_jitter_db: 0.0 }),
        Activation::constant(0.5),
    ));
    let n = sources.len();
    WorldSpec {
        base_sources: sources,
        sensor_channel: SensorChannel::PerSource { detection: vec![0.9; n] },
        causal_link_enabled: true,
        sample_rate: 8000.0,
        cohort: CohortSpec {
            n_subjects: 4,
            pairing: Pairing::Independent,
            legs_per_subject: 1,
            device_assignment: DeviceAssignment::SideLocked,
            health_split: 0.5,
            n_repetitions: 3,
            sessions_per_leg: 1,
        },
        seed,
        noise_floor_dbfs: -60.0,
        repetition_s: 0.25,
    }
}

pub fn row(subject: usize, health: Health, repetition: usize) -> RowLabels {
    let subject_id = format!("s{subject:03}");
    RowLabels {
        session_id: format!("{subject_id}-R"),
        subject_id,
        side: Side::Right,
        device_id: "device-right".into(),
        health,
        repetition,
    }
}

/// Alternating-health subjects; unhealthy rows are shifted by `shift` in every feature.
pub fn gaussian_table(seed: u64, n_subjects: usize, reps: usize, n_features: usize, shift: f64) -> FeatureTable {
    let mut rng = stream(seed, &[0x7AB1E]);
    let mut table = FeatureTable::new((0..n_features).map(|j| format!("f{j}")).collect());
    for s in 0..n_subjects {
        let health = Health::from_unhealthy(s % 2 == 1);
        let offset = if health.is_unhealthy() { shift } else { 0.0 };
        for r in 0..reps {
            table.labels.push(row(s, health, r));
            table.values.push((0..n_features).map(|_| offset + rng.sample::<f64, _>(StandardNormal)).collect());
        }
    }
    table
}

pub fn white_noise(seed: u64, n: usize, sigma: f64) -> Vec<f64> {
    let mut rng = stream(seed, &[0x4015E]);
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn sine(freq_hz: f64, amplitude: f64, n: usize, sample_rate: f64) -> Vec<f64> {
    (0..n).map(|i| amplitude * (2.0 * std::f64::consts::PI * freq_hz * i as f64 / sample_rate).sin()).collect()
}
