//! Ready-made worlds, one per bias-introduction mechanism.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::world::{
    Activation, ActivationScope, BaseSource, BroadbandParams, CohortSpec, DeviceAssignment, DeviceTiltParams,
    KneeParams, Pairing, SensorChannel, SourceKind, ToneParams, WorldSpec, DEFAULT_NOISE_FLOOR_DBFS,
    DEFAULT_REPETITION_S, DEFAULT_SAMPLE_RATE,
};
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    DayNuisance,
    ToneBias,
    RandomizedTone,
    DeviceShift,
    Clean,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::DayNuisance, Scenario::ToneBias, Scenario::RandomizedTone, Scenario::DeviceShift, Scenario::Clean];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::DayNuisance => "day-nuisance",
            Scenario::ToneBias => "tone-bias",
            Scenario::RandomizedTone => "randomized-tone",
            Scenario::DeviceShift => "device-shift",
            Scenario::Clean => "clean",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| {
            let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
            Error::Usage(format!("unknown scenario '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

/// Frequency of the interference tone in the tone scenarios.
pub const INTERFERENCE_HZ: f64 = 33_000.0;
/// Peak amplitude of the interference tone (about -40 dBFS).
pub const INTERFERENCE_AMPLITUDE: f64 = 0.01;
/// Per-device spectral slopes of the device-shift world.
pub const DEVICE_TILT_DB_PER_KHZ: [f64; 2] = [0.5, -0.5];
/// Extra left-device slope while recording an unhealthy leg in the device-shift world.
pub const LEFT_DRIFT_DB_PER_KHZ: f64 = 0.3;
/// Extra left-device gain while recording an unhealthy leg in the device-shift world.
pub const LEFT_DRIFT_GAIN_DB: f64 = 3.0;
/// Per-day ambient level offsets of the day-nuisance world.
pub const DAY_OFFSETS_DB: [f64; 5] = [0.0, 0.5, 2.0, 2.5, 3.0];

pub fn scenario_preset(scenario: Scenario) -> WorldSpec {
    match scenario {
        Scenario::Clean => clean(),
        Scenario::ToneBias => tone_world(Activation { healthy: 0.0, unhealthy: 1.0 }, 1),
        Scenario::RandomizedTone => tone_world(Activation::constant(0.5), 0),
        Scenario::DeviceShift => device_shift(),
        Scenario::DayNuisance => day_nuisance(),
    }
}

fn knee(activation: f64) -> BaseSource {
    BaseSource::new("knee", SourceKind::Knee(KneeParams::default()), Activation::constant(activation))
}

fn ambient(level_dbfs: f64, day_offsets_db: Vec<f64>, day_jitter_db: f64) -> BaseSource {
    BaseSource::new(
        "ambient",
        SourceKind::Broadband(BroadbandParams { level_dbfs, day_offsets_db, day_jitter_db }),
        Activation::constant(1.0),
    )
}

fn world(sources: Vec<BaseSource>, causal: bool, cohort: CohortSpec) -> WorldSpec {
    WorldSpec {
        sensor_channel: SensorChannel::perfect(sources.len()),
        base_sources: sources,
        causal_link_enabled: causal,
        sample_rate: DEFAULT_SAMPLE_RATE,
        cohort,
        seed: 0,
        noise_floor_dbfs: DEFAULT_NOISE_FLOOR_DBFS,
        repetition_s: DEFAULT_REPETITION_S,
    }
}

fn single_leg(n_subjects: usize, n_repetitions: usize, devices: DeviceAssignment) -> CohortSpec {
    CohortSpec {
        n_subjects,
        pairing: Pairing::Independent,
        legs_per_subject: 1,
        device_assignment: devices,
        health_split: 0.5,
        n_repetitions,
        sessions_per_leg: 1,
    }
}

fn clean() -> WorldSpec {
    world(vec![knee(1.0)], true, single_leg(20, 6, DeviceAssignment::Shuffled))
}

fn tone_world(tone_activation: Activation, forced_healthy: usize) -> WorldSpec {
    let tone = BaseSource::new(
        "interference",
        SourceKind::Tone(ToneParams { frequency_hz: INTERFERENCE_HZ, amplitude: INTERFERENCE_AMPLITUDE }),
        tone_activation,
    )
    .with_scope(ActivationScope::Session)
    .with_forced_healthy_legs(forced_healthy);
    world(vec![knee(0.85), tone], false, single_leg(20, 6, DeviceAssignment::SideLocked))
}

fn device_shift() -> WorldSpec {
    let response = BaseSource::new(
        "device-response",
        SourceKind::DeviceTilt(DeviceTiltParams { slope_db_per_khz: DEVICE_TILT_DB_PER_KHZ, gain_db: [0.0; 2] }),
        Activation::constant(1.0),
    )
    .with_scope(ActivationScope::Session);
    let drift = BaseSource::new(
        "left-device-drift",
        SourceKind::DeviceTilt(DeviceTiltParams { slope_db_per_khz: [LEFT_DRIFT_DB_PER_KHZ, 0.0], gain_db: [LEFT_DRIFT_GAIN_DB, 0.0] }),
        Activation { healthy: 0.0, unhealthy: 1.0 },
    )
    .with_scope(ActivationScope::Session);
    let cohort = CohortSpec {
        n_subjects: 16,
        pairing: Pairing::Complementary,
        legs_per_subject: 2,
        device_assignment: DeviceAssignment::SideLocked,
        health_split: 6.0 / 16.0,
        n_repetitions: 8,
        sessions_per_leg: 1,
    };
    world(vec![knee(1.0), ambient(-50.0, Vec::new(), 0.0), response, drift], false, cohort)
}

fn day_nuisance() -> WorldSpec {
    let cohort = CohortSpec {
        n_subjects: 1,
        pairing: Pairing::Independent,
        legs_per_subject: 1,
        device_assignment: DeviceAssignment::SideLocked,
        health_split: 0.0,
        n_repetitions: 6,
        sessions_per_leg: 5,
    };
    world(vec![knee(1.0), ambient(-45.0, DAY_OFFSETS_DB.to_vec(), 0.15)], false, cohort)
}
