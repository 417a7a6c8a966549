use serde::{Deserialize, Serialize};

use super::events::{MAX_ENUMERATED_SOURCES, n_events};
use crate::error::{Error, Result};
use crate::labels::{Health, Side};

/// Activation probability of a source given the health of the recorded leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub healthy: f64,
    pub unhealthy: f64,
}

impl Activation {
    pub fn constant(p: f64) -> Self {
        Self { healthy: p, unhealthy: p }
    }

    pub fn given(&self, health: Health) -> f64 {
        match health {
            Health::Healthy => self.healthy,
            Health::Unhealthy => self.unhealthy,
        }
    }

    pub fn is_health_independent(&self) -> bool {
        self.healthy == self.unhealthy
    }
}

/// Granularity at which a source's on/off state is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationScope {
    /// Independent draw per repetition.
    #[default]
    Repetition,
    /// One draw per session; the source is on for all repetitions or none.
    Session,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KneeParams {
    pub click_rate_hz: f64,
    pub click_amplitude: f64,
    pub center_hz: f64,
    pub damping_per_s: f64,
    /// Sigma of the log-normal amplitude jitter per click.
    pub amplitude_jitter: f64,
    /// When set and the causal link is enabled, unhealthy legs click louder and faster.
    pub health_effect: bool,
    pub amplitude_factor: f64,
    pub rate_factor: f64,
}

impl Default for KneeParams {
    fn default() -> Self {
        Self {
            click_rate_hz: 8.0,
            click_amplitude: 0.05,
            center_hz: 1500.0,
            damping_per_s: 80.0,
            amplitude_jitter: 0.25,
            health_effect: true,
            amplitude_factor: 1.5,
            rate_factor: 1.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneParams {
    pub frequency_hz: f64,
    /// Peak amplitude in full-scale units.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadbandParams {
    /// RMS level of the white noise.
    pub level_dbfs: f64,
    /// Per-recording-day level offsets, indexed by day modulo length.
    #[serde(default)]
    pub day_offsets_db: Vec<f64>,
    /// Standard deviation of an extra Gaussian per-day level offset.
    #[serde(default)]
    pub day_jitter_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTiltParams {
    /// Spectral slope for the left-slot and right-slot device.
    pub slope_db_per_khz: [f64; 2],
    /// Frequency-independent gain for the left-slot and right-slot device.
    #[serde(default)]
    pub gain_db: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SourceKind {
    Knee(KneeParams),
    Tone(ToneParams),
    Broadband(BroadbandParams),
    DeviceTilt(DeviceTiltParams),
}

impl SourceKind {
    pub fn label(&self) -> &'static str {
        match self {
            SourceKind::Knee(_) => "knee",
            SourceKind::Tone(_) => "tone",
            SourceKind::Broadband(_) => "broadband",
            SourceKind::DeviceTilt(_) => "device-tilt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSource {
    pub name: String,
    pub kind: SourceKind,
    pub activation: Activation,
    #[serde(default)]
    pub scope: ActivationScope,
    /// Forces the source on for the first `k` healthy legs of the cohort (whole session).
    #[serde(default)]
    pub force_on_healthy_legs: usize,
}

impl BaseSource {
    pub fn new(name: impl Into<String>, kind: SourceKind, activation: Activation) -> Self {
        Self {
            name: name.into(),
            kind,
            activation,
            scope: ActivationScope::Repetition,
            force_on_healthy_legs: 0,
        }
    }

    pub fn with_scope(mut self, scope: ActivationScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_forced_healthy_legs(mut self, k: usize) -> Self {
        self.force_on_healthy_legs = k;
        self
    }
}

/// p(O_i | S_j): probability that the sensor reports observation `i` given composite event `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SensorChannel {
    /// Each active source is observed independently with its own probability;
    /// inactive sources are never observed.
    PerSource { detection: Vec<f64> },
    /// Full table `matrix[i][j]` over composite-event indices. Columns sum to one.
    Table { matrix: Vec<Vec<f64>> },
}

impl SensorChannel {
    pub fn perfect(n_sources: usize) -> Self {
        SensorChannel::PerSource { detection: vec![1.0; n_sources] }
    }

    /// p(O = observed | S = active), both given as source bit masks.
    pub fn prob_masks(&self, observed: u32, active: u32, n_sources: usize) -> f64 {
        match self {
            SensorChannel::PerSource { detection } => {
                if observed & !active != 0 {
                    return 0.0;
                }
                let mut p = 1.0;
                for (k, &q) in detection.iter().enumerate().take(n_sources) {
                    if active >> k & 1 == 1 {
                        p *= if observed >> k & 1 == 1 { q } else { 1.0 - q };
                    }
                }
                p
            }
            SensorChannel::Table { matrix } => {
                let full = event_full_mask(n_sources);
                let i = (!observed & full) as usize;
                let j = (!active & full) as usize;
                matrix[i][j]
            }
        }
    }

    fn validate(&self, n_sources: usize) -> Result<()> {
        match self {
            SensorChannel::PerSource { detection } => {
                if detection.len() != n_sources {
                    return Err(Error::InvalidWorld(format!(
                        "sensor channel lists {} detection probabilities for {n_sources} sources",
                        detection.len()
                    )));
                }
                if let Some(q) = detection.iter().find(|q| !(0.0..=1.0).contains(*q)) {
                    return Err(Error::InvalidWorld(format!("detection probability {q} outside [0,1]")));
                }
            }
            SensorChannel::Table { matrix } => {
                if n_sources > MAX_TABLE_SOURCES {
                    return Err(Error::Capacity {
                        what: "sensor channel table sources",
                        requested: n_sources,
                        max: MAX_TABLE_SOURCES,
                    });
                }
                let m = n_events(n_sources);
                if matrix.len() != m || matrix.iter().any(|row| row.len() != m) {
                    return Err(Error::InvalidWorld(format!(
                        "sensor channel table must be {m}x{m} for {n_sources} sources"
                    )));
                }
                for j in 0..m {
                    let mut total = 0.0;
                    for (i, row) in matrix.iter().enumerate() {
                        let p = row[j];
                        if !(0.0..=1.0).contains(&p) {
                            return Err(Error::InvalidWorld(format!("p(O_{i}|S_{j}) = {p} outside [0,1]")));
                        }
                        total += p;
                    }
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidWorld(format!(
                            "sensor channel column {j} sums to {total}, expected 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Largest source count for which a dense sensor table is accepted.
pub const MAX_TABLE_SOURCES: usize = 10;

pub(crate) fn event_full_mask(n_sources: usize) -> u32 {
    debug_assert!(n_sources <= MAX_ENUMERATED_SOURCES);
    ((1u64 << n_sources) - 1) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Each leg's health is assigned independently of the other leg.
    Independent,
    /// Every two-legged subject has exactly one healthy and one unhealthy leg.
    Complementary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceAssignment {
    /// The left leg is always recorded by the left device.
    SideLocked,
    /// The device for each leg is drawn at random per subject.
    Shuffled,
}

/// Identity of the physical recording device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceSlot {
    DeviceLeft,
    DeviceRight,
}

impl DeviceSlot {
    pub fn for_side(side: Side) -> Self {
        match side {
            Side::Left => DeviceSlot::DeviceLeft,
            Side::Right => DeviceSlot::DeviceRight,
        }
    }

    pub fn index(self) -> usize {
        match self {
            DeviceSlot::DeviceLeft => 0,
            DeviceSlot::DeviceRight => 1,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            DeviceSlot::DeviceLeft => "device-left",
            DeviceSlot::DeviceRight => "device-right",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_subjects: usize,
    pub pairing: Pairing,
    /// 1 records only the right leg (or the unhealthy leg under complementary pairing), 2 records both.
    pub legs_per_subject: usize,
    pub device_assignment: DeviceAssignment,
    /// Fraction of unhealthy legs. Under complementary pairing, the fraction of
    /// subjects whose left leg is the unhealthy one.
    pub health_split: f64,
    pub n_repetitions: usize,
    /// Recording days per leg; each day is a separate session.
    #[serde(default = "one")]
    pub sessions_per_leg: usize,
}

fn one() -> usize {
    1
}

impl CohortSpec {
    pub fn prior_unhealthy(&self) -> f64 {
        match self.pairing {
            Pairing::Independent => self.health_split,
            Pairing::Complementary if self.legs_per_subject == 2 => 0.5,
            Pairing::Complementary => self.health_split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub base_sources: Vec<BaseSource>,
    pub sensor_channel: SensorChannel,
    pub causal_link_enabled: bool,
    pub sample_rate: f64,
    pub cohort: CohortSpec,
    pub seed: u64,
    #[serde(default = "default_noise_floor")]
    pub noise_floor_dbfs: f64,
    #[serde(default = "default_repetition_s")]
    pub repetition_s: f64,
}

fn default_noise_floor() -> f64 {
    DEFAULT_NOISE_FLOOR_DBFS
}

fn default_repetition_s() -> f64 {
    DEFAULT_REPETITION_S
}

pub const DEFAULT_SAMPLE_RATE: f64 = 100_000.0;
pub const DEFAULT_NOISE_FLOOR_DBFS: f64 = -60.0;
pub const DEFAULT_REPETITION_S: f64 = 4.0;

impl WorldSpec {
    pub fn n_sources(&self) -> usize {
        self.base_sources.len()
    }

    pub fn knee_index(&self) -> Option<usize> {
        self.base_sources.iter().position(|s| matches!(s.kind, SourceKind::Knee(_)))
    }

    pub fn repetition_len(&self) -> usize {
        (self.repetition_s * self.sample_rate).round() as usize
    }

    pub fn noise_rms(&self) -> f64 {
        if self.noise_floor_dbfs == f64::NEG_INFINITY {
            0.0
        } else {
            10f64.powf(self.noise_floor_dbfs / 20.0)
        }
    }

    /// Per-repetition probability that every source in `active` is on and every other source off.
    pub fn event_prob_given_health(&self, active: u32, health: Health) -> f64 {
        self.base_sources
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let p = s.activation.given(health);
                if active >> k & 1 == 1 { p } else { 1.0 - p }
            })
            .product()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_subjects(mut self, n: usize) -> Self {
        self.cohort.n_subjects = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sources();
        if n > MAX_ENUMERATED_SOURCES {
            return Err(Error::Capacity { what: "base sources", requested: n, max: MAX_ENUMERATED_SOURCES });
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::InvalidWorld(format!("sample rate {} must be positive", self.sample_rate)));
        }
        if !(self.repetition_s.is_finite() && self.repetition_s > 0.0) || self.repetition_len() == 0 {
            return Err(Error::InvalidWorld("repetition duration must be positive".into()));
        }
        if self.noise_floor_dbfs.is_nan() || self.noise_floor_dbfs > 0.0 {
            return Err(Error::InvalidWorld("noise floor must be at most 0 dBFS".into()));
        }
        let knees = self.base_sources.iter().filter(|s| matches!(s.kind, SourceKind::Knee(_))).count();
        if knees != 1 {
            return Err(Error::InvalidWorld(format!("world needs exactly one knee source, found {knees}")));
        }
        let nyquist = self.sample_rate / 2.0;
        for (k, s) in self.base_sources.iter().enumerate() {
            let name = &s.name;
            if self.base_sources[..k].iter().any(|o| &o.name == name) {
                return Err(Error::InvalidWorld(format!("duplicate source name '{name}'")));
            }
            for p in [s.activation.healthy, s.activation.unhealthy] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidWorld(format!("source '{name}': activation {p} outside [0,1]")));
                }
            }
            match &s.kind {
                SourceKind::Knee(kp) => {
                    let positive = [kp.click_rate_hz, kp.center_hz, kp.damping_per_s, kp.amplitude_factor, kp.rate_factor];
                    if positive.iter().any(|v| !(v.is_finite() && *v > 0.0))
                        || !(kp.click_amplitude.is_finite() && kp.click_amplitude >= 0.0)
                        || !(kp.amplitude_jitter.is_finite() && kp.amplitude_jitter >= 0.0)
                    {
                        return Err(Error::InvalidWorld(format!("knee source '{name}' has invalid parameters")));
                    }
                    if kp.center_hz >= nyquist {
                        return Err(Error::InvalidWorld(format!("knee center {} Hz at or above Nyquist", kp.center_hz)));
                    }
                    if !self.causal_link_enabled && !s.activation.is_health_independent() {
                        return Err(Error::InvalidWorld(format!(
                            "knee source '{name}' activation depends on health while the causal link is off"
                        )));
                    }
                }
                SourceKind::Tone(tp) => {
                    if !(tp.frequency_hz > 0.0 && tp.frequency_hz < nyquist) {
                        return Err(Error::InvalidWorld(format!(
                            "tone '{name}' at {} Hz must lie in (0, {nyquist}) Hz",
                            tp.frequency_hz
                        )));
                    }
                    if !(tp.amplitude.is_finite() && tp.amplitude >= 0.0) {
                        return Err(Error::InvalidWorld(format!("tone '{name}' amplitude must be non-negative")));
                    }
                }
                SourceKind::Broadband(bp) => {
                    let finite = bp.level_dbfs.is_finite()
                        && bp.day_offsets_db.iter().all(|v| v.is_finite())
                        && bp.day_jitter_db.is_finite()
                        && bp.day_jitter_db >= 0.0;
                    if !finite {
                        return Err(Error::InvalidWorld(format!("broadband source '{name}' has invalid levels")));
                    }
                }
                SourceKind::DeviceTilt(tp) => {
                    if tp.slope_db_per_khz.iter().chain(&tp.gain_db).any(|v| !v.is_finite()) {
                        return Err(Error::InvalidWorld(format!("device tilt '{name}' slope and gain must be finite")));
                    }
                }
            }
        }
        self.sensor_channel.validate(n)?;
        let c = &self.cohort;
        if c.n_subjects == 0 {
            return Err(Error::InvalidWorld("cohort needs at least one subject".into()));
        }
        if !(1..=2).contains(&c.legs_per_subject) {
            return Err(Error::InvalidWorld("legs_per_subject must be 1 or 2".into()));
        }
        if c.n_repetitions == 0 || c.sessions_per_leg == 0 {
            return Err(Error::InvalidWorld("cohort needs at least one repetition and one session per leg".into()));
        }
        if !(0.0..=1.0).contains(&c.health_split) {
            return Err(Error::InvalidWorld(format!("health split {} outside [0,1]", c.health_split)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knee_only() -> WorldSpec {
        WorldSpec {
            base_sources: vec![BaseSource::new("knee", SourceKind::Knee(KneeParams::default()), Activation::constant(1.0))],
            sensor_channel: SensorChannel::perfect(1),
            causal_link_enabled: true,
            sample_rate: DEFAULT_SAMPLE_RATE,
            cohort: CohortSpec {
                n_subjects: 2,
                pairing: Pairing::Independent,
                legs_per_subject: 1,
                device_assignment: DeviceAssignment::Shuffled,
                health_split: 0.5,
                n_repetitions: 2,
                sessions_per_leg: 1,
            },
            seed: 1,
            noise_floor_dbfs: DEFAULT_NOISE_FLOOR_DBFS,
            repetition_s: 0.5,
        }
    }

    #[test]
    fn rejects_two_knees_and_bad_tone() {
        let mut w = knee_only();
        assert!(w.validate().is_ok());
        w.base_sources.push(w.base_sources[0].clone());
        w.base_sources[1].name = "knee2".into();
        w.sensor_channel = SensorChannel::perfect(2);
        assert!(matches!(w.validate(), Err(Error::InvalidWorld(_))));

        let mut w = knee_only();
        w.base_sources.push(BaseSource::new(
            "tone",
            SourceKind::Tone(ToneParams { frequency_hz: 50_000.0, amplitude: 0.1 }),
            Activation::constant(1.0),
        ));
        w.sensor_channel = SensorChannel::perfect(2);
        assert!(w.validate().is_err());
    }

    #[test]
    fn causal_off_requires_health_independent_knee() {
        let mut w = knee_only();
        w.causal_link_enabled = false;
        w.base_sources[0].activation = Activation { healthy: 0.5, unhealthy: 0.9 };
        assert!(w.validate().is_err());
    }

    #[test]
    fn per_source_channel_never_observes_inactive() {
        let ch = SensorChannel::PerSource { detection: vec![0.7, 0.4] };
        assert_eq!(ch.prob_masks(0b01, 0b10, 2), 0.0);
        assert!((ch.prob_masks(0b11, 0b11, 2) - 0.28).abs() < 1e-15);
        let total: f64 = (0..4u32).map(|o| ch.prob_masks(o, 0b11, 2)).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn world_round_trips_through_json() {
        let w = knee_only();
        let text = serde_json::to_string(&w).unwrap();
        let back: WorldSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(w, back);
    }
}
