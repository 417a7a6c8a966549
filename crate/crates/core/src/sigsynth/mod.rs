//! Synthetic multi-source recordings from an explicit causal world, plus an
//! exact-enumeration Bayes posterior for discretized versions of the world.

mod cohort;
mod events;
mod export;
mod posterior;
mod presets;
mod render;
mod world;

pub use cohort::{plan_sessions, sample_session_events, session_id, subject_id, RepetitionEvents, SessionPlan};
pub use events::{enumerate_composite_events, index_to_mask, n_events, CompositeEvent, MAX_ENUMERATED_SOURCES};
pub use export::{write_dataset, DatasetSummary, GroundTruthFile, SessionTruth};
pub use posterior::{
    exact_posterior, sample_quantized, CellPosterior, PosteriorTable, QuantizedRepetition, QuantizerSpec,
    MAX_CELLS, MAX_POSTERIOR_SOURCES,
};
pub use presets::{
    scenario_preset, Scenario, DAY_OFFSETS_DB, DEVICE_TILT_DB_PER_KHZ, INTERFERENCE_AMPLITUDE, INTERFERENCE_HZ,
    LEFT_DRIFT_DB_PER_KHZ, LEFT_DRIFT_GAIN_DB,
};
pub use render::{
    mixing_residual, sample_cohort, sample_cohort_with, Click, ComponentWave, GroundTruth, RecordingSession,
    RenderOptions, Renderer, RepetitionTruth,
};
pub use world::{
    Activation, ActivationScope, BaseSource, BroadbandParams, CohortSpec, DeviceAssignment, DeviceSlot,
    DeviceTiltParams, KneeParams, Pairing, SensorChannel, SourceKind, ToneParams, WorldSpec, DEFAULT_NOISE_FLOOR_DBFS,
    DEFAULT_REPETITION_S, DEFAULT_SAMPLE_RATE,
};
