//! Bias audits over feature tables and session sources.

mod bands;
mod counterfactual;
mod covariate;
mod curves;
mod rotation;
mod stats;
mod tones;

pub use bands::{
    band_scan, band_scan_tables, bands_by_width, bands_from_edges, validate_bands, BandOutcome, BandScanResult,
    DEFAULT_BAND_EDGES, MIN_RESOLVABLE_MEL_BANDS,
};
pub use counterfactual::{counterfactual_relabel, CounterfactualResult, RelabelSpec, RelabelTarget, DEFAULT_PERMUTATIONS};
pub use covariate::{
    condition_on_covariate, covariate_predictability, incremental_mixing_curve, ConditioningOptions, ConditioningResult,
    Covariate, MixingCurve, MixingPoint, StratumResult,
};
pub use curves::{write_samples_csv, CurvePoint, CurveSeries, CURVE_HEADER};
pub use rotation::{
    rotation_analysis, standardized_plane, unhealthy_side_subgroups, RotationPoint, RotationResult, RotationWorld,
    DEFAULT_ROTATION_GRID_DEG, LEFT_UNHEALTHY, RIGHT_UNHEALTHY,
};
pub use stats::{fisher_exact, ks_two_sample, quantile, quantile_sorted, Summary};
pub use tones::{
    cluster_tones, detect_in_signal, detect_persistent_tones, has_tone_near, tone_prevalence_by_label, Prevalence,
    ToneDetection, ToneDetectorOptions, MIN_FRAMES,
};
