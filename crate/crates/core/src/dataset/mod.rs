//! Recordings, labels, segmentation and the feature map.

mod features;
mod manifest;
mod segment;
mod source;
mod table;
mod wav;

pub use features::{
    extract_features, Aggregator, Band, ExtraFeature, FeatureConfig, FeatureExtractor, FeatureVector, RowLabels,
};
pub use manifest::{load_manifest, ClassCounts, Manifest, SessionRecord};
pub use segment::segment_repetitions;
pub use source::{extract_table, extract_tables, ManifestSource, SessionInfo, SessionSource, WorldSource};
pub use table::{FeatureTable, LABEL_COLUMNS};
pub use wav::{ingest_wav, write_wav_f32};
