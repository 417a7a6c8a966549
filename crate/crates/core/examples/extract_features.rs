//! Per-repetition MFCC feature table of a rendered scenario, written as CSV.
//!
//! ```text
//! cargo run --release --example extract_features -- /tmp/features.csv
//! ```

use std::path::PathBuf;

use vibroaudit::dataset::{extract_table, ExtraFeature, FeatureConfig, WorldSource};
use vibroaudit::sigsynth::{scenario_preset, Scenario};

fn main() -> vibroaudit::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("vibroaudit-features.csv"));
    let world = scenario_preset(Scenario::Clean).with_subjects(4).with_seed(1);
    let cfg = FeatureConfig {
        extra_features: vec![ExtraFeature::Rms, ExtraFeature::SpectralCentroid],
        ..FeatureConfig::default()
    };

    let table = extract_table(&WorldSource::new(&world)?, &cfg)?;
    println!("{} rows x {} features", table.n_rows(), table.n_features());
    println!("first columns: {:?}", &table.names[..4]);
    for (labels, row) in table.labels.iter().zip(&table.values).take(3) {
        println!("{} rep {} {}: mfcc00_mean {:.3}", labels.session_id, labels.repetition, labels.health, row[0]);
    }
    table.write_csv_file(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
