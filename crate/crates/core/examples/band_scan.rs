//! Re-extracts features per 10 kHz band and reruns LOSO in each; a label-locked
//! interference tone makes its band stand out.
//!
//! ```text
//! cargo run --release --example band_scan
//! ```

use vibroaudit::audit::{band_scan, bands_from_edges, DEFAULT_BAND_EDGES};
use vibroaudit::dataset::{FeatureConfig, WorldSource};
use vibroaudit::learn::CvOptions;
use vibroaudit::sigsynth::{scenario_preset, Scenario};

fn main() -> vibroaudit::Result<()> {
    let bands = bands_from_edges(&DEFAULT_BAND_EDGES);
    for scenario in [Scenario::ToneBias, Scenario::RandomizedTone] {
        let world = scenario_preset(scenario).with_seed(3);
        let scan = band_scan(&WorldSource::new(&world)?, &bands, &FeatureConfig::default(), &CvOptions::lean())?;
        println!("{}", scenario.name());
        for b in &scan.bands {
            let acc = b.accuracy.map_or_else(|| "skipped".to_string(), |a| format!("{:.1}%", 100.0 * a));
            println!("  {:>6.0}-{:<6.0} Hz  {acc}", b.band.lo, b.band.hi);
        }
    }
    Ok(())
}
