//! Render the tone-bias scenario to WAVs plus manifest and ground truth.
//!
//! ```text
//! cargo run --release --example synth_dataset -- /tmp/tone-bias
//! ```

use std::path::PathBuf;

use vibroaudit::sigsynth::{sample_cohort, scenario_preset, write_dataset, Scenario};

fn main() -> vibroaudit::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("vibroaudit-tone-bias"));
    let world = scenario_preset(Scenario::ToneBias).with_subjects(6).with_seed(7);

    for s in sample_cohort(&world)? {
        println!(
            "{:<12} {:<9} {:<12} interference rendered: {}",
            s.session_id,
            s.health.to_string(),
            s.device_id,
            s.ground_truth.source_rendered("interference")
        );
    }

    let summary = write_dataset(&world, &out)?;
    println!("wrote {} sessions, manifest {}", summary.n_sessions, summary.manifest_path.display());
    Ok(())
}
