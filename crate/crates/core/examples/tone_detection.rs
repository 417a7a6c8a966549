//! Persistent-tone detection per session and its prevalence by health label.
//!
//! ```text
//! cargo run --release --example tone_detection
//! ```

use vibroaudit::audit::{cluster_tones, detect_in_signal, has_tone_near, tone_prevalence_by_label, ToneDetectorOptions};
use vibroaudit::sigsynth::{sample_cohort, scenario_preset, Scenario};

fn main() -> vibroaudit::Result<()> {
    let world = scenario_preset(Scenario::ToneBias).with_seed(11);
    let opts = ToneDetectorOptions::default();
    let sessions = sample_cohort(&world)?;

    let mut detections = Vec::new();
    for s in &sessions {
        let found = detect_in_signal(&s.signal.mixdown(), world.sample_rate, &opts)?;
        let centers: Vec<String> = found.iter().map(|d| format!("{:.0} Hz ({:.0}%)", d.center_hz, 100.0 * d.persistence)).collect();
        println!("{:<10} {:<9} {}", s.session_id, s.health.to_string(), centers.join(", "));
        detections.push(found);
    }

    let labels: Vec<_> = sessions.iter().map(|s| s.health).collect();
    for center in cluster_tones(&detections, 500.0) {
        let present: Vec<bool> = detections.iter().map(|d| has_tone_near(d, center, 500.0)).collect();
        let p = tone_prevalence_by_label(&present, &labels)?;
        println!(
            "tone near {center:.0} Hz: unhealthy {}/{}, healthy {}/{}, Fisher p = {:.2e}",
            p.unhealthy_present, p.unhealthy_total, p.healthy_present, p.healthy_total, p.p_value
        );
    }
    Ok(())
}
