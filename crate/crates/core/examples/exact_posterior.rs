//! Exact posterior over quantized observations of a two-source world, and the
//! LOSO accuracy a learner reaches against that Bayes bound.
//!
//! ```text
//! cargo run --release --example exact_posterior
//! ```

use vibroaudit::dataset::{FeatureTable, RowLabels};
use vibroaudit::learn::{loso_cv, CvOptions};
use vibroaudit::sigsynth::{
    exact_posterior, sample_quantized, Activation, BaseSource, CohortSpec, DeviceAssignment, KneeParams, Pairing,
    QuantizerSpec, SensorChannel, SourceKind, ToneParams, WorldSpec,
};

fn world(seed: u64) -> WorldSpec {
    WorldSpec {
        base_sources: vec![
            BaseSource::new("knee", SourceKind::Knee(KneeParams::default()), Activation { healthy: 0.25, unhealthy: 0.7 }),
            BaseSource::new(
                "interference",
                SourceKind::Tone(ToneParams { frequency_hz: 1000.0, amplitude: 0.1 }),
                Activation { healthy: 0.4, unhealthy: 0.6 },
            ),
        ],
        sensor_channel: SensorChannel::PerSource { detection: vec![0.9, 0.8] },
        causal_link_enabled: true,
        sample_rate: 8000.0,
        cohort: CohortSpec {
            n_subjects: 40,
            pairing: Pairing::Independent,
            legs_per_subject: 1,
            device_assignment: DeviceAssignment::SideLocked,
            health_split: 0.5,
            n_repetitions: 20,
            sessions_per_leg: 1,
        },
        seed,
        noise_floor_dbfs: -60.0,
        repetition_s: 0.1,
    }
}

fn main() -> vibroaudit::Result<()> {
    let q = QuantizerSpec::noisy_bits(2, 0.05)?;
    let posterior = exact_posterior(&world(0), &q)?;
    for c in &posterior.cells {
        println!(
            "cell {}  p(x) {:.3}  p(unhealthy | x) {:.3}  decide {}",
            c.cell,
            c.p_cell,
            c.p_unhealthy,
            c.decision()
        );
    }
    println!("Bayes accuracy {:.1}%", 100.0 * posterior.bayes_accuracy());

    let names: Vec<String> = (1..q.n_cells()).map(|c| format!("cell{c}")).collect();
    for seed in 0..5 {
        let mut table = FeatureTable::new(names.clone());
        for r in sample_quantized(&world(seed), &q)? {
            table.values.push((1..q.n_cells()).map(|c| f64::from(u8::from(r.cell == c))).collect());
            table.labels.push(RowLabels {
                session_id: r.session_id,
                subject_id: r.subject_id,
                side: r.side,
                device_id: r.device_id,
                health: r.health,
                repetition: r.repetition,
            });
        }
        println!("seed {seed}: LOSO on one-hot cells {:.1}%", 100.0 * loso_cv(&table, &CvOptions::lean())?.accuracy());
    }
    Ok(())
}
