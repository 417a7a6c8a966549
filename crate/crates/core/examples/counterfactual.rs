//! Recording days posing as subjects: a day-level nuisance looks like a health
//! effect when each day is relabeled as one subject.
//!
//! ```text
//! cargo run --release --example counterfactual
//! ```

use vibroaudit::audit::{counterfactual_relabel, RelabelSpec};
use vibroaudit::dataset::{extract_table, FeatureConfig, WorldSource};
use vibroaudit::learn::CvOptions;
use vibroaudit::sigsynth::{scenario_preset, Scenario};

fn main() -> vibroaudit::Result<()> {
    let world = scenario_preset(Scenario::DayNuisance).with_seed(4);
    println!("causal link enabled: {}", world.causal_link_enabled);
    let table = extract_table(&WorldSource::new(&world)?, &FeatureConfig::default())?;

    // First two days "healthy", remaining days "unhealthy".
    let spec = RelabelSpec::by_session_order(&table, 2);
    let r = counterfactual_relabel(&table, &spec, 200, 4, &CvOptions::lean())?;
    println!("counterfactual LOSO accuracy {:.1}%", 100.0 * r.accuracy);
    println!(
        "permutation null {:.1}% +/- {:.1}% over {} relabelings, p = {:.3}",
        100.0 * r.null.mean,
        100.0 * r.null.std,
        r.n_permutations,
        r.p_value
    );
    Ok(())
}
