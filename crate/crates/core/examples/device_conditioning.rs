//! Device predictability, conditioning on the device and the incremental mixing
//! curve on a world where the recording device tracks the operated side.
//!
//! ```text
//! cargo run --release --example device_conditioning
//! ```

use vibroaudit::audit::{
    condition_on_covariate, covariate_predictability, incremental_mixing_curve, ConditioningOptions, Covariate,
};
use vibroaudit::dataset::{extract_table, FeatureConfig, WorldSource};
use vibroaudit::learn::{loso_cv, CvOptions};
use vibroaudit::sigsynth::{scenario_preset, Scenario};

fn main() -> vibroaudit::Result<()> {
    let world = scenario_preset(Scenario::DeviceShift).with_seed(2);
    let table = extract_table(&WorldSource::new(&world)?, &FeatureConfig::default())?;
    let cv = CvOptions::lean();

    println!("health LOSO accuracy  {:.1}%", 100.0 * loso_cv(&table, &cv)?.accuracy());
    println!("device LOSO accuracy  {:.1}%", 100.0 * covariate_predictability(&table, Covariate::Device, &cv)?.accuracy());

    let opts = ConditioningOptions { control_repeats: 200, seed: 2, ..ConditioningOptions::default() };
    let c = condition_on_covariate(&table, Covariate::Device, &opts, &cv)?;
    println!(
        "random half-subsamples {:.1}% +/- {:.1}%, flag below {:.1}%",
        100.0 * c.control.mean,
        100.0 * c.control.std,
        100.0 * c.control_threshold
    );
    for s in &c.strata {
        let acc = s.accuracy.map_or_else(|| "undefined".to_string(), |a| format!("{:.1}%", 100.0 * a));
        println!("  stratum {:<13} {acc:<9} flagged: {}", s.value, s.flagged);
    }

    let curve = incremental_mixing_curve(&table, Covariate::Device, "device-right", "device-left", 20, 2, &cv)?;
    println!("added   stratified  reference");
    for p in &curve.points {
        println!("{:>4.0}%   {:>8.1}%  {:>8.1}%", 100.0 * p.added_fraction, 100.0 * p.stratified.mean, 100.0 * p.reference.mean);
    }
    Ok(())
}
