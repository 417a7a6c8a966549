//! Angle between the principal axes of two subgroups, and LOSO accuracy as one
//! subgroup is rotated toward alignment.
//!
//! ```text
//! cargo run --release --example rotation
//! ```

use vibroaudit::audit::{rotation_analysis, RotationWorld, DEFAULT_ROTATION_GRID_DEG, LEFT_UNHEALTHY, RIGHT_UNHEALTHY};
use vibroaudit::learn::CvOptions;

fn main() -> vibroaudit::Result<()> {
    let world = RotationWorld { phi_deg: 8.0, seed: 5, ..RotationWorld::default() };
    let (table, in_b) = world.sample()?;
    let r = rotation_analysis(&table, &in_b, [RIGHT_UNHEALTHY, LEFT_UNHEALTHY], &DEFAULT_ROTATION_GRID_DEG, 5, &CvOptions::lean())?;

    println!("planted {:.1} deg, measured {:.2} deg", world.phi_deg, r.phi_degrees);
    println!("unrotated accuracy {:.1}%", 100.0 * r.observed_accuracy);
    for p in &r.accuracy_vs_rotation {
        println!("  theta {:>4.1} deg  {:.1}%", p.theta_deg, 100.0 * p.accuracy);
    }
    Ok(())
}
