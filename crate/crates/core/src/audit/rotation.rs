//! Rotation audit on a two-feature plane: the angle between the principal
//! components of two subgroups, and LOSO health accuracy as one subgroup is
//! rotated to change that angle.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, RowLabels};
use crate::error::{Error, Result};
use crate::labels::{Health, Side};
use crate::learn::{loso_cv, pca2, CvOptions, Pca2Result};
use crate::rng::{stream, tag};

/// Grid of the default accuracy-vs-angle curve, in degrees.
pub const DEFAULT_ROTATION_GRID_DEG: [f64; 11] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationPoint {
    pub theta_deg: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationResult {
    pub seed: u64,
    pub features: [String; 2],
    pub subgroups: [String; 2],
    pub pca_a: Pca2Result,
    pub pca_b: Pca2Result,
    pub v_a: [f64; 2],
    pub v_b: [f64; 2],
    /// Angle between the principal axes, in [0, 90].
    pub phi_degrees: f64,
    /// Angle from `v_a` to the axis of `v_b` nearest to it, in [-90, 90].
    pub signed_angle_deg: f64,
    /// LOSO accuracy on the standardized, unrotated plane.
    pub observed_accuracy: f64,
    pub accuracy_vs_rotation: Vec<RotationPoint>,
    pub accuracy_at_aligned: f64,
}

impl RotationResult {
    pub fn accuracy_at(&self, theta_deg: f64) -> Option<f64> {
        self.accuracy_vs_rotation.iter().find(|p| p.theta_deg == theta_deg).map(|p| p.accuracy)
    }
}

/// Two-feature rows standardized with population statistics over all rows.
pub fn standardized_plane(values: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = values.len() as f64;
    let stats: Vec<(f64, f64)> = (0..2)
        .map(|j| {
            let mean = values.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = values.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
        })
        .collect();
    values.iter().map(|r| [(r[0] - stats[0].0) / stats[0].1, (r[1] - stats[1].0) / stats[1].1]).collect()
}

fn with_points(table: &FeatureTable, points: &[[f64; 2]]) -> FeatureTable {
    FeatureTable {
        names: table.names.clone(),
        labels: table.labels.clone(),
        values: points.iter().map(|p| p.to_vec()).collect(),
    }
}

/// Rows in subgroup B are `true`. The table must hold exactly two features;
/// they are standardized over all rows before anything else happens. For each
/// grid angle θ, subgroup B is rotated about its own mean so that the signed
/// angle between the axes becomes θ (with the observed sign), then LOSO runs on
/// health. A grid angle equal to the observed φ applies no rotation. The
/// analysis is deterministic; `seed` is recorded for the report only.
pub fn rotation_analysis(
    table: &FeatureTable,
    in_b: &[bool],
    subgroup_names: [&str; 2],
    grid_deg: &[f64],
    seed: u64,
    cv: &CvOptions,
) -> Result<RotationResult> {
    if table.n_features() != 2 {
        return Err(Error::param(format!("rotation analysis needs exactly 2 features, got {}", table.n_features())));
    }
    if in_b.len() != table.n_rows() {
        return Err(Error::param("subgroup membership length differs from row count"));
    }
    let points = standardized_plane(&table.values);
    let split = |b: bool| -> Vec<[f64; 2]> { points.iter().zip(in_b).filter(|(_, &m)| m == b).map(|(p, _)| *p).collect() };
    let (pa, pb) = (split(false), split(true));
    if pa.len() < 3 || pb.len() < 3 {
        return Err(Error::Audit(format!("each subgroup needs at least 3 samples, got {} and {}", pa.len(), pb.len())));
    }
    let pca_a = pca2(&pa)?;
    let pca_b = pca2(&pb)?;
    if pca_a.degenerate || pca_b.degenerate {
        return Err(Error::Degenerate(format!(
            "principal axis undefined (degenerate a: {}, b: {})",
            pca_a.degenerate, pca_b.degenerate
        )));
    }
    let v_a = pca_a.first;
    let mut v_b = pca_b.first;
    let dot = v_a[0] * v_b[0] + v_a[1] * v_b[1];
    if dot < 0.0 {
        v_b = [-v_b[0], -v_b[1]];
    }
    let cross = v_a[0] * v_b[1] - v_a[1] * v_b[0];
    let alpha = cross.atan2(dot.abs());
    let phi = alpha.abs();
    let sign = if alpha < 0.0 { -1.0 } else { 1.0 };

    let mean_b = pca_b.mean;
    let rotated = |theta: f64| -> Vec<[f64; 2]> {
        let delta = sign * theta - alpha;
        if delta == 0.0 {
            return points.clone();
        }
        let (s, c) = delta.sin_cos();
        points
            .iter()
            .zip(in_b)
            .map(|(p, &b)| {
                if !b {
                    return *p;
                }
                let (dx, dy) = (p[0] - mean_b[0], p[1] - mean_b[1]);
                [mean_b[0] + c * dx - s * dy, mean_b[1] + s * dx + c * dy]
            })
            .collect()
    };
    let accuracy = |pts: Vec<[f64; 2]>| -> Result<f64> { Ok(loso_cv(&with_points(table, &pts), cv)?.mean_repetition_accuracy) };

    let observed_accuracy = accuracy(points.clone())?;
    let curve: Vec<RotationPoint> = grid_deg
        .par_iter()
        .map(|&deg| {
            // The observed angle itself must reproduce the unrotated run exactly.
            let theta = if (deg - phi.to_degrees()).abs() < 1e-12 { phi } else { deg.to_radians() };
            Ok(RotationPoint { theta_deg: deg, accuracy: accuracy(rotated(theta))? })
        })
        .collect::<Result<_>>()?;
    let accuracy_at_aligned = match curve.iter().find(|p| p.theta_deg == 0.0) {
        Some(p) => p.accuracy,
        None => accuracy(rotated(0.0))?,
    };
    Ok(RotationResult {
        seed,
        features: [table.names[0].clone(), table.names[1].clone()],
        subgroups: [subgroup_names[0].to_string(), subgroup_names[1].to_string()],
        pca_a,
        pca_b,
        v_a,
        v_b,
        phi_degrees: phi.to_degrees(),
        signed_angle_deg: alpha.to_degrees(),
        observed_accuracy,
        accuracy_vs_rotation: curve,
        accuracy_at_aligned,
    })
}

pub const RIGHT_UNHEALTHY: &str = "right-unhealthy";
pub const LEFT_UNHEALTHY: &str = "left-unhealthy";

/// Splits subjects by which leg is unhealthy: subgroup A is right-unhealthy,
/// B is left-unhealthy. Every subject needs exactly one unhealthy leg.
pub fn unhealthy_side_subgroups(table: &FeatureTable) -> Result<Vec<bool>> {
    let mut unhealthy_side: BTreeMap<&str, Option<Side>> = BTreeMap::new();
    for l in &table.labels {
        let entry = unhealthy_side.entry(&l.subject_id).or_insert(None);
        if l.health.is_unhealthy() {
            match entry {
                Some(s) if *s != l.side => {
                    return Err(Error::Audit(format!("subject {} has two unhealthy legs", l.subject_id)));
                }
                _ => *entry = Some(l.side),
            }
        }
    }
    table
        .labels
        .iter()
        .map(|l| match unhealthy_side[l.subject_id.as_str()] {
            Some(side) => Ok(side == Side::Left),
            None => Err(Error::Audit(format!("subject {} has no unhealthy leg", l.subject_id))),
        })
        .collect()
}

/// Two-feature cohort with a planted rotation between subgroup axes.
///
/// Every subject has both legs recorded, the left one on the left device.
/// Within a subgroup the two legs sit at `±spread` along the subgroup axis
/// (left device at `+`); the axes lie at 45° ± φ/2, so health is only linearly
/// separable through the rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RotationWorld {
    pub n_right_unhealthy: usize,
    pub n_left_unhealthy: usize,
    pub reps_per_leg: usize,
    pub phi_deg: f64,
    pub spread: f64,
    pub sigma_parallel: f64,
    pub sigma_perpendicular: f64,
    pub seed: u64,
}

impl Default for RotationWorld {
    fn default() -> Self {
        Self {
            n_right_unhealthy: 9,
            n_left_unhealthy: 7,
            reps_per_leg: 8,
            phi_deg: 10.0,
            spread: 1.0,
            sigma_parallel: 0.3,
            sigma_perpendicular: 0.05,
            seed: 0,
        }
    }
}

impl RotationWorld {
    pub fn n_points(&self) -> usize {
        2 * (self.n_right_unhealthy + self.n_left_unhealthy) * self.reps_per_leg
    }

    /// Feature table (`feature_a`, `feature_b`) and subgroup membership
    /// (`true` for left-unhealthy subjects).
    pub fn sample(&self) -> Result<(FeatureTable, Vec<bool>)> {
        if self.n_right_unhealthy == 0 || self.n_left_unhealthy == 0 || self.reps_per_leg == 0 {
            return Err(Error::param("rotation world needs subjects in both subgroups and at least one repetition"));
        }
        let n_subjects = self.n_right_unhealthy + self.n_left_unhealthy;
        let mut table = FeatureTable::new(vec!["feature_a".into(), "feature_b".into()]);
        let mut in_b = Vec::with_capacity(self.n_points());
        let mut rng = stream(self.seed, &[tag::ROTATION]);
        let half = self.phi_deg.to_radians() / 2.0;
        let base = std::f64::consts::FRAC_PI_4;
        for s in 0..n_subjects {
            let left_unhealthy = s >= self.n_right_unhealthy;
            let angle = if left_unhealthy { base + half } else { base - half };
            let (axis, normal) = ([angle.cos(), angle.sin()], [-angle.sin(), angle.cos()]);
            for side in [Side::Left, Side::Right] {
                let sign = if side == Side::Left { 1.0 } else { -1.0 };
                let health = Health::from_unhealthy((side == Side::Left) == left_unhealthy);
                let subject_id = crate::sigsynth::subject_id(s);
                let session_id = format!("{subject_id}-{}", if side == Side::Left { "L" } else { "R" });
                for rep in 0..self.reps_per_leg {
                    let along = sign * self.spread + self.sigma_parallel * rng.sample::<f64, _>(StandardNormal);
                    let across = self.sigma_perpendicular * rng.sample::<f64, _>(StandardNormal);
                    table.labels.push(RowLabels {
                        session_id: session_id.clone(),
                        subject_id: subject_id.clone(),
                        side,
                        device_id: format!("device-{side}"),
                        health,
                        repetition: rep,
                    });
                    table.values.push(vec![along * axis[0] + across * normal[0], along * axis[1] + across * normal[1]]);
                    in_b.push(left_unhealthy);
                }
            }
        }
        Ok((table, in_b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_planted_angle() {
        let world = RotationWorld { phi_deg: 7.0, reps_per_leg: 200, seed: 3, ..Default::default() };
        let (t, b) = world.sample().unwrap();
        let r = rotation_analysis(&t, &b, [RIGHT_UNHEALTHY, LEFT_UNHEALTHY], &[0.0, 7.0], 3, &CvOptions::lean()).unwrap();
        assert!((r.phi_degrees - 7.0).abs() < 1.0, "{}", r.phi_degrees);
        assert!(r.signed_angle_deg > 0.0);
    }

    #[test]
    fn theta_equal_to_phi_is_the_unrotated_run() {
        let (t, b) = RotationWorld { seed: 5, ..Default::default() }.sample().unwrap();
        let probe = rotation_analysis(&t, &b, ["a", "b"], &[], 5, &CvOptions::lean()).unwrap();
        let r = rotation_analysis(&t, &b, ["a", "b"], &[probe.phi_degrees], 5, &CvOptions::lean()).unwrap();
        assert_eq!(r.accuracy_vs_rotation[0].accuracy, r.observed_accuracy);
    }

    #[test]
    fn subgroups_from_unhealthy_side() {
        let (t, b) = RotationWorld::default().sample().unwrap();
        assert_eq!(unhealthy_side_subgroups(&t).unwrap(), b);
    }

    #[test]
    fn isotropic_subgroup_is_degenerate() {
        let mut t = FeatureTable::new(vec!["x".into(), "y".into()]);
        let pts = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        for (i, p) in pts.iter().chain(pts.iter()).enumerate() {
            t.labels.push(RowLabels {
                session_id: format!("s{i}"),
                subject_id: format!("s{i}"),
                side: Side::Left,
                device_id: "d".into(),
                health: Health::from_unhealthy(i % 2 == 0),
                repetition: 0,
            });
            t.values.push(p.to_vec());
        }
        let b: Vec<bool> = (0..8).map(|i| i >= 4).collect();
        let err = rotation_analysis(&t, &b, ["a", "b"], &[0.0], 0, &CvOptions::lean()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err}");
    }
}
