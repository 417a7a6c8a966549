use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue gap below which the principal direction is undefined.
pub const DEGENERATE_GAP: f64 = 1e-9;

/// Principal axes of a 2-D point cloud. The first component is sign-fixed so
/// that its first coordinate is non-negative (second coordinate positive when
/// the first is zero); the second component is the first rotated by +90 degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca2Result {
    pub mean: [f64; 2],
    pub first: [f64; 2],
    pub second: [f64; 2],
    pub eigenvalues: [f64; 2],
    pub explained: [f64; 2],
    /// Set when the two eigenvalues are (nearly) equal; directions are then arbitrary.
    pub degenerate: bool,
}

impl Pca2Result {
    /// Orientation of the first component in degrees, in (-90, 90].
    pub fn angle_deg(&self) -> f64 {
        self.first[1].atan2(self.first[0]).to_degrees()
    }
}

pub fn pca2(points: &[[f64; 2]]) -> Result<Pca2Result> {
    let n = points.len();
    if n < 3 {
        return Err(Error::param(format!("pca2 needs at least 3 points, got {n}")));
    }
    let mean = [
        points.iter().map(|p| p[0]).sum::<f64>() / n as f64,
        points.iter().map(|p| p[1]).sum::<f64>() / n as f64,
    ];
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        a += dx * dx;
        b += dx * dy;
        c += dy * dy;
    }
    let denom = (n - 1) as f64;
    let (a, b, c) = (a / denom, b / denom, c / denom);
    let trace = a + c;
    if !(trace > 0.0) {
        return Err(Error::param("pca2 input has zero total variance"));
    }
    let half_gap = (((a - c) / 2.0).powi(2) + b * b).sqrt();
    let l1 = trace / 2.0 + half_gap;
    let l2 = (trace / 2.0 - half_gap).max(0.0);
    let degenerate = (l1 - l2) / l1 < DEGENERATE_GAP;

    // Two algebraically equivalent eigenvector forms; take the better conditioned.
    let u = [l1 - c, b];
    let w = [b, l1 - a];
    let v = if u[0].hypot(u[1]) >= w[0].hypot(w[1]) { u } else { w };
    let norm = v[0].hypot(v[1]);
    let mut first = if norm > 0.0 { [v[0] / norm, v[1] / norm] } else { [1.0, 0.0] };
    if first[0] < 0.0 || (first[0] == 0.0 && first[1] < 0.0) {
        first = [-first[0], -first[1]];
    }
    let second = [-first[1], first[0]];
    Ok(Pca2Result {
        mean,
        first,
        second,
        eigenvalues: [l1, l2],
        explained: [l1 / trace, l2 / trace],
        degenerate,
    })
}
