//! L2-regularized logistic regression on standardized features.
//!
//! Minimizes `mean(softplus(-y z)) + l2/2 |w|^2` (bias unpenalized) with
//! damped Newton steps and Armijo backtracking. Converged when the gradient
//! max-norm falls below `tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::Health;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { l2: 1e-3, max_iter: 5000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Features used by the model, in weight order.
    pub features: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: Vec<Standardization>,
    /// Training features dropped for zero variance.
    pub dropped: Vec<String>,
    pub threshold: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Column of each used feature in the training matrix.
    #[serde(skip)]
    columns: Vec<usize>,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearModel {
    /// Score from a raw row laid out like the training matrix.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut z = self.bias;
        for ((w, s), &c) in self.weights.iter().zip(&self.standardization).zip(&self.columns) {
            z += w * (row[c] - s.mean) / s.std;
        }
        sigmoid(z)
    }

    pub fn label_of(&self, score: f64) -> Health {
        Health::from_unhealthy(score > self.threshold)
    }

    /// Predicts from named values; every model feature must be present.
    pub fn predict_named(&self, names: &[String], values: &[f64]) -> Result<(Health, f64)> {
        let mut z = self.bias;
        for ((f, w), s) in self.features.iter().zip(&self.weights).zip(&self.standardization) {
            let i = names.iter().position(|n| n == f).ok_or_else(|| Error::MissingFeature(f.clone()))?;
            z += w * (values[i] - s.mean) / s.std;
        }
        let score = sigmoid(z);
        Ok((self.label_of(score), score))
    }
}

/// Score in [0,1] and label; a score of exactly 0.5 is Healthy.
pub fn predict(model: &LinearModel, vector: &crate::dataset::FeatureVector) -> Result<(Health, f64)> {
    model.predict_named(&vector.names, &vector.values)
}

/// Fits on rows `x` (columns named by `names`) with binary targets (`true` = positive class).
pub fn fit_binary(x: &[Vec<f64>], names: &[String], y: &[bool], opts: &FitOptions) -> Result<LinearModel> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::param("feature rows and labels differ in length"));
    }
    let n_pos = y.iter().filter(|&&v| v).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClass(format!("{n} training rows, {n_pos} positive")));
    }
    if !(opts.l2 >= 0.0 && opts.tol > 0.0) {
        return Err(Error::param("l2 must be non-negative and tol positive"));
    }
    let d_all = names.len();
    if x.iter().any(|r| r.len() != d_all) {
        return Err(Error::param("inconsistent feature row width"));
    }

    let mut columns = Vec::new();
    let mut standardization = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..d_all {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std > 1e-12 * mean.abs() && std > 0.0 {
            columns.push(j);
            standardization.push(Standardization { mean, std });
        } else {
            dropped.push(names[j].clone());
        }
    }
    let d = columns.len();
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| columns.iter().zip(&standardization).map(|(&c, s)| (r[c] - s.mean) / s.std).collect())
        .collect();
    let t: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();

    // theta = [w_0..w_{d-1}, b]
    let p = d + 1;
    let mut theta = vec![0.0; p];
    theta[d] = (n_pos as f64 / (n - n_pos) as f64).ln();
    let objective = |theta: &[f64]| -> f64 {
        let mut loss = 0.0;
        for (zi, ti) in z.iter().zip(&t) {
            let m = theta[d] + zi.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
            loss += softplus(-ti * m);
        }
        loss / n as f64 + 0.5 * opts.l2 * theta[..d].iter().map(|w| w * w).sum::<f64>()
    };

    let mut f = objective(&theta);
    let mut converged = false;
    let mut iterations = 0;
    let mut grad = vec![0.0; p];
    let mut hess = vec![vec![0.0; p]; p];
    while iterations < opts.max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|r| r.iter_mut().for_each(|h| *h = 0.0));
        for (zi, ti) in z.iter().zip(&t) {
            let m = theta[d] + zi.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>();
            let s = sigmoid(-ti * m);
            let g = -ti * s;
            let h = s * (1.0 - s);
            for a in 0..p {
                let za = if a < d { zi[a] } else { 1.0 };
                grad[a] += g * za;
                let hz = h * za;
                for b in 0..=a {
                    let zb = if b < d { zi[b] } else { 1.0 };
                    hess[a][b] += hz * zb;
                }
            }
        }
        for a in 0..p {
            grad[a] /= n as f64;
            for b in 0..=a {
                hess[a][b] /= n as f64;
            }
            if a < d {
                grad[a] += opts.l2 * theta[a];
                hess[a][a] += opts.l2;
            }
        }
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let step = newton_direction(&hess, &grad).unwrap_or_else(|| grad.iter().map(|g| -g).collect());
        let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        let (step, slope) = if slope < 0.0 { (step, slope) } else {
            let s: Vec<f64> = grad.iter().map(|g| -g).collect();
            let sl = -grad.iter().map(|g| g * g).sum::<f64>();
            (s, sl)
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
            let fc = objective(&cand);
            if fc <= f + 1e-4 * alpha * slope {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No further decrease is representable; the gradient test decides convergence.
            break;
        }
    }
    if !converged {
        converged = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < opts.tol;
    }

    Ok(LinearModel {
        features: columns.iter().map(|&c| names[c].clone()).collect(),
        weights: theta[..d].to_vec(),
        bias: theta[d],
        standardization,
        dropped,
        threshold: 0.5,
        converged,
        iterations,
        columns,
    })
}

/// Solves `H s = -g` for symmetric positive-definite `H` (lower triangle used) by Cholesky.
fn newton_direction(h: &[Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    let p = g.len();
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = h[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; p];
    for i in 0..p {
        let s = -g[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>();
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s = y[i] - (i + 1..p).map(|k| l[k][i] * x[k]).sum::<f64>();
        x[i] = s / l[i][i];
    }
    Some(x)
}

/// Fits a health classifier; Unhealthy is the positive class.
pub fn fit_linear(x: &[Vec<f64>], names: &[String], labels: &[Health], opts: &FitOptions) -> Result<LinearModel> {
    let y: Vec<bool> = labels.iter().map(|h| h.is_unhealthy()).collect();
    fit_binary(x, names, &y, opts)
}
