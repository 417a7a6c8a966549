//! Small statistics helpers shared by the audits.

use serde::{Deserialize, Serialize};

/// Type-7 (linear interpolation) sample quantile of unsorted data.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub q025: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q975: f64,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let mean = s.iter().sum::<f64>() / n.max(1) as f64;
        let std = if n > 1 { (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Self {
            n,
            mean,
            std,
            min: s.first().copied().unwrap_or(f64::NAN),
            max: s.last().copied().unwrap_or(f64::NAN),
            q025: quantile_sorted(&s, 0.025),
            q25: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q75: quantile_sorted(&s, 0.75),
            q975: quantile_sorted(&s, 0.975),
        }
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// Two-sided Fisher exact test for the 2x2 table `[[a, b], [c, d]]`:
/// sum of hypergeometric probabilities of all tables with the same margins
/// that are no more likely than the observed one.
pub fn fisher_exact(a: usize, b: usize, c: usize, d: usize) -> f64 {
    let n = a + b + c + d;
    let (r1, c1) = (a + b, a + c);
    let lf = ln_factorials(n);
    let ln_p = |x: usize| -> f64 {
        lf[r1] + lf[n - r1] + lf[c1] + lf[n - c1] - lf[n] - lf[x] - lf[r1 - x] - lf[c1 - x] - lf[n + x - r1 - c1]
    };
    let lo = c1.saturating_sub(n - r1);
    let hi = r1.min(c1);
    let observed = ln_p(a);
    let included: Vec<f64> = (lo..=hi).map(ln_p).filter(|lp| *lp <= observed + 1e-7).collect();
    if included.len() == hi - lo + 1 {
        // Every table with these margins counts.
        return 1.0;
    }
    included.into_iter().map(f64::exp).sum::<f64>().min(1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            return (d, p.clamp(0.0, 1.0));
        }
    }
    // The series only fails to converge for tiny statistics.
    (d, 1.0)
}
