//! Persistent narrowband tone detection and label association.

use serde::{Deserialize, Serialize};

use super::stats::fisher_exact;
use crate::dsp::{stft, Spectrogram, Window};
use crate::error::{Error, Result};
use crate::labels::Health;

pub const MIN_FRAMES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToneDetectorOptions {
    pub persistence_min: f64,
    pub prominence_min_db: f64,
    /// Width of the running-median neighbourhood.
    pub median_window_hz: f64,
    /// STFT used by [`detect_in_signal`].
    pub frame_len: usize,
}

impl Default for ToneDetectorOptions {
    fn default() -> Self {
        Self { persistence_min: 0.9, prominence_min_db: 6.0, median_window_hz: 2000.0, frame_len: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneDetection {
    /// Power-weighted centre of the merged bins.
    pub center_hz: f64,
    /// Fraction of frames in which the peak bin is prominent.
    pub persistence: f64,
    /// Median prominence of the peak bin over frames, clamped at 0 dB.
    pub prominence_db: f64,
    pub bins: (usize, usize),
    /// Whether the tone stays prominent through the supplied rest frames.
    pub present_during_inactivity: Option<bool>,
}

fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    let mid = n / 2;
    let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = buf[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

fn prominence_ratio(power: f64, median: f64) -> f64 {
    if median > 0.0 {
        power / median
    } else if power > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Sorted multiset of the powers in a sliding bin window.
struct SortedWindow(Vec<f64>);

impl SortedWindow {
    fn with_capacity(n: usize) -> Self {
        SortedWindow(Vec::with_capacity(n))
    }

    fn clear(&mut self) {
        self.0.clear();
    }

    fn insert(&mut self, v: f64) {
        let i = self.0.partition_point(|x| x.total_cmp(&v).is_lt());
        self.0.insert(i, v);
    }

    fn remove(&mut self, v: f64) {
        let i = self.0.partition_point(|x| x.total_cmp(&v).is_lt());
        self.0.remove(i);
    }

    fn median(&self) -> f64 {
        let (n, w) = (self.0.len(), &self.0);
        if n % 2 == 1 {
            w[n / 2]
        } else {
            0.5 * (w[n / 2 - 1] + w[n / 2])
        }
    }
}

/// Per frame and bin (DC excluded), the ratio of bin power to the median power
/// of the bins within half the median window on either side. A bin is flagged
/// when the ratio exceeds the prominence threshold in at least
/// `persistence_min` of the frames; adjacent flagged bins merge.
///
/// `inactivity` marks rest frames (`true`); when given, each detection reports
/// whether it stays prominent in at least `persistence_min` of those frames.
pub fn detect_persistent_tones(
    spec: &Spectrogram,
    opts: &ToneDetectorOptions,
    inactivity: Option<&[bool]>,
) -> Result<Vec<ToneDetection>> {
    let n_frames = spec.n_frames();
    if n_frames < MIN_FRAMES {
        return Err(Error::param(format!("tone detection needs at least {MIN_FRAMES} frames, got {n_frames}")));
    }
    if let Some(mask) = inactivity {
        if mask.len() != n_frames {
            return Err(Error::param("inactivity mask length differs from frame count"));
        }
    }
    let n_bins = spec.n_bins();
    let half = ((opts.median_window_hz / 2.0) / spec.bin_width()).round().max(1.0) as usize;
    let ratio_min = 10f64.powf(opts.prominence_min_db / 10.0);

    let mut hits = vec![0usize; n_bins];
    let mut rest_hits = vec![0usize; n_bins];
    let mut mean_power = vec![0.0; n_bins];
    let mut window = SortedWindow::with_capacity(2 * half + 1);
    let mut power = vec![0.0; n_bins];
    for t in 0..n_frames {
        power.iter_mut().zip(&spec.magnitudes[t]).for_each(|(p, m)| *p = m * m);
        let rest = inactivity.is_some_and(|m| m[t]);
        window.clear();
        let (mut lo, mut hi) = (1, 0);
        for k in 1..n_bins {
            let (new_lo, new_hi) = (k.saturating_sub(half).max(1), (k + half).min(n_bins - 1));
            for &p in &power[lo..new_lo] {
                window.remove(p);
            }
            for &p in &power[(hi + 1).max(new_lo)..=new_hi] {
                window.insert(p);
            }
            (lo, hi) = (new_lo, new_hi);
            if prominence_ratio(power[k], window.median()) >= ratio_min {
                hits[k] += 1;
                if rest {
                    rest_hits[k] += 1;
                }
            }
            mean_power[k] += power[k] / n_frames as f64;
        }
    }

    let needed = opts.persistence_min * n_frames as f64;
    let flagged: Vec<bool> = (0..n_bins).map(|k| k > 0 && hits[k] as f64 >= needed).collect();
    let n_rest = inactivity.map_or(0, |m| m.iter().filter(|&&r| r).count());
    let mut out = Vec::new();
    let mut k = 1;
    while k < n_bins {
        if !flagged[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < n_bins && flagged[k] {
            k += 1;
        }
        let end = k - 1;
        let weight: f64 = mean_power[start..=end].iter().sum();
        let center_hz = if weight > 0.0 {
            (start..=end).map(|b| spec.bin_freqs[b] * mean_power[b]).sum::<f64>() / weight
        } else {
            0.5 * (spec.bin_freqs[start] + spec.bin_freqs[end])
        };
        let peak = (start..=end).max_by(|a, b| mean_power[*a].total_cmp(&mean_power[*b])).unwrap_or(start);
        let mut r: Vec<f64> = spec
            .magnitudes
            .iter()
            .map(|row| {
                let mut neighbours: Vec<f64> = row[peak.saturating_sub(half).max(1)..=(peak + half).min(n_bins - 1)]
                    .iter()
                    .map(|m| m * m)
                    .collect();
                prominence_ratio(row[peak] * row[peak], median_in_place(&mut neighbours))
            })
            .collect();
        let prominence_db = (10.0 * median_in_place(&mut r).log10()).max(0.0);
        out.push(ToneDetection {
            center_hz,
            persistence: hits[peak] as f64 / n_frames as f64,
            prominence_db,
            bins: (start, end),
            present_during_inactivity: inactivity.map(|_| {
                n_rest > 0 && rest_hits[peak] as f64 >= opts.persistence_min * n_rest as f64
            }),
        });
    }
    Ok(out)
}

/// Runs the detector on a mono signal with non-overlapping Hann frames.
pub fn detect_in_signal(samples: &[f64], sample_rate: f64, opts: &ToneDetectorOptions) -> Result<Vec<ToneDetection>> {
    let spec = stft(samples, sample_rate, opts.frame_len, opts.frame_len, Window::Hann)?;
    detect_persistent_tones(&spec, opts, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prevalence {
    pub healthy_present: usize,
    pub healthy_total: usize,
    pub unhealthy_present: usize,
    pub unhealthy_total: usize,
    pub prevalence_healthy: f64,
    pub prevalence_unhealthy: f64,
    /// Two-sided Fisher exact p-value of presence vs label.
    pub p_value: f64,
}

pub fn tone_prevalence_by_label(present: &[bool], labels: &[Health]) -> Result<Prevalence> {
    if present.len() != labels.len() {
        return Err(Error::param("presence flags and labels differ in length"));
    }
    let count = |h: Health| {
        let total = labels.iter().filter(|&&l| l == h).count();
        let hit = present.iter().zip(labels).filter(|(p, &l)| **p && l == h).count();
        (hit, total)
    };
    let (hp, ht) = count(Health::Healthy);
    let (up, ut) = count(Health::Unhealthy);
    if ht == 0 || ut == 0 {
        return Err(Error::SingleClass("tone prevalence needs sessions of both classes".into()));
    }
    Ok(Prevalence {
        healthy_present: hp,
        healthy_total: ht,
        unhealthy_present: up,
        unhealthy_total: ut,
        prevalence_healthy: hp as f64 / ht as f64,
        prevalence_unhealthy: up as f64 / ut as f64,
        p_value: fisher_exact(up, ut - up, hp, ht - hp),
    })
}

/// Groups detection centres from many sessions into tone clusters: centres
/// within `tolerance_hz` of a cluster's running mean join it.
pub fn cluster_tones(per_session: &[Vec<ToneDetection>], tolerance_hz: f64) -> Vec<f64> {
    let mut centers: Vec<f64> = per_session.iter().flatten().map(|d| d.center_hz).collect();
    centers.sort_by(f64::total_cmp);
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    for c in centers {
        match clusters.last_mut() {
            Some((mean, n)) if (c - *mean).abs() <= tolerance_hz => {
                *mean = (*mean * *n as f64 + c) / (*n + 1) as f64;
                *n += 1;
            }
            _ => clusters.push((c, 1)),
        }
    }
    clusters.into_iter().map(|(m, _)| m).collect()
}

/// Whether a session has a detection within `tolerance_hz` of `center_hz`.
pub fn has_tone_near(detections: &[ToneDetection], center_hz: f64, tolerance_hz: f64) -> bool {
    detections.iter().any(|d| (d.center_hz - center_hz).abs() <= tolerance_hz)
}
