use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::next_pow2;
use super::window::hann_periodic;
use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// MFCC parameters. Coefficient indexing is zero based: `mfcc08` is the
/// ninth DCT output, index 8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub frame_ms: f64,
    pub hop_fraction: f64,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub fmin: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub fmax: Option<f64>,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            frame_ms: 20.0,
            hop_fraction: 0.5,
            n_mels: 26,
            n_coeffs: 13,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
        }
    }
}

/// Triangular filters with peaks of 1 on `n_mels + 2` mel-spaced edges
/// between `fmin` and `fmax`, evaluated at the bins of an `n_fft` transform.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: f64, fmin: f64, fmax: f64) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let (m_lo, m_hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|m| {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * sample_rate / n_fft as f64;
                    if f > l && f <= c {
                        (f - l) / (c - l)
                    } else if f > c && f < r {
                        (r - f) / (r - c)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II, `n_out` rows over `n_in` inputs.
pub fn dct2_matrix(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n_in as f64).sqrt() } else { (2.0 / n_in as f64).sqrt() };
            (0..n_in)
                .map(|m| scale * (PI * k as f64 * (m as f64 + 0.5) / n_in as f64).cos())
                .collect()
        })
        .collect()
}

/// One-sided power spectra of every analysis frame of a segment.
#[derive(Debug, Clone)]
pub struct FrameSpectra {
    pub power: Vec<Vec<f64>>,
    pub bin_freqs: Vec<f64>,
    /// `sum(w^2)` of the analysis window, for amplitude normalisation.
    pub window_energy: f64,
    pub n_fft: usize,
}

struct SparseFilter {
    start: usize,
    weights: Vec<f64>,
}

/// Reusable MFCC pipeline for a fixed sample rate and configuration.
pub struct MfccExtractor {
    cfg: MfccConfig,
    sample_rate: f64,
    frame_len: usize,
    hop: usize,
    n_fft: usize,
    window: Vec<f64>,
    filters: Vec<SparseFilter>,
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(cfg: &MfccConfig, sample_rate: f64) -> Result<Self> {
        let nyquist = sample_rate / 2.0;
        let fmax = cfg.fmax.unwrap_or(nyquist);
        if fmax > nyquist * (1.0 + 1e-12) {
            return Err(Error::param(format!("mfcc fmax {fmax} Hz exceeds Nyquist {nyquist} Hz")));
        }
        if !(cfg.fmin >= 0.0 && cfg.fmin < fmax) {
            return Err(Error::param(format!("mfcc needs 0 <= fmin < fmax (fmin={}, fmax={fmax})", cfg.fmin)));
        }
        if cfg.n_coeffs == 0 || cfg.n_coeffs > cfg.n_mels {
            return Err(Error::param(format!(
                "n_coeffs ({}) must be in 1..=n_mels ({})",
                cfg.n_coeffs, cfg.n_mels
            )));
        }
        if !(cfg.hop_fraction > 0.0 && cfg.hop_fraction <= 1.0) || !(cfg.log_floor > 0.0) {
            return Err(Error::param("hop_fraction must be in (0, 1] and log_floor positive"));
        }
        let frame_len = (cfg.frame_ms * sample_rate / 1000.0).round() as usize;
        if frame_len < 2 {
            return Err(Error::param("mfcc frame shorter than two samples"));
        }
        let hop = ((frame_len as f64 * cfg.hop_fraction).round() as usize).max(1);
        let n_fft = next_pow2(frame_len);
        let filters = mel_filterbank(cfg.n_mels, n_fft, sample_rate, cfg.fmin, fmax)
            .into_iter()
            .map(|row| {
                let start = row.iter().position(|&w| w > 0.0).unwrap_or(0);
                let end = row.iter().rposition(|&w| w > 0.0).map_or(start, |e| e + 1);
                SparseFilter {
                    start,
                    weights: row[start..end].to_vec(),
                }
            })
            .collect();
        Ok(MfccExtractor {
            cfg: MfccConfig {
                fmax: Some(fmax),
                ..cfg.clone()
            },
            sample_rate,
            frame_len,
            hop,
            n_fft,
            window: hann_periodic(frame_len),
            filters,
            dct: dct2_matrix(cfg.n_coeffs, cfg.n_mels),
            fft: FftPlanner::new().plan_fft_forward(n_fft),
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.cfg
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn min_duration_s(&self) -> f64 {
        self.frame_len as f64 / self.sample_rate
    }

    /// Indices of mel filters that cover no FFT bin at this resolution.
    pub fn empty_filters(&self) -> Vec<usize> {
        self.filters
            .iter()
            .enumerate()
            .filter(|(_, f)| f.weights.iter().all(|&w| w == 0.0))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.frame_len {
            0
        } else {
            1 + (n_samples - self.frame_len) / self.hop
        }
    }

    pub fn power_spectra(&self, samples: &[f64]) -> Result<FrameSpectra> {
        let n_frames = self.n_frames(samples.len());
        if n_frames == 0 {
            return Err(Error::TooShort {
                got_s: samples.len() as f64 / self.sample_rate,
                min_s: self.min_duration_s(),
            });
        }
        let n_bins = self.n_fft / 2 + 1;
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        let power = (0..n_frames)
            .map(|t| {
                let start = t * self.hop;
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = if i < self.frame_len {
                        Complex::new(samples[start + i] * self.window[i], 0.0)
                    } else {
                        Complex::new(0.0, 0.0)
                    };
                }
                self.fft.process(&mut buf);
                buf[..n_bins].iter().map(|c| c.norm_sqr()).collect()
            })
            .collect();
        Ok(FrameSpectra {
            power,
            bin_freqs: (0..n_bins).map(|k| k as f64 * self.sample_rate / self.n_fft as f64).collect(),
            window_energy: self.window.iter().map(|w| w * w).sum(),
            n_fft: self.n_fft,
        })
    }

    pub fn mel_energies(&self, power: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|f| f.weights.iter().zip(&power[f.start..]).map(|(w, p)| w * p).sum())
            .collect()
    }

    /// Cepstral coefficients from a vector of mel energies.
    pub fn cepstrum(&self, mel: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = mel.iter().map(|&e| e.max(self.cfg.log_floor).ln()).collect();
        self.dct
            .iter()
            .map(|row| row.iter().zip(&logs).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn coefficients(&self, power: &[f64]) -> Vec<f64> {
        self.cepstrum(&self.mel_energies(power))
    }

    pub fn compute(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
        let spectra = self.power_spectra(samples)?;
        Ok(spectra.power.iter().map(|p| self.coefficients(p)).collect())
    }
}

/// MFCCs of a mono sample sequence, one coefficient vector per frame.
pub fn mfcc(samples: &[f64], sample_rate: f64, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    MfccExtractor::new(cfg, sample_rate)?.compute(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 250.0, 1000.0, 33_000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-8);
        }
        // 1000 Hz is ~1000 mel on the HTK scale
        assert!((hz_to_mel(1000.0) - 999.985).abs() < 1e-2);
    }

    #[test]
    fn silence_gives_log_floor_cepstrum() {
        let cfg = MfccConfig::default();
        let frames = mfcc(&vec![0.0; 8000], 16_000.0, &cfg).unwrap();
        let c0 = (cfg.n_mels as f64).sqrt() * cfg.log_floor.ln();
        for f in &frames {
            assert!((f[0] - c0).abs() < 1e-9);
            assert!(f[1..].iter().all(|c| c.abs() < 1e-9));
            assert_eq!(f, &frames[0]);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = MfccConfig {
            fmax: Some(9000.0),
            ..MfccConfig::default()
        };
        assert!(MfccExtractor::new(&cfg, 16_000.0).is_err());
        cfg.fmax = None;
        cfg.n_coeffs = 30;
        assert!(MfccExtractor::new(&cfg, 16_000.0).is_err());
    }

    #[test]
    fn too_short_reports_minimum() {
        let err = mfcc(&[0.0; 10], 16_000.0, &MfccConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TooShort { .. }));
    }
}
