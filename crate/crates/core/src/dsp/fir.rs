use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::window::kaiser;
use super::{next_pow2, Signal};
use crate::error::{Error, Result};

pub const DEFAULT_TAPS: usize = 513;

/// Stopband attenuation the Kaiser window is designed for. Difference-of-
/// lowpass band-pass designs add the ripple of both edges, so the design
/// target sits above the 60 dB requirement.
pub const STOPBAND_DESIGN_DB: f64 = 68.0;

pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Full transition width (passband edge to stopband edge) of a Kaiser
/// windowed-sinc design with `n_taps` taps.
pub fn kaiser_transition_hz(atten_db: f64, n_taps: usize, sample_rate: f64) -> f64 {
    (atten_db - 7.95) / (14.36 * (n_taps - 1) as f64) * sample_rate
}

/// Linear-phase FIR filter applied with zero group delay.
///
/// Convolution runs block-wise through a cached FFT of the taps, so one
/// filter can be reused across many segments and threads.
#[derive(Clone)]
pub struct FirFilter {
    taps: Vec<f64>,
    sample_rate: f64,
    cutoffs: (Option<f64>, Option<f64>),
    fft_len: usize,
    spectrum: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FirFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FirFilter")
            .field("n_taps", &self.taps.len())
            .field("sample_rate", &self.sample_rate)
            .field("cutoffs", &self.cutoffs)
            .finish()
    }
}

fn lowpass_tap(cutoff: f64, sample_rate: f64, offset: f64) -> f64 {
    let fc = cutoff / sample_rate;
    if offset == 0.0 {
        2.0 * fc
    } else {
        (2.0 * PI * fc * offset).sin() / (PI * offset)
    }
}

impl FirFilter {
    /// Kaiser-windowed sinc band-pass for `[lo, hi]`.
    ///
    /// Each transition band is placed outside the requested band whenever
    /// the 0.8x / 1.2x guard region is wide enough for it, so the passband
    /// stays flat over `[lo, hi]` and the stopband starts by `0.8 lo` /
    /// `1.2 hi`. When the guard region only fits half a transition, the
    /// stopband edge is kept and the passband edge moves inward. Narrower
    /// guard regions (low edges at small tap counts) fall back to a cutoff
    /// exactly at the band edge. `hi` at Nyquist yields a high-pass.
    pub fn bandpass(lo: f64, hi: f64, sample_rate: f64, n_taps: usize) -> Result<Self> {
        let nyquist = sample_rate / 2.0;
        if !(lo > 0.0 && lo < hi && hi <= nyquist) {
            return Err(Error::param(format!(
                "band-pass edges must satisfy 0 < lo < hi <= fs/2 (lo={lo}, hi={hi}, fs/2={nyquist})"
            )));
        }
        if n_taps.is_multiple_of(2) || n_taps < 3 {
            return Err(Error::param(format!("tap count must be odd and >= 3, got {n_taps}")));
        }
        let tw = kaiser_transition_hz(STOPBAND_DESIGN_DB, n_taps, sample_rate);

        let upper = if hi >= nyquist {
            None
        } else {
            let gap = (0.2 * hi).min(nyquist - hi);
            let c = if gap >= tw {
                hi + tw / 2.0
            } else if gap >= tw / 2.0 {
                hi + gap - tw / 2.0
            } else {
                hi
            };
            (c < nyquist).then_some(c)
        };
        let lower = {
            let gap = 0.2 * lo;
            if gap >= tw {
                lo - tw / 2.0
            } else if gap >= tw / 2.0 {
                lo - gap + tw / 2.0
            } else {
                lo
            }
        };

        let win = kaiser(n_taps, kaiser_beta(STOPBAND_DESIGN_DB));
        let mid = (n_taps / 2) as f64;
        let mut taps: Vec<f64> = (0..n_taps)
            .map(|n| {
                let off = n as f64 - mid;
                let high = match upper {
                    Some(c) => lowpass_tap(c, sample_rate, off),
                    None => {
                        if off == 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                (high - lowpass_tap(lower, sample_rate, off)) * win[n]
            })
            .collect();
        // Exact palindrome, so the phase is exactly linear despite rounding in the window.
        for i in 0..n_taps / 2 {
            taps[n_taps - 1 - i] = taps[i];
        }
        Ok(Self::build(taps, sample_rate, (Some(lower), upper)))
    }

    /// Linear-phase filter approximating an arbitrary non-negative magnitude
    /// response by frequency sampling on a dense grid, Kaiser-windowed.
    pub fn from_magnitude(
        magnitude: impl Fn(f64) -> f64,
        n_taps: usize,
        sample_rate: f64,
    ) -> Result<Self> {
        if n_taps.is_multiple_of(2) {
            return Err(Error::param("tap count must be odd"));
        }
        let grid = next_pow2(8 * n_taps);
        let amp: Vec<f64> = (0..=grid / 2)
            .map(|k| magnitude(k as f64 * sample_rate / grid as f64))
            .collect();
        let win = kaiser(n_taps, 8.0);
        let mid = (n_taps / 2) as i64;
        let mut taps: Vec<f64> = (0..n_taps)
            .map(|n| {
                let m = n as i64 - mid;
                let mut acc = amp[0] + amp[grid / 2] * if m % 2 == 0 { 1.0 } else { -1.0 };
                for (k, a) in amp.iter().enumerate().take(grid / 2).skip(1) {
                    acc += 2.0 * a * (2.0 * PI * (k as f64) * (m as f64) / grid as f64).cos();
                }
                acc / grid as f64 * win[n]
            })
            .collect();
        for i in 0..n_taps / 2 {
            taps[n_taps - 1 - i] = taps[i];
        }
        Ok(Self::build(taps, sample_rate, (None, None)))
    }

    /// Wrap explicit taps. The tap count must be odd for zero-delay output.
    pub fn from_taps(taps: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if taps.len().is_multiple_of(2) {
            return Err(Error::param("tap count must be odd"));
        }
        Ok(Self::build(taps, sample_rate, (None, None)))
    }

    fn build(taps: Vec<f64>, sample_rate: f64, cutoffs: (Option<f64>, Option<f64>)) -> Self {
        let fft_len = next_pow2((4 * taps.len()).max(4096));
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(fft_len);
        let inv = planner.plan_fft_inverse(fft_len);
        let mut spectrum: Vec<Complex<f64>> = taps.iter().map(|&t| Complex::new(t, 0.0)).collect();
        spectrum.resize(fft_len, Complex::new(0.0, 0.0));
        fwd.process(&mut spectrum);
        FirFilter {
            taps,
            sample_rate,
            cutoffs,
            fft_len,
            spectrum,
            fwd,
            inv,
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Design cutoffs (-6 dB points) of a band-pass; `None` on the upper side
    /// means the filter is a high-pass.
    pub fn cutoffs(&self) -> (Option<f64>, Option<f64>) {
        self.cutoffs
    }

    /// Magnitude of the tap transform at `freq_hz`, evaluated directly.
    pub fn response(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate;
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, &h)| {
                let a = w * n as f64;
                (re + h * a.cos(), im - h * a.sin())
            });
        (re * re + im * im).sqrt()
    }

    pub fn response_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).max(1e-300).log10()
    }

    /// Zero-delay filtering: the output has the input's length and is
    /// aligned with it. The input is extended by half the filter length on
    /// both sides with its mirror image about each end sample (the end sample
    /// itself is not repeated; short inputs keep folding).
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let n = self.taps.len();
        let delay = n / 2;
        if input.is_empty() {
            return Vec::new();
        }
        let len = input.len() as i64;
        let period = 2 * (len - 1).max(1);
        let mirror = |i: i64| -> f64 {
            if len == 1 {
                return input[0];
            }
            let r = i.rem_euclid(period);
            input[(if r >= len { period - r } else { r }) as usize]
        };
        let x: Vec<f64> = (-(delay as i64)..len + delay as i64).map(mirror).collect();
        let block = self.fft_len - n + 1;
        let mut full = vec![0.0; x.len() + n - 1];
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let scale = 1.0 / self.fft_len as f64;
        for start in (0..x.len()).step_by(block) {
            let end = (start + block).min(x.len());
            for (b, v) in buf.iter_mut().zip(x[start..end].iter()) {
                *b = Complex::new(*v, 0.0);
            }
            for b in buf.iter_mut().skip(end - start) {
                *b = Complex::new(0.0, 0.0);
            }
            self.fwd.process(&mut buf);
            for (b, h) in buf.iter_mut().zip(self.spectrum.iter()) {
                *b *= h;
            }
            self.inv.process(&mut buf);
            let out_len = (end - start + n - 1).min(full.len() - start);
            for (o, b) in full[start..start + out_len].iter_mut().zip(buf.iter()) {
                *o += b.re * scale;
            }
        }
        full.drain(..2 * delay);
        full.truncate(input.len());
        full
    }

    pub fn apply_signal(&self, signal: &Signal) -> Result<Signal> {
        if (signal.sample_rate() - self.sample_rate).abs() > 1e-9 * self.sample_rate {
            return Err(Error::param(format!(
                "filter designed for {} Hz applied to {} Hz signal",
                self.sample_rate,
                signal.sample_rate()
            )));
        }
        Signal::new(
            signal.channels().iter().map(|c| self.apply(c)).collect(),
            signal.sample_rate(),
        )
    }
}

/// Band-pass `signal` to `[lo, hi]` with a linear-phase FIR of `n_taps` taps.
pub fn bandpass(signal: &Signal, lo: f64, hi: f64, n_taps: usize) -> Result<Signal> {
    FirFilter::bandpass(lo, hi, signal.sample_rate(), n_taps)?.apply_signal(signal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_convolution(taps: &[f64], x: &[f64]) -> Vec<f64> {
        let delay = (taps.len() / 2) as i64;
        (0..x.len() as i64)
            .map(|n| {
                taps.iter()
                    .enumerate()
                    .map(|(k, h)| {
                        // Whole-sample mirror about both ends.
                        let last = x.len() as i64 - 1;
                        let mut idx = n + delay - k as i64;
                        while last > 0 && (idx < 0 || idx > last) {
                            idx = if idx < 0 { -idx } else { 2 * last - idx };
                        }
                        h * x[if last == 0 { 0 } else { idx as usize }]
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let f = FirFilter::bandpass(1000.0, 5000.0, 20000.0, 101).unwrap();
        let x: Vec<f64> = (0..9000).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect();
        let fast = f.apply(&x);
        let slow = direct_convolution(f.taps(), &x);
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "max err {err}");
    }

    #[test]
    fn short_inputs_fold_repeatedly() {
        let f = FirFilter::bandpass(1000.0, 5000.0, 20000.0, 101).unwrap();
        for x in [vec![0.3], vec![1.0, -2.0, 0.5]] {
            let fast = f.apply(&x);
            let slow = direct_convolution(f.taps(), &x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn taps_are_palindromic() {
        for (lo, hi) in [(250.0, 10_000.0), (30_000.0, 40_000.0), (40_000.0, 50_000.0)] {
            let f = FirFilter::bandpass(lo, hi, 100_000.0, DEFAULT_TAPS).unwrap();
            let t = f.taps();
            for i in 0..t.len() {
                assert_eq!(t[i], t[t.len() - 1 - i]);
            }
        }
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(FirFilter::bandpass(500.0, 400.0, 10_000.0, 101).is_err());
        assert!(FirFilter::bandpass(100.0, 6_000.0, 10_000.0, 101).is_err());
        assert!(FirFilter::bandpass(0.0, 1_000.0, 10_000.0, 101).is_err());
        assert!(FirFilter::bandpass(100.0, 1_000.0, 10_000.0, 100).is_err());
    }

    #[test]
    fn zero_in_zero_out() {
        let f = FirFilter::bandpass(250.0, 10_000.0, 100_000.0, DEFAULT_TAPS).unwrap();
        assert!(f.apply(&vec![0.0; 5000]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn magnitude_design_tracks_target() {
        let slope = 0.5;
        let f = FirFilter::from_magnitude(|hz| 10f64.powf(slope * hz / 1000.0 / 20.0), 255, 100_000.0).unwrap();
        for hz in [1000.0, 5000.0, 20_000.0] {
            let want = slope * hz / 1000.0;
            assert!((f.response_db(hz) - want).abs() < 0.05, "{hz}: {} vs {want}", f.response_db(hz));
        }
    }
}
