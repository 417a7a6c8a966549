use std::io::{Read, Write};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::window::hann_periodic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => hann_periodic(n),
        }
    }
}

/// Linear-magnitude time-frequency grid, `magnitudes[frame][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Vec<Vec<f64>>,
    pub frame_times: Vec<f64>,
    pub bin_freqs: Vec<f64>,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: f64,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn n_bins(&self) -> usize {
        self.bin_freqs.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.frame_len as f64
    }

    pub fn power(&self, frame: usize, bin: usize) -> f64 {
        let m = self.magnitudes[frame][bin];
        m * m
    }

    /// Nearest bin index for a frequency.
    pub fn bin_of(&self, freq_hz: f64) -> usize {
        ((freq_hz / self.bin_width()).round() as usize).min(self.n_bins() - 1)
    }

    /// Energy of the windowed frame recovered from its one-sided spectrum.
    pub fn frame_energy(&self, frame: usize) -> f64 {
        let row = &self.magnitudes[frame];
        let last = row.len() - 1;
        let sum: f64 = row
            .iter()
            .enumerate()
            .map(|(k, m)| if k == 0 || k == last { m * m } else { 2.0 * m * m })
            .sum();
        sum / self.frame_len as f64
    }

    /// Long-format CSV: `frame_time,bin_freq,magnitude`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame_time", "bin_freq", "magnitude"])?;
        for (t, row) in self.frame_times.iter().zip(&self.magnitudes) {
            for (f, m) in self.bin_freqs.iter().zip(row) {
                w.write_record([t.to_string(), f.to_string(), m.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Compact grid: `u32 n_frames`, `u32 n_bins` (little endian), then
    /// `n_frames * n_bins` little-endian `f32` magnitudes, row-major by frame.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.n_frames() as u32).to_le_bytes())?;
        out.write_all(&(self.n_bins() as u32).to_le_bytes())?;
        for row in &self.magnitudes {
            for m in row {
                out.write_all(&(*m as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Inverse of [`Spectrogram::write_binary`]; returns the raw grid.
    pub fn read_binary<R: Read>(mut input: R) -> std::io::Result<Vec<Vec<f32>>> {
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let rows = u32::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let cols = u32::from_le_bytes(word) as usize;
        let mut grid = Vec::with_capacity(rows);
        for _ in 0..rows {
            let mut row = Vec::with_capacity(cols);
            for _ in 0..cols {
                input.read_exact(&mut word)?;
                row.push(f32::from_le_bytes(word));
            }
            grid.push(row);
        }
        Ok(grid)
    }
}

fn check_frame(frame_len: usize, hop: usize) -> Result<()> {
    if !frame_len.is_power_of_two() || frame_len < 2 {
        return Err(Error::param(format!("frame length must be a power of two, got {frame_len}")));
    }
    if hop == 0 || hop > frame_len {
        return Err(Error::param(format!("hop must be in 1..={frame_len}, got {hop}")));
    }
    Ok(())
}

/// Magnitude STFT without padding; frame `t` covers samples
/// `[t * hop, t * hop + frame_len)` and is time-stamped at its centre.
pub fn stft(
    samples: &[f64],
    sample_rate: f64,
    frame_len: usize,
    hop: usize,
    window: Window,
) -> Result<Spectrogram> {
    check_frame(frame_len, hop)?;
    if samples.len() < frame_len {
        return Err(Error::param(format!(
            "signal of {} samples is shorter than one frame ({frame_len})",
            samples.len()
        )));
    }
    let win = window.coefficients(frame_len);
    let fft = FftPlanner::new().plan_fft_forward(frame_len);
    let n_frames = 1 + (samples.len() - frame_len) / hop;
    let n_bins = frame_len / 2 + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); frame_len];
    let mut magnitudes = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let start = t * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(samples[start + i] * win[i], 0.0);
        }
        fft.process(&mut buf);
        magnitudes.push(buf[..n_bins].iter().map(|c| c.norm()).collect());
    }
    Ok(Spectrogram {
        magnitudes,
        frame_times: (0..n_frames)
            .map(|t| (t * hop) as f64 / sample_rate + frame_len as f64 / (2.0 * sample_rate))
            .collect(),
        bin_freqs: (0..n_bins).map(|k| k as f64 * sample_rate / frame_len as f64).collect(),
        frame_len,
        hop,
        sample_rate,
    })
}

/// Complex STFT of a zero-padded signal, invertible with [`istft`].
#[derive(Debug, Clone)]
pub struct ComplexStft {
    pub frames: Vec<Vec<Complex<f64>>>,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: f64,
    original_len: usize,
    pad: usize,
}

pub fn stft_complex(samples: &[f64], sample_rate: f64, frame_len: usize, hop: usize) -> Result<ComplexStft> {
    check_frame(frame_len, hop)?;
    let pad = frame_len;
    let body = samples.len() + 2 * pad;
    let n_frames = body.saturating_sub(frame_len).div_ceil(hop) + 1;
    let total = (n_frames - 1) * hop + frame_len;
    let mut padded = vec![0.0; total];
    padded[pad..pad + samples.len()].copy_from_slice(samples);

    let win = Window::Hann.coefficients(frame_len);
    let fft = FftPlanner::new().plan_fft_forward(frame_len);
    let frames = (0..n_frames)
        .map(|t| {
            let mut buf: Vec<Complex<f64>> = (0..frame_len)
                .map(|i| Complex::new(padded[t * hop + i] * win[i], 0.0))
                .collect();
            fft.process(&mut buf);
            buf
        })
        .collect();
    Ok(ComplexStft {
        frames,
        frame_len,
        hop,
        sample_rate,
        original_len: samples.len(),
        pad,
    })
}

/// Weighted overlap-add resynthesis with the Hann window as synthesis
/// window, normalised by the summed squared window.
pub fn istft(spec: &ComplexStft) -> Vec<f64> {
    let n = spec.frame_len;
    let total = (spec.frames.len() - 1) * spec.hop + n;
    let win = Window::Hann.coefficients(n);
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut out = vec![0.0; total];
    let mut norm = vec![0.0; total];
    for (t, frame) in spec.frames.iter().enumerate() {
        let mut buf = frame.clone();
        ifft.process(&mut buf);
        for i in 0..n {
            out[t * spec.hop + i] += buf[i].re / n as f64 * win[i];
            norm[t * spec.hop + i] += win[i] * win[i];
        }
    }
    (spec.pad..spec.pad + spec.original_len)
        .map(|i| if norm[i] > 1e-12 { out[i] / norm[i] } else { 0.0 })
        .collect()
}
