use crate::dsp::Signal;
use crate::error::{Error, Result};

/// Splits a session recording into its repetitions.
///
/// With `boundaries` (seconds, `n + 1` ascending cut points) the cuts are
/// rounded to the nearest sample. Without, the signal is split into `n` equal
/// parts and the remainder is dropped from the tail.
pub fn segment_repetitions(signal: &Signal, n_repetitions: usize, boundaries: Option<&[f64]>) -> Result<Vec<Signal>> {
    if n_repetitions == 0 {
        return Err(Error::Segment("n_repetitions must be at least 1".into()));
    }
    let fs = signal.sample_rate();
    match boundaries {
        Some(b) => {
            if b.len() != n_repetitions + 1 {
                return Err(Error::Segment(format!(
                    "{} boundaries for {n_repetitions} repetitions, expected {}",
                    b.len(),
                    n_repetitions + 1
                )));
            }
            let duration = signal.duration_s();
            let tol = 0.5 / fs;
            if let Some(t) = b.iter().find(|t| !t.is_finite() || **t < -tol || **t > duration + tol) {
                return Err(Error::Segment(format!("boundary {t} s outside signal duration {duration} s")));
            }
            if b.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Segment("boundaries must be strictly increasing".into()));
            }
            let idx: Vec<usize> = b.iter().map(|t| ((t * fs).round().max(0.0) as usize).min(signal.len())).collect();
            idx.windows(2)
                .map(|w| {
                    if w[1] == w[0] {
                        Err(Error::Segment("boundaries closer than one sample".into()))
                    } else {
                        Ok(signal.slice(w[0], w[1]))
                    }
                })
                .collect()
        }
        None => {
            let len = signal.len() / n_repetitions;
            if len == 0 {
                return Err(Error::Segment(format!(
                    "{} samples cannot hold {n_repetitions} repetitions",
                    signal.len()
                )));
            }
            Ok((0..n_repetitions).map(|r| signal.slice(r * len, (r + 1) * len)).collect())
        }
    }
}
