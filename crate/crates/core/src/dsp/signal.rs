use crate::error::{Error, Result};

/// A multichannel (1 or 2 channel) real signal. Two channels correspond to
/// the medial and lateral microphones of a knee wearable.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    sample_rate: f64,
    channels: Vec<Vec<f64>>,
}

impl Signal {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::param(format!("sample rate must be positive, got {sample_rate}")));
        }
        if channels.is_empty() || channels.len() > 2 {
            return Err(Error::param(format!("expected 1 or 2 channels, got {}", channels.len())));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::param("channels have different lengths"));
        }
        if channels.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::param("signal contains non-finite samples"));
        }
        Ok(Signal { sample_rate, channels })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate / 2.0
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Samples `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Signal {
        Signal {
            sample_rate: self.sample_rate,
            channels: self.channels.iter().map(|c| c[start..end].to_vec()).collect(),
        }
    }

    pub fn mixdown(&self) -> Vec<f64> {
        let n = self.n_channels() as f64;
        (0..self.len())
            .map(|i| self.channels.iter().map(|c| c[i]).sum::<f64>() / n)
            .collect()
    }

    pub fn scaled(&self, gain: f64) -> Signal {
        Signal {
            sample_rate: self.sample_rate,
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|x| x * gain).collect())
                .collect(),
        }
    }

    pub fn rms(&self) -> f64 {
        let n = (self.len() * self.n_channels()).max(1) as f64;
        (self.channels.iter().flatten().map(|x| x * x).sum::<f64>() / n).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(Signal::mono(vec![0.0], 0.0).is_err());
        assert!(Signal::mono(vec![f64::NAN], 1.0).is_err());
        assert!(Signal::new(vec![vec![0.0], vec![0.0, 1.0]], 1.0).is_err());
        assert!(Signal::new(vec![vec![0.0]; 3], 1.0).is_err());
    }

    #[test]
    fn mixdown_averages_channels() {
        let s = Signal::new(vec![vec![1.0, 2.0], vec![3.0, 0.0]], 10.0).unwrap();
        assert_eq!(s.mixdown(), vec![2.0, 1.0]);
        assert_eq!(s.duration_s(), 0.2);
    }
}
