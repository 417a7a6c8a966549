//! Feature map from a repetition segment to a named feature vector.
//!
//! Pipeline: mixdown to mono, optional band-pass, framing, then per-frame
//! MFCCs (filterbank restricted to the band) and optional spectral/time
//! features, aggregated across frames by mean and/or population std.
//! Spectral features only look at bins inside the band.

use serde::{Deserialize, Serialize};

use crate::dsp::{FirFilter, MfccConfig, MfccExtractor, Signal, DEFAULT_TAPS};
use crate::error::{Error, Result};
use crate::labels::{Health, Side};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Mean,
    Std,
}

impl Aggregator {
    pub fn suffix(self) -> &'static str {
        match self {
            Aggregator::Mean => "mean",
            Aggregator::Std => "std",
        }
    }

    fn apply(self, xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        match self {
            Aggregator::Mean => mean,
            Aggregator::Std => (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtraFeature {
    Rms,
    ZeroCrossingRate,
    SpectralCentroid,
    #[serde(rename = "spectral_rolloff_95")]
    SpectralRolloff95,
}

impl ExtraFeature {
    pub fn name(self) -> &'static str {
        match self {
            ExtraFeature::Rms => "rms",
            ExtraFeature::ZeroCrossingRate => "zero_crossing_rate",
            ExtraFeature::SpectralCentroid => "spectral_centroid",
            ExtraFeature::SpectralRolloff95 => "spectral_rolloff_95",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub bandpass: Option<Band>,
    pub taps: usize,
    pub mfcc: MfccConfig,
    pub aggregators: Vec<Aggregator>,
    pub extra_features: Vec<ExtraFeature>,
    /// Keep only these features, in this order.
    pub select: Option<Vec<String>>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            bandpass: Some(Band::new(250.0, 10_000.0)),
            taps: DEFAULT_TAPS,
            mfcc: MfccConfig::default(),
            aggregators: vec![Aggregator::Mean, Aggregator::Std],
            extra_features: Vec::new(),
            select: None,
        }
    }
}

impl FeatureConfig {
    pub fn with_band(&self, band: Band) -> Self {
        Self { bandpass: Some(band), ..self.clone() }
    }

    /// Names produced before subset selection.
    pub fn all_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for c in 0..self.mfcc.n_coeffs {
            for a in &self.aggregators {
                names.push(format!("mfcc{c:02}_{}", a.suffix()));
            }
        }
        for x in &self.extra_features {
            for a in &self.aggregators {
                names.push(format!("{}_{}", x.name(), a.suffix()));
            }
        }
        names
    }

    pub fn names(&self) -> Vec<String> {
        self.select.clone().unwrap_or_else(|| self.all_names())
    }

    pub fn validate(&self) -> Result<()> {
        if self.aggregators.is_empty() {
            return Err(Error::param("feature config needs at least one aggregator"));
        }
        if let Some(b) = self.bandpass {
            if !(b.lo > 0.0 && b.hi > b.lo) {
                return Err(Error::param(format!("band [{}, {}] Hz must satisfy 0 < lo < hi", b.lo, b.hi)));
            }
        }
        if let Some(sel) = &self.select {
            let all = self.all_names();
            if let Some(missing) = sel.iter().find(|s| !all.contains(s)) {
                return Err(Error::MissingFeature(missing.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLabels {
    pub session_id: String,
    pub subject_id: String,
    pub side: Side,
    pub device_id: String,
    pub health: Health,
    pub repetition: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// A [`FeatureConfig`] bound to a sample rate, with filter and filterbank prepared.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    sample_rate: f64,
    filter: Option<FirFilter>,
    mfcc: MfccExtractor,
    band: Band,
    select_idx: Option<Vec<usize>>,
}

impl FeatureExtractor {
    pub fn new(cfg: &FeatureConfig, sample_rate: f64) -> Result<Self> {
        cfg.validate()?;
        let nyquist = sample_rate / 2.0;
        let band = cfg.bandpass.unwrap_or(Band::new(0.0, nyquist));
        if band.hi > nyquist * (1.0 + 1e-12) {
            return Err(Error::param(format!("band edge {} Hz above Nyquist {nyquist} Hz", band.hi)));
        }
        let filter = cfg.bandpass.map(|b| FirFilter::bandpass(b.lo, b.hi.min(nyquist), sample_rate, cfg.taps)).transpose()?;
        let mut mcfg = cfg.mfcc.clone();
        if cfg.bandpass.is_some() && mcfg.fmax.is_none() && mcfg.fmin == 0.0 {
            mcfg.fmin = band.lo;
            mcfg.fmax = Some(band.hi.min(nyquist));
        }
        let mfcc = MfccExtractor::new(&mcfg, sample_rate)?;
        let select_idx = cfg.select.as_ref().map(|sel| {
            let all = cfg.all_names();
            sel.iter().map(|s| all.iter().position(|a| a == s).expect("validated")).collect()
        });
        Ok(Self { cfg: cfg.clone(), sample_rate, filter, mfcc, band, select_idx })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn mfcc(&self) -> &MfccExtractor {
        &self.mfcc
    }

    pub fn min_duration_s(&self) -> f64 {
        self.mfcc.min_duration_s()
    }

    /// Mel filters with at least one FFT bin of support.
    pub fn resolvable_mel_bands(&self) -> usize {
        self.cfg.mfcc.n_mels - self.mfcc.empty_filters().len()
    }

    pub fn names(&self) -> Vec<String> {
        self.cfg.names()
    }

    pub fn extract(&self, segment: &Signal) -> Result<FeatureVector> {
        if (segment.sample_rate() - self.sample_rate).abs() > 1e-9 * self.sample_rate {
            return Err(Error::param(format!(
                "segment sample rate {} Hz differs from extractor rate {} Hz",
                segment.sample_rate(),
                self.sample_rate
            )));
        }
        let mono = if segment.n_channels() == 1 { segment.channel(0).to_vec() } else { segment.mixdown() };
        let x = match &self.filter {
            Some(f) => f.apply(&mono),
            None => mono,
        };
        let spectra = self.mfcc.power_spectra(&x)?;
        let n_frames = spectra.power.len();
        let n_coeffs = self.cfg.mfcc.n_coeffs;

        let mut per_frame: Vec<Vec<f64>> = vec![Vec::with_capacity(n_frames); n_coeffs + self.cfg.extra_features.len()];
        let band_bins: Vec<usize> =
            (0..spectra.bin_freqs.len()).filter(|&k| self.band.contains(spectra.bin_freqs[k])).collect();
        let frame_len = self.mfcc.frame_len();
        let hop = self.mfcc.hop();
        for (t, power) in spectra.power.iter().enumerate() {
            for (c, v) in self.mfcc.coefficients(power).into_iter().enumerate() {
                per_frame[c].push(v);
            }
            let frame = &x[t * hop..t * hop + frame_len];
            for (e, feat) in self.cfg.extra_features.iter().enumerate() {
                let v = match feat {
                    ExtraFeature::Rms => (frame.iter().map(|v| v * v).sum::<f64>() / frame_len as f64).sqrt(),
                    ExtraFeature::ZeroCrossingRate => {
                        frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count() as f64
                            / (frame_len - 1).max(1) as f64
                    }
                    ExtraFeature::SpectralCentroid => {
                        let (num, den) = band_bins
                            .iter()
                            .fold((0.0, 0.0), |(n, d), &k| (n + spectra.bin_freqs[k] * power[k], d + power[k]));
                        if den > 0.0 { num / den } else { 0.5 * (self.band.lo + self.band.hi) }
                    }
                    ExtraFeature::SpectralRolloff95 => {
                        let total: f64 = band_bins.iter().map(|&k| power[k]).sum();
                        let mut acc = 0.0;
                        let mut out = band_bins.last().map_or(self.band.hi, |&k| spectra.bin_freqs[k]);
                        for &k in &band_bins {
                            acc += power[k];
                            if total > 0.0 && acc >= 0.95 * total {
                                out = spectra.bin_freqs[k];
                                break;
                            }
                        }
                        out
                    }
                };
                per_frame[n_coeffs + e].push(v);
            }
        }

        let mut values = Vec::with_capacity(per_frame.len() * self.cfg.aggregators.len());
        for series in &per_frame {
            for a in &self.cfg.aggregators {
                values.push(a.apply(series));
            }
        }
        let all_names = self.cfg.all_names();
        let (names, values) = match &self.select_idx {
            Some(idx) => (idx.iter().map(|&i| all_names[i].clone()).collect(), idx.iter().map(|&i| values[i]).collect()),
            None => (all_names, values),
        };
        if let Some(i) = values.iter().position(|v: &f64| !v.is_finite()) {
            return Err(Error::param(format!("feature {} is not finite", names[i])));
        }
        Ok(FeatureVector { names, values })
    }
}

pub fn extract_features(segment: &Signal, cfg: &FeatureConfig) -> Result<FeatureVector> {
    FeatureExtractor::new(cfg, segment.sample_rate())?.extract(segment)
}
