use serde::{Deserialize, Serialize};

use crate::dataset::{extract_tables, Band, FeatureConfig, FeatureExtractor, FeatureTable, SessionSource};
use crate::error::{Error, Result};
use crate::learn::{loso_cv, CvOptions, CvResult};

/// Edges of the default scan: 250 Hz, then 10 kHz steps up to 50 kHz.
pub const DEFAULT_BAND_EDGES: [f64; 6] = [250.0, 10_000.0, 20_000.0, 30_000.0, 40_000.0, 50_000.0];

pub fn bands_from_edges(edges: &[f64]) -> Vec<Band> {
    edges.windows(2).map(|w| Band::new(w[0], w[1])).collect()
}

/// Consecutive bands of `width_hz` from `lo` up to `hi` (last band clipped).
pub fn bands_by_width(lo: f64, hi: f64, width_hz: f64) -> Result<Vec<Band>> {
    if !(width_hz > 0.0 && hi > lo) {
        return Err(Error::param("band width must be positive and hi > lo"));
    }
    let mut out = Vec::new();
    let mut start = lo;
    // Step from the grid origin 0 so that e.g. 250..10k, 10k..20k line up.
    let mut edge = ((lo / width_hz).floor() + 1.0) * width_hz;
    while start < hi {
        let end = edge.min(hi);
        out.push(Band::new(start, end));
        start = end;
        edge += width_hz;
    }
    Ok(out)
}

pub fn validate_bands(bands: &[Band]) -> Result<()> {
    if bands.is_empty() {
        return Err(Error::param("no bands given"));
    }
    for b in bands {
        if !(b.lo > 0.0 && b.hi > b.lo) {
            return Err(Error::param(format!("invalid band [{}, {}]", b.lo, b.hi)));
        }
    }
    if bands.windows(2).any(|w| w[1].lo < w[0].hi) {
        return Err(Error::param("bands must be ascending and non-overlapping"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandOutcome {
    pub band: Band,
    pub accuracy: Option<f64>,
    pub skipped: Option<String>,
    pub cv: Option<CvResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandScanResult {
    pub bands: Vec<BandOutcome>,
}

impl BandScanResult {
    pub fn accuracies(&self) -> Vec<Option<f64>> {
        self.bands.iter().map(|b| b.accuracy).collect()
    }

    /// Band with the highest accuracy.
    pub fn peak(&self) -> Option<&BandOutcome> {
        self.bands
            .iter()
            .filter(|b| b.accuracy.is_some())
            .max_by(|a, b| a.accuracy.unwrap_or(0.0).total_cmp(&b.accuracy.unwrap_or(0.0)))
    }
}

/// Minimum number of mel filters with FFT support for a band to be scanned.
pub const MIN_RESOLVABLE_MEL_BANDS: usize = 2;

/// Re-extracts features for every band and runs a fresh LOSO per band.
pub fn band_scan(
    source: &dyn SessionSource,
    bands: &[Band],
    base: &FeatureConfig,
    opts: &CvOptions,
) -> Result<BandScanResult> {
    validate_bands(bands)?;
    if source.n_sessions() == 0 {
        return Err(Error::Audit("band scan needs at least one session".into()));
    }
    let fs = source.sample_rate(0)?;
    let nyquist = fs / 2.0;
    if let Some(b) = bands.iter().find(|b| b.hi > nyquist) {
        return Err(Error::param(format!("band edge {} Hz above Nyquist {nyquist} Hz", b.hi)));
    }
    let mut usable = Vec::new();
    let mut outcomes: Vec<BandOutcome> = Vec::new();
    for b in bands {
        let cfg = base.with_band(*b);
        let ex = FeatureExtractor::new(&cfg, fs)?;
        let resolvable = ex.resolvable_mel_bands();
        if resolvable < MIN_RESOLVABLE_MEL_BANDS {
            outcomes.push(BandOutcome {
                band: *b,
                accuracy: None,
                skipped: Some(format!("only {resolvable} mel bands resolvable")),
                cv: None,
            });
        } else {
            usable.push(cfg);
            outcomes.push(BandOutcome { band: *b, accuracy: None, skipped: None, cv: None });
        }
    }
    let tables = extract_tables(source, &usable)?;
    scan_tables(outcomes, tables, opts)
}

/// LOSO per pre-extracted table; `outcomes` entries without a skip reason
/// consume the tables in order.
fn scan_tables(mut outcomes: Vec<BandOutcome>, tables: Vec<FeatureTable>, opts: &CvOptions) -> Result<BandScanResult> {
    if let Some(t) = tables.first() {
        if t.distinct_subjects().len() < 2 {
            return Err(Error::Audit("band scan needs at least 2 subjects".into()));
        }
    }
    let mut tables = tables.into_iter();
    for o in outcomes.iter_mut().filter(|o| o.skipped.is_none()) {
        let table = tables.next().expect("one table per usable band");
        match loso_cv(&table, opts) {
            Ok(cv) => {
                o.accuracy = Some(cv.mean_repetition_accuracy);
                o.cv = Some(cv);
            }
            Err(e) => o.skipped = Some(e.to_string()),
        }
    }
    Ok(BandScanResult { bands: outcomes })
}

/// Band scan over tables that were already extracted per band.
pub fn band_scan_tables(bands: &[Band], tables: Vec<FeatureTable>, opts: &CvOptions) -> Result<BandScanResult> {
    validate_bands(bands)?;
    if bands.len() != tables.len() {
        return Err(Error::param("one feature table per band is required"));
    }
    let outcomes = bands.iter().map(|b| BandOutcome { band: *b, accuracy: None, skipped: None, cv: None }).collect();
    scan_tables(outcomes, tables, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_grid_matches_default_edges() {
        let b = bands_by_width(250.0, 50_000.0, 10_000.0).unwrap();
        assert_eq!(b, bands_from_edges(&DEFAULT_BAND_EDGES));
    }

    #[test]
    fn overlapping_bands_rejected() {
        assert!(validate_bands(&[Band::new(1.0, 5.0), Band::new(4.0, 6.0)]).is_err());
        assert!(validate_bands(&bands_from_edges(&DEFAULT_BAND_EDGES)).is_ok());
    }
}
