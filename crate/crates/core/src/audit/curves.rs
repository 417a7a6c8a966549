//! Plot-ready series: one row per x with summary statistics of the samples at x.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::Summary;
use crate::error::{Error, Result};

pub const CURVE_HEADER: [&str; 10] = ["x", "n", "mean", "std", "min", "q025", "q25", "median", "q75", "q975"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub name: String,
    pub points: Vec<CurvePoint>,
}

impl CurveSeries {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), points: Vec::new() }
    }

    pub fn push(&mut self, x: f64, summary: Summary) {
        self.points.push(CurvePoint { x, summary });
    }

    /// A point carrying a single observation.
    pub fn push_value(&mut self, x: f64, y: f64) {
        self.push(x, Summary::of(&[y]));
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CURVE_HEADER)?;
        for p in &self.points {
            let s = &p.summary;
            let row = [p.x, s.n as f64, s.mean, s.std, s.min, s.q025, s.q25, s.median, s.q75, s.q975];
            w.write_record(row.iter().map(f64::to_string))?;
        }
        w.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// The distribution of a sample set as one CSV column of raw values.
pub fn write_samples_csv(path: &Path, column: &str, samples: &[f64]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(f));
    w.write_record([column])?;
    for v in samples {
        w.write_record([v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let mut c = CurveSeries::new("acc");
        c.push(1.0, Summary::of(&[0.5, 0.7]));
        c.push_value(2.0, 0.9);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("x,n,mean,std"));
        assert!(lines[1].starts_with("1,2,0.6"));
    }
}
