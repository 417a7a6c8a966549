use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, RowLabels};
use crate::error::{Error, Result};
use crate::labels::Health;

/// Label columns written before the feature columns in CSV exports.
pub const LABEL_COLUMNS: [&str; 6] = ["session_id", "subject_id", "side", "device_id", "health", "repetition"];

/// One row per repetition: labels plus feature values in column order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub labels: Vec<RowLabels>,
    pub values: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        Self { names, labels: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, labels: RowLabels, vector: FeatureVector) -> Result<()> {
        if vector.names != self.names {
            return Err(Error::param(format!(
                "feature names of session {} differ from the table's",
                labels.session_id
            )));
        }
        if let Some(i) = vector.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite feature {} in session {}", self.names[i], labels.session_id)));
        }
        self.labels.push(labels);
        self.values.push(vector.values);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| Error::MissingFeature(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.feature_index(name)?;
        Ok(self.values.iter().map(|r| r[j]).collect())
    }

    pub fn health(&self) -> Vec<Health> {
        self.labels.iter().map(|l| l.health).collect()
    }

    pub fn subjects(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.subject_id.clone()).collect()
    }

    pub fn distinct_subjects(&self) -> BTreeSet<String> {
        self.labels.iter().map(|l| l.subject_id.clone()).collect()
    }

    /// Keeps the named features, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureTable> {
        let idx: Vec<usize> = names.iter().map(|n| self.feature_index(n)).collect::<Result<_>>()?;
        Ok(FeatureTable {
            names: names.to_vec(),
            labels: self.labels.clone(),
            values: self.values.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
        })
    }

    pub fn filter(&self, mut keep: impl FnMut(&RowLabels) -> bool) -> FeatureTable {
        let mut out = FeatureTable::new(self.names.clone());
        for (l, v) in self.labels.iter().zip(&self.values) {
            if keep(l) {
                out.labels.push(l.clone());
                out.values.push(v.clone());
            }
        }
        out
    }

    /// Appends the rows of `other`, which must have the same columns.
    pub fn extend(&mut self, other: &FeatureTable) -> Result<()> {
        if other.names != self.names {
            return Err(Error::param("cannot concatenate tables with different feature columns"));
        }
        self.labels.extend(other.labels.iter().cloned());
        self.values.extend(other.values.iter().cloned());
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LABEL_COLUMNS.iter().copied().chain(self.names.iter().map(String::as_str)))?;
        for (l, v) in self.labels.iter().zip(&self.values) {
            let mut rec = vec![
                l.session_id.clone(),
                l.subject_id.clone(),
                l.side.to_string(),
                l.device_id.clone(),
                l.health.to_string(),
                l.repetition.to_string(),
            ];
            rec.extend(v.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<FeatureTable> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < LABEL_COLUMNS.len() || cols[..LABEL_COLUMNS.len()] != LABEL_COLUMNS {
            return Err(Error::param(format!("feature table must start with columns {}", LABEL_COLUMNS.join(","))));
        }
        let mut table = FeatureTable::new(cols[LABEL_COLUMNS.len()..].iter().map(|s| s.to_string()).collect());
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::param(format!("feature table row {}: invalid {what}", line + 1));
            let labels = RowLabels {
                session_id: rec[0].to_string(),
                subject_id: rec[1].to_string(),
                side: rec[2].parse().map_err(|_| bad("side"))?,
                device_id: rec[3].to_string(),
                health: rec[4].parse().map_err(|_| bad("health"))?,
                repetition: rec[5].parse().map_err(|_| bad("repetition"))?,
            };
            let values: Vec<f64> = rec
                .iter()
                .skip(LABEL_COLUMNS.len())
                .map(|s| s.parse::<f64>().map_err(|_| bad("number")))
                .collect::<Result<_>>()?;
            table.push(labels, FeatureVector { names: table.names.clone(), values })?;
        }
        Ok(table)
    }

    pub fn read_csv_file(path: &Path) -> Result<FeatureTable> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}
