//! Covariate audits: can the features predict a nuisance covariate, does
//! conditioning on it destroy health accuracy, and how does accuracy grow as
//! one stratum is mixed into the other.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{quantile, Summary};
use crate::dataset::{FeatureTable, RowLabels};
use crate::error::{Error, Result};
use crate::learn::{loso_binary, loso_cv, CvOptions, CvResult};
use crate::rng::{stream, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Covariate {
    Device,
    Side,
    Subject,
}

impl Covariate {
    pub fn value(self, row: &RowLabels) -> String {
        match self {
            Covariate::Device => row.device_id.clone(),
            Covariate::Side => row.side.to_string(),
            Covariate::Subject => row.subject_id.clone(),
        }
    }

    pub fn values(self, table: &FeatureTable) -> Vec<String> {
        let set: BTreeSet<String> = table.labels.iter().map(|l| self.value(l)).collect();
        set.into_iter().collect()
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Covariate::Device => "device",
            Covariate::Side => "side",
            Covariate::Subject => "subject",
        })
    }
}

impl FromStr for Covariate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "device" => Ok(Covariate::Device),
            "side" => Ok(Covariate::Side),
            "subject" => Ok(Covariate::Subject),
            other => Err(Error::Usage(format!("unknown covariate '{other}' (expected device, side or subject)"))),
        }
    }
}

/// LOSO classification of a binary covariate from the same features.
/// The positive class is the lexicographically larger covariate value.
pub fn covariate_predictability(table: &FeatureTable, covariate: Covariate, opts: &CvOptions) -> Result<CvResult> {
    if covariate == Covariate::Subject {
        return Err(Error::Audit(
            "subject cannot be predicted under leave-one-subject-out: the held-out subject never appears in training"
                .into(),
        ));
    }
    let values = covariate.values(table);
    match values.len() {
        0 | 1 => return Err(Error::Audit(format!("covariate {covariate} is constant"))),
        2 => {}
        n => return Err(Error::Audit(format!("covariate {covariate} has {n} values; only binary covariates are supported"))),
    }
    let targets: Vec<bool> = table.labels.iter().map(|l| covariate.value(l) == values[1]).collect();
    loso_binary(&table.values, &table.names, &targets, &table.subjects(), opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditioningOptions {
    pub control_repeats: usize,
    pub control_fraction: f64,
    /// A stratum is flagged when its accuracy lies strictly below this control quantile.
    pub quantile: f64,
    pub seed: u64,
}

impl Default for ConditioningOptions {
    fn default() -> Self {
        Self { control_repeats: 10_000, control_fraction: 0.5, quantile: 0.025, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumResult {
    pub value: String,
    pub n_rows: usize,
    pub n_subjects: usize,
    /// `None` when the stratum lacks one of the classes or LOSO is impossible.
    pub accuracy: Option<f64>,
    pub undefined_reason: Option<String>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningResult {
    pub covariate: Covariate,
    pub seed: u64,
    pub full_accuracy: f64,
    pub strata: Vec<StratumResult>,
    pub control: Summary,
    pub control_threshold: f64,
    pub control_samples: Vec<f64>,
    /// Control subsamples whose LOSO could not be evaluated.
    pub n_control_invalid: usize,
    pub n_control_repeats: usize,
    /// The control mean falls outside the range of stratum accuracies.
    pub needs_review: bool,
}

impl ConditioningResult {
    pub fn stratum(&self, value: &str) -> Option<&StratumResult> {
        self.strata.iter().find(|s| s.value == value)
    }

    pub fn any_flagged(&self) -> bool {
        self.strata.iter().any(|s| s.flagged)
    }
}

/// Distinct sessions in first-appearance order.
fn sessions(table: &FeatureTable) -> Vec<String> {
    let mut seen = BTreeSet::new();
    table.labels.iter().filter(|l| seen.insert(l.session_id.clone())).map(|l| l.session_id.clone()).collect()
}

fn restrict(table: &FeatureTable, keep: &BTreeSet<&String>) -> FeatureTable {
    table.filter(|l| keep.contains(&l.session_id))
}

/// LOSO accuracy on each covariate stratum and on random session subsamples.
///
/// Control subsamples draw `round(control_fraction * n_sessions)` sessions
/// (legs) without replacement from stream `[CONTROL, repeat]`.
pub fn condition_on_covariate(
    table: &FeatureTable,
    covariate: Covariate,
    opts: &ConditioningOptions,
    cv: &CvOptions,
) -> Result<ConditioningResult> {
    if !(opts.control_fraction > 0.0 && opts.control_fraction < 1.0) {
        return Err(Error::param(format!("control fraction {} outside (0,1)", opts.control_fraction)));
    }
    if !(0.0..=1.0).contains(&opts.quantile) {
        return Err(Error::param("quantile outside [0,1]"));
    }
    let full = loso_cv(table, cv)?;
    let values = covariate.values(table);
    if values.len() < 2 {
        return Err(Error::Audit(format!("covariate {covariate} is constant")));
    }

    let lean = CvOptions { keep_models: false, parallel: false, ..*cv };
    let all_sessions = sessions(table);
    let k = ((opts.control_fraction * all_sessions.len() as f64).round() as usize).clamp(1, all_sessions.len());
    let outcomes: Vec<Option<f64>> = (0..opts.control_repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(opts.seed, &[tag::CONTROL, r as u64]);
            let keep: BTreeSet<&String> = sample(&mut rng, all_sessions.len(), k).iter().map(|i| &all_sessions[i]).collect();
            loso_cv(&restrict(table, &keep), &lean).ok().map(|c| c.mean_repetition_accuracy)
        })
        .collect();
    let control_samples: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let n_control_invalid = outcomes.len() - control_samples.len();
    let control = Summary::of(&control_samples);
    let threshold = quantile(&control_samples, opts.quantile);

    let strata: Vec<StratumResult> = values
        .iter()
        .map(|v| {
            let sub = table.filter(|l| &covariate.value(l) == v);
            let n_subjects = sub.distinct_subjects().len();
            let classes: BTreeSet<_> = sub.labels.iter().map(|l| l.health).collect();
            let (accuracy, undefined_reason) = if classes.len() < 2 {
                (None, Some("stratum contains a single health class".to_string()))
            } else {
                match loso_cv(&sub, &lean) {
                    Ok(c) => (Some(c.mean_repetition_accuracy), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            let flagged = accuracy.is_some_and(|a| !control_samples.is_empty() && a < threshold);
            StratumResult { value: v.clone(), n_rows: sub.n_rows(), n_subjects, accuracy, undefined_reason, flagged }
        })
        .collect();
    let defined: Vec<f64> = strata.iter().filter_map(|s| s.accuracy).collect();
    let needs_review = !defined.is_empty()
        && !control_samples.is_empty()
        && (control.mean < defined.iter().copied().fold(f64::INFINITY, f64::min)
            || control.mean > defined.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    Ok(ConditioningResult {
        covariate,
        seed: opts.seed,
        full_accuracy: full.mean_repetition_accuracy,
        strata,
        control,
        control_threshold: threshold,
        control_samples,
        n_control_invalid,
        n_control_repeats: opts.control_repeats,
        needs_review,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingPoint {
    pub n_added: usize,
    /// Fraction of the added stratum included.
    pub added_fraction: f64,
    pub stratified: Summary,
    pub reference: Summary,
    pub n_invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingCurve {
    pub covariate: Covariate,
    pub base: String,
    pub added: String,
    pub seed: u64,
    pub repeats: usize,
    pub points: Vec<MixingPoint>,
}

impl MixingCurve {
    /// Smallest added fraction from which the two curves' ±1 std bands overlap for good.
    pub fn convergence_fraction(&self) -> Option<f64> {
        let overlaps = |p: &MixingPoint| {
            let (a, b) = (&p.stratified, &p.reference);
            a.mean - a.std <= b.mean + b.std && b.mean - b.std <= a.mean + a.std
        };
        let last_gap = self.points.iter().rposition(|p| !overlaps(p));
        match last_gap {
            None => self.points.first().map(|p| p.added_fraction),
            Some(i) => self.points.get(i + 1).map(|p| p.added_fraction),
        }
    }
}

/// Starts from the `base` stratum and adds `k` random sessions of the `added`
/// stratum, for every `k` from 0 to the full stratum; the reference draws the
/// same total number of sessions from the whole table.
pub fn incremental_mixing_curve(
    table: &FeatureTable,
    covariate: Covariate,
    base: &str,
    added: &str,
    repeats: usize,
    seed: u64,
    cv: &CvOptions,
) -> Result<MixingCurve> {
    let base_sessions: Vec<String> =
        sessions(&table.filter(|l| covariate.value(l) == base));
    let added_sessions: Vec<String> = sessions(&table.filter(|l| covariate.value(l) == added));
    if base_sessions.is_empty() || added_sessions.is_empty() {
        return Err(Error::Audit(format!("strata '{base}' and '{added}' of {covariate} must be non-empty")));
    }
    if repeats == 0 {
        return Err(Error::param("mixing curve needs at least one repeat"));
    }
    let all = sessions(table);
    let lean = CvOptions { keep_models: false, parallel: false, ..*cv };
    let n_added_total = added_sessions.len();

    let points = (0..=n_added_total)
        .map(|k| {
            let total = base_sessions.len() + k;
            let runs: Vec<(Option<f64>, Option<f64>)> = (0..repeats)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream(seed, &[tag::MIXING, k as u64, r as u64]);
                    let mut keep: BTreeSet<&String> = base_sessions.iter().collect();
                    keep.extend(sample(&mut rng, n_added_total, k).iter().map(|i| &added_sessions[i]));
                    let strat = loso_cv(&restrict(table, &keep), &lean).ok().map(|c| c.mean_repetition_accuracy);
                    let refs: BTreeSet<&String> = sample(&mut rng, all.len(), total).iter().map(|i| &all[i]).collect();
                    let reference = loso_cv(&restrict(table, &refs), &lean).ok().map(|c| c.mean_repetition_accuracy);
                    (strat, reference)
                })
                .collect();
            let s: Vec<f64> = runs.iter().filter_map(|r| r.0).collect();
            let rf: Vec<f64> = runs.iter().filter_map(|r| r.1).collect();
            MixingPoint {
                n_added: k,
                added_fraction: k as f64 / n_added_total as f64,
                n_invalid: 2 * repeats - s.len() - rf.len(),
                stratified: Summary::of(&s),
                reference: Summary::of(&rf),
            }
        })
        .collect();
    Ok(MixingCurve {
        covariate,
        base: base.to_string(),
        added: added.to_string(),
        seed,
        repeats,
        points,
    })
}
