//! Counterfactual relabeling: rerun LOSO as if sessions had come from other
//! subjects with other labels, and compare with a label-permutation null.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::Summary;
use crate::dataset::FeatureTable;
use crate::error::{Error, Result};
use crate::labels::Health;
use crate::learn::{loso_cv, CvOptions, CvResult};
use crate::rng::{stream, tag};

pub const DEFAULT_PERMUTATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelabelTarget {
    pub subject_id: String,
    pub health: Health,
}

/// Counterfactual subject and label per session id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelabelSpec {
    pub sessions: BTreeMap<String, RelabelTarget>,
}

impl RelabelSpec {
    /// Every session keeps its subject and label.
    pub fn identity(table: &FeatureTable) -> Self {
        let sessions = table
            .labels
            .iter()
            .map(|l| (l.session_id.clone(), RelabelTarget { subject_id: l.subject_id.clone(), health: l.health }))
            .collect();
        Self { sessions }
    }

    /// Each session becomes its own subject; in first-appearance order the
    /// first `n_healthy` sessions are Healthy and the rest Unhealthy.
    pub fn by_session_order(table: &FeatureTable, n_healthy: usize) -> Self {
        let mut seen = BTreeSet::new();
        let sessions = table
            .labels
            .iter()
            .filter(|l| seen.insert(l.session_id.clone()))
            .enumerate()
            .map(|(i, l)| {
                let target = RelabelTarget { subject_id: l.session_id.clone(), health: Health::from_unhealthy(i >= n_healthy) };
                (l.session_id.clone(), target)
            })
            .collect();
        Self { sessions }
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        let mut out = table.clone();
        for l in &mut out.labels {
            let t = self
                .sessions
                .get(&l.session_id)
                .ok_or_else(|| Error::Audit(format!("relabel spec does not cover session {}", l.session_id)))?;
            l.subject_id = t.subject_id.clone();
            l.health = t.health;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub seed: u64,
    pub cv: CvResult,
    pub accuracy: f64,
    pub n_permutations: usize,
    pub null: Summary,
    pub null_samples: Vec<f64>,
    /// Accuracy minus the null mean.
    pub delta: f64,
    /// `(1 + #{null >= accuracy}) / (1 + n)`.
    pub p_value: f64,
}

/// Relabels, reruns LOSO, and builds the null by shuffling session labels
/// (class balance preserved) under the counterfactual grouping, one stream
/// `[PERMUTATION, p]` per permutation.
pub fn counterfactual_relabel(
    table: &FeatureTable,
    spec: &RelabelSpec,
    n_permutations: usize,
    seed: u64,
    cv: &CvOptions,
) -> Result<CounterfactualResult> {
    let relabeled = spec.apply(table)?;
    if relabeled.distinct_subjects().len() < 2 {
        return Err(Error::Audit("counterfactual grouping needs at least 2 subjects".into()));
    }
    let result = loso_cv(&relabeled, cv)?;

    let mut sessions: Vec<&str> = Vec::new();
    let mut seen = BTreeSet::new();
    for l in &relabeled.labels {
        if seen.insert(l.session_id.as_str()) {
            sessions.push(&l.session_id);
        }
    }
    let labels: Vec<Health> = sessions.iter().map(|s| spec.sessions[*s].health).collect();
    let lean = CvOptions { keep_models: false, parallel: false, ..*cv };
    let outcomes: Vec<Option<f64>> = (0..n_permutations)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, &[tag::PERMUTATION, p as u64]);
            let mut shuffled = labels.clone();
            shuffled.shuffle(&mut rng);
            let by_session: BTreeMap<&str, Health> = sessions.iter().copied().zip(shuffled).collect();
            let mut t = relabeled.clone();
            for l in &mut t.labels {
                l.health = by_session[l.session_id.as_str()];
            }
            loso_cv(&t, &lean).ok().map(|c| c.mean_repetition_accuracy)
        })
        .collect();
    let null_samples: Vec<f64> = outcomes.into_iter().flatten().collect();
    let null = Summary::of(&null_samples);
    let accuracy = result.mean_repetition_accuracy;
    let exceed = null_samples.iter().filter(|&&a| a >= accuracy).count();
    Ok(CounterfactualResult {
        seed,
        accuracy,
        n_permutations,
        delta: accuracy - null.mean,
        p_value: (1 + exceed) as f64 / (1 + null_samples.len()) as f64,
        null,
        null_samples,
        cv: result,
    })
}
