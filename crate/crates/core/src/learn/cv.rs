use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{fit_binary, FitOptions, LinearModel};
use crate::dataset::FeatureTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub fit: FitOptions,
    /// Keep each fold's fitted model in the result.
    pub keep_models: bool,
    /// Evaluate folds on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { fit: FitOptions::default(), keep_models: true, parallel: true }
    }
}

impl CvOptions {
    /// Settings for Monte-Carlo loops: no stored models, sequential folds.
    pub fn lean() -> Self {
        Self { keep_models: false, parallel: false, ..Self::default() }
    }
}

/// Confusion counts with the positive class as "positive".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub group: String,
    pub n_test: usize,
    pub n_correct: usize,
    /// Reason the fold was not evaluated.
    pub skipped: Option<String>,
    pub dropped_features: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowPrediction {
    pub positive: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub per_group_accuracy: BTreeMap<String, f64>,
    /// Correct repetitions over evaluated repetitions.
    pub mean_repetition_accuracy: f64,
    /// Fraction of evaluated groups whose majority vote matches their majority label.
    pub majority_vote_accuracy: f64,
    pub n_evaluated: usize,
    pub n_correct: usize,
    pub confusion: Confusion,
    pub folds: Vec<FoldReport>,
    pub skipped_folds: Vec<String>,
    /// Per input row; `None` for rows of skipped folds.
    pub predictions: Vec<Option<RowPrediction>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub fold_models: Vec<LinearModel>,
}

impl CvResult {
    pub fn accuracy(&self) -> f64 {
        self.mean_repetition_accuracy
    }
}

/// Leave-one-group-out cross-validation for a binary target.
///
/// Groups are held out in lexicographic order. Standardization and fitting
/// see only the training rows of each fold.
pub fn loso_binary(x: &[Vec<f64>], names: &[String], targets: &[bool], groups: &[String], opts: &CvOptions) -> Result<CvResult> {
    if x.len() != targets.len() || x.len() != groups.len() {
        return Err(Error::param("rows, targets and groups differ in length"));
    }
    let mut distinct: Vec<&String> = groups.iter().collect();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::param(format!("LOSO needs at least 2 groups, found {}", distinct.len())));
    }

    let run_fold = |g: &&String| -> (FoldReport, Vec<(usize, RowPrediction)>, Option<LinearModel>) {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| &groups[i] != *g);
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<bool> = train.iter().map(|&i| targets[i]).collect();
        match fit_binary(&xt, names, &yt, &opts.fit) {
            Ok(model) => {
                let preds: Vec<(usize, RowPrediction)> = test
                    .iter()
                    .map(|&i| {
                        let score = model.score_row(&x[i]);
                        (i, RowPrediction { positive: score > model.threshold, score })
                    })
                    .collect();
                let n_correct = preds.iter().filter(|(i, p)| p.positive == targets[*i]).count();
                let report = FoldReport {
                    group: (*g).clone(),
                    n_test: test.len(),
                    n_correct,
                    skipped: None,
                    dropped_features: model.dropped.clone(),
                    converged: model.converged,
                    iterations: model.iterations,
                };
                (report, preds, opts.keep_models.then_some(model))
            }
            Err(e) => (
                FoldReport {
                    group: (*g).clone(),
                    n_test: test.len(),
                    n_correct: 0,
                    skipped: Some(e.to_string()),
                    dropped_features: Vec::new(),
                    converged: false,
                    iterations: 0,
                },
                Vec::new(),
                None,
            ),
        }
    };
    let outcomes: Vec<_> = if opts.parallel {
        distinct.par_iter().map(run_fold).collect()
    } else {
        distinct.iter().map(run_fold).collect()
    };

    let mut predictions = vec![None; x.len()];
    let mut folds = Vec::with_capacity(outcomes.len());
    let mut fold_models = Vec::new();
    let mut per_group_accuracy = BTreeMap::new();
    let mut skipped_folds = Vec::new();
    let mut confusion = Confusion::default();
    let (mut n_eval, mut n_correct, mut vote_groups, mut vote_correct) = (0, 0, 0, 0);
    for (report, preds, model) in outcomes {
        if let Some(m) = model {
            fold_models.push(m);
        }
        if report.skipped.is_some() {
            skipped_folds.push(report.group.clone());
        } else if report.n_test > 0 {
            per_group_accuracy.insert(report.group.clone(), report.n_correct as f64 / report.n_test as f64);
            let votes = preds.iter().filter(|(_, p)| p.positive).count();
            let truth = preds.iter().filter(|(i, _)| targets[*i]).count();
            vote_groups += 1;
            if (2 * votes > preds.len()) == (2 * truth > preds.len()) {
                vote_correct += 1;
            }
        }
        for (i, p) in preds {
            match (p.positive, targets[i]) {
                (true, true) => confusion.true_positive += 1,
                (false, false) => confusion.true_negative += 1,
                (true, false) => confusion.false_positive += 1,
                (false, true) => confusion.false_negative += 1,
            }
            predictions[i] = Some(p);
        }
        n_eval += report.n_test * usize::from(report.skipped.is_none());
        n_correct += report.n_correct;
        folds.push(report);
    }
    if n_eval == 0 {
        return Err(Error::SingleClass("every LOSO fold had a single-class training set".into()));
    }
    Ok(CvResult {
        per_group_accuracy,
        mean_repetition_accuracy: n_correct as f64 / n_eval as f64,
        majority_vote_accuracy: vote_correct as f64 / vote_groups.max(1) as f64,
        n_evaluated: n_eval,
        n_correct,
        confusion,
        folds,
        skipped_folds,
        predictions,
        fold_models,
    })
}

/// LOSO health classification over a feature table, grouped by subject.
pub fn loso_cv(table: &FeatureTable, opts: &CvOptions) -> Result<CvResult> {
    let targets: Vec<bool> = table.labels.iter().map(|l| l.health.is_unhealthy()).collect();
    loso_binary(&table.values, &table.names, &targets, &table.subjects(), opts)
}
