mod common;

use vibroaudit::audit::{
    band_scan, condition_on_covariate, counterfactual_relabel, covariate_predictability, fisher_exact,
    incremental_mixing_curve, quantile, rotation_analysis, tone_prevalence_by_label, ConditioningOptions, Covariate,
    RelabelSpec, RotationWorld,
};
use vibroaudit::dataset::{extract_table, Band, FeatureConfig, FeatureTable, WorldSource};
use vibroaudit::learn::{loso_cv, CvOptions};
use vibroaudit::{Error, Health, Side};

use common::{gaussian_table, small_world};

/// Subjects alternate health; subjects 0,1 mod 4 sit on the left device, whose
/// rows are shifted by `device_shift` in the first feature.
fn device_table(seed: u64, n_subjects: usize, device_shift: f64) -> FeatureTable {
    let mut t = gaussian_table(seed, n_subjects, 5, 3, 0.0);
    for (l, row) in t.labels.iter_mut().zip(t.values.iter_mut()) {
        let s: usize = l.subject_id[1..].parse().unwrap();
        if s % 4 < 2 {
            l.side = Side::Left;
            l.device_id = "device-left".into();
            l.session_id = format!("{}-L", l.subject_id);
            row[0] += device_shift;
        }
    }
    t
}

#[test]
fn single_full_band_reproduces_plain_loso() {
    let mut world = small_world(1, 6);
    world.cohort.n_subjects = 6;
    let band = Band::new(250.0, 3500.0);
    let cfg = FeatureConfig { bandpass: Some(band), ..FeatureConfig::default() };
    let source = WorldSource::new(&world).unwrap();
    let scan = band_scan(&source, &[band], &cfg, &CvOptions::default()).unwrap();
    let plain = loso_cv(&extract_table(&source, &cfg).unwrap(), &CvOptions::default()).unwrap();
    assert_eq!(scan.bands[0].accuracy, Some(plain.mean_repetition_accuracy));
    assert_eq!(scan.bands[0].cv.as_ref().unwrap().predictions, plain.predictions);
}

#[test]
fn band_above_nyquist_is_rejected() {
    let world = small_world(0, 1);
    let source = WorldSource::new(&world).unwrap();
    let err = band_scan(&source, &[Band::new(250.0, 5000.0)], &FeatureConfig::default(), &CvOptions::lean());
    assert!(matches!(err, Err(Error::Parameter(_))));
}

#[test]
fn narrow_band_is_skipped_with_a_reason() {
    let mut world = small_world(0, 2);
    world.cohort.n_subjects = 4;
    let source = WorldSource::new(&world).unwrap();
    let bands = [Band::new(250.0, 3000.0), Band::new(3000.0, 3010.0)];
    let scan = band_scan(&source, &bands, &FeatureConfig::default(), &CvOptions::lean()).unwrap();
    assert!(scan.bands[0].accuracy.is_some());
    assert!(scan.bands[1].accuracy.is_none());
    assert!(scan.bands[1].skipped.as_deref().unwrap().contains("mel"));
}

#[test]
fn identity_relabel_equals_loso_bit_exactly() {
    let t = gaussian_table(4, 8, 6, 3, 0.6);
    let cf = counterfactual_relabel(&t, &RelabelSpec::identity(&t), 20, 1, &CvOptions::default()).unwrap();
    let plain = loso_cv(&t, &CvOptions::default()).unwrap();
    assert_eq!(cf.accuracy, plain.mean_repetition_accuracy);
    assert_eq!(cf.cv.predictions, plain.predictions);
    assert_eq!(cf.null_samples.len(), 20);
}

#[test]
fn counterfactual_is_deterministic_per_seed() {
    let t = gaussian_table(9, 8, 4, 2, 0.0);
    let spec = RelabelSpec::by_session_order(&t, 3);
    let a = counterfactual_relabel(&t, &spec, 30, 7, &CvOptions::lean()).unwrap();
    let b = counterfactual_relabel(&t, &spec, 30, 7, &CvOptions::default()).unwrap();
    assert_eq!(a.null_samples, b.null_samples);
    assert_eq!(a.accuracy, b.accuracy);
}

#[test]
fn device_is_predictable_when_it_shifts_the_features() {
    let cv = covariate_predictability(&device_table(1, 12, 3.0), Covariate::Device, &CvOptions::lean()).unwrap();
    assert!(cv.accuracy() >= 0.9, "device accuracy {}", cv.accuracy());
}

#[test]
fn degenerate_covariates_are_errors() {
    let t = gaussian_table(1, 6, 3, 2, 1.0);
    assert!(matches!(covariate_predictability(&t, Covariate::Device, &CvOptions::lean()), Err(Error::Audit(_))));
    assert!(matches!(covariate_predictability(&t, Covariate::Subject, &CvOptions::lean()), Err(Error::Audit(_))));
}

#[test]
fn control_fraction_must_lie_strictly_inside_the_unit_interval() {
    let t = device_table(2, 8, 0.0);
    for f in [0.0, 1.0, -0.2] {
        let opts = ConditioningOptions { control_fraction: f, control_repeats: 5, ..ConditioningOptions::default() };
        assert!(matches!(condition_on_covariate(&t, Covariate::Device, &opts, &CvOptions::lean()), Err(Error::Parameter(_))));
    }
}

#[test]
fn conditioning_flags_and_review_follow_their_definitions() {
    for seed in 0..4 {
        let t = device_table(seed, 12, 2.0);
        let opts = ConditioningOptions { control_repeats: 60, seed, ..ConditioningOptions::default() };
        let r = condition_on_covariate(&t, Covariate::Device, &opts, &CvOptions::lean()).unwrap();
        assert_eq!(r.n_control_repeats, 60);
        assert_eq!(r.control_samples.len() + r.n_control_invalid, 60);
        assert_eq!(r.control_threshold, quantile(&r.control_samples, 0.025));
        for s in &r.strata {
            assert_eq!(s.flagged, s.accuracy.is_some_and(|a| a < r.control_threshold), "{}", s.value);
            assert!(s.accuracy.is_none_or(|a| (0.0..=1.0).contains(&a)));
        }
        let defined: Vec<f64> = r.strata.iter().filter_map(|s| s.accuracy).collect();
        let lo = defined.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.needs_review, r.control.mean < lo || r.control.mean > hi);
        let again = condition_on_covariate(&t, Covariate::Device, &opts, &CvOptions::default()).unwrap();
        assert_eq!(again, r);
    }
}

#[test]
fn single_class_stratum_is_undefined() {
    let mut t = device_table(3, 8, 0.0);
    for l in &mut t.labels {
        if l.side == Side::Left {
            l.health = Health::Healthy;
        }
    }
    let opts = ConditioningOptions { control_repeats: 10, ..ConditioningOptions::default() };
    let r = condition_on_covariate(&t, Covariate::Device, &opts, &CvOptions::lean()).unwrap();
    let left = r.stratum("device-left").unwrap();
    assert!(left.accuracy.is_none() && !left.flagged);
    assert!(left.undefined_reason.is_some());
}

#[test]
fn full_mixing_endpoint_equals_the_full_dataset() {
    let t = device_table(5, 8, 1.0);
    let full = loso_cv(&t, &CvOptions::lean()).unwrap().mean_repetition_accuracy;
    let curve =
        incremental_mixing_curve(&t, Covariate::Device, "device-right", "device-left", 5, 3, &CvOptions::lean())
            .unwrap();
    assert_eq!(curve.points.len(), 5);
    let end = curve.points.last().unwrap();
    assert_eq!(end.added_fraction, 1.0);
    assert_eq!((end.stratified.mean, end.stratified.std), (full, 0.0));
    assert_eq!((end.reference.mean, end.reference.std), (full, 0.0));
}

#[test]
fn identical_subgroups_have_no_angle_and_no_signal() {
    // Health independent of the features; the second subgroup repeats the first point for point.
    // Each subject holds one healthy and one unhealthy session, so holding a subject out
    // leaves the training classes balanced and chance is 50%.
    let mut base = gaussian_table(6, 16, 8, 2, 0.0);
    for l in &mut base.labels {
        let s: usize = l.subject_id[1..].parse().unwrap();
        l.session_id = format!("{}-{}", l.subject_id, l.health);
        l.subject_id = format!("p{:03}", s / 2);
    }
    let mut t = base.clone();
    for (l, v) in base.labels.iter().zip(&base.values) {
        let mut l = l.clone();
        l.subject_id = format!("{}b", l.subject_id);
        l.session_id = format!("{}b", l.session_id);
        t.labels.push(l);
        t.values.push(v.clone());
    }
    let in_b: Vec<bool> = (0..t.n_rows()).map(|i| i >= base.n_rows()).collect();
    let r = rotation_analysis(&t, &in_b, ["a", "b"], &[0.0], 0, &CvOptions::lean()).unwrap();
    assert!(r.phi_degrees.abs() < 1e-9, "phi {}", r.phi_degrees);
    assert_eq!(r.accuracy_at(0.0), Some(r.observed_accuracy));
    assert!((0.35..=0.65).contains(&r.observed_accuracy), "accuracy {}", r.observed_accuracy);
}

#[test]
fn requesting_the_observed_angle_changes_nothing() {
    let (t, in_b) = RotationWorld { seed: 4, ..RotationWorld::default() }.sample().unwrap();
    let first = rotation_analysis(&t, &in_b, ["a", "b"], &[], 0, &CvOptions::lean()).unwrap();
    assert!(first.phi_degrees >= 0.0 && first.phi_degrees <= 90.0);
    let r = rotation_analysis(&t, &in_b, ["a", "b"], &[first.phi_degrees], 0, &CvOptions::lean()).unwrap();
    assert_eq!(r.accuracy_vs_rotation[0].accuracy, r.observed_accuracy);
}

#[test]
fn rotation_needs_two_features() {
    let t = gaussian_table(1, 6, 3, 3, 0.0);
    let in_b: Vec<bool> = (0..t.n_rows()).map(|i| i % 2 == 0).collect();
    assert!(matches!(rotation_analysis(&t, &in_b, ["a", "b"], &[0.0], 0, &CvOptions::lean()), Err(Error::Parameter(_))));
}

#[test]
fn prevalence_examples() {
    let labels: Vec<Health> = (0..20).map(|i| Health::from_unhealthy(i < 10)).collect();
    let tone_bias: Vec<bool> = (0..20).map(|i| i < 11).collect();
    let p = tone_prevalence_by_label(&tone_bias, &labels).unwrap();
    assert_eq!((p.prevalence_unhealthy, p.prevalence_healthy), (1.0, 0.1));
    assert!(p.p_value < 0.001);
    let none = tone_prevalence_by_label(&[false; 20], &labels).unwrap();
    assert_eq!((none.prevalence_unhealthy, none.prevalence_healthy, none.p_value), (0.0, 0.0, 1.0));
    let all = tone_prevalence_by_label(&[true; 20], &labels).unwrap();
    assert_eq!((all.prevalence_unhealthy, all.prevalence_healthy, all.p_value), (1.0, 1.0, 1.0));
}

#[test]
fn fisher_matches_a_hand_computed_hypergeometric_sum() {
    // Present in 10/10 unhealthy and 1/10 healthy. With 11 present overall, the
    // unhealthy count X ranges over 1..=10 and P(X = k) = C(11,k) C(9,10-k) / C(20,10).
    // Only X = 10 and its mirror X = 1 are as unlikely as the observation, each 11 / C(20,10).
    let p = fisher_exact(10, 0, 1, 9);
    assert!((p - 22.0 / 184_756.0).abs() < 1e-12, "p {p}");
}
