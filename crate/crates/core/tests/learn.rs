mod common;

use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use vibroaudit::learn::{fit_linear, loso_cv, pca2, CvOptions, FitOptions};
use vibroaudit::rng::stream;
use vibroaudit::Health;

use common::gaussian_table;

/// Plain gradient descent on the same objective, written without reference to the library fit.
fn gradient_descent_scores(train: &[Vec<f64>], y: &[bool], test: &[Vec<f64>], l2: f64) -> Vec<f64> {
    let n = train.len() as f64;
    let d = train[0].len();
    let stats: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            let m = train.iter().map(|r| r[j]).sum::<f64>() / n;
            let v = train.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            (m, v.sqrt())
        })
        .collect();
    let standardize = |r: &Vec<f64>| -> Vec<f64> { r.iter().zip(&stats).map(|(v, (m, s))| (v - m) / s).collect() };
    let z: Vec<Vec<f64>> = train.iter().map(standardize).collect();
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    // Lipschitz bound of the logistic loss gradient on standardized columns plus intercept.
    let step = 1.0 / (0.25 * (d + 1) as f64 + l2);
    for _ in 0..200_000 {
        let (mut gw, mut gb) = (vec![0.0; d], 0.0);
        for (zi, &yi) in z.iter().zip(y) {
            let m = b + zi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let p = 1.0 / (1.0 + (-m).exp());
            let r = p - f64::from(u8::from(yi));
            gb += r / n;
            for (g, v) in gw.iter_mut().zip(zi) {
                *g += r * v / n;
            }
        }
        for (g, wj) in gw.iter_mut().zip(&w) {
            *g += l2 * wj;
        }
        if gw.iter().chain([&gb]).all(|g| g.abs() < 1e-12) {
            break;
        }
        b -= step * gb;
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= step * g;
        }
    }
    test.iter()
        .map(|r| {
            let m = b + standardize(r).iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            1.0 / (1.0 + (-m).exp())
        })
        .collect()
}

#[test]
fn loso_matches_a_brute_force_oracle() {
    let table = gaussian_table(11, 4, 9, 3, 0.8);
    let cv = loso_cv(&table, &CvOptions::default()).unwrap();
    assert_eq!(cv.folds.len(), 4);
    let subjects = table.subjects();
    let targets: Vec<bool> = table.labels.iter().map(|l| l.health.is_unhealthy()).collect();
    let mut distinct = subjects.clone();
    distinct.dedup();
    for held in &distinct {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..table.n_rows()).partition(|&i| &subjects[i] != held);
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| table.values[i].clone()).collect();
        let yt: Vec<bool> = train.iter().map(|&i| targets[i]).collect();
        let xs: Vec<Vec<f64>> = test.iter().map(|&i| table.values[i].clone()).collect();
        let oracle = gradient_descent_scores(&xt, &yt, &xs, FitOptions::default().l2);
        for (&i, expected) in test.iter().zip(oracle) {
            let got = cv.predictions[i].unwrap();
            assert!((got.score - expected).abs() < 1e-6, "row {i}: {} vs {expected}", got.score);
            assert_eq!(got.positive, expected > 0.5, "row {i}");
        }
    }
}

#[test]
fn fold_standardization_ignores_test_rows() {
    let table = gaussian_table(5, 6, 5, 3, 1.0);
    let mut perturbed = table.clone();
    for (labels, row) in perturbed.labels.iter().zip(perturbed.values.iter_mut()) {
        if labels.subject_id == "s000" {
            row.iter_mut().for_each(|v| *v = *v * 37.0 + 1e3);
        }
    }
    let a = loso_cv(&table, &CvOptions::default()).unwrap();
    let b = loso_cv(&perturbed, &CvOptions::default()).unwrap();
    assert_eq!(a.folds[0].group, "s000");
    assert_eq!(a.fold_models[0].standardization, b.fold_models[0].standardization);
    assert_eq!(a.fold_models[0].weights, b.fold_models[0].weights);
    assert_ne!(a.fold_models[1].standardization, b.fold_models[1].standardization);
}

#[test]
fn fitted_model_is_confident_deep_in_the_unhealthy_half_space() {
    let table = gaussian_table(2, 10, 5, 2, 3.0);
    let labels: Vec<Health> = table.labels.iter().map(|l| l.health).collect();
    let model = fit_linear(&table.values, &table.names, &labels, &FitOptions::default()).unwrap();
    let (label, score) = model.predict_named(&table.names, &[6.0, 6.0]).unwrap();
    assert_eq!(label, Health::Unhealthy);
    assert!(score > 0.9, "score {score}");
}

#[test]
fn raising_a_positive_weight_feature_never_lowers_the_score() {
    let table = gaussian_table(3, 8, 5, 3, 1.0);
    let labels: Vec<Health> = table.labels.iter().map(|l| l.health).collect();
    let model = fit_linear(&table.values, &table.names, &labels, &FitOptions::default()).unwrap();
    let j = model.weights.iter().position(|w| *w > 0.0).expect("a positive weight");
    let col = table.names.iter().position(|n| *n == model.features[j]).unwrap();
    let mut row = table.values[0].clone();
    let mut last = 0.0;
    for step in 0..50 {
        row[col] = -5.0 + 0.2 * step as f64;
        let (_, score) = model.predict_named(&table.names, &row).unwrap();
        assert!(score >= last);
        last = score;
    }
}

#[test]
fn shuffled_labels_average_to_chance() {
    let n = 60;
    let mean = (0..n)
        .map(|seed| {
            let mut t = gaussian_table(1000 + seed, 20, 10, 4, 0.0);
            let mut rng = stream(seed, &[0x5F1E]);
            let mut health: Vec<Health> = t.labels.iter().map(|l| l.health).collect();
            for i in (1..health.len()).rev() {
                health.swap(i, rng.random_range(0..=i));
            }
            for (l, h) in t.labels.iter_mut().zip(health) {
                l.health = h;
            }
            loso_cv(&t, &CvOptions::lean()).unwrap().accuracy()
        })
        .sum::<f64>()
        / n as f64;
    assert!((0.45..=0.55).contains(&mean), "null mean {mean}");
}

#[test]
fn anisotropic_gaussian_recovers_its_axis() {
    // Covariance R diag(4, 1) R^T with R a 25 degree rotation.
    let theta = 25f64.to_radians();
    let mut rng = stream(3, &[0xCA7]);
    let pts: Vec<[f64; 2]> = (0..100_000)
        .map(|_| {
            let a = 2.0 * rng.sample::<f64, _>(StandardNormal);
            let b = rng.sample::<f64, _>(StandardNormal);
            [a * theta.cos() - b * theta.sin(), a * theta.sin() + b * theta.cos()]
        })
        .collect();
    let r = pca2(&pts).unwrap();
    assert!((r.angle_deg() - 25.0).abs() < 1.0, "angle {}", r.angle_deg());
}

fn rotate(p: [f64; 2], deg: f64) -> [f64; 2] {
    let (s, c) = deg.to_radians().sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn loso_labels_survive_affine_rescaling(seed in 0u64..1000, col in 0usize..3, scale in 0.01f64..100.0, offset in -50.0f64..50.0) {
        let table = gaussian_table(seed, 6, 4, 3, 0.7);
        let mut moved = table.clone();
        moved.values.iter_mut().for_each(|r| r[col] = scale * r[col] + offset);
        let a = loso_cv(&table, &CvOptions::lean()).unwrap();
        let b = loso_cv(&moved, &CvOptions::lean()).unwrap();
        for (p, q) in a.predictions.iter().zip(&b.predictions) {
            let (p, q) = (p.unwrap(), q.unwrap());
            prop_assert_eq!(p.positive, q.positive);
            prop_assert!((p.score - q.score).abs() < 1e-6);
        }
        prop_assert_eq!(a.accuracy(), b.accuracy());
    }

    #[test]
    fn pca_axes_are_unit_and_orthogonal(pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        if let Ok(r) = pca2(&pts) {
            prop_assert!((r.first[0].hypot(r.first[1]) - 1.0).abs() < 1e-12);
            prop_assert!((r.first[0] * r.second[0] + r.first[1] * r.second[1]).abs() < 1e-10);
            prop_assert!(r.first[0] >= 0.0);
        }
    }

    #[test]
    fn pca_angle_follows_rotation(seed in any::<u64>(), deg in -180.0f64..180.0) {
        let mut rng = stream(seed, &[0xA61E]);
        let pts: Vec<[f64; 2]> = (0..200)
            .map(|_| [3.0 * rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal) + 0.5])
            .collect();
        let base = pca2(&pts).unwrap();
        let turned = pca2(&pts.iter().map(|p| rotate(*p, deg)).collect::<Vec<_>>()).unwrap();
        let diff = (turned.angle_deg() - base.angle_deg() - deg).rem_euclid(180.0);
        prop_assert!(diff.min(180.0 - diff) < 1e-6, "off by {diff}");
    }
}
