//! Subcommand implementations. Commands compute everything first and return
//! the files to write; [`write_outputs`] is the single writer.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::AuditConfig;
use super::report::{AuditReport, CovariateReport, Provenance, Section, SessionTones, ToneCluster};
use crate::audit::{
    band_scan, cluster_tones, condition_on_covariate, counterfactual_relabel, covariate_predictability,
    detect_in_signal, has_tone_near, incremental_mixing_curve, rotation_analysis, standardized_plane,
    tone_prevalence_by_label, unhealthy_side_subgroups, ConditioningOptions, Covariate, CurveSeries,
    RelabelSpec, LEFT_UNHEALTHY, RIGHT_UNHEALTHY,
};
use crate::dataset::{
    extract_table, load_manifest, FeatureConfig, FeatureTable, Manifest, ManifestSource, SessionSource, WorldSource,
};
use crate::dsp::{stft, Window};
use crate::error::{Error, Result};
use crate::labels::Health;
use crate::learn::loso_cv;
use crate::sigsynth::{scenario_preset, write_dataset, DatasetSummary, Scenario, WorldSpec};

/// Builds the world for a scenario, optionally replaced by a JSON world file.
pub fn resolve_world(scenario: Scenario, subjects: Option<usize>, seed: u64, world_file: Option<&Path>) -> Result<WorldSpec> {
    let mut world = match world_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Usage(format!("invalid world file {}: {e}", path.display())))?
        }
        None => scenario_preset(scenario),
    };
    if let Some(n) = subjects {
        if n == 0 {
            return Err(Error::Usage("--subjects must be at least 1".into()));
        }
        world = world.with_subjects(n);
    }
    let world = world.with_seed(seed);
    world.validate()?;
    Ok(world)
}

pub fn cmd_synth(world: &WorldSpec, out_dir: &Path) -> Result<DatasetSummary> {
    write_dataset(world, out_dir)
}

/// Extracts one row per repetition of every manifest session and writes the CSV table.
pub fn cmd_features(manifest_path: &Path, config: &FeatureConfig, out: &Path) -> Result<FeatureTable> {
    let manifest = load_manifest(manifest_path)?;
    let table = extract_table(&ManifestSource::new(&manifest), config)?;
    table.write_csv_file(out)?;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AuditKind {
    BandScan,
    Tones,
    Covariate,
    Condition,
    Mixing,
    Rotate,
    Counterfactual,
    Suite,
}

/// Data handed to an audit: recordings (manifest or scenario) and/or a feature table.
#[derive(Debug, Clone, Default)]
pub struct AuditInputs {
    pub manifest: Option<PathBuf>,
    pub scenario: Option<Scenario>,
    pub subjects: Option<usize>,
    pub world_file: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

/// A file produced by an audit, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct AuditOutcome {
    pub report: AuditReport,
    pub emissions: Vec<Emission>,
}

enum Step {
    Done,
    NotApplicable(String),
}

struct Runner<'a> {
    cfg: &'a AuditConfig,
    seed: u64,
    source: Option<Box<dyn SessionSource + 'a>>,
    table: Option<FeatureTable>,
    report: AuditReport,
    emissions: Vec<Emission>,
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Audit(format!("csv buffer: {e}")))
}

fn series_bytes(series: &CurveSeries) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    Ok(buf)
}

fn samples_bytes(column: &str, samples: &[f64]) -> Result<Vec<u8>> {
    csv_bytes(&[column], samples.iter().map(|v| [v.to_string()]))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl<'a> Runner<'a> {
    fn emit(&mut self, name: &str, bytes: Vec<u8>) {
        self.emissions.push(Emission { name: name.to_string(), bytes });
    }

    fn source(&self) -> Result<&(dyn SessionSource + 'a)> {
        self.source
            .as_deref()
            .ok_or_else(|| Error::Usage("this audit needs recordings: pass --manifest or --scenario".into()))
    }

    fn table(&mut self) -> Result<&FeatureTable> {
        if self.table.is_none() {
            let source = self.source.as_deref().ok_or_else(|| {
                Error::Usage("this audit needs features: pass --table, --manifest or --scenario".into())
            })?;
            let t0 = Instant::now();
            let table = extract_table(source, &self.cfg.features)?;
            self.report.timing.insert("features".into(), t0.elapsed().as_secs_f64());
            self.report.provenance.n_rows = Some(table.n_rows());
            self.table = Some(table);
        }
        Ok(self.table.as_ref().expect("table just set"))
    }

    fn run(&mut self, kind: AuditKind) -> Result<()> {
        let steps = match kind {
            AuditKind::Suite => vec![
                AuditKind::BandScan,
                AuditKind::Tones,
                AuditKind::Covariate,
                AuditKind::Condition,
                AuditKind::Mixing,
                AuditKind::Rotate,
                AuditKind::Counterfactual,
            ],
            other => vec![other],
        };
        let suite = kind == AuditKind::Suite;
        for step in steps {
            let name = section_name(step);
            if suite && self.source.is_none() && matches!(step, AuditKind::BandScan | AuditKind::Tones) {
                self.report.skip(name, "no recordings (feature table input)");
                continue;
            }
            let t0 = Instant::now();
            let outcome = match step {
                AuditKind::BandScan => self.band_scan(),
                AuditKind::Tones => self.tones(),
                AuditKind::Covariate => self.covariate(),
                AuditKind::Condition => self.condition(),
                AuditKind::Mixing => self.mixing(),
                AuditKind::Rotate => self.rotate(),
                AuditKind::Counterfactual => self.counterfactual(),
                AuditKind::Suite => unreachable!(),
            }?;
            self.report.timing.insert(name.to_string(), t0.elapsed().as_secs_f64());
            if let Step::NotApplicable(reason) = outcome {
                if !suite {
                    return Err(Error::Audit(format!("{name}: {reason}")));
                }
                self.report.skip(name, reason);
            }
        }
        Ok(())
    }

    fn band_scan(&mut self) -> Result<Step> {
        let bands = self.cfg.band_scan.bands()?;
        let result = band_scan(self.source()?, &bands, &self.cfg.features, &self.cfg.cv())?;
        let rows: Vec<[String; 4]> = result
            .bands
            .iter()
            .map(|b| [b.band.lo.to_string(), b.band.hi.to_string(), opt(b.accuracy), b.skipped.clone().unwrap_or_default()])
            .collect();
        self.emit("band_scan.csv", csv_bytes(&["band_lo_hz", "band_hi_hz", "accuracy", "skipped"], rows)?);
        self.report.sections.band_scan = Some(Section { seed: self.seed, result });
        Ok(Step::Done)
    }

    fn tones(&mut self) -> Result<Step> {
        let source = self.source()?;
        let opts = self.cfg.tones.detector;
        let per_session: Vec<(SessionTones, Vec<f64>, f64)> = (0..source.n_sessions())
            .into_par_iter()
            .map(|i| {
                let info = source.info(i);
                let signal = source.signal(i)?;
                let samples = signal.mixdown();
                let detections = detect_in_signal(&samples, signal.sample_rate(), &opts)
                    .map_err(|e| Error::Manifest { session: Some(info.session_id.clone()), reason: e.to_string() })?;
                let spec = stft(&samples, signal.sample_rate(), opts.frame_len, opts.frame_len, Window::Hann)?;
                let n = spec.n_frames() as f64;
                let mean_power: Vec<f64> = (0..spec.n_bins())
                    .map(|k| spec.magnitudes.iter().map(|row| row[k] * row[k]).sum::<f64>() / n)
                    .collect();
                let tones = SessionTones { session_id: info.session_id, health: info.health, detections };
                Ok((tones, mean_power, spec.bin_width()))
            })
            .collect::<Result<_>>()?;

        let mut rows = Vec::new();
        for (s, _, _) in &per_session {
            for d in &s.detections {
                rows.push([
                    s.session_id.clone(),
                    s.health.to_string(),
                    d.center_hz.to_string(),
                    d.persistence.to_string(),
                    d.prominence_db.to_string(),
                ]);
            }
        }
        self.emit("tones.csv", csv_bytes(&["session_id", "health", "center_hz", "persistence", "prominence_db"], rows)?);
        self.emit_class_spectra(&per_session)?;

        let sessions: Vec<SessionTones> = per_session.into_iter().map(|(s, _, _)| s).collect();
        let detections: Vec<Vec<_>> = sessions.iter().map(|s| s.detections.clone()).collect();
        let labels: Vec<Health> = sessions.iter().map(|s| s.health).collect();
        let tol = self.cfg.tones.cluster_tolerance_hz;
        let both_classes = labels.contains(&Health::Healthy) && labels.contains(&Health::Unhealthy);
        let mut clusters = Vec::new();
        if both_classes {
            for center in cluster_tones(&detections, tol) {
                let present: Vec<bool> = detections.iter().map(|d| has_tone_near(d, center, tol)).collect();
                let prevalence = tone_prevalence_by_label(&present, &labels)?;
                if prevalence.p_value < self.cfg.alpha {
                    self.report.flag(
                        "prevalence",
                        format!(
                            "persistent tone near {center:.0} Hz in {}/{} unhealthy vs {}/{} healthy sessions (p = {:.2e})",
                            prevalence.unhealthy_present,
                            prevalence.unhealthy_total,
                            prevalence.healthy_present,
                            prevalence.healthy_total,
                            prevalence.p_value
                        ),
                    );
                }
                clusters.push(ToneCluster { center_hz: center, prevalence });
            }
            let rows: Vec<[String; 4]> = clusters
                .iter()
                .map(|c| {
                    let p = &c.prevalence;
                    [c.center_hz.to_string(), p.prevalence_healthy.to_string(), p.prevalence_unhealthy.to_string(), p.p_value.to_string()]
                })
                .collect();
            self.emit("prevalence.csv", csv_bytes(&["center_hz", "prevalence_healthy", "prevalence_unhealthy", "p_value"], rows)?);
            self.report.sections.prevalence = Some(Section { seed: self.seed, result: clusters });
        } else {
            self.report.skip("prevalence", "sessions of a single class");
        }
        self.report.sections.tones = Some(Section { seed: self.seed, result: sessions });
        Ok(Step::Done)
    }

    /// Mean power spectrum per class, in dB.
    fn emit_class_spectra(&mut self, per_session: &[(SessionTones, Vec<f64>, f64)]) -> Result<()> {
        let Some((_, first, bin_width)) = per_session.first() else { return Ok(()) };
        let n_bins = first.len();
        let class_mean = |h: Health| -> Vec<f64> {
            let members: Vec<&Vec<f64>> =
                per_session.iter().filter(|(s, p, _)| s.health == h && p.len() == n_bins).map(|(_, p, _)| p).collect();
            (0..n_bins)
                .map(|k| {
                    let m = members.iter().map(|p| p[k]).sum::<f64>() / members.len().max(1) as f64;
                    if m > 0.0 { 10.0 * m.log10() } else { f64::NEG_INFINITY }
                })
                .collect()
        };
        let (h, u) = (class_mean(Health::Healthy), class_mean(Health::Unhealthy));
        let rows = (0..n_bins).map(|k| [(k as f64 * bin_width).to_string(), h[k].to_string(), u[k].to_string()]);
        let bytes = csv_bytes(&["freq_hz", "healthy_db", "unhealthy_db"], rows)?;
        self.emit("class_spectra.csv", bytes);
        Ok(())
    }

    fn binary_covariate(&mut self) -> Result<std::result::Result<Vec<String>, String>> {
        let cov = self.cfg.covariate;
        let values = cov.values(self.table()?);
        Ok(match values.len() {
            2 => Ok(values),
            n => Err(format!("covariate {cov} has {n} distinct values; 2 are needed")),
        })
    }

    fn covariate(&mut self) -> Result<Step> {
        let cov = self.cfg.covariate;
        if cov == Covariate::Subject {
            return Ok(Step::NotApplicable("subject cannot be predicted under leave-one-subject-out".into()));
        }
        let values = match self.binary_covariate()? {
            Ok(v) => v,
            Err(reason) => return Ok(Step::NotApplicable(reason)),
        };
        let opts = self.cfg.cv();
        let cv = covariate_predictability(self.table()?, cov, &opts)?;
        let acc = cv.mean_repetition_accuracy;
        if acc >= self.cfg.predictability_flag {
            self.report.flag("covariate", format!("{cov} is predictable from the features (LOSO accuracy {acc:.3})"));
        }
        let rows: Vec<[String; 2]> = cv.per_group_accuracy.iter().map(|(g, a)| [g.clone(), a.to_string()]).collect();
        self.emit("covariate.csv", csv_bytes(&["subject_id", "accuracy"], rows)?);
        self.report.sections.covariate = Some(Section { seed: self.seed, result: CovariateReport { covariate: cov, values, cv } });
        Ok(Step::Done)
    }

    fn condition(&mut self) -> Result<Step> {
        if let Err(reason) = self.binary_covariate()? {
            return Ok(Step::NotApplicable(reason));
        }
        let opts = ConditioningOptions { seed: self.seed, ..self.cfg.conditioning };
        let cv = self.cfg.cv();
        let cov = self.cfg.covariate;
        let result = condition_on_covariate(self.table()?, cov, &opts, &cv)?;
        for s in result.strata.iter().filter(|s| s.flagged) {
            self.report.flag(
                "conditioning",
                format!(
                    "{cov} stratum '{}' accuracy {:.3} below the {} control quantile {:.3}",
                    s.value,
                    s.accuracy.unwrap_or(f64::NAN),
                    opts.quantile,
                    result.control_threshold
                ),
            );
        }
        let rows: Vec<[String; 5]> = result
            .strata
            .iter()
            .map(|s| [s.value.clone(), s.n_rows.to_string(), opt(s.accuracy), s.flagged.to_string(), s.undefined_reason.clone().unwrap_or_default()])
            .collect();
        self.emit("conditioning_strata.csv", csv_bytes(&["stratum", "n_rows", "accuracy", "flagged", "undefined_reason"], rows)?);
        self.emit("conditioning_control.csv", samples_bytes("accuracy", &result.control_samples)?);
        self.report.sections.conditioning = Some(Section { seed: self.seed, result });
        Ok(Step::Done)
    }

    /// The stratum with the lower plain LOSO accuracy is the base of the curve.
    fn mixing_strata(&mut self, values: &[String]) -> Result<(String, String)> {
        let cov = self.cfg.covariate;
        if let Some(c) = &self.report.sections.conditioning {
            let acc = |v: &str| c.result.stratum(v).and_then(|s| s.accuracy).unwrap_or(f64::INFINITY);
            let (a, b) = (acc(&values[0]), acc(&values[1]));
            return Ok(if b < a { (values[1].clone(), values[0].clone()) } else { (values[0].clone(), values[1].clone()) });
        }
        let cv = self.cfg.cv();
        let table = self.table()?;
        let acc = |v: &str| {
            loso_cv(&table.filter(|l| cov.value(l) == v), &cv).map_or(f64::INFINITY, |r| r.mean_repetition_accuracy)
        };
        let (a, b) = (acc(&values[0]), acc(&values[1]));
        Ok(if b < a { (values[1].clone(), values[0].clone()) } else { (values[0].clone(), values[1].clone()) })
    }

    fn mixing(&mut self) -> Result<Step> {
        let values = match self.binary_covariate()? {
            Ok(v) => v,
            Err(reason) => return Ok(Step::NotApplicable(reason)),
        };
        let (base, added) = self.mixing_strata(&values)?;
        let cv = self.cfg.cv();
        let (cov, repeats, seed) = (self.cfg.covariate, self.cfg.mixing_repeats, self.seed);
        let curve = incremental_mixing_curve(self.table()?, cov, &base, &added, repeats, seed, &cv)?;
        let mut stratified = CurveSeries::new("stratified");
        let mut reference = CurveSeries::new("reference");
        for p in &curve.points {
            stratified.push(p.added_fraction, p.stratified.clone());
            reference.push(p.added_fraction, p.reference.clone());
        }
        self.emit("mixing_stratified.csv", series_bytes(&stratified)?);
        self.emit("mixing_reference.csv", series_bytes(&reference)?);
        self.report.sections.mixing_curve = Some(Section { seed, result: curve });
        Ok(Step::Done)
    }

    fn rotate(&mut self) -> Result<Step> {
        let features: Vec<String> = self.cfg.rotation.features.to_vec();
        let grid = self.cfg.rotation.grid_deg.clone();
        let (seed, cv) = (self.seed, self.cfg.cv());
        let table = self.table()?;
        if let Some(missing) = features.iter().find(|f| table.feature_index(f).is_err()) {
            return Ok(Step::NotApplicable(format!("feature {missing} not in the table")));
        }
        let in_b = match unhealthy_side_subgroups(table) {
            Ok(b) => b,
            Err(e) => return Ok(Step::NotApplicable(e.to_string())),
        };
        let plane = table.select(&features)?;
        let result = rotation_analysis(&plane, &in_b, [RIGHT_UNHEALTHY, LEFT_UNHEALTHY], &grid, seed, &cv)?;

        let curve = result.accuracy_vs_rotation.iter().map(|p| [p.theta_deg.to_string(), p.accuracy.to_string()]);
        let curve_bytes = csv_bytes(&["theta_deg", "accuracy"], curve)?;
        let points = standardized_plane(&plane.values);
        let scatter = points.iter().zip(&plane.labels).zip(&in_b).map(|((p, l), &b)| {
            [
                p[0].to_string(),
                p[1].to_string(),
                if b { LEFT_UNHEALTHY } else { RIGHT_UNHEALTHY }.to_string(),
                l.health.to_string(),
                l.device_id.clone(),
                l.subject_id.clone(),
            ]
        });
        let scatter_bytes = csv_bytes(&["x", "y", "subgroup", "health", "device_id", "subject_id"], scatter)?;
        let axes = [(RIGHT_UNHEALTHY, &result.pca_a), (LEFT_UNHEALTHY, &result.pca_b)].map(|(name, p)| {
            [name.to_string(), p.mean[0].to_string(), p.mean[1].to_string(), p.first[0].to_string(), p.first[1].to_string()]
        });
        let axes_bytes = csv_bytes(&["subgroup", "mean_x", "mean_y", "pc_x", "pc_y"], axes)?;
        self.emit("rotation_curve.csv", curve_bytes);
        self.emit("rotation_scatter.csv", scatter_bytes);
        self.emit("rotation_axes.csv", axes_bytes);
        self.report.sections.rotation = Some(Section { seed, result });
        Ok(Step::Done)
    }

    fn counterfactual(&mut self) -> Result<Step> {
        let cf = self.cfg.counterfactual.clone();
        let (seed, cv, alpha) = (self.seed, self.cfg.cv(), self.cfg.alpha);
        let table = self.table()?;
        let spec = match (&cf.relabel, cf.healthy_sessions) {
            (Some(path), _) => RelabelSpec::read_json(path)?,
            (None, Some(k)) => RelabelSpec::by_session_order(table, k),
            (None, None) => return Ok(Step::NotApplicable("no relabel spec (use --relabel)".into())),
        };
        let result = counterfactual_relabel(table, &spec, cf.permutations, seed, &cv)?;
        if result.p_value < alpha {
            let msg = format!(
                "counterfactual labels are learnable: accuracy {:.3} vs permutation null {:.3} (p = {:.3})",
                result.accuracy, result.null.mean, result.p_value
            );
            self.report.flag("counterfactual", msg);
        }
        self.emit("counterfactual_null.csv", samples_bytes("accuracy", &result.null_samples)?);
        self.report.sections.counterfactual = Some(Section { seed, result });
        Ok(Step::Done)
    }
}

fn section_name(kind: AuditKind) -> &'static str {
    match kind {
        AuditKind::BandScan => "band_scan",
        AuditKind::Tones => "tones",
        AuditKind::Covariate => "covariate",
        AuditKind::Condition => "conditioning",
        AuditKind::Mixing => "mixing_curve",
        AuditKind::Rotate => "rotation",
        AuditKind::Counterfactual => "counterfactual",
        AuditKind::Suite => "suite",
    }
}

/// Runs one audit (or the whole suite) and assembles the report.
pub fn cmd_audit(kind: AuditKind, inputs: &AuditInputs, cfg: &AuditConfig, seed: u64) -> Result<AuditOutcome> {
    cfg.validate()?;
    let mut provenance = Provenance {
        subjects: inputs.subjects,
        manifest: inputs.manifest.as_ref().map(|p| p.display().to_string()),
        table: inputs.table.as_ref().map(|p| p.display().to_string()),
        ..Provenance::default()
    };
    if inputs.manifest.is_some() && inputs.scenario.is_some() {
        return Err(Error::Usage("--manifest and --scenario are mutually exclusive".into()));
    }
    let world = match inputs.scenario {
        Some(sc) => {
            provenance.scenario = Some(sc.name().to_string());
            Some(resolve_world(sc, inputs.subjects, seed, inputs.world_file.as_deref())?)
        }
        None => None,
    };
    let manifest: Option<Manifest> = inputs.manifest.as_deref().map(load_manifest).transpose()?;
    let table = inputs.table.as_deref().map(FeatureTable::read_csv_file).transpose()?;

    let source: Option<Box<dyn SessionSource + '_>> = match (&world, &manifest) {
        (Some(w), _) => Some(Box::new(WorldSource::new(w)?)),
        (None, Some(m)) => Some(Box::new(ManifestSource::new(m))),
        (None, None) => None,
    };
    if source.is_none() && table.is_none() {
        return Err(Error::Usage("no input: pass --manifest, --scenario or --table".into()));
    }
    provenance.n_sessions = source.as_ref().map(|s| s.n_sessions());
    provenance.n_rows = table.as_ref().map(FeatureTable::n_rows);

    let mut runner = Runner {
        cfg,
        seed,
        source,
        table,
        report: AuditReport::new(cfg.clone(), seed, provenance),
        emissions: Vec::new(),
    };
    runner.run(kind)?;
    Ok(AuditOutcome { report: runner.report, emissions: runner.emissions })
}

/// Writes `report.json` and every emitted CSV into `out_dir`.
pub fn write_outputs(out_dir: &Path, outcome: &AuditOutcome) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for e in &outcome.emissions {
        let path = out_dir.join(&e.name);
        std::fs::write(&path, &e.bytes).map_err(|err| Error::io(&path, err))?;
    }
    let path = out_dir.join("report.json");
    std::fs::write(&path, outcome.report.to_json()? + "\n").map_err(|e| Error::io(&path, e))
}

