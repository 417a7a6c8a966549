//! Command-line front end: `synth`, `features` and `audit`.
//!
//! Exit codes: 0 when everything ran and no bias flag was raised, 2 when it
//! ran and raised flags, 1 on any error.

mod commands;
mod config;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_audit, cmd_features, cmd_synth, resolve_world, write_outputs, AuditInputs, AuditKind, AuditOutcome, Emission,
};
pub use config::{
    config_digest, AuditConfig, BandScanConfig, CounterfactualConfig, RotationConfig, ToneAuditConfig,
};
pub use report::{
    report_without_timing, AuditReport, BiasFlag, CovariateReport, Provenance, Section, Sections, SessionTones,
    ToneCluster, SCHEMA_VERSION,
};

use crate::audit::Covariate;
use crate::dataset::FeatureConfig;
use crate::error::{Error, Result};
use crate::sigsynth::Scenario;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FLAGGED: i32 = 2;

/// Caps the worker threads of the global pool.
pub const THREADS_ENV: &str = "VIBROAUDIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "vibroaudit", version, about = "Synthesize knee recordings, extract features and audit classifiers for shortcut learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scenario to WAVs, manifest.json and ground_truth.json.
    Synth(SynthArgs),
    /// Extract the per-repetition feature table of a manifest.
    Features(FeaturesArgs),
    /// Run one audit or the whole suite and write report.json plus CSV series.
    Audit(AuditArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub scenario: Scenario,
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// World JSON replacing the scenario preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature configuration JSON.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Audit configuration JSON; its `features` section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(value_enum)]
    pub kind: AuditKind,
    #[arg(long, conflicts_with = "scenario")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<Scenario>,
    #[arg(long, requires = "scenario")]
    pub subjects: Option<usize>,
    /// Feature table CSV, used instead of extracting features.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Monte-Carlo repeats for conditioning controls and mixing curves.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Comma-separated band edges in Hz.
    #[arg(long, value_delimiter = ',')]
    pub bands: Option<Vec<f64>>,
    #[arg(long)]
    pub band_width_hz: Option<f64>,
    /// Feature configuration JSON.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub covariate: Option<Covariate>,
    /// Control quantile below which a stratum is flagged.
    #[arg(long)]
    pub quantile: Option<f64>,
    /// Counterfactual relabel JSON (session id to subject and health).
    #[arg(long)]
    pub relabel: Option<PathBuf>,
}

fn read_features(path: &std::path::Path) -> Result<FeatureConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Usage(format!("invalid feature config {}: {e}", path.display())))
}

/// Audit configuration after applying file and flag overrides.
pub fn resolve_audit_config(args: &AuditArgs) -> Result<AuditConfig> {
    let mut cfg = match &args.config {
        Some(p) => AuditConfig::read_json(p)?,
        None => AuditConfig::default(),
    };
    if let Some(p) = &args.features {
        cfg.features = read_features(p)?;
    }
    if let Some(r) = args.repeats {
        cfg.conditioning.control_repeats = r;
        cfg.mixing_repeats = r;
    }
    if let Some(edges) = &args.bands {
        cfg.band_scan.edges_hz = edges.clone();
    }
    if let Some(w) = args.band_width_hz {
        cfg.band_scan.width_hz = Some(w);
    }
    if let Some(c) = args.covariate {
        cfg.covariate = c;
    }
    if let Some(q) = args.quantile {
        cfg.conditioning.quantile = q;
    }
    if let Some(p) = &args.relabel {
        cfg.counterfactual.relabel = Some(p.clone());
    }
    cfg.conditioning.seed = args.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| Error::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(Error::Usage(format!("{THREADS_ENV} must be at least 1")));
        }
        // A pool already built by an embedding program stays as it is.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Executes a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    configure_threads()?;
    match cli.command {
        Command::Synth(a) => {
            let world = resolve_world(a.scenario, a.subjects, a.seed, a.config.as_deref())?;
            let summary = cmd_synth(&world, &a.out)?;
            println!("wrote {} sessions to {}", summary.n_sessions, summary.manifest_path.display());
            Ok(EXIT_CLEAN)
        }
        Command::Features(a) => {
            let mut cfg = match &a.config {
                Some(p) => AuditConfig::read_json(p)?.features,
                None => FeatureConfig::default(),
            };
            if let Some(p) = &a.features {
                cfg = read_features(p)?;
            }
            let table = cmd_features(&a.manifest, &cfg, &a.out)?;
            println!("wrote {} rows x {} features to {}", table.n_rows(), table.n_features(), a.out.display());
            Ok(EXIT_CLEAN)
        }
        Command::Audit(a) => {
            let cfg = resolve_audit_config(&a)?;
            let inputs = AuditInputs {
                manifest: a.manifest.clone(),
                scenario: a.scenario,
                subjects: a.subjects,
                world_file: None,
                table: a.table.clone(),
            };
            let outcome = cmd_audit(a.kind, &inputs, &cfg, a.seed)?;
            write_outputs(&a.out, &outcome)?;
            for f in &outcome.report.flags {
                println!("FLAG [{}] {}", f.section, f.message);
            }
            println!("report: {}", a.out.join("report.json").display());
            Ok(if outcome.report.has_flags() { EXIT_FLAGGED } else { EXIT_CLEAN })
        }
    }
}

/// Parses arguments (including the program name) and runs; errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_CLEAN };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
