//! Batch front end: config parsing, CSV ingestion, the six verbs and run
//! manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod output;

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use config::{Overrides, RunConfig, Verb};
pub use error::{CliError, CliResult, ErrorKind};
pub use ingest::ingest_csv;
pub use manifest::Manifest;

/// Version stamped into every JSON output, manifest and schema id.
pub const SCHEMA_VERSION: u32 = 1;

/// One command-line invocation after argument parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub verb: Verb,
    pub config: Option<PathBuf>,
    /// Re-run the configuration recorded in this manifest.
    pub manifest: Option<PathBuf>,
    /// With `manifest`: fail unless the outputs match the recorded hashes.
    pub verify: bool,
    pub overrides: Overrides,
}

/// Runs one verb end to end and returns the output directory and the
/// manifest written there.
pub fn run(inv: &Invocation) -> CliResult<(PathBuf, Manifest)> {
    let verb = inv.verb;
    let (resolved, out_dir, expected) = match &inv.manifest {
        Some(path) => {
            if inv.config.is_some() {
                return Err(CliError::usage("--manifest and --config are mutually exclusive"));
            }
            let mut rest = inv.overrides.clone();
            let output = rest.output.take();
            if !rest.is_empty() {
                return Err(CliError::usage("only --output may accompany --manifest"));
            }
            let m = Manifest::load(path)?;
            if m.verb != verb {
                return Err(CliError::config(format!(
                    "manifest records verb '{}', not '{}'",
                    m.verb.name(),
                    verb.name()
                )));
            }
            let resolved = m.config.resolve(verb)?;
            if resolved != m.config {
                return Err(CliError::config("manifest config is not in resolved form"));
            }
            let out = RunConfig {
                output,
                ..RunConfig::default()
            }
            .output_dir(verb);
            (resolved, out, Some(m))
        }
        None => {
            if inv.verify {
                return Err(CliError::usage("--verify needs --manifest"));
            }
            let mut cfg = match &inv.config {
                Some(p) => RunConfig::from_file(p)?,
                None => RunConfig::default(),
            };
            cfg.apply(&inv.overrides);
            (cfg.resolve(verb)?, cfg.output_dir(verb), None)
        }
    };

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let t0 = Instant::now();
    let out = commands::execute(verb, &resolved)?;
    let mut stage = output::Stage::new(&out_dir)?;
    for f in out.files {
        stage.add(f)?;
    }
    if let (Some(m), true) = (&expected, inv.verify) {
        stage.verify(&m.outputs)?;
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: "cgalqr".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        verb,
        config_hash: manifest::config_hash(&resolved)?,
        seed: resolved.seed,
        config: resolved,
        inputs: out.inputs,
        outputs: stage.records().to_vec(),
        started_unix_seconds: started,
        wall_time_seconds: t0.elapsed().as_secs_f64(),
        platform: format!("{}-{}", std::env::consts::OS, std::env::consts::ARCH),
    };
    stage.commit(&manifest)?;
    Ok((out_dir, manifest))
}
