//! Configuration-driven runner for the coupled kicked-top experiments.
//!
//! A run reads one TOML [`config::ExperimentConfig`], writes CSVs into the
//! output directory and finishes with `manifest.json`
//! ([`output::RunManifest`]), which lists every file with its SHA-256 and
//! echoes the full config so the run can be repeated from the manifest alone.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::PathBuf;
use std::time::Instant;

use config::{ExperimentConfig, FALLBACK_OUTPUT_DIR, OUTPUT_DIR_ENV};
use error::CliError;
use output::{Outputs, RunManifest, RunStatus, MANIFEST_NAME};

/// Output directory: the config value, else `$KTOPS_OUTPUT_DIR`, else `ktops-out`.
pub fn resolve_output_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .run
        .output_dir
        .clone()
        .or_else(|| {
            std::env::var_os(OUTPUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
}

/// Validates, runs and writes the manifest. On a numerical failure the
/// manifest is still written, marked partial, before the error is returned.
pub fn run_experiment(config: &ExperimentConfig, command: &str) -> Result<RunManifest, CliError> {
    config.validate()?;
    let mut config = config.clone();
    let dir = resolve_output_dir(&config);
    config.run.output_dir = Some(dir.clone());

    let started = Instant::now();
    let mut outputs = Outputs::create(&dir)?;
    let result = run::execute(&config, &mut outputs);
    let (status, error, summary) = match &result {
        Ok(summary) => (RunStatus::Complete, None, summary.clone()),
        Err(e) => (RunStatus::Partial, Some(e.to_string()), serde_json::Value::Null),
    };
    let manifest = RunManifest {
        tool: "ktops".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: config.seed,
        config,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        status,
        error,
        outputs: outputs.into_files(),
        summary,
    };
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(path.display(), e))?;
    result.map(|_| manifest)
}
