use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ktops::config::{ExperimentConfig, ExperimentKind};
use ktops::error::CliError;
use ktops::output::RunManifest;

/// Coupled kicked tops: exact evolution, entanglement production and rate fits.
#[derive(Parser)]
#[command(name = "ktops", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any experiment kind.
    Run(Target),
    /// Run a parameter sweep (sweep-eps, sweep-k, weak-chaos-scan).
    Sweep(Target),
    /// Produce a fit report (pheno-fit, weak-chaos-scan).
    Fit(Target),
    /// Check a config and print it with defaults filled in.
    Validate(Target),
}

#[derive(Args)]
struct Target {
    /// TOML config, or a `manifest.json` from an earlier run.
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flags take precedence over the file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    j: Option<f64>,
    /// Comma-separated kick strengths.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<f64>>,
    #[arg(long)]
    k2: Option<f64>,
    /// Comma-separated couplings.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Defaults to the config value, then $KTOPS_OUTPUT_DIR, then ./ktops-out.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Overrides {
    fn apply(self, c: &mut ExperimentConfig) {
        if let Some(v) = self.j {
            c.j = v;
        }
        if let Some(v) = self.k {
            c.tops.k = v;
        }
        if let Some(v) = self.k2 {
            c.tops.k2 = Some(v);
        }
        if let Some(v) = self.eps {
            c.tops.eps = v;
        }
        if let Some(v) = self.steps {
            c.steps = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.workers {
            c.run.workers = v;
        }
        if let Some(v) = self.output_dir {
            c.run.output_dir = Some(v);
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(RunManifest::read(path)?.config);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        field: "config".into(),
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    ExperimentConfig::from_toml(&text)
}

fn require(kind: ExperimentKind, allowed: &[ExperimentKind], command: &str) -> Result<(), CliError> {
    if allowed.contains(&kind) {
        return Ok(());
    }
    let names: Vec<&str> = allowed.iter().map(|k| k.name()).collect();
    Err(CliError::Config {
        field: "kind".into(),
        reason: format!("`{command}` needs one of {}, got {}", names.join(", "), kind.name()),
    })
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    let (name, target) = match cli.command {
        Command::Run(t) => ("run", t),
        Command::Sweep(t) => ("sweep", t),
        Command::Fit(t) => ("fit", t),
        Command::Validate(t) => ("validate", t),
    };
    let mut config = load(&target.config)?;
    target.overrides.apply(&mut config);
    use ExperimentKind::*;
    match name {
        "sweep" => require(config.kind, &[SweepEps, SweepK, WeakChaosScan], name)?,
        "fit" => require(config.kind, &[PhenoFit, WeakChaosScan], name)?,
        "validate" => {
            config.validate()?;
            print!("{}", config.to_toml());
            return Ok(());
        }
        _ => {}
    }
    let manifest = ktops::run_experiment(&config, name)?;
    let dir = manifest.config.run.output_dir.as_deref().unwrap_or(Path::new("."));
    eprintln!(
        "{} {}: {} files in {} ({:.1}s)",
        name,
        config.kind.name(),
        manifest.outputs.len(),
        dir.display(),
        manifest.wall_clock_seconds
    );
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ktops: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
