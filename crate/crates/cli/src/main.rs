use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qmgp_cli::commands;
use qmgp_cli::config::key_table;
use qmgp_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "qmgp",
    version,
    about = "Fit meshed Gaussian processes on cubic tessellations and fill gaps in space-time data.",
    after_help = "Every configuration key is also a flag, e.g. `--mcmc.iter 2000`. Run `qmgp keys` for the list."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cap on worker threads (same as --mcmc.threads).
    #[arg(long)]
    threads: Option<usize>,
    /// Write the mesh DAG and its coloring (same as --output.dump_dag true).
    #[arg(long)]
    dump_dag: bool,
    /// Configuration overrides: --section.key value
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0.., value_name = "--KEY VALUE")]
    settings: Vec<String>,
}

#[derive(Args)]
struct ModelArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a space-time grid with cloud gaps; writes data.csv, truth.csv and fit.cfg.
    Generate(Common),
    /// Parse and validate a data table.
    Ingest(Common),
    /// Run the Gibbs sampler and write trace, summaries and retained draws.
    Fit(Common),
    /// Posterior predictive summaries at missing entries or new locations.
    Predict(ModelArgs),
    /// Parameter summaries, ESS, timing and prediction metrics.
    Report(ModelArgs),
    /// Scaling and caching timing suites.
    Bench(Common),
    /// List configuration keys with their defaults.
    Keys,
}

/// Key overrides in the order given. The named flags may also appear after
/// the first `--section.key`, where clap leaves them in `settings`.
fn overrides(c: &Common) -> Result<(Option<PathBuf>, Vec<String>), CliError> {
    let mut config = c.config.clone();
    let mut v = Vec::new();
    if let Some(t) = c.threads {
        v.extend(["--mcmc.threads".into(), t.to_string()]);
    }
    if c.dump_dag {
        v.extend(["--output.dump_dag".into(), "true".into()]);
    }
    let mut it = c.settings.iter();
    while let Some(a) = it.next() {
        let mut value = |name: &str| {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("{name} needs a value")))
        };
        match a.as_str() {
            "--dump-dag" => v.extend(["--output.dump_dag".into(), "true".into()]),
            "--threads" => v.extend(["--mcmc.threads".into(), value("--threads")?]),
            "--config" => config = Some(PathBuf::from(value("--config")?)),
            _ => v.push(a.clone()),
        }
    }
    Ok((config, v))
}

fn resolve(c: &Common) -> Result<RunConfig, CliError> {
    let (config, flags) = overrides(c)?;
    let mut cfg = match config {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    cfg.apply_flags(&flags)?;
    Ok(cfg)
}

fn model_overrides(m: &ModelArgs) -> Result<Vec<String>, CliError> {
    match overrides(&m.common)? {
        (Some(_), _) => Err(CliError::Usage(
            "predict and report read their configuration from --model".into(),
        )),
        (None, v) => Ok(v),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Generate(c) => commands::generate(&resolve(&c)?),
        Cmd::Ingest(c) => commands::ingest_cmd(&resolve(&c)?),
        Cmd::Fit(c) => commands::fit(&resolve(&c)?),
        Cmd::Bench(c) => commands::bench(&resolve(&c)?),
        Cmd::Predict(m) => commands::predict(&m.model, &model_overrides(&m)?),
        Cmd::Report(m) => commands::report(&m.model, &model_overrides(&m)?),
        Cmd::Keys => {
            print!("{}", key_table());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
