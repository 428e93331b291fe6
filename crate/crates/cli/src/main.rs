use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcflow_cli::{compare, plot, resolve_output_dir, run_to_dir, CliError, RunConfig, OUTPUT_ROOT_ENV};

#[derive(Parser)]
#[command(name = "mcflow", version, about = "Phase-field and level-set mean curvature flow runs")]
struct Cli {
    /// Output directory (per run for `run`, table root for `compare`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Root for relative output directories.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV, hide_env_values = true)]
    output_root: Option<PathBuf>,

    /// Replace the seed of random initial conditions.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    /// Only log errors.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configuration and write its artifacts.
    Run { config: PathBuf },
    /// Execute several configurations and tabulate their outcomes.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
    },
    /// Render the curve in a CSV artifact to a PGM raster.
    Plot { csv: PathBuf, out: PathBuf },
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_path(path)?;
    if let Some(seed) = seed {
        cfg.override_seed(seed)?;
    }
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    let root = cli.output_root.as_deref();
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config, cli.seed_override)?;
            let dir = resolve_output_dir(&cfg, cli.output_dir.as_deref(), root);
            let outcome = run_to_dir(&cfg, &dir)?;
            if !cli.quiet {
                println!("{}: {} ({})", cfg.display_name(), outcome.classification().as_str(), dir.display());
            }
        }
        Command::Compare { configs } => {
            let cfgs = configs.iter().map(|p| load(p, cli.seed_override)).collect::<Result<Vec<_>, _>>()?;
            let out = match (&cli.output_dir, root) {
                (Some(dir), _) => dir.clone(),
                (None, Some(root)) => root.to_path_buf(),
                (None, None) => PathBuf::from("compare_out"),
            };
            let report = compare::compare(&cfgs, &out)?;
            if !cli.quiet {
                for r in &report.rows {
                    println!("{}\t{}\t{}\t{}", r.name, r.method, r.classification, r.status);
                }
            }
            let failed = report.outcomes.iter().filter(|o| o.is_err()).count();
            if failed > 0 {
                return Err(CliError::RunsFailed(failed));
            }
        }
        Command::Plot { csv, out } => plot::plot(csv, out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{err}");
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
