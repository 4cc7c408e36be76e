use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{ArgAction, Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::ConfigError;

#[derive(Parser, Debug)]
#[command(name = "thermoreg", version, about = "Topology optimization of contact-aided thermal regulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Problem file (TOML); omitted keys take the defaults of `objective.kind`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Set a configuration key, e.g. `mesh.nx=40` (repeatable, applied in order).
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Worker threads for the parallel load cases.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the random gradient-check probes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ersatz conductivity contrast; also replaces the rod-study list.
    #[arg(long, global = true)]
    delta_kappa: Option<f64>,
    /// More log output (repeatable).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rod contact benchmark against the 1D analytical solution.
    RodStudy,
    /// Run the design optimization.
    Optimize {
        /// Start from a saved design instead of the initial layout.
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Response curves of a design.
    Evaluate {
        /// Saved design; the initial layout when omitted.
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Compare adjoint sensitivities with finite differences.
    GradCheck,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RodStudy => "rod-study",
            Command::Optimize { .. } => "optimize",
            Command::Evaluate { .. } => "evaluate",
            Command::GradCheck => "grad-check",
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if cause.is::<std::io::Error>() {
            return 4;
        }
        if cause.is::<commands::SolverFailure>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<thermoreg::Error>() {
            return match e {
                thermoreg::Error::InvalidInput(_) | thermoreg::Error::UnknownTag(_) => 2,
                thermoreg::Error::Io(_) => 4,
                _ => 3,
            };
        }
    }
    1
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let text = match &cli.config {
        Some(p) => Some(
            std::fs::read_to_string(p).map_err(|e| ConfigError(format!("reading {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let cfg = config::resolve(text.as_deref(), &cli.overrides, cli.delta_kappa, cli.seed)?;
    let out = output::OutputDir::create(&cli.out, cli.command.name(), &cfg)?;
    commands::write_config(&cfg, &out)?;
    match &cli.command {
        Command::RodStudy => commands::rod_study(&cfg, &out),
        Command::Optimize { design } => commands::optimize(&cfg, &out, design.as_deref()),
        Command::Evaluate { design } => commands::evaluate(&cfg, &out, design.as_deref()),
        Command::GradCheck => commands::grad_check(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
