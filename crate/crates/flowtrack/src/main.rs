use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowtrack::commands::{self, Overrides};
use flowtrack::{Error, Mode};

/// Multi-object tracking with particle-flow belief propagation.
#[derive(Debug, Parser)]
#[command(name = "flowtrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate ground truth and measurements.
    Simulate(Common),
    /// Run the tracker over a measurement file.
    Track {
        measurements: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Per-step OSPA of estimates against ground truth.
    Evaluate {
        estimates: PathBuf,
        truth: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo sweep: simulate, track and evaluate repeatedly.
    Mc(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Proposal mode; may be repeated for `mc`.
    #[arg(long, value_enum)]
    mode: Vec<Mode>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            modes: self.mode.clone(),
            particles: self.particles,
            runs: self.runs,
            jobs: self.jobs,
        }
    }

    fn single_mode(&self) -> Result<(), Error> {
        if self.mode.len() > 1 {
            return Err(Error::config("--mode may be given once for this command"));
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(c) => {
            c.single_mode()?;
            let cfg = commands::resolve_config(c.config.as_deref(), &c.overrides())?;
            commands::cmd_simulate(&cfg, &c.out)
        }
        Command::Track {
            measurements,
            common: c,
        } => {
            c.single_mode()?;
            let cfg = commands::resolve_config(c.config.as_deref(), &c.overrides())?;
            commands::cmd_track(&cfg, &measurements, &c.out).map(|_| ())
        }
        Command::Evaluate {
            estimates,
            truth,
            common: c,
        } => {
            c.single_mode()?;
            let cfg = commands::resolve_config(c.config.as_deref(), &c.overrides())?;
            commands::cmd_evaluate(&cfg, &estimates, &truth, &c.out).map(|_| ())
        }
        Command::Mc(c) => {
            let cfg = commands::resolve_config(c.config.as_deref(), &c.overrides())?;
            commands::cmd_mc(&cfg, &c.mode, &c.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
