use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mildhjb::gaussian::Cubature;
use mildhjb_cli::pipeline::{diagnose_to_dir, run_to_dir};
use mildhjb_cli::{CliError, ScenarioConfig, Tag};

#[derive(Parser)]
#[command(
    name = "mildhjb",
    version,
    about = "Mild solutions of non-autonomous HJB equations in a spectral truncation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the HJB scenario and write solution.csv, report.txt and ou_diagnostics.csv.
    Run(Common),
    /// Run the evolution, Gramian, embedding, exponent and series probes.
    Diagnose(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` (and the Monte Carlo cubature seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Only errors on stderr, no summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn load(args: &Common) -> Result<(ScenarioConfig, PathBuf), CliError> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        if let Some(Cubature::MonteCarlo { seed: s, .. }) = &mut cfg.cubature {
            *s = seed;
        }
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    let out = cfg.output.dir.clone();
    Ok((cfg, out))
}

fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let (cfg, out) = load(args)?;
            let outcome = run_to_dir(&cfg, &out)?;
            if !args.quiet {
                let r = &outcome.report;
                println!(
                    "converged={} iterations={} alpha={} beta={} max_ratio={} out={}",
                    r.converged,
                    r.iterations,
                    r.alpha,
                    r.beta,
                    r.contraction_ratios.iter().copied().fold(0.0, f64::max),
                    out.display()
                );
            }
            outcome.failure().map_or(Ok(()), Err)
        }
        Command::Diagnose(args) => {
            let (cfg, out) = load(args)?;
            let outcome = diagnose_to_dir(&cfg, &out)?;
            if !args.quiet {
                for p in &outcome.probes {
                    println!(
                        "{:<28} {:>14e}  {:<14} {}",
                        p.name,
                        p.value,
                        p.bound,
                        p.status.as_str()
                    );
                }
            }
            if outcome.all_pass() {
                Ok(())
            } else {
                Err(CliError::new(
                    Tag::ProbeFailed,
                    "at least one diagnostic probe failed",
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = match &cli.command {
        Command::Run(a) | Command::Diagnose(a) => a.quiet,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet {
        "error"
    } else {
        "warn"
    }))
    .format_timestamp(None)
    .init();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
