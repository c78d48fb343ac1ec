use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use idtsim::experiments::{self, ExperimentError, ExperimentName, ExperimentSpec, Overrides};

/// Run one IDT side-channel experiment and write its results to a directory.
#[derive(Debug, Parser)]
#[command(name = "idtsim", version)]
struct Args {
    /// distinguish, curve, compare, template, fingerprint, keystrokes or mitigate
    experiment: String,
    /// TOML configuration; built-in defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of website profiles (fingerprint)
    #[arg(long)]
    profiles: Option<usize>,
    /// Probability that a transient read of a cached line still returns 0
    #[arg(long)]
    noise_p: Option<f64>,
    /// Mark the IDT uncachable on every simulated core
    #[arg(long)]
    mitigate: bool,
}

fn run(args: Args) -> Result<(), ExperimentError> {
    let name: ExperimentName = args.experiment.parse()?;
    let config = experiments::load_config(args.config.as_deref())?;
    let overrides = Overrides { profiles: args.profiles, noise_p: args.noise_p, mitigate: args.mitigate };
    let spec = ExperimentSpec::new(name, config, args.seed).with_overrides(&overrides)?;
    let out = experiments::run(&spec)?;
    experiments::write_outputs(&spec, &out, &args.out)?;
    println!("{name}: wrote {} files to {}", out.files.len() + 2, args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ ExperimentError::Usage(_)) => {
            eprintln!("idtsim: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("idtsim: {e}");
            ExitCode::FAILURE
        }
    }
}
