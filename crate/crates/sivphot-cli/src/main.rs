//! `sivphot` — batch front end for the SiV photophysics toolkit:
//! simulate photon streams, correlate them, fit the model chain, sweep the
//! dipole-above-metal calculations, and reproduce the reference tables.

mod cmd;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "sivphot", version, about = "Photophysics of single SiV color centers")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Directory for relative output paths (env: SIVPHOT_OUTPUT_DIR).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Override the seed of any stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report format for fit results.
    #[arg(long, global = true, value_parser = ["text", "structured"], default_value = "text")]
    format: String,
    /// Bound internal parallelism of sweeps and batteries.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Suppress wall-clock timestamps in output headers (for byte-exact
    /// reruns).
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// TOML config file; command-line flags win over file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl Global {
    fn structured(&self) -> bool {
        self.format == "structured"
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a photon timestamp stream of a pumped three-level emitter.
    Simulate(cmd::SimulateArgs),
    /// Cross-correlate the two channels of a stream into a g2 histogram.
    Correlate(cmd::CorrelateArgs),
    /// Bin a stream into a fluorescence time trace and classify stability.
    Trace(cmd::TraceArgs),
    /// Fit the two-exponential correlation shape to a histogram.
    FitG2(cmd::FitG2Args),
    /// Fit a saturation curve to count rates over power.
    FitSat(cmd::FitSatArgs),
    /// Staged power-dependence fit: rates, pump slope and de-shelving
    /// saturation from (a, tau1, tau2) series or from timestamp streams.
    FitPower(cmd::FitPowerArgs),
    /// Quantum efficiency from a saturated photon rate and rate coefficients.
    Qe(cmd::QeArgs),
    /// Dipole-above-metal sweeps: decay rates, yield, collection, patterns.
    Dipole(cmd::DipoleArgs),
    /// Re-run the built-in reproduction batteries and print a scoreboard.
    ReproduceTables(cmd::ReproduceArgs),
}

/// Exit codes: 2 input, 3 convergence/numerical, 4 i/o.
fn classify(err: &anyhow::Error) -> u8 {
    use sivphot::dipole::DipoleError;
    use sivphot::inference::FitError;
    use sivphot::stream::StreamError;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<FitError>() {
            return match e {
                FitError::NoConvergence { .. } | FitError::StageDivergence { .. } => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<DipoleError>() {
            return match e {
                DipoleError::QuadratureFailure { .. } => 3,
                DipoleError::InvalidEnvironment(_) => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<StreamError>() {
            return match e {
                StreamError::Io(_) => 4,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    2
}


fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.global.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    let result = match cli.command {
        Command::Simulate(args) => cmd::simulate(&cli.global, args),
        Command::Correlate(args) => cmd::correlate(&cli.global, args),
        Command::Trace(args) => cmd::trace(&cli.global, args),
        Command::FitG2(args) => cmd::fit_g2(&cli.global, args),
        Command::FitSat(args) => cmd::fit_sat(&cli.global, args),
        Command::FitPower(args) => cmd::fit_power(&cli.global, args),
        Command::Qe(args) => cmd::qe(&cli.global, args),
        Command::Dipole(args) => cmd::dipole(&cli.global, args),
        Command::ReproduceTables(args) => cmd::reproduce_tables(&cli.global, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
