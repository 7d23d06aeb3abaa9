use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skychan::sim::{self, AnalyzeOptions, SimError, SimulateOptions};

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "skychan", version, about = "Satellite-to-ground channel simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize channel dumps for every satellite of a scenario.
    Simulate {
        #[arg(short = 'c', long = "config")]
        config: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the channel update rate (Hz).
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Compute report files for the dumps of a simulate run.
    Analyze {
        dir: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        nfft: Option<usize>,
        /// Doppler window (s).
        #[arg(long)]
        window: Option<f64>,
    },
    /// Print a summary of a simulate run.
    Report { manifest: PathBuf },
}

fn fail(e: &SimError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        SimError::Config(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = sim::threads_from_env();
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            rate,
        } => {
            let options = SimulateOptions {
                seed,
                rate_hz: rate,
                threads,
            };
            match sim::simulate_file(&config, &out, &options) {
                Ok(m) => {
                    println!(
                        "{} dumps, {} dropped, {:.2} s -> {}",
                        m.outputs.len(),
                        m.dropped.len(),
                        m.wall_clock_s,
                        out.join(sim::MANIFEST_FILE).display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Analyze {
            dir,
            out,
            bandwidth,
            nfft,
            window,
        } => {
            let options = AnalyzeOptions {
                bandwidth_hz: bandwidth,
                nfft,
                window_s: window,
                power_threshold_db: None,
                threads,
            };
            match sim::analyze(&dir, &out, &options) {
                Ok(outcome) => {
                    println!(
                        "{} analysed, {} failed",
                        outcome.summaries.len(),
                        outcome.failures.len()
                    );
                    for (path, reason) in &outcome.failures {
                        eprintln!("failed: {}: {reason}", path.display());
                    }
                    if outcome.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_PARTIAL)
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::Report { manifest } => match sim::report(&manifest) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
