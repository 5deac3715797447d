use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pushback_sim::metrics::write_csv;
use pushback_sim::scenario::{load_scenario, Overrides};
use pushback_sim::sim::run_scenario;

#[derive(Parser)]
#[command(
    name = "pushback-sim",
    version,
    about = "Packet-level simulator of SYN/UDP floods against a pushback and client-puzzle defense"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit its sample CSV and a summary line.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// PRNG seed, replacing the file's.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds to run.
    #[arg(long)]
    duration: Option<f64>,
    /// CSV destination. Without it the CSV goes to stdout and the summary to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Enable or disable the defense.
    #[arg(long, value_enum)]
    defense: Option<Toggle>,
    /// Sampling interval in milliseconds.
    #[arg(long = "sample-interval")]
    sample_interval: Option<u64>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long = "print-config")]
    print_config: bool,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let Command::Run(args) = cli.command;
    run(args)
}

fn run(args: RunArgs) -> ExitCode {
    let mut cfg = match load_scenario(&args.scenario) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let overrides = Overrides {
        seed: args.seed,
        duration_s: args.duration,
        defense: args.defense.map(|t| matches!(t, Toggle::On)),
        sample_interval_ms: args.sample_interval,
    };
    if let Err(e) = cfg.apply(&overrides) {
        eprintln!("{e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    if args.print_config {
        print!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }

    let report = match panic::catch_unwind(AssertUnwindSafe(|| run_scenario(&cfg))) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => {
            eprintln!("error[runtime]: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
        Err(_) => {
            eprintln!("error[runtime]: simulation aborted");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };

    let written = match &args.out {
        Some(path) => File::create(path).and_then(|f| write_csv(&report.rows, BufWriter::new(f))),
        None => write_csv(&report.rows, io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error[io]: cannot write CSV: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    let summary = report.summary_line();
    let shown = if args.out.is_some() {
        writeln!(io::stdout(), "{summary}")
    } else {
        writeln!(io::stderr(), "{summary}")
    };
    if shown.is_err() {
        return ExitCode::from(EXIT_RUNTIME);
    }
    ExitCode::SUCCESS
}
