use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use multifaas::analysis::Weights;
use multifaas_cli::{cmd_analyze, cmd_fixtures, cmd_ingest, cmd_run, cmd_simulate, AnalyzeOptions, CliError};

/// Benchmark serverless functions across providers, simulate bursts, and
/// compare providers on latency and cost.
///
/// Exit codes: 0 ok, 1 internal error, 2 config or usage error,
/// 3 provider unreachable, 4 unjoinable logs.
#[derive(Parser)]
#[command(name = "multifaas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drive a configured workload and record a run directory.
    Run {
        workload: String,
        /// Overrides the workload's provider.
        #[arg(long)]
        provider: Option<String>,
        /// Operator config; the credentials path may be overridden with MULTIFAAS_CREDENTIALS.
        #[arg(long, default_value = "config/multifaas.toml")]
        config: PathBuf,
    },
    /// Join, summarise and cost one or more run directories; rank when given two or more.
    Analyze {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        /// Pricing catalog [default: the bundled catalog].
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Scale costs to this many requests [default: the observed count].
        #[arg(long)]
        extrapolate_to: Option<u64>,
        /// Ranking weights for p99 serving latency and cost, as P,C.
        #[arg(long, default_value = "0.5,0.5")]
        weights: Weights,
        /// Where report.json, table.txt and CDF files go.
        #[arg(long, default_value = "report")]
        out_dir: PathBuf,
    },
    /// Run a scenario file on the virtual clock and export its logs.
    Simulate {
        scenario: PathBuf,
        /// Overrides the scenario's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Parent directory of the new run directory.
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Normalise a provider log export into the common JSONL schema.
    Ingest {
        source: PathBuf,
        #[arg(long)]
        provider: String,
        /// Field-mapping file for provider-native exports [default: input is already normalised].
        #[arg(long)]
        translator: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the bundled reference profiles as run directories.
    Fixtures {
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Run { workload, provider, config } => {
            Ok(cmd_run(&config, &workload, provider.as_deref())?.console)
        }
        Command::Analyze { run_dirs, catalog, extrapolate_to, weights, out_dir } => {
            let opts = AnalyzeOptions { catalog, extrapolate_to, weights, out_dir: Some(out_dir) };
            Ok(cmd_analyze(&run_dirs, &opts)?.console)
        }
        Command::Simulate { scenario, seed, out_dir } => Ok(cmd_simulate(&scenario, &out_dir, seed)?.console),
        Command::Ingest { source, provider, translator, out } => {
            cmd_ingest(&source, &provider, translator.as_deref(), &out)
        }
        Command::Fixtures { out_dir } => cmd_fixtures(&out_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
