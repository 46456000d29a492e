use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdlss::cli::{cmd_bench, cmd_eval_real, cmd_simulate, load_config, Overrides};
use hdlss::Error;

#[derive(Parser)]
#[command(name = "hdlss", version, about = "Robust classification benchmarks for high-dimension low-sample-size data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// INI run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replications, overriding the config.
    #[arg(long = "R", value_name = "N")]
    replications: Option<usize>,
    /// Comma-separated method names, overriding the config.
    #[arg(long)]
    methods: Option<String>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, replications: self.replications, methods: self.methods.clone() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write one dataset CSV and manifest per grid cell.
    Simulate(Common),
    /// Benchmark the configured methods over the grid.
    Bench(Common),
    /// Re-split evaluation of a labelled CSV file.
    EvalReal {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Name of the label column.
        #[arg(long, default_value = "class")]
        label: String,
        /// Apply log transform and per-sample median centering first.
        #[arg(long)]
        log_median: bool,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load_config(c.config.as_deref(), &c.overrides())?;
            let files = cmd_simulate(&cfg, &c.out)?;
            println!("wrote {} files to {}", files.len(), c.out.display());
        }
        Command::Bench(c) => {
            let cfg = load_config(c.config.as_deref(), &c.overrides())?;
            let (rows, out) = cmd_bench(&cfg, &c.out)?;
            println!("{} report rows written to {}", rows.len(), out.report.display());
        }
        Command::EvalReal { common, data, label, log_median } => {
            let cfg = load_config(common.config.as_deref(), &common.overrides())?;
            let (rows, out) = cmd_eval_real(&data, &label, log_median, &cfg, &common.out)?;
            println!("{} report rows written to {}", rows.len(), out.report.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
