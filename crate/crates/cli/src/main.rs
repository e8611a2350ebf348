use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use memsim_cli::commands::{self, CommonOpts};

#[derive(Parser)]
#[command(name = "memsim", about = "Cycle-level multiport GPU memory hierarchy simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; defaults apply for anything omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed override (beats MEMSIM_SEED and the config file)
    #[arg(long)]
    seed: Option<u64>,
    /// Abort a run after this many cycles
    #[arg(long)]
    cycle_cap: Option<u64>,
    /// Directory for CSV/markdown/SVG outputs
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for sweep cells
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Skip SVG chart emission
    #[arg(long)]
    no_svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single workload and print a summary
    Run {
        #[command(flatten)]
        common: Common,
        /// Workload name (builtin or the config file's custom workload)
        #[arg(long, default_value = "vecadd")]
        workload: String,
        /// Write a per-request trace CSV to this path
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sweep HBM channel count over {1, 2, 4, 8} for the builtin suite
    SweepPorts {
        #[command(flatten)]
        common: Common,
    },
    /// Compare arbitration policies at 4 channels with the L3 enabled
    SweepArb {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn into_opts(self) -> CommonOpts {
        CommonOpts {
            config: self.config,
            seed: self.seed,
            cycle_cap: self.cycle_cap,
            out_dir: self.out_dir,
            jobs: self.jobs.max(1),
            no_svg: self.no_svg,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            common,
            workload,
            trace,
        } => commands::cmd_run(&common.into_opts(), &workload, trace.as_deref()),
        Command::SweepPorts { common } => commands::cmd_sweep_ports(&common.into_opts()),
        Command::SweepArb { common } => commands::cmd_sweep_arb(&common.into_opts()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
