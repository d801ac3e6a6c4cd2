use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cope_cli::config::CostName;
use cope_cli::{cmd_figures, cmd_run, cmd_verify, resolve_threads, verify_costs};
use cope_core::agent::OracleConfig;
use cope_core::verify::{Suite, VerifyOptions};

#[derive(Parser)]
#[command(name = "cope", version, about = "Simulate and verify cost-and-prediction elicitation mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Worker threads (default: $COPE_THREADS, else all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a property suite and print a pass/fail table.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        /// Cost family for the agent-side suites; repeat for several.
        #[arg(long = "cost", value_enum)]
        costs: Vec<CostArg>,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Monte-Carlo samples per best-response candidate.
        #[arg(long, default_value_t = 10_000)]
        oracle_samples: usize,
        /// Monte-Carlo samples for BIR payoff and rent estimates.
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
    },
    /// Turn a results CSV into per-figure data files.
    Figures {
        results: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Bic,
    Bir,
    Monotonicity,
    Cubic,
    ClosedForms,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Linear,
    Quadratic,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, threads } => cmd_run(&config, resolve_threads(threads)),
        Command::Verify { suite, costs, instances, seed, oracle_samples, samples } => {
            let suite = match suite {
                SuiteArg::Bic => Suite::Bic,
                SuiteArg::Bir => Suite::Bir,
                SuiteArg::Monotonicity => Suite::Monotonicity,
                SuiteArg::Cubic => Suite::Cubic,
                SuiteArg::ClosedForms => Suite::ClosedForms,
            };
            let mut opts = VerifyOptions {
                instances,
                seed,
                oracle: OracleConfig { n_mc: oracle_samples, ..VerifyOptions::default().oracle },
                n_mc: samples,
                ..VerifyOptions::default()
            };
            if !costs.is_empty() {
                let names: Vec<CostName> = costs
                    .iter()
                    .map(|c| match c {
                        CostArg::Linear => CostName::Linear,
                        CostArg::Quadratic => CostName::Quadratic,
                    })
                    .collect();
                opts.costs = verify_costs(&names);
            }
            cmd_verify(suite, &opts, &mut std::io::stdout().lock()).map(|_| ())
        }
        Command::Figures { results, out_dir } => cmd_figures(&results, &out_dir),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
