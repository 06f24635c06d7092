use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pct_cli::commands::{
    cmd_estimate, cmd_qq, cmd_simulate, cmd_test, cmd_validate, EstimateArgs, GroupSelection, Method, QqArgs,
    SimulateArgs, TestArgs, TestKind,
};
use pct_cli::CliError;
use pct_core::simulation::{NuMode, Statistic};
use pct_core::weights::WeightPlan;

/// Nonparametric k-sample tests for panel count data.
#[derive(Parser, Debug)]
#[command(name = "pct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a dataset file and report problems.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Estimate the mean function and write it as `time,value` CSV.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "npmle")]
        method: MethodArg,
        /// `all` or a group number.
        #[arg(long, default_value = "all")]
        group: GroupSelection,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the chi-square (`u`, `v`) or two-sample (`t12`) tests.
    Test {
        #[arg(long)]
        input: PathBuf,
        /// w1..w4, a weight keyword, or `name:l` for a per-group weight.
        #[arg(long, default_value = "w1")]
        weight: WeightPlan,
        #[arg(long, value_enum)]
        stat: StatArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// JSON report file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo size/power study; one CSV row per statistic and weight.
    Simulate {
        #[arg(long)]
        case: u8,
        #[arg(long)]
        beta: f64,
        #[arg(long, required_unless_present = "sizes", conflicts_with = "sizes")]
        n1: Option<usize>,
        #[arg(long, required_unless_present = "sizes", conflicts_with = "sizes")]
        n2: Option<usize>,
        /// Comma-separated group sizes for designs with more than two groups.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value = "fixed")]
        nu: NuArg,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 20090601)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "w1")]
        weights: Vec<WeightPlan>,
        /// Comma-separated: t1, t2, u, v.
        #[arg(long, value_delimiter = ',', default_value = "t2")]
        stat: Vec<Statistic>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Null distribution of T2 against standard normal quantiles.
    Qq {
        /// Total sample size, split evenly between two groups.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 20090601)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Npmle,
    Npmple,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatArg {
    U,
    V,
    T12,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NuArg {
    Fixed,
    Gamma,
}

fn configure_threads() {
    if let Ok(v) = std::env::var("PCT_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring PCT_THREADS={v}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { input } => cmd_validate(&input),
        Command::Estimate { input, method, group, out } => cmd_estimate(&EstimateArgs {
            input,
            method: match method {
                MethodArg::Npmle => Method::Npmle,
                MethodArg::Npmple => Method::Npmple,
            },
            group,
            out,
        }),
        Command::Test { input, weight, stat, alpha, out } => cmd_test(&TestArgs {
            input,
            weight,
            stat: match stat {
                StatArg::U => TestKind::U,
                StatArg::V => TestKind::V,
                StatArg::T12 => TestKind::T12,
            },
            alpha,
            out,
        })
        .map(drop),
        Command::Simulate {
            case,
            beta,
            n1,
            n2,
            sizes,
            nu,
            reps,
            seed,
            weights,
            stat,
            alpha,
            out,
        } => {
            let sizes = match (sizes, n1, n2) {
                (Some(s), _, _) => s,
                (None, Some(a), Some(b)) => vec![a, b],
                _ => return Err(CliError::Usage("give --n1 and --n2, or --sizes".into())),
            };
            cmd_simulate(&SimulateArgs {
                case,
                beta,
                sizes,
                nu: match nu {
                    NuArg::Fixed => NuMode::FixedOne,
                    NuArg::Gamma => NuMode::Gamma2Half,
                },
                reps,
                seed,
                weights,
                stats: stat,
                alpha,
                out,
            })
            .map(drop)
        }
        Command::Qq { n, reps, seed, out } => cmd_qq(&QqArgs { n, reps, seed, out }).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
