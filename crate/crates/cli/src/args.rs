use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ge-aoi",
    version,
    about = "Average Age of Information over Gilbert-Elliott erasure channels",
    args_override_self = true
)]
pub struct Cli {
    /// TOML file of `flag = value` pairs applied before the command line.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the average AoI from closed forms or the periodic-FCFS solver.
    #[command(args_override_self = true)]
    Analytic {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        workload: WorkloadArgs,
    },
    /// Run a Monte Carlo experiment and print one record.
    #[command(args_override_self = true)]
    Simulate {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Also write the per-slot trace of iteration 0 to this CSV file.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Solve the periodic-arrival FCFS queue and print its boundary solution.
    #[command(name = "solve-periodic-fcfs", args_override_self = true)]
    SolvePeriodicFcfs {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Arrival period in slots.
        #[arg(long = "K", value_name = "K")]
        period: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sweep channel memory on the symmetric channel and tabulate analytic
    /// and simulated AoI.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    /// Good-to-Bad transition probability.
    #[arg(long, requires = "r", conflicts_with = "eta")]
    pub p: Option<f64>,
    /// Bad-to-Good transition probability.
    #[arg(long, requires = "p", conflicts_with = "eta")]
    pub r: Option<f64>,
    /// Channel memory of the symmetric channel, p = r = (1 - eta) / 2.
    #[arg(long, required_unless_present = "p")]
    pub eta: Option<f64>,
    #[command(flatten)]
    pub erasure: ErasureArgs,
}

#[derive(Debug, Args)]
pub struct ErasureArgs {
    /// Erasure probability in the Good state.
    #[arg(long, default_value_t = 0.0)]
    pub pe_good: f64,
    /// Erasure probability in the Bad state.
    #[arg(long, default_value_t = 1.0)]
    pub pe_bad: f64,
}

#[derive(Debug, Args)]
pub struct WorkloadArgs {
    #[arg(long, value_enum)]
    pub arrival: ArrivalKind,
    /// Bernoulli arrival rate; fractions such as 1/3 are accepted.
    #[arg(long, value_parser = parse_rate, required_if_eq("arrival", "bernoulli"))]
    pub lambda: Option<f64>,
    /// Arrival period for periodic arrivals.
    #[arg(long = "K", value_name = "K", required_if_eq("arrival", "periodic"))]
    pub period: Option<usize>,
    #[arg(long, value_enum)]
    pub policy: PolicyKind,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Slots per iteration.
    #[arg(long, default_value_t = ge_aoi::simulator::DEFAULT_SLOTS)]
    pub slots: u64,
    /// Independent iterations.
    #[arg(long, default_value_t = ge_aoi::simulator::DEFAULT_ITERATIONS)]
    pub iters: usize,
    /// Base seed; iteration seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leading slots of every iteration excluded from the averages.
    #[arg(long, default_value_t = 0)]
    pub warmup: u64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 0.0)]
    pub eta_min: f64,
    #[arg(long, default_value_t = 0.9)]
    pub eta_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta_step: f64,
    /// Bernoulli arrival rate used by the Bernoulli curves.
    #[arg(long, value_parser = parse_rate, default_value = "1/3")]
    pub lambda: f64,
    /// Period used by the periodic curves.
    #[arg(long = "K", value_name = "K", default_value_t = 3)]
    pub period: usize,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "bernoulli,periodic,gaw"
    )]
    pub arrivals: Vec<ArrivalKind>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "fcfs,plgfs")]
    pub policies: Vec<PolicyKind>,
    #[command(flatten)]
    pub erasure: ErasureArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum ArrivalKind {
    Bernoulli,
    Periodic,
    Gaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum PolicyKind {
    Fcfs,
    Plgfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Parses a decimal or an `a/b` fraction. Both parts of a fraction are parsed
/// separately, so `1/3` becomes the double nearest to one third.
pub fn parse_rate(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num
                .trim()
                .parse()
                .map_err(|e| format!("bad numerator: {e}"))?;
            let den: f64 = den
                .trim()
                .parse()
                .map_err(|e| format!("bad denominator: {e}"))?;
            if den == 0.0 {
                return Err("denominator is zero".into());
            }
            num / den
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("{s} is not a finite number"))
    }
}
