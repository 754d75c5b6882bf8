use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use ge_aoi::analytic::{self, ArrivalModel, Policy};
use ge_aoi::periodic_fcfs;
use ge_aoi::simulator::{self, SimConfig};
use ge_aoi::{AoiError, ChannelParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    ArrivalKind, BudgetArgs, ChannelArgs, ErasureArgs, Format, OutputArgs, PolicyKind, SweepArgs,
    WorkloadArgs,
};

/// Failure of a command, mapped to an exit status by `main`.
#[derive(Debug)]
pub enum CliError {
    /// Bad input that clap cannot catch (exit 1).
    Usage(String),
    /// Domain or stability error from the model (exit 2).
    Model(AoiError),
    Io(io::Error),
}

impl From<AoiError> for CliError {
    fn from(e: AoiError) -> Self {
        CliError::Model(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

type CmdResult = Result<(), CliError>;

fn channel(args: &ChannelArgs) -> Result<ChannelParams, AoiError> {
    let base = match (args.p, args.r, args.eta) {
        (Some(p), Some(r), _) => ChannelParams::on_off(p, r)?,
        (_, _, Some(eta)) => ChannelParams::symmetric(eta)?,
        _ => unreachable!("clap requires --eta or --p with --r"),
    };
    base.with_erasures(args.erasure.pe_good, args.erasure.pe_bad)
}

fn arrival_model(
    kind: ArrivalKind,
    lambda: Option<f64>,
    period: Option<usize>,
) -> Result<ArrivalModel, AoiError> {
    match kind {
        ArrivalKind::Bernoulli => ArrivalModel::bernoulli(lambda.expect("clap requires --lambda")),
        ArrivalKind::Periodic => ArrivalModel::periodic(period.expect("clap requires --K")),
        ArrivalKind::Gaw => Ok(ArrivalModel::GenerateAtWill),
    }
}

fn policy(kind: PolicyKind) -> Policy {
    match kind {
        PolicyKind::Fcfs => Policy::Fcfs,
        PolicyKind::Plgfs => Policy::Plgfs,
    }
}

fn workload(args: &WorkloadArgs) -> Result<(ArrivalModel, Policy), AoiError> {
    Ok((
        arrival_model(args.arrival, args.lambda, args.period)?,
        policy(args.policy),
    ))
}

fn arrival_param(arrival: ArrivalModel) -> Option<f64> {
    match arrival {
        ArrivalModel::Bernoulli { lambda } => Some(lambda),
        ArrivalModel::Periodic { period } => Some(period as f64),
        ArrivalModel::GenerateAtWill => None,
    }
}

fn sim_config(
    ch: ChannelParams,
    arrival: ArrivalModel,
    policy: Policy,
    budget: &BudgetArgs,
) -> SimConfig {
    let mut cfg = SimConfig::new(ch, arrival, policy)
        .with_budget(budget.iters, budget.slots)
        .with_seed(budget.seed);
    cfg.warmup_slots = budget.warmup;
    cfg
}

fn open_output(out: &OutputArgs) -> io::Result<Box<dyn Write>> {
    Ok(match &out.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Plain decimal; Rust's `Display` for `f64` is the shortest string that
/// parses back to the same value and never uses an exponent.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn analytic(channel_args: &ChannelArgs, workload_args: &WorkloadArgs) -> CmdResult {
    let ch = channel(channel_args)?;
    let (arrival, policy) = workload(workload_args)?;
    let aoi = analytic::average_aoi(&ch, arrival, policy)?;
    println!("{aoi:.12}");
    Ok(())
}

pub fn solve_periodic_fcfs(
    channel_args: &ChannelArgs,
    period: usize,
    output: &OutputArgs,
) -> CmdResult {
    let ch = channel(channel_args)?;
    let sol = periodic_fcfs::aoi_periodic_fcfs(&ch, period)?;
    let mut out = open_output(output)?;
    match output.format {
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::to_string(&sol).map_err(io::Error::from)?
        )?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record([
                "K",
                "beta",
                "p0_good",
                "p0_bad",
                "p1_good",
                "expected_latency",
                "aoi",
            ])?;
            w.write_record([
                sol.period.to_string(),
                num(sol.beta),
                num(sol.p0_good),
                num(sol.p0_bad),
                num(sol.p1_good),
                num(sol.expected_latency),
                num(sol.aoi),
            ])?;
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulateRecord {
    p: f64,
    r: f64,
    pe_good: f64,
    pe_bad: f64,
    eta: f64,
    arrival: &'static str,
    arrival_param: Option<f64>,
    policy: &'static str,
    sim_mean: f64,
    sim_stderr: f64,
    iters: usize,
    slots: u64,
    seed: u64,
}

const SIMULATE_HEADER: [&str; 13] = [
    "p",
    "r",
    "pe_good",
    "pe_bad",
    "eta",
    "arrival",
    "arrival_param",
    "policy",
    "sim_mean",
    "sim_stderr",
    "iters",
    "slots",
    "seed",
];

pub fn simulate(
    channel_args: &ChannelArgs,
    workload_args: &WorkloadArgs,
    budget: &BudgetArgs,
    output: &OutputArgs,
    trace: Option<&Path>,
) -> CmdResult {
    let ch = channel(channel_args)?;
    let (arrival, policy) = workload(workload_args)?;
    let cfg = sim_config(ch, arrival, policy, budget);
    let result = simulator::run_experiment(&cfg)?;
    if let Some(path) = trace {
        let seed = simulator::derive_seed(budget.seed, 0);
        let t = simulator::simulate_trajectory(&ch, arrival, policy, budget.slots, seed)?;
        let mut file = BufWriter::new(File::create(path)?);
        t.write_csv(&mut file)?;
        file.flush()?;
    }
    let record = SimulateRecord {
        p: ch.p(),
        r: ch.r(),
        pe_good: ch.pe_good(),
        pe_bad: ch.pe_bad(),
        eta: ch.memory(),
        arrival: arrival.label(),
        arrival_param: arrival_param(arrival),
        policy: policy.label(),
        sim_mean: result.mean_aoi,
        sim_stderr: result.stderr_aoi,
        iters: budget.iters,
        slots: budget.slots,
        seed: budget.seed,
    };
    let mut out = open_output(output)?;
    match output.format {
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::to_string(&record).map_err(io::Error::from)?
        )?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(SIMULATE_HEADER)?;
            w.write_record([
                num(record.p),
                num(record.r),
                num(record.pe_good),
                num(record.pe_bad),
                num(record.eta),
                record.arrival.to_string(),
                opt_num(record.arrival_param),
                record.policy.to_string(),
                num(record.sim_mean),
                num(record.sim_stderr),
                record.iters.to_string(),
                record.slots.to_string(),
                record.seed.to_string(),
            ])?;
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

pub const SWEEP_HEADER: [&str; 12] = [
    "eta",
    "p",
    "r",
    "pe_good",
    "pe_bad",
    "arrival",
    "arrival_param",
    "policy",
    "analytic",
    "sim_mean",
    "sim_stderr",
    "status",
];

struct SweepRow {
    eta: f64,
    ch: ChannelParams,
    arrival: ArrivalModel,
    policy: Policy,
    analytic: Option<f64>,
    sim: Option<(f64, f64)>,
    status: &'static str,
}

impl SweepRow {
    fn csv_fields(&self) -> [String; 12] {
        [
            num(self.eta),
            num(self.ch.p()),
            num(self.ch.r()),
            num(self.ch.pe_good()),
            num(self.ch.pe_bad()),
            self.arrival.label().to_string(),
            opt_num(arrival_param(self.arrival)),
            self.policy.label().to_string(),
            opt_num(self.analytic),
            opt_num(self.sim.map(|s| s.0)),
            opt_num(self.sim.map(|s| s.1)),
            self.status.to_string(),
        ]
    }

    fn json(&self) -> Value {
        json!({
            "eta": self.eta,
            "p": self.ch.p(),
            "r": self.ch.r(),
            "pe_good": self.ch.pe_good(),
            "pe_bad": self.ch.pe_bad(),
            "arrival": self.arrival.label(),
            "arrival_param": arrival_param(self.arrival),
            "policy": self.policy.label(),
            "analytic": self.analytic,
            "sim_mean": self.sim.map(|s| s.0),
            "sim_stderr": self.sim.map(|s| s.1),
            "status": self.status,
        })
    }
}

/// Grid `min, min + step, ...` up to `max`, with each node rounded to 12
/// decimals so that 0.1 * 3 prints as 0.3.
pub fn eta_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) {
        return Err("eta grid bounds must be finite".into());
    }
    if !(0.0..1.0).contains(&min) || !(0.0..1.0).contains(&max) {
        return Err(format!(
            "eta grid must satisfy 0 <= eta < 1 (got {min}..{max})"
        ));
    }
    if min > max || step <= 0.0 {
        return Err(format!("empty eta grid: min {min}, max {max}, step {step}"));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((min + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn sweep_point(
    eta: f64,
    erasure: &ErasureArgs,
    arrival: ArrivalModel,
    policy: Policy,
    budget: &BudgetArgs,
) -> Result<SweepRow, AoiError> {
    let ch = ChannelParams::symmetric(eta)?.with_erasures(erasure.pe_good, erasure.pe_bad)?;
    let (analytic, mut status) = match analytic::average_aoi(&ch, arrival, policy) {
        Ok(v) => (Some(v), "ok"),
        Err(AoiError::Unstable { .. }) => (None, "unstable"),
        Err(AoiError::UnsupportedErasure { .. }) => (None, "unsupported"),
        Err(_) => (None, "error"),
    };
    let sim = match simulator::run_experiment(&sim_config(ch, arrival, policy, budget)) {
        Ok(res) => Some((res.mean_aoi, res.stderr_aoi)),
        Err(_) => {
            status = "error";
            None
        }
    };
    Ok(SweepRow {
        eta,
        ch,
        arrival,
        policy,
        analytic,
        sim,
        status,
    })
}

pub fn sweep(args: &SweepArgs) -> CmdResult {
    let grid = eta_grid(args.eta_min, args.eta_max, args.eta_step).map_err(CliError::Usage)?;
    let mut arrivals = args.arrivals.clone();
    arrivals.sort();
    arrivals.dedup();
    let mut policies = args.policies.clone();
    policies.sort();
    policies.dedup();
    if arrivals.is_empty() || policies.is_empty() {
        return Err(CliError::Usage(
            "sweep needs at least one arrival and one policy".into(),
        ));
    }

    let mut rows = Vec::new();
    for &kind in &arrivals {
        let arrival = arrival_model(kind, Some(args.lambda), Some(args.period))?;
        for &pk in &policies {
            for &eta in &grid {
                rows.push(sweep_point(
                    eta,
                    &args.erasure,
                    arrival,
                    policy(pk),
                    &args.budget,
                )?);
            }
        }
    }

    let mut out = open_output(&args.output)?;
    match args.output.format {
        Format::Json => {
            let all: Vec<Value> = rows.iter().map(SweepRow::json).collect();
            writeln!(out, "{}", Value::Array(all))?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(SWEEP_HEADER)?;
            for row in &rows {
                w.write_record(row.csv_fields())?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_ten_clean_nodes() {
        let grid = eta_grid(0.0, 0.9, 0.1).unwrap();
        assert_eq!(grid.len(), 10);
        assert_eq!(grid[3], 0.3);
        assert_eq!(grid[9], 0.9);
    }

    #[test]
    fn degenerate_grids() {
        assert_eq!(eta_grid(0.5, 0.5, 0.1).unwrap(), vec![0.5]);
        assert!(eta_grid(0.6, 0.5, 0.1).is_err());
        assert!(eta_grid(0.0, 0.5, 0.0).is_err());
        assert!(eta_grid(0.0, 1.0, 0.1).is_err());
        assert!(eta_grid(-0.1, 0.5, 0.1).is_err());
    }

    #[test]
    fn decimal_output_has_no_exponent() {
        assert_eq!(num(1e-7), "0.0000001");
        assert_eq!(num(4.0), "4");
        assert_eq!(num(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
