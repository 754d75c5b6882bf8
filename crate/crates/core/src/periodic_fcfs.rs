//! Average AoI for periodic arrivals (period `K`) under FCFS on the on/off
//! channel.
//!
//! The queue is observed at arrival instants. Let `p_{n,s}` be the
//! probability that an arriving packet finds `n` packets queued and the
//! channel in state `s`. Between two arrivals the channel spends `K` slots and
//! each Good slot delivers one packet, so `p_{n,s}` obeys a balance equation
//! driven by the good-state-count distribution. Its solution has a geometric
//! tail with a common ratio `beta`:
//!
//! ```text
//! p_{n,B} = beta^n     p_{0,B}     n >= 0
//! p_{n,G} = beta^(n-1) p_{1,G}     n >= 1
//! ```
//!
//! `beta` is the root in (0, 1) of a scalar equation built from generating
//! functions of the count distribution, the three boundary probabilities
//! come from a 3x3 linear system, and the mean latency follows in closed form.
//! The average AoI is the mean latency plus `(K - 1) / 2`.

use serde::Serialize;

use crate::channel::{ChannelParams, ChannelState, CountDistTable};
use crate::error::{AoiError, Result};
use crate::numeric;

use ChannelState::{Bad, Good};

const GRID_POINTS: usize = 10_000;
const GRID_EDGE: f64 = 1e-9;
const LOG_GRID_POINTS: usize = 2_912;
const ROOT_TOL: f64 = 1e-12;
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicFcfsSolution {
    pub period: usize,
    /// Common ratio of the queue-length tail.
    pub beta: f64,
    pub p0_good: f64,
    pub p0_bad: f64,
    pub p1_good: f64,
    /// Mean generation-to-delivery latency in slots.
    pub expected_latency: f64,
    pub aoi: f64,
}

impl PeriodicFcfsSolution {
    /// Probability that an arrival finds `n` queued packets and channel `s`.
    pub fn queue_pmf(&self, n: usize, s: ChannelState) -> f64 {
        match (s, n) {
            (Good, 0) => self.p0_good,
            (Good, _) => self.beta.powi(n as i32 - 1) * self.p1_good,
            (Bad, _) => self.beta.powi(n as i32) * self.p0_bad,
        }
    }

    /// Sum of [`Self::queue_pmf`] over all `(n, s)`, in closed form.
    pub fn total_probability(&self) -> f64 {
        self.p0_good + (self.p0_bad + self.p1_good) / (1.0 - self.beta)
    }
}

/// Solution of the memoryless (`p = r = 1/2`) special case, where queue
/// probabilities do not depend on the channel state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemorylessSolution {
    pub alpha: f64,
    /// Probability an arrival finds the queue empty (both states together).
    pub p0: f64,
    /// Probability an arrival finds one packet queued (both states together).
    pub p1: f64,
}

fn check_inputs(params: &ChannelParams, period: usize) -> Result<()> {
    params.require_on_off()?;
    params.require_recurrent_good()?;
    if period < 1 {
        return Err(AoiError::Domain("arrival period K must be >= 1".into()));
    }
    let (p, r) = (params.p(), params.r());
    // Mean service time 1 + p/r must be shorter than the arrival period. The
    // relative margin keeps rounding from admitting the boundary itself.
    if (p + r) / (r * period as f64) >= 1.0 - 1e-12 {
        return Err(AoiError::Unstable {
            condition: format!("K > (p+r)/r = {} (got K = {period})", (p + r) / r),
        });
    }
    Ok(())
}

/// Cross-multiplied form of the `beta` equation:
/// `(b - F_BB(b)) (b - F_GG(b)) - F_GB(b) F_BG(b)`, where `F_xy(b)` is the
/// generating function of `P(K, ., y | x)`.
fn beta_equation(table: &CountDistTable, beta: f64) -> f64 {
    let f = |exit, entry| table.generating(exit, entry, beta);
    (beta - f(Bad, Bad)) * (beta - f(Good, Good)) - f(Good, Bad) * f(Bad, Good)
}

/// Root in (0, 1) of the `beta` equation for a stable periodic FCFS queue.
pub fn solve_beta(params: &ChannelParams, period: usize) -> Result<f64> {
    check_inputs(params, period)?;
    let table = params.good_count_distribution(period)?;
    solve_beta_with(params, &table).map(|(beta, _)| beta)
}

fn solve_beta_with(params: &ChannelParams, table: &CountDistTable) -> Result<(f64, [f64; 3])> {
    if params.p() == 0.0 {
        // The channel never leaves Good; only the Bad-to-Bad branch survives
        // and the equation factors as (b - (1-r)^K)(b - b^K).
        let beta = (1.0 - params.r()).powi(table.horizon() as i32);
        let boundary = solve_boundary_with(table, beta)?;
        return Ok((beta, boundary));
    }
    // f vanishes at 0 and 1; scanning f(b)/b drops the root at 0. A
    // log-spaced grid below GRID_EDGE catches the tiny roots of long periods.
    let reduced = |b: f64| beta_equation(table, b) / b;
    let mut brackets = numeric::sign_change_brackets(
        |e: f64| reduced(10f64.powf(e)),
        -300.0,
        GRID_EDGE.log10(),
        LOG_GRID_POINTS,
    )
    .into_iter()
    .map(|(lo, hi)| (10f64.powf(lo), 10f64.powf(hi)))
    .collect::<Vec<_>>();
    brackets.extend(numeric::sign_change_brackets(
        reduced,
        GRID_EDGE,
        1.0 - GRID_EDGE,
        GRID_POINTS,
    ));
    let mut last_err = None;
    for (lo, hi) in brackets {
        let Some(beta) = numeric::bisect(reduced, lo, hi, ROOT_TOL * hi) else {
            continue;
        };
        match solve_boundary_with(table, beta) {
            Ok(boundary) if boundary_is_admissible(table, beta, &boundary) => {
                return Ok((beta, boundary))
            }
            Ok(_) => {
                last_err = Some(AoiError::SolverFailure(format!(
                    "root beta = {beta} gives an inadmissible boundary solution"
                )))
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        AoiError::SolverFailure("beta equation has no sign change in (0, 1)".into())
    }))
}

fn boundary_is_admissible(table: &CountDistTable, beta: f64, boundary: &[f64; 3]) -> bool {
    const SLACK: f64 = 1e-12;
    if !boundary
        .iter()
        .all(|&v| (-SLACK..=1.0 + SLACK).contains(&v))
    {
        return false;
    }
    let sol = PeriodicFcfsSolution {
        period: table.horizon(),
        beta,
        p0_good: boundary[0],
        p0_bad: boundary[1],
        p1_good: boundary[2],
        expected_latency: f64::NAN,
        aoi: f64::NAN,
    };
    (sol.total_probability() - 1.0).abs() <= 1e-9 && max_residual(table, &sol, 2) <= 1e-9
}

fn boundary_matrix(table: &CountDistTable, beta: f64) -> [[f64; 3]; 3] {
    let k = table.horizon();
    // sum_{i < count} beta^i * sum_{j >= i + offset} P(K, j, exit | entry)
    let weighted_tail = |exit, entry, offset: usize, count: usize| -> f64 {
        (0..count)
            .map(|i| beta.powi(i as i32) * table.tail(i + offset, exit, entry))
            .sum()
    };
    let inv = 1.0 / (1.0 - beta);
    [
        [
            1.0 - table.tail(1, Good, Good),
            -weighted_tail(Good, Bad, 1, k),
            -weighted_tail(Good, Good, 2, k - 1),
        ],
        [
            table.tail(1, Bad, Good),
            weighted_tail(Bad, Bad, 1, k) - 1.0,
            weighted_tail(Bad, Good, 2, k - 1),
        ],
        [1.0, inv, inv],
    ]
}

fn solve_boundary_with(table: &CountDistTable, beta: f64) -> Result<[f64; 3]> {
    if !(0.0..1.0).contains(&beta) {
        return Err(AoiError::Domain(format!(
            "beta = {beta} must lie in [0, 1)"
        )));
    }
    let a = boundary_matrix(table, beta);
    let solved = numeric::solve3(a, [0.0, 0.0, 1.0])
        .ok_or_else(|| AoiError::SolverFailure("boundary system is singular".into()))?;
    if solved.condition.is_nan() || solved.condition > MAX_CONDITION {
        return Err(AoiError::SolverFailure(format!(
            "boundary system is ill-conditioned (condition ~ {:e})",
            solved.condition
        )));
    }
    Ok(solved.x)
}

/// Boundary probabilities `(p0_good, p0_bad, p1_good)` for a given `beta`.
pub fn solve_boundary(params: &ChannelParams, period: usize, beta: f64) -> Result<(f64, f64, f64)> {
    check_inputs(params, period)?;
    let table = params.good_count_distribution(period)?;
    let [g0, b0, g1] = solve_boundary_with(&table, beta)?;
    Ok((g0, b0, g1))
}

/// Mean latency from the geometric-form occupancy. A packet that finds `n`
/// queued waits `1 + n (1 + p/r)` slots from a Good slot and `1/r` more from a
/// Bad one; the sums over `n` are taken in closed form.
fn latency_from_boundary(params: &ChannelParams, beta: f64, boundary: &[f64; 3]) -> f64 {
    let (p, r) = (params.p(), params.r());
    let [p0_good, p0_bad, p1_good] = *boundary;
    let gap = 1.0 - beta;
    p0_good
        + p0_bad / (r * gap) * (1.0 + (r + beta * p) / gap)
        + p1_good / gap * (1.0 + (p + r) / (r * gap))
}

/// Mean generation-to-delivery latency `E[T]` in slots.
pub fn expected_latency(params: &ChannelParams, period: usize) -> Result<f64> {
    aoi_periodic_fcfs(params, period).map(|s| s.expected_latency)
}

/// Runs the full solver: count table, `beta`, boundary, latency and AoI.
pub fn aoi_periodic_fcfs(params: &ChannelParams, period: usize) -> Result<PeriodicFcfsSolution> {
    check_inputs(params, period)?;
    let table = params.good_count_distribution(period)?;
    let (beta, boundary) = solve_beta_with(params, &table)?;
    let expected_latency = latency_from_boundary(params, beta, &boundary);
    Ok(PeriodicFcfsSolution {
        period,
        beta,
        p0_good: boundary[0],
        p0_bad: boundary[1],
        p1_good: boundary[2],
        expected_latency,
        aoi: expected_latency + (period as f64 - 1.0) / 2.0,
    })
}

/// Residual of the occupancy balance equation at queue length `n`, for
/// state `s`, when the geometric-form solution is substituted back in.
pub fn balance_residual(
    params: &ChannelParams,
    sol: &PeriodicFcfsSolution,
    n: usize,
    s: ChannelState,
) -> Result<f64> {
    let table = params.good_count_distribution(sol.period)?;
    Ok(balance_residual_with(&table, sol, n, s))
}

fn balance_residual_with(
    table: &CountDistTable,
    sol: &PeriodicFcfsSolution,
    n: usize,
    s: ChannelState,
) -> f64 {
    let k = table.horizon();
    let rhs: f64 = ChannelState::ALL
        .iter()
        .map(|&prev| {
            if n == 0 {
                // Everything queued (i + 1 packets) drains within the window.
                (0..k)
                    .map(|i| sol.queue_pmf(i, prev) * table.tail(i + 1, s, prev))
                    .sum::<f64>()
            } else {
                (n - 1..=k + n - 1)
                    .map(|i| sol.queue_pmf(i, prev) * table.prob(i + 1 - n, s, prev))
                    .sum::<f64>()
            }
        })
        .sum();
    (sol.queue_pmf(n, s) - rhs).abs()
}

fn max_residual(table: &CountDistTable, sol: &PeriodicFcfsSolution, n: usize) -> f64 {
    ChannelState::ALL
        .iter()
        .map(|&s| balance_residual_with(table, sol, n, s))
        .fold(0.0, f64::max)
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n - k + 1) as f64 / k as f64;
    }
    row
}

/// Memoryless special case solved from binomial sums alone, without the
/// count-table machinery.
pub fn memoryless_oracle(period: usize) -> Result<MemorylessSolution> {
    if period <= 2 {
        return Err(AoiError::Unstable {
            condition: format!("K >= 3 on the memoryless channel (got K = {period})"),
        });
    }
    let k = period;
    let binom = binomial_row(k);
    // upper[m] = sum_{j=m}^{K} C(K, j)
    let mut upper = vec![0.0; k + 2];
    for m in (0..=k).rev() {
        upper[m] = upper[m + 1] + binom[m];
    }
    // (K+1) a - sum_{i=2}^{K-1} a^i upper[i+1] - ((1+a)^K - 1), divided by a.
    let reduced = |a: f64| -> f64 {
        let tail: f64 = (2..k).map(|i| a.powi(i as i32 - 1) * upper[i + 1]).sum();
        let growth = ((1.0 + a).powi(k as i32) - 1.0) / a;
        (k as f64 + 1.0) - tail - growth
    };
    let alpha = numeric::bisect(reduced, 1e-12, 1.0 - 1e-12, ROOT_TOL).ok_or_else(|| {
        AoiError::SolverFailure(format!("memoryless polynomial has no root for K = {k}"))
    })?;
    let weight: f64 = (0..=k - 2)
        .map(|i| alpha.powi(i as i32) * upper[i + 2])
        .sum();
    let p1 = 1.0 / (weight + 1.0 / (1.0 - alpha));
    Ok(MemorylessSolution {
        alpha,
        p0: weight * p1,
        p1,
    })
}
