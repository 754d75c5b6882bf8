//! Closed-form average AoI on the on/off channel (`pe_good = 0`,
//! `pe_bad = 1`) and the distributions they are assembled from.
//!
//! Every formula here is derived for the on/off erasure model. Channels with
//! other erasure probabilities are rejected with
//! [`AoiError::UnsupportedErasure`]; use the simulator for those.

use serde::Serialize;

use crate::channel::ChannelParams;
use crate::error::{AoiError, Result};
use crate::periodic_fcfs;

/// How packets are generated at the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ArrivalModel {
    /// A packet arrives in each slot independently with probability `lambda`.
    Bernoulli { lambda: f64 },
    /// A packet arrives in slots `1, K + 1, 2K + 1, ...`.
    Periodic { period: usize },
    /// The transmitter generates packets whenever it chooses.
    GenerateAtWill,
}

impl ArrivalModel {
    pub fn bernoulli(lambda: f64) -> Result<Self> {
        let model = ArrivalModel::Bernoulli { lambda };
        model.validate()?;
        Ok(model)
    }

    pub fn periodic(period: usize) -> Result<Self> {
        let model = ArrivalModel::Periodic { period };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ArrivalModel::Bernoulli { lambda } if !(lambda > 0.0 && lambda <= 1.0) => Err(
                AoiError::Domain(format!("arrival rate lambda = {lambda} must lie in (0, 1]")),
            ),
            ArrivalModel::Periodic { period: 0 } => {
                Err(AoiError::Domain("arrival period K must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Short label used in reports: `bernoulli`, `periodic` or `gaw`.
    pub fn label(&self) -> &'static str {
        match self {
            ArrivalModel::Bernoulli { .. } => "bernoulli",
            ArrivalModel::Periodic { .. } => "periodic",
            ArrivalModel::GenerateAtWill => "gaw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Policy {
    /// First-come-first-served with an unbounded buffer.
    Fcfs,
    /// Preemptive last-generated-first-served with a one-packet buffer.
    Plgfs,
}

impl Policy {
    pub fn label(&self) -> &'static str {
        match self {
            Policy::Fcfs => "fcfs",
            Policy::Plgfs => "plgfs",
        }
    }
}

/// `p / (r (p + r))`: the extra AoI a channel with memory adds under pLGFS.
fn memory_penalty(params: &ChannelParams) -> f64 {
    let (p, r) = (params.p(), params.r());
    p / (r * (p + r))
}

fn check_bernoulli_lambda(lambda: f64) -> Result<()> {
    ArrivalModel::Bernoulli { lambda }.validate()
}

/// Rejects `lambda >= r / (p + r)`.
fn check_fcfs_stable(params: &ChannelParams, lambda: f64) -> Result<()> {
    let (p, r) = (params.p(), params.r());
    if r - (p + r) * lambda > 0.0 {
        Ok(())
    } else {
        Err(AoiError::Unstable {
            condition: format!("lambda < r/(p+r) = {} (got lambda = {lambda})", r / (p + r)),
        })
    }
}

/// Average AoI under pLGFS for any of the three arrival models.
pub fn aoi_plgfs(params: &ChannelParams, arrival: ArrivalModel) -> Result<f64> {
    params.require_on_off()?;
    params.require_recurrent_good()?;
    arrival.validate()?;
    let base = match arrival {
        ArrivalModel::Bernoulli { lambda } => 1.0 / lambda,
        ArrivalModel::Periodic { period } => (period as f64 + 1.0) / 2.0,
        // Fresh packet every slot, i.e. Bernoulli with lambda = 1.
        ArrivalModel::GenerateAtWill => 1.0,
    };
    Ok(base + memory_penalty(params))
}

/// Average AoI under FCFS with Bernoulli arrivals.
pub fn aoi_fcfs_bernoulli(params: &ChannelParams, lambda: f64) -> Result<f64> {
    params.require_on_off()?;
    params.require_recurrent_good()?;
    check_bernoulli_lambda(lambda)?;
    check_fcfs_stable(params, lambda)?;
    let (p, r) = (params.p(), params.r());
    let slack = r - (p + r) * lambda;
    let queueing = lambda * lambda / (slack * (slack + lambda));
    Ok(1.0 / lambda + p / r * (1.0 / (p + r) + queueing))
}

/// Average AoI under FCFS with generate-at-will arrivals (a new packet right
/// after every delivery).
pub fn aoi_fcfs_gaw(params: &ChannelParams) -> Result<f64> {
    params.require_on_off()?;
    params.require_recurrent_good()?;
    Ok(1.0 + params.p() / params.r() + memory_penalty(params))
}

/// Average AoI for any (arrival, policy) pair the crate can evaluate,
/// including periodic FCFS through the numerical solver.
pub fn average_aoi(params: &ChannelParams, arrival: ArrivalModel, policy: Policy) -> Result<f64> {
    match (policy, arrival) {
        (Policy::Plgfs, _) => aoi_plgfs(params, arrival),
        (Policy::Fcfs, ArrivalModel::Bernoulli { lambda }) => aoi_fcfs_bernoulli(params, lambda),
        (Policy::Fcfs, ArrivalModel::GenerateAtWill) => aoi_fcfs_gaw(params),
        (Policy::Fcfs, ArrivalModel::Periodic { period }) => {
            periodic_fcfs::aoi_periodic_fcfs(params, period).map(|s| s.aoi)
        }
    }
}

/// PMF of the number of slots from one Good slot (inclusive) to the next
/// Good slot (exclusive).
pub fn delivery_gap_pmf(params: &ChannelParams, m: usize) -> Result<f64> {
    params.require_recurrent_good()?;
    let (p, r) = (params.p(), params.r());
    match m {
        0 => Err(AoiError::Domain("delivery gap m must be >= 1".into())),
        1 => Ok(1.0 - p),
        _ => Ok(p * (1.0 - r).powi(m as i32 - 2) * r),
    }
}

/// Mean of [`delivery_gap_pmf`]: `1 + p / r`.
pub fn delivery_gap_mean(params: &ChannelParams) -> Result<f64> {
    params.require_recurrent_good()?;
    Ok(1.0 + params.p() / params.r())
}

/// PMF of the age of a packet at the moment it is delivered.
///
/// For generate-at-will this is the FCFS variant, which coincides with
/// [`delivery_gap_pmf`]; `params` is ignored by the other two models.
pub fn age_at_delivery_pmf(arrival: ArrivalModel, params: &ChannelParams, n: usize) -> Result<f64> {
    arrival.validate()?;
    if n < 1 {
        return Err(AoiError::Domain("age at delivery n must be >= 1".into()));
    }
    match arrival {
        ArrivalModel::Bernoulli { lambda } => Ok(lambda * (1.0 - lambda).powi(n as i32 - 1)),
        ArrivalModel::Periodic { period } => Ok(if n <= period {
            1.0 / period as f64
        } else {
            0.0
        }),
        ArrivalModel::GenerateAtWill => delivery_gap_pmf(params, n),
    }
}

/// Common ratio of the system-time PMF tail,
/// `(p + (1 - p - r)(1 - lambda)) / (1 - lambda)`.
fn system_time_ratio(params: &ChannelParams, lambda: f64) -> f64 {
    (params.p() + params.memory() * (1.0 - lambda)) / (1.0 - lambda)
}

/// PMF of the system time (generation to delivery, in slots, a same-slot
/// delivery counting as 1) of a packet under Bernoulli FCFS.
pub fn system_time_pmf(params: &ChannelParams, lambda: f64, t: usize) -> Result<f64> {
    params.require_on_off()?;
    params.require_recurrent_good()?;
    check_bernoulli_lambda(lambda)?;
    check_fcfs_stable(params, lambda)?;
    if t < 1 {
        return Err(AoiError::Domain("system time t must be >= 1".into()));
    }
    let (p, r) = (params.p(), params.r());
    let slack = r - (p + r) * lambda;
    let q = 1.0 - lambda;
    if t == 1 {
        return Ok(slack / ((p + r) * q));
    }
    let head = p / (p + r) * slack / (q * q);
    Ok(head * system_time_ratio(params, lambda).powi(t as i32 - 2))
}

/// Conditional PMF of the preemption time `y` given system time `t`.
pub fn preemption_pmf_given_t(lambda: f64, t: usize, y: usize) -> Result<f64> {
    check_bernoulli_lambda(lambda)?;
    if t < 1 || y > t - 1 {
        return Err(AoiError::Domain(format!(
            "preemption time y = {y} must lie in 0..=t-1 for t = {t}"
        )));
    }
    let q = 1.0 - lambda;
    Ok(if y == 0 {
        q.powi(t as i32 - 1)
    } else {
        lambda * q.powi((t - 1 - y) as i32)
    })
}

/// Mean preemption time `E[Y]` under Bernoulli FCFS.
///
/// With `P_T(t) = A rho^(t-2)` for `t >= 2` and `q = 1 - lambda`, the double
/// sum collapses to `A lambda / ((1 - rho q)(1 - rho)^2)`.
pub fn expected_preemption(params: &ChannelParams, lambda: f64) -> Result<f64> {
    params.require_on_off()?;
    params.require_recurrent_good()?;
    check_bernoulli_lambda(lambda)?;
    check_fcfs_stable(params, lambda)?;
    let (p, r) = (params.p(), params.r());
    let q = 1.0 - lambda;
    let head = p / (p + r) * (r - (p + r) * lambda) / (q * q);
    let rho = system_time_ratio(params, lambda);
    Ok(head * lambda / ((1.0 - rho * q) * (1.0 - rho) * (1.0 - rho)))
}

/// AoI gap between FCFS and pLGFS under Bernoulli arrivals:
/// `lambda E[D | Y >= 1] E[Y]` with `E[D | Y >= 1] = 1 + p / r`.
pub fn aoi_gap_bernoulli(params: &ChannelParams, lambda: f64) -> Result<f64> {
    let mean_y = expected_preemption(params, lambda)?;
    Ok(lambda * delivery_gap_mean(params)? * mean_y)
}

/// Constants of the PGF of the number of packets a departing packet leaves
/// behind under Bernoulli FCFS:
/// `g(z) = G0 - C + (B0 + C) / (1 - ratio z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueueConstants {
    pub g0: f64,
    pub b0: f64,
    pub c: f64,
    pub ratio: f64,
    lambda: f64,
    // r + (1 - p - r) lambda
    scale: f64,
}

impl QueueConstants {
    /// `g(z)`.
    pub fn pgf(&self, z: f64) -> f64 {
        self.g0 - self.c + (self.b0 + self.c) / (1.0 - self.ratio * z)
    }

    /// `phi(y) = g((y + lambda - 1) / lambda)`, the PGF of the number of
    /// slots `F(n)` behind the departure count.
    pub fn slot_pgf(&self, y: f64) -> f64 {
        self.pgf((y + self.lambda - 1.0) / self.lambda)
    }

    /// Coefficient of `y^n` in `phi(y)`.
    ///
    /// Substituting `z` gives `phi(y) = G0 - C + (B0 + C) s / (1 - rho y)`
    /// with `s = r + (1 - p - r) lambda` and `rho = ratio s / lambda`, so the
    /// coefficients are read off the geometric series.
    pub fn slot_coefficient(&self, n: usize) -> f64 {
        let rho = self.ratio * self.scale / self.lambda;
        let lead = (self.b0 + self.c) * self.scale;
        if n == 0 {
            self.g0 - self.c + lead
        } else {
            lead * rho.powi(n as i32)
        }
    }

    /// System-time PMF recovered from the PGF: `P_T(t) = F(t - 1)`.
    pub fn system_time_pmf(&self, t: usize) -> Result<f64> {
        if t < 1 {
            return Err(AoiError::Domain("system time t must be >= 1".into()));
        }
        Ok(self.slot_coefficient(t - 1))
    }
}

pub fn queue_constants(params: &ChannelParams, lambda: f64) -> Result<QueueConstants> {
    params.require_on_off()?;
    params.require_recurrent_good()?;
    check_bernoulli_lambda(lambda)?;
    check_fcfs_stable(params, lambda)?;
    let (p, r) = (params.p(), params.r());
    let eta = params.memory();
    let q = 1.0 - lambda;
    let scale = r + eta * lambda;
    let g0 = r / (p + r) * (1.0 - p * lambda / (r * q));
    let b0 = p / (p + r) * ((r - (p + r) * lambda) / (q * scale));
    let c_den = p + eta * q;
    // p = 0 and r = 1 makes C = 0 / 0; the numerator vanishes whenever p does.
    let c = if p == 0.0 { 0.0 } else { p * g0 / c_den };
    let ratio = (p * lambda + eta * lambda * q) / (q * scale);
    Ok(QueueConstants {
        g0,
        b0,
        c,
        ratio,
        lambda,
        scale,
    })
}

/// Closed forms on the symmetric channel `p = r = (1 - eta) / 2`.
pub mod symmetric {
    fn penalty(eta: f64) -> f64 {
        eta / (1.0 - eta)
    }

    /// pLGFS, Bernoulli arrivals: `1/lambda + 1 + eta/(1-eta)`.
    pub fn plgfs_bernoulli(eta: f64, lambda: f64) -> f64 {
        1.0 / lambda + 1.0 + penalty(eta)
    }

    /// FCFS, Bernoulli arrivals.
    pub fn fcfs_bernoulli(eta: f64, lambda: f64) -> f64 {
        let queueing = 4.0 * lambda * lambda / (1.0 - 2.0 * lambda);
        let growth = 1.0 / ((1.0 - eta) * (1.0 - (1.0 - 2.0 * lambda) * eta));
        1.0 / lambda + 1.0 + penalty(eta) + queueing * growth
    }

    /// pLGFS, periodic arrivals: `(K+1)/2 + 1 + eta/(1-eta)`.
    pub fn plgfs_periodic(eta: f64, period: usize) -> f64 {
        (period as f64 + 1.0) / 2.0 + 1.0 + penalty(eta)
    }

    /// pLGFS, generate-at-will: `2 + eta/(1-eta)`.
    pub fn plgfs_gaw(eta: f64) -> f64 {
        2.0 + penalty(eta)
    }

    /// FCFS, generate-at-will: `3 + eta/(1-eta)`.
    pub fn fcfs_gaw(eta: f64) -> f64 {
        3.0 + penalty(eta)
    }
}
