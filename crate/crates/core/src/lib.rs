//! Average Age of Information (AoI) over Gilbert-Elliott erasure channels.
//!
//! The crate has four layers:
//!
//! - [`channel`]: the two-state channel, its stationary behaviour and the
//!   good-state-count distribution over a window of slots.
//! - [`analytic`]: closed forms for pLGFS and FCFS under Bernoulli, periodic
//!   and generate-at-will arrivals, plus the system-time and preemption PMFs
//!   behind the FCFS/pLGFS gap.
//! - [`periodic_fcfs`]: the numerical solver for periodic arrivals under FCFS
//!   (geometric-tail queue occupancy at arrival instants).
//! - [`simulator`]: a slot-level Monte Carlo simulator used to validate all of
//!   the above and to cover general erasure probabilities.

pub mod analytic;
pub mod channel;
mod error;
pub mod numeric;
pub mod periodic_fcfs;
pub mod simulator;

pub use analytic::{ArrivalModel, Policy, QueueConstants};
pub use channel::{ChannelParams, ChannelState, CountDistTable};
pub use error::{AoiError, Result};
pub use periodic_fcfs::{MemorylessSolution, PeriodicFcfsSolution};
pub use simulator::{AoiTrace, SimConfig, SimResult};
