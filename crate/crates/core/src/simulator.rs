//! Slot-level Monte Carlo simulation of a single link.
//!
//! Slots are numbered from 1. Within slot `t` the simulator
//!
//! 1. samples the receiver AoI `t - g`, where `g` is the generation slot of
//!    the newest packet delivered before slot `t`,
//! 2. applies the arrival process (pLGFS replaces the buffered packet, FCFS
//!    appends to the queue),
//! 3. steps the channel and draws the erasure for this slot's state,
//! 4. delivers the head packet if the slot was not erased. The delivery
//!    takes effect from slot `t + 1`.
//!
//! The channel starts in a stationary draw and the receiver holds a virtual
//! packet generated in slot 0, so the first sample is 1.
//!
//! Iteration `i` of an experiment is seeded with [`derive_seed`]`(base, i)`
//! and owns its own ChaCha8 stream, so results do not depend on how rayon
//! schedules the iterations.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{ArrivalModel, Policy};
use crate::channel::{ChannelParams, ChannelState};
use crate::error::{AoiError, Result};

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_SLOTS: u64 = 10_000;
pub const DEFAULT_QUEUE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub params: ChannelParams,
    pub arrival: ArrivalModel,
    pub policy: Policy,
    pub slots_per_run: u64,
    pub iterations: usize,
    pub base_seed: u64,
    pub warmup_slots: u64,
    pub collect_histograms: bool,
    /// FCFS backlog that aborts a run.
    pub queue_cap: usize,
}

impl SimConfig {
    /// 1000 iterations of 10^4 slots, no warm-up, seed 0.
    pub fn new(params: ChannelParams, arrival: ArrivalModel, policy: Policy) -> Self {
        Self {
            params,
            arrival,
            policy,
            slots_per_run: DEFAULT_SLOTS,
            iterations: DEFAULT_ITERATIONS,
            base_seed: 0,
            warmup_slots: 0,
            collect_histograms: false,
            queue_cap: DEFAULT_QUEUE_CAP,
        }
    }

    pub fn with_budget(mut self, iterations: usize, slots_per_run: u64) -> Self {
        self.iterations = iterations;
        self.slots_per_run = slots_per_run;
        self
    }

    pub fn with_seed(mut self, base_seed: u64) -> Self {
        self.base_seed = base_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.arrival.validate()?;
        if self.iterations < 1 {
            return Err(AoiError::Domain("iterations must be >= 1".into()));
        }
        if self.slots_per_run <= self.warmup_slots {
            return Err(AoiError::Domain(format!(
                "slots_per_run ({}) must exceed warmup_slots ({})",
                self.slots_per_run, self.warmup_slots
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub mean_aoi: f64,
    pub stderr_aoi: f64,
    /// Mean system time of packets delivered after warm-up; NaN if none were.
    pub mean_system_time: f64,
    /// Deliveries per post-warm-up slot.
    pub throughput: f64,
    pub deliveries: u64,
    /// `system_time_hist[t]` counts deliveries with system time `t`.
    pub system_time_hist: Option<Vec<u64>>,
    /// `preemption_time_hist[y]` counts FCFS deliveries whose preemption time
    /// (latest arrival at delivery minus own generation slot) is `y`. Empty
    /// for pLGFS runs.
    pub preemption_time_hist: Option<Vec<u64>>,
}

/// Per-slot record of one trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AoiTrace {
    /// `aoi[t - 1]` is the AoI sampled at the start of slot `t`.
    pub aoi: Vec<u64>,
    /// Channel state of each slot.
    pub states: Vec<ChannelState>,
    /// Packets waiting for transmission in each slot, after that slot's
    /// arrival.
    pub queue_len: Vec<usize>,
    /// `(generation slot, delivery slot)` for each delivered packet.
    pub deliveries: Vec<(u64, u64)>,
}

impl AoiTrace {
    pub fn mean_aoi(&self) -> f64 {
        self.aoi.iter().sum::<u64>() as f64 / self.aoi.len() as f64
    }

    /// Writes `slot,state,queue_len,aoi` with one record per slot. `state` is
    /// `G` or `B`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "slot,state,queue_len,aoi")?;
        for (i, ((aoi, state), q)) in self
            .aoi
            .iter()
            .zip(&self.states)
            .zip(&self.queue_len)
            .enumerate()
        {
            let s = if state.is_good() { 'G' } else { 'B' };
            writeln!(out, "{},{},{},{}", i + 1, s, q, aoi)?;
        }
        Ok(())
    }
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of iteration `index`: `mix64(base + (index + 1) * 0x9e3779b97f4a7c15)`,
/// the `index + 1`-th output of a SplitMix64 stream started at `base`.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    mix64(base_seed.wrapping_add((index + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Transmitter buffer for either policy.
#[derive(Debug, Clone)]
struct Transmitter {
    policy: Policy,
    // Generation slots of waiting packets, oldest first. pLGFS keeps <= 1.
    queue: VecDeque<u64>,
    latest_arrival: u64,
    receiver_gen: u64,
}

/// A delivery seen by an observer.
#[derive(Debug, Clone, Copy)]
struct Delivery {
    generated: u64,
    slot: u64,
    // Latest arrival slot at delivery minus own generation slot.
    preemption: u64,
}

impl Transmitter {
    fn new(policy: Policy) -> Self {
        Self {
            policy,
            queue: VecDeque::new(),
            latest_arrival: 0,
            receiver_gen: 0,
        }
    }

    fn aoi(&self, slot: u64) -> u64 {
        slot - self.receiver_gen
    }

    fn wants_packet(&self, arrival: &ArrivalModel, slot: u64, coin: bool) -> bool {
        match (*arrival, self.policy) {
            (ArrivalModel::Bernoulli { .. }, _) => coin,
            (ArrivalModel::Periodic { period }, _) => (slot - 1).is_multiple_of(period as u64),
            (ArrivalModel::GenerateAtWill, Policy::Plgfs) => true,
            (ArrivalModel::GenerateAtWill, Policy::Fcfs) => self.queue.is_empty(),
        }
    }

    fn arrive(&mut self, slot: u64) {
        if self.policy == Policy::Plgfs {
            self.queue.clear();
        }
        self.queue.push_back(slot);
        self.latest_arrival = slot;
    }

    fn transmit(&mut self, slot: u64, erased: bool) -> Option<Delivery> {
        if erased {
            return None;
        }
        let generated = self.queue.pop_front()?;
        self.receiver_gen = generated;
        Some(Delivery {
            generated,
            slot,
            preemption: self.latest_arrival - generated,
        })
    }
}

/// Randomness shared by everything that happens in one slot.
struct SlotDraw {
    state: ChannelState,
    erased: bool,
    coin: bool,
}

struct Environment<'a> {
    params: &'a ChannelParams,
    lambda: f64,
    state: ChannelState,
    rng: ChaCha8Rng,
}

impl<'a> Environment<'a> {
    fn new(params: &'a ChannelParams, arrival: &ArrivalModel, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = params.sample_stationary(&mut rng);
        let lambda = match *arrival {
            ArrivalModel::Bernoulli { lambda } => lambda,
            _ => 0.0,
        };
        Self {
            params,
            lambda,
            state,
            rng,
        }
    }

    fn draw(&mut self) -> SlotDraw {
        let coin = self.lambda > 0.0 && self.rng.gen_bool(self.lambda);
        let state = self.state;
        let (next, erased) = self.params.sample_step(state, &mut self.rng);
        self.state = next;
        SlotDraw {
            state,
            erased,
            coin,
        }
    }
}

trait Observer {
    fn slot(&mut self, slot: u64, aoi: u64, state: ChannelState, queue_len: usize);
    fn delivery(&mut self, delivery: Delivery);
}

fn run_link<O: Observer>(
    params: &ChannelParams,
    arrival: &ArrivalModel,
    policy: Policy,
    slots: u64,
    seed: u64,
    queue_cap: usize,
    observer: &mut O,
) -> Result<()> {
    let mut env = Environment::new(params, arrival, seed);
    let mut tx = Transmitter::new(policy);
    for t in 1..=slots {
        let aoi = tx.aoi(t);
        let draw = env.draw();
        if tx.wants_packet(arrival, t, draw.coin) {
            tx.arrive(t);
        }
        if tx.queue.len() > queue_cap {
            return Err(AoiError::SimulationAborted(format!(
                "FCFS backlog exceeded {queue_cap} packets at slot {t}; the configuration is unstable"
            )));
        }
        observer.slot(t, aoi, draw.state, tx.queue.len());
        if let Some(d) = tx.transmit(t, draw.erased) {
            observer.delivery(d);
        }
    }
    Ok(())
}

impl Observer for AoiTrace {
    fn slot(&mut self, _slot: u64, aoi: u64, state: ChannelState, queue_len: usize) {
        self.aoi.push(aoi);
        self.states.push(state);
        self.queue_len.push(queue_len);
    }

    fn delivery(&mut self, d: Delivery) {
        self.deliveries.push((d.generated, d.slot));
    }
}

/// Simulates one trajectory and records every slot.
pub fn simulate_trajectory(
    params: &ChannelParams,
    arrival: ArrivalModel,
    policy: Policy,
    slots: u64,
    seed: u64,
) -> Result<AoiTrace> {
    arrival.validate()?;
    let mut trace = AoiTrace::default();
    run_link(
        params,
        &arrival,
        policy,
        slots,
        seed,
        DEFAULT_QUEUE_CAP,
        &mut trace,
    )?;
    Ok(trace)
}

#[derive(Debug, Default)]
struct IterationStats {
    warmup: u64,
    aoi_sum: u64,
    slots: u64,
    deliveries: u64,
    system_time_sum: u64,
    system_time_hist: Option<Vec<u64>>,
    preemption_hist: Option<Vec<u64>>,
}

fn bump(hist: &mut Option<Vec<u64>>, index: u64) {
    if let Some(h) = hist {
        let i = index as usize;
        if h.len() <= i {
            h.resize(i + 1, 0);
        }
        h[i] += 1;
    }
}

impl Observer for IterationStats {
    fn slot(&mut self, slot: u64, aoi: u64, _state: ChannelState, _queue_len: usize) {
        if slot > self.warmup {
            self.aoi_sum += aoi;
            self.slots += 1;
        }
    }

    fn delivery(&mut self, d: Delivery) {
        if d.slot <= self.warmup {
            return;
        }
        let system_time = d.slot - d.generated + 1;
        self.deliveries += 1;
        self.system_time_sum += system_time;
        bump(&mut self.system_time_hist, system_time);
        bump(&mut self.preemption_hist, d.preemption);
    }
}

fn merge_hist(into: &mut Option<Vec<u64>>, from: &Option<Vec<u64>>) {
    if let (Some(acc), Some(h)) = (into.as_mut(), from.as_ref()) {
        if acc.len() < h.len() {
            acc.resize(h.len(), 0);
        }
        for (a, b) in acc.iter_mut().zip(h) {
            *a += b;
        }
    }
}

/// Runs `config.iterations` independent trajectories in parallel and
/// aggregates them in iteration order.
pub fn run_experiment(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let per_iteration: Vec<IterationStats> = (0..config.iterations as u64)
        .into_par_iter()
        .map(|i| {
            let mut stats = IterationStats {
                warmup: config.warmup_slots,
                ..Default::default()
            };
            if config.collect_histograms {
                stats.system_time_hist = Some(Vec::new());
                if config.policy == Policy::Fcfs {
                    stats.preemption_hist = Some(Vec::new());
                }
            }
            run_link(
                &config.params,
                &config.arrival,
                config.policy,
                config.slots_per_run,
                derive_seed(config.base_seed, i),
                config.queue_cap,
                &mut stats,
            )
            .map(|_| stats)
        })
        .collect::<Result<_>>()?;

    let n = per_iteration.len() as f64;
    let means: Vec<f64> = per_iteration
        .iter()
        .map(|s| s.aoi_sum as f64 / s.slots as f64)
        .collect();
    let mean_aoi = means.iter().sum::<f64>() / n;
    let stderr_aoi = if per_iteration.len() > 1 {
        let var = means.iter().map(|m| (m - mean_aoi).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };

    let mut system_time_hist = config.collect_histograms.then(Vec::new);
    let mut preemption_time_hist =
        (config.collect_histograms && config.policy == Policy::Fcfs).then(Vec::new);
    let (mut deliveries, mut slots, mut system_time_sum) = (0u64, 0u64, 0u64);
    for s in &per_iteration {
        deliveries += s.deliveries;
        slots += s.slots;
        system_time_sum += s.system_time_sum;
        merge_hist(&mut system_time_hist, &s.system_time_hist);
        merge_hist(&mut preemption_time_hist, &s.preemption_hist);
    }
    let mean_system_time = if deliveries > 0 {
        system_time_sum as f64 / deliveries as f64
    } else {
        f64::NAN
    };

    Ok(SimResult {
        mean_aoi,
        stderr_aoi,
        mean_system_time,
        throughput: deliveries as f64 / slots as f64,
        deliveries,
        system_time_hist,
        preemption_time_hist,
    })
}

/// FCFS-vs-pLGFS gap measured on coupled sample paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapMeasurement {
    /// `lambda * mean(D * Y)` over FCFS deliveries.
    pub lambda_mean_dy: f64,
    /// Standard error of `lambda_mean_dy` from batch means.
    pub stderr: f64,
    pub mean_dy: f64,
    /// Time average of `AoI_fcfs(t) - AoI_plgfs(t)`.
    pub slot_average_gap: f64,
    /// Smallest per-slot difference `AoI_fcfs(t) - AoI_plgfs(t)`.
    pub min_slot_difference: i64,
    pub deliveries: u64,
}

const GAP_BATCHES: usize = 50;

/// Runs FCFS and pLGFS side by side on the same Bernoulli arrivals and the
/// same channel path, and records for every FCFS delivery the product of the
/// inter-delivery time `D` and the preemption time `Y`.
pub fn measure_gap_decomposition(
    params: &ChannelParams,
    lambda: f64,
    slots: u64,
    seed: u64,
) -> Result<GapMeasurement> {
    let arrival = ArrivalModel::bernoulli(lambda)?;
    let mut env = Environment::new(params, &arrival, seed);
    let mut fcfs = Transmitter::new(Policy::Fcfs);
    let mut plgfs = Transmitter::new(Policy::Plgfs);
    let mut products: Vec<u64> = Vec::new();
    let mut pending: Option<(u64, u64)> = None; // (delivery slot, Y)
    let mut diff_sum: i64 = 0;
    let mut min_diff = i64::MAX;

    for t in 1..=slots {
        let diff = fcfs.aoi(t) as i64 - plgfs.aoi(t) as i64;
        diff_sum += diff;
        min_diff = min_diff.min(diff);
        let draw = env.draw();
        if draw.coin {
            fcfs.arrive(t);
            plgfs.arrive(t);
        }
        plgfs.transmit(t, draw.erased);
        if let Some(d) = fcfs.transmit(t, draw.erased) {
            if let Some((prev_slot, y)) = pending {
                products.push((d.slot - prev_slot) * y);
            }
            pending = Some((d.slot, d.preemption));
        }
    }

    let count = products.len();
    if count < GAP_BATCHES * 2 {
        return Err(AoiError::SimulationAborted(format!(
            "only {count} complete inter-delivery intervals; run more slots"
        )));
    }
    let mean_dy = products.iter().sum::<u64>() as f64 / count as f64;
    let batch = count / GAP_BATCHES;
    let batch_means: Vec<f64> = products
        .chunks_exact(batch)
        .take(GAP_BATCHES)
        .map(|c| c.iter().sum::<u64>() as f64 / c.len() as f64)
        .collect();
    let bm = batch_means.iter().sum::<f64>() / GAP_BATCHES as f64;
    let var =
        batch_means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (GAP_BATCHES as f64 - 1.0);
    Ok(GapMeasurement {
        lambda_mean_dy: lambda * mean_dy,
        stderr: lambda * (var / GAP_BATCHES as f64).sqrt(),
        mean_dy,
        slot_average_gap: diff_sum as f64 / slots as f64,
        min_slot_difference: min_diff,
        deliveries: count as u64 + 1,
    })
}
