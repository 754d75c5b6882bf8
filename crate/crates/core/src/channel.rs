//! The Gilbert-Elliott erasure channel.
//!
//! A two-state Markov chain over {Good, Bad}. It moves Good -> Bad with
//! probability `p` and Bad -> Good with probability `r` per slot. A packet
//! sent in a slot is erased with the erasure probability of that slot's state.

use rand::Rng;
use serde::Serialize;

use crate::error::{AoiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ChannelState {
    Good,
    Bad,
}

impl ChannelState {
    pub const ALL: [ChannelState; 2] = [ChannelState::Good, ChannelState::Bad];

    pub fn flip(self) -> Self {
        match self {
            ChannelState::Good => ChannelState::Bad,
            ChannelState::Bad => ChannelState::Good,
        }
    }

    pub fn is_good(self) -> bool {
        matches!(self, ChannelState::Good)
    }

    fn index(self) -> usize {
        match self {
            ChannelState::Good => 0,
            ChannelState::Bad => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelParams {
    p: f64,
    r: f64,
    pe_good: f64,
    pe_bad: f64,
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(AoiError::Domain(format!(
            "{name} = {v} is not a probability"
        )))
    }
}

impl ChannelParams {
    /// Builds a channel with arbitrary per-state erasure probabilities.
    pub fn new(p: f64, r: f64, pe_good: f64, pe_bad: f64) -> Result<Self> {
        check_probability("p", p)?;
        check_probability("r", r)?;
        check_probability("pe_good", pe_good)?;
        check_probability("pe_bad", pe_bad)?;
        if p + r <= 0.0 {
            return Err(AoiError::DegenerateChain);
        }
        Ok(Self {
            p,
            r,
            pe_good,
            pe_bad,
        })
    }

    /// The on/off channel `GE(p, r)`: never erases in Good, always in Bad.
    pub fn on_off(p: f64, r: f64) -> Result<Self> {
        Self::new(p, r, 0.0, 1.0)
    }

    /// Symmetric on/off channel with memory `eta`: `p = r = (1 - eta) / 2`.
    pub fn symmetric(eta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(AoiError::Domain(format!(
                "channel memory eta = {eta} must lie in [0, 1)"
            )));
        }
        let p = (1.0 - eta) / 2.0;
        Self::on_off(p, p)
    }

    /// Replaces the erasure probabilities, keeping the state dynamics.
    pub fn with_erasures(self, pe_good: f64, pe_bad: f64) -> Result<Self> {
        Self::new(self.p, self.r, pe_good, pe_bad)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn pe_good(&self) -> f64 {
        self.pe_good
    }

    pub fn pe_bad(&self) -> f64 {
        self.pe_bad
    }

    /// Channel memory `1 - p - r`. Negative for anti-persistent channels.
    pub fn memory(&self) -> f64 {
        1.0 - self.p - self.r
    }

    /// Long-run fraction of slots in (Good, Bad).
    pub fn stationary(&self) -> (f64, f64) {
        let total = self.p + self.r;
        (self.r / total, self.p / total)
    }

    pub fn average_erasure(&self) -> f64 {
        let (pi_good, pi_bad) = self.stationary();
        pi_good * self.pe_good + pi_bad * self.pe_bad
    }

    pub fn erasure(&self, state: ChannelState) -> f64 {
        match state {
            ChannelState::Good => self.pe_good,
            ChannelState::Bad => self.pe_bad,
        }
    }

    /// One-step transition probability.
    pub fn transition(&self, from: ChannelState, to: ChannelState) -> f64 {
        let leave = match from {
            ChannelState::Good => self.p,
            ChannelState::Bad => self.r,
        };
        if from == to {
            1.0 - leave
        } else {
            leave
        }
    }

    /// True for the 0/1 erasure model the closed forms are derived under.
    pub fn is_on_off(&self) -> bool {
        self.pe_good == 0.0 && self.pe_bad == 1.0
    }

    pub(crate) fn require_on_off(&self) -> Result<()> {
        if self.is_on_off() {
            Ok(())
        } else {
            Err(AoiError::UnsupportedErasure {
                pe_good: self.pe_good,
                pe_bad: self.pe_bad,
            })
        }
    }

    pub(crate) fn require_recurrent_good(&self) -> Result<()> {
        if self.r > 0.0 {
            Ok(())
        } else {
            Err(AoiError::Divergent)
        }
    }

    /// Advances the channel by one slot.
    ///
    /// The erasure draw uses the erasure probability of `state`, the state
    /// the slot is transmitted in; `next` is the state of the following slot.
    pub fn sample_step<R: Rng + ?Sized>(
        &self,
        state: ChannelState,
        rng: &mut R,
    ) -> (ChannelState, bool) {
        let leave = match state {
            ChannelState::Good => self.p,
            ChannelState::Bad => self.r,
        };
        let next = if rng.gen_bool(leave) {
            state.flip()
        } else {
            state
        };
        let erased = rng.gen_bool(self.erasure(state));
        (next, erased)
    }

    /// Draws a state from the stationary distribution.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelState {
        let (pi_good, _) = self.stationary();
        if rng.gen_bool(pi_good) {
            ChannelState::Good
        } else {
            ChannelState::Bad
        }
    }

    /// The good-state-count distribution over a window of `horizon` slots.
    ///
    /// Entry `(n, exit | entry)` is the probability that slots `1..=horizon`
    /// contain exactly `n` Good slots and slot `horizon + 1` is in `exit`,
    /// given slot 1 is in `entry`. Slot 1 is counted, slot `horizon + 1` is not.
    pub fn good_count_distribution(&self, horizon: usize) -> Result<CountDistTable> {
        if horizon < 1 {
            return Err(AoiError::Domain("window length K must be >= 1".into()));
        }
        // cur[entry][state][n]: after k slots, `state` is slot k+1's state.
        let mut cur = [
            [vec![0.0; horizon + 1], vec![0.0; horizon + 1]],
            [vec![0.0; horizon + 1], vec![0.0; horizon + 1]],
        ];
        for entry in ChannelState::ALL {
            let n = usize::from(entry.is_good());
            for exit in ChannelState::ALL {
                cur[entry.index()][exit.index()][n] = self.transition(entry, exit);
            }
        }
        for k in 2..=horizon {
            let mut next = cur.clone();
            for entry in ChannelState::ALL {
                for exit in ChannelState::ALL {
                    let row = &mut next[entry.index()][exit.index()];
                    for n in 0..=k {
                        let mut acc = 0.0;
                        for mid in ChannelState::ALL {
                            let shift = usize::from(mid.is_good());
                            if n >= shift {
                                acc += cur[entry.index()][mid.index()][n - shift]
                                    * self.transition(mid, exit);
                            }
                        }
                        row[n] = acc;
                    }
                }
            }
            cur = next;
        }
        Ok(CountDistTable {
            horizon,
            entries: cur,
        })
    }
}

/// Dense table of `P(K, n, exit | entry)` for `n` in `0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistTable {
    horizon: usize,
    // [entry][exit][n]
    entries: [[Vec<f64>; 2]; 2],
}

impl CountDistTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `P(K, n, exit | entry)`; zero for `n > K`.
    pub fn prob(&self, n: usize, exit: ChannelState, entry: ChannelState) -> f64 {
        self.entries[entry.index()][exit.index()]
            .get(n)
            .copied()
            .unwrap_or(0.0)
    }

    /// All counts `0..=K` for one (entry, exit) pair.
    pub fn row(&self, exit: ChannelState, entry: ChannelState) -> &[f64] {
        &self.entries[entry.index()][exit.index()]
    }

    /// `sum_n z^n P(K, n, exit | entry)`, evaluated by Horner's rule.
    pub fn generating(&self, exit: ChannelState, entry: ChannelState, z: f64) -> f64 {
        self.row(exit, entry)
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * z + c)
    }

    /// `sum_{j >= from} P(K, j, exit | entry)`.
    pub fn tail(&self, from: usize, exit: ChannelState, entry: ChannelState) -> f64 {
        self.row(exit, entry).iter().skip(from).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::ChannelState::{Bad, Good};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn symmetric_construction() {
        for (eta, expected) in [(0.0, 0.5), (0.5, 0.25), (0.9, 0.05)] {
            let ch = ChannelParams::symmetric(eta).unwrap();
            assert!(close(ch.p(), expected, 1e-15));
            assert!(close(ch.r(), expected, 1e-15));
            assert_eq!((ch.pe_good(), ch.pe_bad()), (0.0, 1.0));
        }
        assert!(matches!(
            ChannelParams::symmetric(1.0),
            Err(AoiError::Domain(_))
        ));
        assert!(ChannelParams::symmetric(-0.1).is_err());
    }

    #[test]
    fn memory_values() {
        let cases = [((0.5, 0.5), 0.0), ((0.25, 0.25), 0.5), ((0.3, 0.6), 0.1)];
        for ((p, r), eta) in cases {
            assert!(close(
                ChannelParams::on_off(p, r).unwrap().memory(),
                eta,
                1e-15
            ));
        }
        // Anti-persistent channels are accepted.
        assert!(ChannelParams::on_off(0.8, 0.7).unwrap().memory() < 0.0);
    }

    #[test]
    fn memory_of_symmetric_roundtrips() {
        for k in 0..100 {
            let eta = k as f64 / 100.0;
            let ch = ChannelParams::symmetric(eta).unwrap();
            assert!(close(ch.memory(), eta, 1e-15), "eta = {eta}");
        }
    }

    #[test]
    fn stationary_values() {
        let cases = [
            ((0.5, 0.5), (0.5, 0.5)),
            ((0.25, 0.75), (0.75, 0.25)),
            ((0.1, 0.4), (0.8, 0.2)),
        ];
        for ((p, r), (g, b)) in cases {
            let (pg, pb) = ChannelParams::on_off(p, r).unwrap().stationary();
            assert!(close(pg, g, 1e-15) && close(pb, b, 1e-15));
        }
        assert_eq!(
            ChannelParams::on_off(0.0, 0.0),
            Err(AoiError::DegenerateChain)
        );
    }

    #[test]
    fn average_erasure_values() {
        let on_off = |p, r| ChannelParams::on_off(p, r).unwrap();
        assert!(close(on_off(0.5, 0.5).average_erasure(), 0.5, 1e-15));
        assert!(close(on_off(0.25, 0.75).average_erasure(), 0.25, 1e-15));
        let ch = ChannelParams::new(0.5, 0.5, 0.2, 0.8).unwrap();
        assert!(close(ch.average_erasure(), 0.5, 1e-15));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ChannelParams::new(1.1, 0.5, 0.0, 1.0).is_err());
        assert!(ChannelParams::new(0.1, -0.5, 0.0, 1.0).is_err());
        assert!(ChannelParams::new(0.1, 0.5, 0.0, 1.5).is_err());
        assert!(ChannelParams::new(0.1, 0.5, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn sample_step_absorbing_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let stay_good = ChannelParams::on_off(0.0, 0.3).unwrap();
        let leave_bad = ChannelParams::on_off(0.4, 1.0).unwrap();
        for _ in 0..1000 {
            let (next, erased) = stay_good.sample_step(Good, &mut rng);
            assert_eq!(next, Good);
            assert!(!erased);
            let (next, erased) = leave_bad.sample_step(Bad, &mut rng);
            assert_eq!(next, Good);
            assert!(erased, "on/off channel always erases in Bad");
        }
    }

    #[test]
    fn sample_step_transition_frequency() {
        let ch = ChannelParams::on_off(0.5, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let flips = (0..draws)
            .filter(|_| ch.sample_step(Good, &mut rng).0 == Bad)
            .count();
        let freq = flips as f64 / draws as f64;
        let sigma = (0.25 / draws as f64).sqrt();
        assert!((freq - 0.5).abs() <= 3.0 * sigma, "freq = {freq}");
    }

    #[test]
    fn count_table_base_case() {
        let t = ChannelParams::on_off(0.5, 0.5)
            .unwrap()
            .good_count_distribution(1)
            .unwrap();
        assert!(close(t.prob(1, Good, Good), 0.5, 1e-15));
        assert!(close(t.prob(1, Bad, Good), 0.5, 1e-15));
        assert!(close(t.prob(0, Good, Bad), 0.5, 1e-15));
        assert!(close(t.prob(0, Bad, Bad), 0.5, 1e-15));
        assert_eq!(t.prob(0, Good, Good), 0.0);
        assert_eq!(t.prob(1, Bad, Bad), 0.0);
    }

    #[test]
    fn count_table_memoryless_k3() {
        let t = ChannelParams::on_off(0.5, 0.5)
            .unwrap()
            .good_count_distribution(3)
            .unwrap();
        for (i, expected) in [(1, 0.125), (2, 0.25), (3, 0.125)] {
            assert!(close(t.prob(i, Good, Good), expected, 1e-15));
        }
        assert_eq!(t.prob(0, Good, Good), 0.0);
    }

    #[test]
    fn count_table_rejects_zero_horizon() {
        let ch = ChannelParams::on_off(0.5, 0.5).unwrap();
        assert!(matches!(
            ch.good_count_distribution(0),
            Err(AoiError::Domain(_))
        ));
    }

    #[test]
    fn generating_and_tail() {
        let t = ChannelParams::on_off(0.3, 0.6)
            .unwrap()
            .good_count_distribution(4)
            .unwrap();
        let z: f64 = 0.37;
        let direct: f64 = (0..=4)
            .map(|n| z.powi(n as i32) * t.prob(n, Bad, Good))
            .sum();
        assert!(close(t.generating(Bad, Good, z), direct, 1e-15));
        let tail: f64 = (2..=4).map(|n| t.prob(n, Good, Bad)).sum();
        assert!(close(t.tail(2, Good, Bad), tail, 1e-15));
        assert_eq!(t.tail(9, Good, Bad), 0.0);
    }
}
