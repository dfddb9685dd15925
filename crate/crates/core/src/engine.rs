//! Discrete-event core: simulation clock, ordered event queue and named RNG streams.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("cannot schedule event at t={at} s, clock is already at t={now} s")]
    InThePast { at: f64, now: f64 },
    #[error("invalid time value {0}")]
    InvalidTime(f64),
    #[error("uniform range is empty: lo={lo} > hi={hi}")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("invalid standard deviation {0}")]
    InvalidStdDev(f64),
}

/// Simulated time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(seconds: f64) -> Result<Self, EngineError> {
        if seconds.is_finite() && seconds >= 0.0 {
            // `+ 0.0` maps −0.0 to 0.0 so equality and ordering agree.
            Ok(SimTime(seconds + 0.0))
        } else {
            Err(EngineError::InvalidTime(seconds))
        }
    }

    /// Panics on negative or non-finite input; meant for literals and already-validated values.
    pub fn secs(seconds: f64) -> Self {
        Self::new(seconds).expect("valid simulation time")
    }

    pub fn as_secs(self) -> f64 {
        self.0
    }

    pub fn after(self, delay: f64) -> Self {
        Self::secs(self.0 + delay.max(0.0))
    }

    /// Integer second this instant falls into.
    pub fn whole_second(self) -> u64 {
        self.0.floor() as u64
    }
}

impl Eq for SimTime {}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.0)
    }
}

struct Scheduled<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // BinaryHeap is a max-heap; invert so the earliest (at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.cmp(&self.at).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Event queue plus clock. Events fire in `(fire_at, insertion seq)` order.
pub struct Engine<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Scheduled<E>>,
    executed: u64,
}

impl<E> Default for Engine<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Engine<E> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            executed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn executed(&self) -> u64 {
        self.executed
    }

    /// Enqueue `event` at absolute time `at`. Returns the insertion sequence number.
    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<u64, EngineError> {
        if at < self.now {
            return Err(EngineError::InThePast {
                at: at.as_secs(),
                now: self.now.as_secs(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Scheduled { at, seq, event });
        Ok(seq)
    }

    pub fn schedule_in(&mut self, delay: f64, event: E) -> Result<u64, EngineError> {
        if !delay.is_finite() || delay < 0.0 {
            return Err(EngineError::InvalidTime(delay));
        }
        self.schedule(self.now.after(delay), event)
    }

    /// Pops the next event due at or before `t_end`, advancing the clock to it.
    pub fn next_before(&mut self, t_end: SimTime) -> Option<(SimTime, u64, E)> {
        match self.queue.peek() {
            Some(head) if head.at <= t_end => {
                let Scheduled { at, seq, event } = self.queue.pop()?;
                debug_assert!(at >= self.now);
                self.now = at;
                self.executed += 1;
                Some((at, seq, event))
            }
            _ => None,
        }
    }

    /// Executes every event with `fire_at <= t_end`, then sets the clock to `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F)
    where
        F: FnMut(&mut Engine<E>, E),
    {
        while let Some((_, _, event)) = self.next_before(t_end) {
            handler(self, event);
        }
        if t_end > self.now {
            self.now = t_end;
        }
    }
}

/// Independent, reproducible random stream identified by `(master seed, label)`.
#[derive(Clone)]
pub struct RngStream {
    label: String,
    rng: ChaCha12Rng,
    draws: u64,
}

impl fmt::Debug for RngStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RngStream")
            .field("label", &self.label)
            .field("draws", &self.draws)
            .finish()
    }
}

impl RngStream {
    pub fn new(master_seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let mut hasher = Sha256::new();
        hasher.update(master_seed.to_le_bytes());
        hasher.update([0u8]);
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        RngStream {
            label,
            rng: ChaCha12Rng::from_seed(seed),
            draws: 0,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform draw in `[lo, hi)`; `lo == hi` returns `lo`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64, EngineError> {
        if !(lo <= hi) {
            return Err(EngineError::EmptyRange { lo, hi });
        }
        self.draws += 1;
        let u: f64 = self.rng.random();
        if lo == hi {
            return Ok(lo);
        }
        let v = lo + (hi - lo) * u;
        // Guard against rounding up to `hi` for huge ranges.
        Ok(if v >= hi {
            lo.max(hi - (hi - lo) * f64::EPSILON)
        } else {
            v
        })
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> Result<f64, EngineError> {
        if !(std_dev >= 0.0) || !std_dev.is_finite() {
            return Err(EngineError::InvalidStdDev(std_dev));
        }
        self.draws += 1;
        if std_dev == 0.0 {
            return Ok(mean);
        }
        let dist = Normal::new(mean, std_dev).map_err(|_| EngineError::InvalidStdDev(std_dev))?;
        Ok(dist.sample(&mut self.rng))
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index() on empty range");
        self.draws += 1;
        self.rng.random_range(0..n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect_order(schedule: &[(f64, &'static str)]) -> Vec<&'static str> {
        let mut engine = Engine::new();
        for &(t, name) in schedule {
            engine.schedule(SimTime::secs(t), name).unwrap();
        }
        let mut fired = Vec::new();
        engine.run_until(SimTime::secs(1000.0), |_, e| fired.push(e));
        fired
    }

    #[test]
    fn fires_in_time_order() {
        assert_eq!(collect_order(&[(5.0, "b"), (3.0, "a")]), vec!["a", "b"]);
    }

    #[test]
    fn ties_fire_in_insertion_order() {
        assert_eq!(
            collect_order(&[(7.0, "first"), (7.0, "second"), (7.0, "third")]),
            vec!["first", "second", "third"]
        );
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut engine: Engine<()> = Engine::new();
        engine.run_until(SimTime::secs(2.0), |_, _| {});
        assert_eq!(
            engine.schedule(SimTime::secs(1.0), ()),
            Err(EngineError::InThePast { at: 1.0, now: 2.0 })
        );
    }

    #[test]
    fn empty_queue_advances_clock() {
        let mut engine: Engine<()> = Engine::new();
        engine.run_until(SimTime::secs(200.0), |_, _| panic!("no events"));
        assert_eq!(engine.now(), SimTime::secs(200.0));
    }

    #[test]
    fn single_event_executes_once() {
        let mut engine = Engine::new();
        engine.schedule(SimTime::secs(50.0), 1u32).unwrap();
        let mut count = 0;
        engine.run_until(SimTime::secs(200.0), |eng, _| {
            assert_eq!(eng.now(), SimTime::secs(50.0));
            count += 1;
        });
        assert_eq!(count, 1);
        assert_eq!(engine.now(), SimTime::secs(200.0));
    }

    #[test]
    fn handler_can_schedule_follow_ups() {
        let mut engine = Engine::new();
        engine.schedule(SimTime::secs(1.0), 0u32).unwrap();
        let mut seen = Vec::new();
        engine.run_until(SimTime::secs(10.0), |eng, n| {
            seen.push((eng.now().as_secs(), n));
            if n < 3 {
                eng.schedule_in(2.0, n + 1).unwrap();
            }
        });
        assert_eq!(seen, vec![(1.0, 0), (3.0, 1), (5.0, 2), (7.0, 3)]);
    }

    #[test]
    fn events_beyond_horizon_stay_queued() {
        let mut engine = Engine::new();
        engine.schedule(SimTime::secs(250.0), ()).unwrap();
        engine.run_until(SimTime::secs(200.0), |_, _| panic!("beyond horizon"));
        assert_eq!(engine.pending(), 1);
    }

    #[test]
    fn uniform_degenerate_range() {
        let mut rng = RngStream::new(1, "traffic");
        assert_eq!(rng.uniform(3.0, 3.0).unwrap(), 3.0);
        assert!(rng.uniform(2.0, 1.0).is_err());
    }

    #[test]
    fn streams_are_reproducible() {
        let a = RngStream::new(1, "traffic").uniform(0.0, 1.0).unwrap();
        let b = RngStream::new(1, "traffic").uniform(0.0, 1.0).unwrap();
        assert_eq!(a, b);
        let c = RngStream::new(1, "mobility").uniform(0.0, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn streams_do_not_interfere() {
        let mut traffic = RngStream::new(9, "traffic");
        let mut mobility = RngStream::new(9, "mobility");
        let reference: Vec<f64> = {
            let mut m = RngStream::new(9, "mobility");
            (0..10).map(|_| m.uniform(0.0, 1.0).unwrap()).collect()
        };
        let mut interleaved = Vec::new();
        for _ in 0..10 {
            traffic.uniform(0.0, 1.0).unwrap();
            traffic.uniform(0.0, 1.0).unwrap();
            interleaved.push(mobility.uniform(0.0, 1.0).unwrap());
        }
        assert_eq!(reference, interleaved);
    }

    #[test]
    fn uniform_mean_is_centered() {
        let mut rng = RngStream::new(42, "traffic");
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = rng.uniform(0.0, 1.0).unwrap();
            assert!((0.0..1.0).contains(&v));
            sum += v;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.01);
    }
}
