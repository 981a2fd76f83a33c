//! Primary-user traffic: an alternating busy/idle process with exponential
//! holding times, its per-slot transition probabilities, and sampled traces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

/// Mean idle/busy holding times of the primary user and the secondary slot length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuTraffic {
    tau0: f64,
    tau1: f64,
    slot: f64,
}

impl PuTraffic {
    /// Builds the traffic model from mean idle time `tau0`, mean busy time
    /// `tau1` and slot length `slot`, all in seconds.
    ///
    /// Mean holding times shorter than one slot are rejected: the per-slot
    /// chain is only meaningful when the primary user changes state slowly
    /// compared with the sensing slot.
    pub fn new(tau0: f64, tau1: f64, slot: f64) -> Result<Self> {
        for (name, v) in [("tau0", tau0), ("tau1", tau1), ("slot", slot)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if tau0 / slot < 1.0 {
            return Err(Error::invalid("tau0", "mean idle time shorter than one slot"));
        }
        if tau1 / slot < 1.0 {
            return Err(Error::invalid("tau1", "mean busy time shorter than one slot"));
        }
        Ok(Self { tau0, tau1, slot })
    }

    /// Inverts the per-slot arrival/departure probabilities back into mean
    /// holding times for the given slot length.
    pub fn from_probs(mu: f64, nu: f64, slot: f64) -> Result<Self> {
        let probs = TransitionProbs::new(mu, nu)?;
        let tau0 = slot / -(-probs.mu()).ln_1p();
        let tau1 = slot / -(-probs.nu()).ln_1p();
        Self::new(tau0, tau1, slot)
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    pub fn slot(&self) -> f64 {
        self.slot
    }

    /// Mean idle duration in slots.
    pub fn m0(&self) -> f64 {
        self.tau0 / self.slot
    }

    /// Mean busy duration in slots.
    pub fn m1(&self) -> f64 {
        self.tau1 / self.slot
    }

    /// Long-run fraction of time the primary user is busy.
    pub fn busy_fraction(&self) -> f64 {
        self.tau1 / (self.tau0 + self.tau1)
    }

    pub fn transition_probs(&self) -> TransitionProbs {
        TransitionProbs {
            mu: -(-self.slot / self.tau0).exp_m1(),
            nu: -(-self.slot / self.tau1).exp_m1(),
        }
    }
}

/// Per-slot probabilities that the primary user arrives (`mu`) or leaves (`nu`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionProbs {
    mu: f64,
    nu: f64,
}

impl TransitionProbs {
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::invalid("mu", format!("must lie in (0, 1), got {mu}")));
        }
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::invalid("nu", format!("must lie in (0, 1), got {nu}")));
        }
        Ok(Self { mu, nu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `nu / mu`.
    pub fn r(&self) -> f64 {
        self.nu / self.mu
    }

    /// `1 + r - 1/mu`.
    pub fn delta(&self) -> f64 {
        1.0 + self.r() - 1.0 / self.mu
    }

    /// Stationary probability that a slot is busy, `mu / (mu + nu)`.
    pub fn busy_probability(&self) -> f64 {
        self.mu / (self.mu + self.nu)
    }

    pub fn idle_probability(&self) -> f64 {
        self.nu / (self.mu + self.nu)
    }
}

pub fn transition_probs(t: &PuTraffic) -> TransitionProbs {
    t.transition_probs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PuState {
    Idle,
    Busy,
}

impl PuState {
    pub fn is_busy(self) -> bool {
        matches!(self, PuState::Busy)
    }

    pub fn flip(self) -> Self {
        match self {
            PuState::Idle => PuState::Busy,
            PuState::Busy => PuState::Idle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub state: PuState,
    pub duration: f64,
}

/// A realized busy/idle timeline. States strictly alternate and the
/// durations sum to `total`.
#[derive(Debug, Clone, PartialEq)]
pub struct PuTrace {
    intervals: Vec<Interval>,
    total: f64,
}

impl PuTrace {
    /// Builds a trace from explicit intervals, merging nothing: adjacent
    /// intervals must alternate and every duration must be positive.
    pub fn from_intervals(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::invalid("intervals", "trace must not be empty"));
        }
        for w in intervals.windows(2) {
            if w[0].state == w[1].state {
                return Err(Error::invalid("intervals", "states must alternate"));
            }
        }
        if let Some(bad) = intervals.iter().find(|i| !(i.duration > 0.0 && i.duration.is_finite())) {
            return Err(Error::invalid(
                "intervals",
                format!("non-positive duration {}", bad.duration),
            ));
        }
        let total = intervals.iter().map(|i| i.duration).sum();
        Ok(Self { intervals, total })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn busy_time(&self) -> f64 {
        self.intervals
            .iter()
            .filter(|i| i.state.is_busy())
            .map(|i| i.duration)
            .sum()
    }

    /// Lazily cuts the trace into consecutive slots of length `slot`.
    pub fn slots(&self, slot: f64) -> SlotIter<'_> {
        let n = (self.total / slot - 1e-9).ceil().max(0.0) as u64;
        SlotIter {
            trace: self,
            slot,
            k: 0,
            n,
            idx: 0,
            start: 0.0,
        }
    }
}

/// Samples a trace of length `total` seconds. The initial state is drawn
/// from the stationary distribution so no burn-in is needed.
pub fn sample_trace(t: &PuTraffic, total: f64, seed: u64) -> Result<PuTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_trace_with(t, total, &mut rng)
}

pub(crate) fn sample_trace_with<R: Rng + ?Sized>(t: &PuTraffic, total: f64, rng: &mut R) -> Result<PuTrace> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::invalid("total", format!("must be finite and > 0, got {total}")));
    }
    let idle = Exp::new(1.0 / t.tau0).expect("tau0 validated");
    let busy = Exp::new(1.0 / t.tau1).expect("tau1 validated");
    let mut state = if rng.random::<f64>() < t.busy_fraction() {
        PuState::Busy
    } else {
        PuState::Idle
    };
    let mut intervals = Vec::new();
    let mut elapsed = 0.0;
    while elapsed < total {
        let d = match state {
            PuState::Idle => idle.sample(rng),
            PuState::Busy => busy.sample(rng),
        };
        if d <= 0.0 {
            continue;
        }
        let d = d.min(total - elapsed);
        intervals.push(Interval { state, duration: d });
        elapsed += d;
        state = state.flip();
    }
    Ok(PuTrace { intervals, total })
}

/// Occupancy of one secondary slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOccupancy {
    /// Busy time inside the slot divided by the slot length.
    pub busy_fraction: f64,
    /// Primary-user state at the start of the slot.
    pub start: PuState,
    /// Offsets, as fractions of the slot, at which the state flips.
    pub toggles: Vec<f64>,
}

impl SlotOccupancy {
    /// True when the primary user does not change state inside the slot.
    pub fn is_steady(&self) -> bool {
        self.toggles.is_empty()
    }

    /// Primary-user state at fractional position `pos` in [0, 1).
    pub fn state_at(&self, pos: f64) -> PuState {
        let flips = self.toggles.iter().take_while(|&&t| t <= pos).count();
        if flips % 2 == 0 {
            self.start
        } else {
            self.start.flip()
        }
    }
}

pub struct SlotIter<'a> {
    trace: &'a PuTrace,
    slot: f64,
    k: u64,
    n: u64,
    idx: usize,
    start: f64,
}

impl Iterator for SlotIter<'_> {
    type Item = SlotOccupancy;

    fn next(&mut self) -> Option<SlotOccupancy> {
        if self.k >= self.n {
            return None;
        }
        let iv = &self.trace.intervals;
        let lo = self.k as f64 * self.slot;
        let hi = lo + self.slot;
        self.k += 1;

        while self.idx < iv.len() && self.start + iv[self.idx].duration <= lo {
            self.start += iv[self.idx].duration;
            self.idx += 1;
        }
        if self.idx >= iv.len() {
            return Some(SlotOccupancy {
                busy_fraction: 0.0,
                start: PuState::Idle,
                toggles: Vec::new(),
            });
        }

        let mut busy = 0.0;
        let mut toggles = Vec::new();
        let (mut j, mut s) = (self.idx, self.start);
        while j < iv.len() && s < hi {
            let e = s + iv[j].duration;
            if iv[j].state.is_busy() {
                busy += e.min(hi) - s.max(lo);
            }
            if e < hi && j + 1 < iv.len() {
                toggles.push((e - lo) / self.slot);
            }
            s = e;
            j += 1;
        }
        Some(SlotOccupancy {
            busy_fraction: (busy / self.slot).clamp(0.0, 1.0),
            start: iv[self.idx].state,
            toggles,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.n - self.k) as usize;
        (left, Some(left))
    }
}

pub fn slotize(trace: &PuTrace, slot: f64) -> Result<Vec<SlotOccupancy>> {
    if !(slot > 0.0 && slot.is_finite()) {
        return Err(Error::invalid("slot", format!("must be finite and > 0, got {slot}")));
    }
    Ok(trace.slots(slot).collect())
}
