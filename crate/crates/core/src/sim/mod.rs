//! Monte Carlo simulation of the LAT protocol.
//!
//! Two engines share one accumulator:
//!
//! * [`SimMode::SampleLevel`] draws a continuous PU trace and, for every
//!   slot, the energy statistic of `ns` complex Gaussian samples whose
//!   variance follows the instantaneous PU and SU activity. Slots in which
//!   the PU changes state mix the two variances by position.
//! * [`SimMode::SlotStatistical`] runs the per-slot PU chain and draws each
//!   sensing decision as a biased coin with the closed-form error
//!   probabilities. Time is booked in whole slots, plus the head of every
//!   PU burst (collision) and the tail of every burst (waste) lost inside
//!   the transition slot.
//!
//! The SU starts silent and transmits in a slot iff the previous slot was
//! judged idle.

mod sample;
mod slot;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sensing::{error_probs, Hypothesis, RadioParams, ThresholdPair};
use crate::traffic::PuTraffic;

pub use sample::{calibrate_detector, DetectorRate};

pub const MIN_SLOTS: u64 = 1000;
/// Number of consecutive-slot batches used for standard errors.
pub const BATCHES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimMode {
    SampleLevel,
    SlotStatistical,
}

impl std::str::FromStr for SimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sample_level" | "sample-level" | "sample" => Ok(SimMode::SampleLevel),
            "slot_statistical" | "slot-statistical" | "slot" => Ok(SimMode::SlotStatistical),
            other => Err(Error::invalid(
                "mode",
                format!("expected `sample_level` or `slot_statistical`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for SimMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SimMode::SampleLevel => "sample_level",
            SimMode::SlotStatistical => "slot_statistical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub traffic: PuTraffic,
    pub radio: RadioParams,
    pub thresholds: ThresholdPair,
    slots: u64,
    pub seed: u64,
    /// Generator stream; give each member of a sweep its own.
    pub stream: u64,
    pub mode: SimMode,
}

impl SimConfig {
    pub fn new(
        traffic: PuTraffic,
        radio: RadioParams,
        thresholds: ThresholdPair,
        slots: u64,
        seed: u64,
        mode: SimMode,
    ) -> Result<Self> {
        if slots < MIN_SLOTS {
            return Err(Error::invalid(
                "slots",
                format!("need at least {MIN_SLOTS} slots, got {slots}"),
            ));
        }
        Ok(Self {
            traffic,
            radio,
            thresholds,
            slots,
            seed,
            stream: 0,
            mode,
        })
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn slots(&self) -> u64 {
        self.slots
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Occupied/total counts of steady-slot sensing decisions under one hypothesis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecisionTally {
    pub trials: u64,
    pub occupied: u64,
}

impl DecisionTally {
    pub fn occupied_rate(&self) -> f64 {
        self.occupied as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub mode: SimMode,
    pub slots: u64,
    pub slot_len: f64,
    pub collision_time: f64,
    pub waste_time: f64,
    pub pu_busy_time: f64,
    pub pu_idle_time: f64,
    pub su_tx_time: f64,
    /// SU transmit time overlapping PU idle time.
    pub useful_time: f64,
    /// `log2(1 + gamma_t)`
    pub rate: f64,
    pub empirical_pc: f64,
    pub empirical_pw: f64,
    /// Rate times the fraction of PU idle time the SU used.
    pub throughput: f64,
    /// Rate times useful time over the whole simulated time.
    pub throughput_per_total: f64,
    pub pc_se: f64,
    pub pw_se: f64,
    pub throughput_se: f64,
    /// Steady-slot decisions indexed by [`Hypothesis::index`].
    pub decisions: [DecisionTally; 4],
    /// Fraction of consecutive steady-idle slot pairs in which the SU's
    /// activity changed.
    pub idle_toggle_rate: f64,
}

impl SimMetrics {
    pub fn decisions_for(&self, h: Hypothesis) -> DecisionTally {
        self.decisions[h.index()]
    }
}

/// One slot as seen by the accumulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub su_active: bool,
    pub occupied: bool,
    pub busy_time: f64,
    pub collision: f64,
    pub waste: f64,
    pub useful: f64,
    /// PU state if it did not change inside the slot.
    pub steady_busy: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    collision: f64,
    waste: f64,
    busy: f64,
    idle: f64,
    tx: f64,
    useful: f64,
}

impl Sums {
    fn add(&mut self, o: &Sums) {
        self.collision += o.collision;
        self.waste += o.waste;
        self.busy += o.busy;
        self.idle += o.idle;
        self.tx += o.tx;
        self.useful += o.useful;
    }
}

struct Accumulator {
    slot_len: f64,
    per_batch: u64,
    in_batch: u64,
    cur: Sums,
    batches: Vec<Sums>,
    decisions: [DecisionTally; 4],
    prev: Option<(bool, Option<bool>)>,
    idle_pairs: u64,
    idle_toggles: u64,
    trace: Option<Vec<SlotRecord>>,
    trace_cap: usize,
}

impl Accumulator {
    fn new(cfg: &SimConfig, trace_cap: Option<usize>) -> Self {
        Self {
            slot_len: cfg.traffic.slot(),
            per_batch: cfg.slots.div_ceil(BATCHES),
            in_batch: 0,
            cur: Sums::default(),
            batches: Vec::with_capacity(BATCHES as usize),
            decisions: [DecisionTally::default(); 4],
            prev: None,
            idle_pairs: 0,
            idle_toggles: 0,
            trace: trace_cap.map(Vec::with_capacity),
            trace_cap: trace_cap.unwrap_or(0),
        }
    }

    fn push(&mut self, s: SlotRecord) {
        let t = self.slot_len;
        self.cur.add(&Sums {
            collision: s.collision,
            waste: s.waste,
            busy: s.busy_time,
            idle: t - s.busy_time,
            tx: if s.su_active { t } else { 0.0 },
            useful: s.useful,
        });
        if let Some(busy) = s.steady_busy {
            let d = &mut self.decisions[Hypothesis::new(s.su_active, busy).index()];
            d.trials += 1;
            d.occupied += u64::from(s.occupied);
        }
        if let Some((prev_active, Some(false))) = self.prev {
            if s.steady_busy == Some(false) {
                self.idle_pairs += 1;
                self.idle_toggles += u64::from(prev_active != s.su_active);
            }
        }
        self.prev = Some((s.su_active, s.steady_busy));
        if let Some(tr) = self.trace.as_mut() {
            if tr.len() < self.trace_cap {
                tr.push(s);
            }
        }
        self.in_batch += 1;
        if self.in_batch == self.per_batch {
            self.batches.push(std::mem::take(&mut self.cur));
            self.in_batch = 0;
        }
    }

    fn finish(mut self, cfg: &SimConfig) -> (SimMetrics, Vec<SlotRecord>) {
        if self.in_batch > 0 {
            self.batches.push(std::mem::take(&mut self.cur));
        }
        let mut tot = Sums::default();
        for b in &self.batches {
            tot.add(b);
        }
        let rate = cfg.radio.gamma_t().ln_1p() / std::f64::consts::LN_2;
        let pc = tot.collision / tot.busy;
        let pw = tot.waste / tot.idle;
        let util = tot.useful / tot.idle;
        let metrics = SimMetrics {
            mode: cfg.mode,
            slots: cfg.slots,
            slot_len: self.slot_len,
            collision_time: tot.collision,
            waste_time: tot.waste,
            pu_busy_time: tot.busy,
            pu_idle_time: tot.idle,
            su_tx_time: tot.tx,
            useful_time: tot.useful,
            rate,
            empirical_pc: pc,
            empirical_pw: pw,
            throughput: rate * util,
            throughput_per_total: rate * tot.useful / (cfg.slots as f64 * self.slot_len),
            pc_se: ratio_se(&self.batches, |b| (b.collision, b.busy)),
            pw_se: ratio_se(&self.batches, |b| (b.waste, b.idle)),
            throughput_se: rate * ratio_se(&self.batches, |b| (b.useful, b.idle)),
            decisions: self.decisions,
            idle_toggle_rate: self.idle_toggles as f64 / self.idle_pairs as f64,
        };
        (metrics, self.trace.unwrap_or_default())
    }
}

/// Batch-means standard error of `sum(x) / sum(y)` (delta method).
fn ratio_se(batches: &[Sums], f: impl Fn(&Sums) -> (f64, f64)) -> f64 {
    let n = batches.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let xy: Vec<(f64, f64)> = batches.iter().map(f).collect();
    let sx: f64 = xy.iter().map(|p| p.0).sum();
    let sy: f64 = xy.iter().map(|p| p.1).sum();
    let r = sx / sy;
    let ybar = sy / n;
    let ss: f64 = xy.iter().map(|(x, y)| (x - r * y).powi(2)).sum();
    (ss / (n * (n - 1.0))).sqrt() / ybar
}

pub fn run(cfg: &SimConfig) -> SimMetrics {
    run_inner(cfg, None).0
}

/// Runs and also returns the first `keep` slot records.
pub fn run_traced(cfg: &SimConfig, keep: usize) -> (SimMetrics, Vec<SlotRecord>) {
    run_inner(cfg, Some(keep))
}

fn run_inner(cfg: &SimConfig, keep: Option<usize>) -> (SimMetrics, Vec<SlotRecord>) {
    let mut rng = cfg.rng();
    let mut acc = Accumulator::new(cfg, keep);
    match cfg.mode {
        SimMode::SampleLevel => sample::run(cfg, &mut rng, &mut acc),
        SimMode::SlotStatistical => slot::run(cfg, &error_probs(&cfg.radio, &cfg.thresholds), &mut rng, &mut acc),
    }
    acc.finish(cfg)
}

/// Runs every config, in parallel, returning metrics in input order.
pub fn run_batch(cfgs: &[SimConfig]) -> Result<Vec<SimMetrics>> {
    if cfgs.is_empty() {
        return Err(Error::invalid("cfgs", "batch must not be empty"));
    }
    Ok(cfgs.par_iter().map(run).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::thresholds_from_pm;

    fn cfg(mode: SimMode, slots: u64, seed: u64) -> SimConfig {
        let traffic = PuTraffic::from_probs(1.0 / 500.0, 6.0 / 500.0, 1.0).unwrap();
        let radio = RadioParams::new(300, 10f64.powf(-0.5), 0.01, 1.0, 10.0, 10.0).unwrap();
        let th = thresholds_from_pm(0.094, &radio).unwrap();
        SimConfig::new(traffic, radio, th, slots, seed, mode).unwrap()
    }

    #[test]
    fn rejects_short_runs() {
        let c = cfg(SimMode::SlotStatistical, 1000, 1);
        assert!(SimConfig::new(c.traffic, c.radio, c.thresholds, 999, 1, c.mode).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        for mode in [SimMode::SampleLevel, SimMode::SlotStatistical] {
            let a = run(&cfg(mode, 20_000, 5));
            let b = run(&cfg(mode, 20_000, 5));
            assert_eq!(a, b);
            assert_ne!(a, run(&cfg(mode, 20_000, 6)));
            assert_ne!(a, run(&cfg(mode, 20_000, 5).with_stream(1)));
        }
    }

    #[test]
    fn time_is_conserved() {
        for mode in [SimMode::SampleLevel, SimMode::SlotStatistical] {
            let m = run(&cfg(mode, 50_000, 2));
            let total = m.slots as f64 * m.slot_len;
            assert!((m.pu_busy_time + m.pu_idle_time - total).abs() <= m.slot_len, "{mode}");
            assert!((0.0..=1.0).contains(&m.empirical_pc));
            assert!((0.0..=1.0).contains(&m.empirical_pw));
        }
    }

    #[test]
    fn su_follows_previous_decision() {
        for mode in [SimMode::SampleLevel, SimMode::SlotStatistical] {
            let (_, tr) = run_traced(&cfg(mode, 30_000, 9), 30_000);
            assert_eq!(tr.len(), 30_000);
            assert!(!tr[0].su_active);
            for w in tr.windows(2) {
                assert_eq!(w[1].su_active, !w[0].occupied);
            }
        }
    }

    #[test]
    fn batch_preserves_order_and_isolation() {
        let cfgs: Vec<SimConfig> = (0..4)
            .map(|i| cfg(SimMode::SlotStatistical, 10_000, 3).with_stream(i))
            .collect();
        let fwd = run_batch(&cfgs).unwrap();
        let mut rev_cfgs = cfgs.clone();
        rev_cfgs.reverse();
        let mut rev = run_batch(&rev_cfgs).unwrap();
        rev.reverse();
        assert_eq!(fwd, rev);
        assert_eq!(run_batch(&cfgs[..1]).unwrap()[0], run(&cfgs[0]));
        assert!(run_batch(&[]).is_err());
    }

    #[test]
    fn ratio_se_of_constant_ratio_is_zero() {
        let b: Vec<Sums> = (1..=10)
            .map(|i| Sums {
                collision: f64::from(i),
                busy: 4.0 * f64::from(i),
                ..Sums::default()
            })
            .collect();
        assert!(ratio_se(&b, |s| (s.collision, s.busy)).abs() < 1e-15);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [SimMode::SampleLevel, SimMode::SlotStatistical] {
            assert_eq!(m.to_string().parse::<SimMode>().unwrap(), m);
        }
        assert!("fast".parse::<SimMode>().is_err());
    }
}
