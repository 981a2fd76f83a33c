use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;

use super::{Accumulator, SimConfig, SlotRecord};
use crate::error::{Error, Result};
use crate::sensing::{error_probs, hypothesis_stats, Hypothesis, RadioParams, ThresholdPair};
use crate::traffic::sample_trace_with;

pub(super) fn run<R: Rng>(cfg: &SimConfig, rng: &mut R, acc: &mut Accumulator) {
    let t = cfg.traffic.slot();
    let trace = sample_trace_with(&cfg.traffic, cfg.slots() as f64 * t, rng).expect("positive duration");
    let radio = &cfg.radio;
    let ns = radio.ns();
    let nsf = f64::from(ns);
    let (gs, gi, u) = (radio.gamma_s(), radio.gamma_i(), radio.sigma_u2());
    // A steady slot's statistic is a sum of ns i.i.d. exponentials, i.e.
    // Gamma(ns); transition slots are summed sample by sample.
    let steady = Gamma::new(nsf, 1.0).expect("ns >= 1");

    let mut active = false;
    for occ in trace.slots(t).take(cfg.slots() as usize) {
        let level = |busy: bool| 1.0 + if busy { gs } else { 0.0 } + if active { gi } else { 0.0 };
        let m = if occ.is_steady() {
            u * level(occ.start.is_busy()) * steady.sample(rng) / nsf
        } else {
            let mut s = 0.0;
            for n in 0..ns {
                let busy = occ.state_at((f64::from(n) + 0.5) / nsf).is_busy();
                let e: f64 = Exp1.sample(rng);
                s += level(busy) * e;
            }
            u * s / nsf
        };
        let occupied = m >= cfg.thresholds.for_activity(active);
        let f = occ.busy_fraction;
        let a = if active { 1.0 } else { 0.0 };
        acc.push(SlotRecord {
            su_active: active,
            occupied,
            busy_time: f * t,
            collision: a * f * t,
            waste: (1.0 - a) * (1.0 - f) * t,
            useful: a * (1.0 - f) * t,
            steady_busy: occ.is_steady().then(|| occ.start.is_busy()),
        });
        active = !occupied;
    }
}

/// Empirical and predicted occupancy decisions under one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorRate {
    pub hypothesis: Hypothesis,
    pub trials: u64,
    pub occupied: u64,
    /// Probability of an "occupied" verdict from the Gaussian analysis.
    pub predicted: f64,
}

impl DetectorRate {
    pub fn empirical(&self) -> f64 {
        self.occupied as f64 / self.trials as f64
    }

    /// Binomial standard error at the predicted probability.
    pub fn se(&self) -> f64 {
        (self.predicted * (1.0 - self.predicted) / self.trials as f64).sqrt()
    }

    /// Error frequency: false alarm when the PU is idle, miss when busy.
    pub fn empirical_error(&self) -> f64 {
        if self.hypothesis.pu_busy() {
            1.0 - self.empirical()
        } else {
            self.empirical()
        }
    }

    pub fn predicted_error(&self) -> f64 {
        if self.hypothesis.pu_busy() {
            1.0 - self.predicted
        } else {
            self.predicted
        }
    }
}

/// Runs the energy detector on `slots` independent slots per hypothesis,
/// drawing every complex sample explicitly.
pub fn calibrate_detector(radio: &RadioParams, th: &ThresholdPair, slots: u64, seed: u64) -> Result<[DetectorRate; 4]> {
    if slots == 0 {
        return Err(Error::invalid("slots", "must be positive"));
    }
    let e = error_probs(radio, th);
    let ns = radio.ns();
    let rates: Vec<DetectorRate> = Hypothesis::ALL
        .par_iter()
        .map(|&h| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(h.index() as u64);
            // Each quadrature carries half the per-sample power.
            let half = hypothesis_stats(radio, h).mean / 2.0;
            let eps = th.for_activity(h.su_active());
            let mut occupied = 0;
            for _ in 0..slots {
                let mut s = 0.0;
                for _ in 0..ns {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    s += re * re + im * im;
                }
                if half * s / f64::from(ns) >= eps {
                    occupied += 1;
                }
            }
            DetectorRate {
                hypothesis: h,
                trials: slots,
                occupied,
                predicted: e.occupied_probability(h),
            }
        })
        .collect();
    Ok([rates[0], rates[1], rates[2], rates[3]])
}
