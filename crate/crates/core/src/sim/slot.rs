use rand::Rng;

use super::{Accumulator, SimConfig, SlotRecord};
use crate::sensing::{ErrorProfile, Hypothesis};

/// Offset of an exponential event conditioned to fall inside one slot.
fn truncated_exp<R: Rng>(rng: &mut R, mean: f64, slot: f64) -> f64 {
    let u: f64 = rng.random();
    let span = -(-slot / mean).exp_m1();
    (-mean * (-u * span).ln_1p()).min(slot)
}

pub(super) fn run<R: Rng>(cfg: &SimConfig, e: &ErrorProfile, rng: &mut R, acc: &mut Accumulator) {
    let t = cfg.traffic.slot();
    let tp = cfg.traffic.transition_probs();
    let (mu, nu) = (tp.mu(), tp.nu());

    let mut busy = rng.random::<f64>() < tp.busy_probability();
    let mut active = false;
    for k in 0..cfg.slots() {
        let mut head = 0.0;
        let mut tail = 0.0;
        let mut changed = false;
        if k > 0 {
            if busy && rng.random::<f64>() < nu {
                busy = false;
                changed = true;
                // The burst ends t1 into the slot; the rest of it is a hole
                // the SU had no chance to use.
                tail = t - truncated_exp(rng, cfg.traffic.tau1(), t);
            } else if !busy && rng.random::<f64>() < mu {
                busy = true;
                changed = true;
                // The burst starts t0 into the slot; its head overlaps the
                // transmission that began on the last idle verdict.
                head = t - truncated_exp(rng, cfg.traffic.tau0(), t);
            }
        }
        let occupied = rng.random::<f64>() < e.occupied_probability(Hypothesis::new(active, busy));
        let whole = |b: bool| if b { t } else { 0.0 };
        acc.push(SlotRecord {
            su_active: active,
            occupied,
            busy_time: whole(busy),
            collision: whole(active && busy) + head,
            waste: whole(!active && !busy) + tail,
            useful: whole(active && !busy),
            steady_busy: (!changed).then_some(busy),
        });
        active = !occupied;
    }
}
