//! Energy-detector statistics for the full-duplex secondary transmitter.
//!
//! The secondary transmitter senses with one antenna while (possibly)
//! transmitting with the other. Residual self-interference (RSI) raises the
//! received power whenever it transmits, so detection uses one threshold
//! `eps0` while silent and a lifted threshold `eps1` while active. The test
//! statistic is the mean received power over `ns` samples, approximated as
//! Gaussian under each of the four hypotheses.
//!
//! All quantities here are linear; dB conversion belongs to callers.

mod tail;

pub use tail::{phi, q, q_inv};

use crate::error::{Error, Result};
use crate::traffic::TransitionProbs;

/// Smallest sample count for which the Gaussian approximation of the
/// energy statistic is accepted.
pub const MIN_SAMPLES: u32 = 50;

/// Detector and link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    ns: u32,
    gamma_s: f64,
    chi2: f64,
    sigma_u2: f64,
    sigma_s2: f64,
    sigma_t2: f64,
}

impl RadioParams {
    /// * `ns` samples per slot
    /// * `gamma_s` sensing SNR of the primary signal
    /// * `chi2` RSI suppression factor (RSI power / transmit power)
    /// * `sigma_u2` noise power
    /// * `sigma_s2` secondary transmit power
    /// * `sigma_t2` gain of the secondary link
    pub fn new(ns: u32, gamma_s: f64, chi2: f64, sigma_u2: f64, sigma_s2: f64, sigma_t2: f64) -> Result<Self> {
        if ns < MIN_SAMPLES {
            return Err(Error::invalid(
                "ns",
                format!("need at least {MIN_SAMPLES} samples per slot, got {ns}"),
            ));
        }
        if !(sigma_u2.is_finite() && sigma_u2 > 0.0) {
            return Err(Error::invalid(
                "sigma_u2",
                format!("must be finite and > 0, got {sigma_u2}"),
            ));
        }
        for (name, v) in [
            ("gamma_s", gamma_s),
            ("chi2", chi2),
            ("sigma_s2", sigma_s2),
            ("sigma_t2", sigma_t2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self {
            ns,
            gamma_s,
            chi2,
            sigma_u2,
            sigma_s2,
            sigma_t2,
        })
    }

    pub fn with_sigma_s2(self, sigma_s2: f64) -> Result<Self> {
        Self::new(self.ns, self.gamma_s, self.chi2, self.sigma_u2, sigma_s2, self.sigma_t2)
    }

    pub fn with_chi2(self, chi2: f64) -> Result<Self> {
        Self::new(self.ns, self.gamma_s, chi2, self.sigma_u2, self.sigma_s2, self.sigma_t2)
    }

    pub fn ns(&self) -> u32 {
        self.ns
    }

    pub fn gamma_s(&self) -> f64 {
        self.gamma_s
    }

    pub fn chi2(&self) -> f64 {
        self.chi2
    }

    pub fn sigma_u2(&self) -> f64 {
        self.sigma_u2
    }

    pub fn sigma_s2(&self) -> f64 {
        self.sigma_s2
    }

    pub fn sigma_t2(&self) -> f64 {
        self.sigma_t2
    }

    /// Interference-to-noise ratio of the RSI.
    pub fn gamma_i(&self) -> f64 {
        self.chi2 * self.sigma_s2 / self.sigma_u2
    }

    /// SNR of the secondary link.
    pub fn gamma_t(&self) -> f64 {
        self.sigma_s2 * self.sigma_t2 / self.sigma_u2
    }

    pub(crate) fn sqrt_ns(&self) -> f64 {
        f64::from(self.ns).sqrt()
    }
}

/// Joint primary/secondary activity during a slot, named `H{su}{pu}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// PU idle, SU silent.
    H00,
    /// PU busy, SU silent.
    H01,
    /// PU idle, SU active.
    H10,
    /// PU busy, SU active.
    H11,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 4] = [Hypothesis::H00, Hypothesis::H01, Hypothesis::H10, Hypothesis::H11];

    pub fn new(su_active: bool, pu_busy: bool) -> Self {
        match (su_active, pu_busy) {
            (false, false) => Hypothesis::H00,
            (false, true) => Hypothesis::H01,
            (true, false) => Hypothesis::H10,
            (true, true) => Hypothesis::H11,
        }
    }

    pub fn su_active(self) -> bool {
        matches!(self, Hypothesis::H10 | Hypothesis::H11)
    }

    pub fn pu_busy(self) -> bool {
        matches!(self, Hypothesis::H01 | Hypothesis::H11)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Mean and variance of the energy statistic under one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisStats {
    pub mean: f64,
    pub var: f64,
}

pub fn hypothesis_stats(p: &RadioParams, h: Hypothesis) -> HypothesisStats {
    let mut level = 1.0;
    if h.pu_busy() {
        level += p.gamma_s;
    }
    if h.su_active() {
        level += p.gamma_i();
    }
    let mean = level * p.sigma_u2;
    HypothesisStats {
        mean,
        var: mean * mean / f64::from(p.ns),
    }
}

/// Detection thresholds used while silent (`eps0`) and while transmitting (`eps1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPair {
    eps0: f64,
    eps1: f64,
}

impl ThresholdPair {
    pub fn new(eps0: f64, eps1: f64) -> Result<Self> {
        if !(eps0.is_finite() && eps0 > 0.0) {
            return Err(Error::invalid("eps0", format!("must be finite and > 0, got {eps0}")));
        }
        if !(eps1.is_finite() && eps1 > 0.0) {
            return Err(Error::invalid("eps1", format!("must be finite and > 0, got {eps1}")));
        }
        Ok(Self { eps0, eps1 })
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    /// Threshold in force for the given secondary activity.
    pub fn for_activity(&self, su_active: bool) -> f64 {
        if su_active {
            self.eps1
        } else {
            self.eps0
        }
    }
}

/// False-alarm and miss-detection probabilities for both secondary activities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorProfile {
    pf0: f64,
    pm0: f64,
    pf1: f64,
    pm1: f64,
}

impl ErrorProfile {
    pub fn new(pf0: f64, pm0: f64, pf1: f64, pm1: f64) -> Result<Self> {
        for (name, v) in [("pf0", pf0), ("pm0", pm0), ("pf1", pf1), ("pm1", pm1)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("probability must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self { pf0, pm0, pf1, pm1 })
    }

    /// Perfect sensing: no false alarms, no misses.
    pub fn perfect() -> Self {
        Self {
            pf0: 0.0,
            pm0: 0.0,
            pf1: 0.0,
            pm1: 0.0,
        }
    }

    pub fn pf0(&self) -> f64 {
        self.pf0
    }

    pub fn pm0(&self) -> f64 {
        self.pm0
    }

    pub fn pf1(&self) -> f64 {
        self.pf1
    }

    pub fn pm1(&self) -> f64 {
        self.pm1
    }

    /// `1 - pf0 + pf1`
    pub fn xi(&self) -> f64 {
        1.0 - self.pf0 + self.pf1
    }

    /// `1 + pm0 - pm1`
    pub fn zeta(&self) -> f64 {
        1.0 + self.pm0 - self.pm1
    }

    /// Probability that the detector declares the channel occupied.
    pub fn occupied_probability(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::H00 => self.pf0,
            Hypothesis::H01 => 1.0 - self.pm0,
            Hypothesis::H10 => self.pf1,
            Hypothesis::H11 => 1.0 - self.pm1,
        }
    }
}

pub fn error_probs(p: &RadioParams, th: &ThresholdPair) -> ErrorProfile {
    let s = p.sqrt_ns();
    let u = p.sigma_u2;
    let gs = p.gamma_s;
    let gi = p.gamma_i();
    ErrorProfile {
        pm0: 1.0 - q((th.eps0 / ((1.0 + gs) * u) - 1.0) * s),
        pf0: q((th.eps0 / u - 1.0) * s),
        pm1: 1.0 - q((th.eps1 / ((1.0 + gs + gi) * u) - 1.0) * s),
        pf1: q((th.eps1 / ((1.0 + gi) * u) - 1.0) * s),
    }
}

fn check_pm(pm: f64) -> Result<()> {
    if pm > 0.0 && pm < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "pm",
            format!("miss-detection probability must lie in (0, 1), got {pm}"),
        ))
    }
}

/// False-alarm probability while silent when the silent threshold is set
/// for miss-detection probability `pm`.
pub fn pf0_of_pm(pm: f64, p: &RadioParams) -> Result<f64> {
    check_pm(pm)?;
    let gs = p.gamma_s;
    Ok(q(-q_inv(pm)? * (1.0 + gs) + gs * p.sqrt_ns()))
}

/// False-alarm probability while transmitting when the active threshold is
/// set for miss-detection probability `pm`.
pub fn pf1_of_pm(pm: f64, p: &RadioParams) -> Result<f64> {
    check_pm(pm)?;
    let g = p.gamma_s / (1.0 + p.gamma_i());
    Ok(q(-q_inv(pm)? * (1.0 + g) + g * p.sqrt_ns()))
}

/// Thresholds that give miss-detection probability `pm` in both activities.
pub fn thresholds_from_pm(pm: f64, p: &RadioParams) -> Result<ThresholdPair> {
    check_pm(pm)?;
    let lift = q_inv(1.0 - pm)? / p.sqrt_ns() + 1.0;
    ThresholdPair::new(
        lift * (1.0 + p.gamma_s) * p.sigma_u2,
        lift * (1.0 + p.gamma_s + p.gamma_i()) * p.sigma_u2,
    )
}

/// Error profile reached by [`thresholds_from_pm`], evaluated directly.
pub fn profile_from_pm(pm: f64, p: &RadioParams) -> Result<ErrorProfile> {
    ErrorProfile::new(pf0_of_pm(pm, p)?, pm, pf1_of_pm(pm, p)?, pm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PmMode {
    /// Solve the collision constraint numerically.
    Exact,
    /// Small-arrival-rate approximation `Pm = Pc - nu/2`.
    Approx,
}

impl std::str::FromStr for PmMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(PmMode::Exact),
            "approx" => Ok(PmMode::Approx),
            other => Err(Error::invalid(
                "pm_mode",
                format!("expected `exact` or `approx`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for PmMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PmMode::Exact => "exact",
            PmMode::Approx => "approx",
        })
    }
}

const PM_BRACKET: (f64, f64) = (1e-12, 1.0 - 1e-12);

/// Collision ratio as a function of a common miss-detection probability.
fn collision_for_pm(pm: f64, t: &TransitionProbs, p: &RadioParams) -> Result<f64> {
    let pf0 = pf0_of_pm(pm, p)?;
    let xi = 1.0 - pf0 + pf1_of_pm(pm, p)?;
    let (mu, nu, r, delta) = (t.mu(), t.nu(), t.r(), t.delta());
    Ok(nu / 2.0 + (pm * (1.0 - xi * delta) + (1.0 - pf0) * r) / (1.0 + (1.0 / mu - 1.0) * xi))
}

/// Miss-detection probability that meets collision ratio `constraint_pc`
/// with equal miss probabilities in both activities.
pub fn required_pm(constraint_pc: f64, t: &TransitionProbs, mode: PmMode, p: &RadioParams) -> Result<f64> {
    let half_nu = t.nu() / 2.0;
    if !constraint_pc.is_finite() {
        return Err(Error::invalid("pc", format!("must be finite, got {constraint_pc}")));
    }
    if constraint_pc <= half_nu {
        return Err(Error::InfeasibleConstraint {
            pc: constraint_pc,
            half_nu,
        });
    }
    match mode {
        PmMode::Approx => {
            let pm = constraint_pc - half_nu;
            // Outside the bracket the thresholds are not representable.
            if !(PM_BRACKET.0..=PM_BRACKET.1).contains(&pm) {
                return Err(Error::NoRoot { pc: constraint_pc });
            }
            Ok(pm)
        }
        PmMode::Exact => {
            let f = |pm: f64| collision_for_pm(pm, t, p).map(|c| c - constraint_pc);
            let (mut lo, mut hi) = PM_BRACKET;
            let (flo, fhi) = (f(lo)?, f(hi)?);
            if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
                return Err(Error::NoRoot { pc: constraint_pc });
            }
            let rising = flo < 0.0;
            while hi - lo > 1e-14 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let v = f(mid)?;
                if (v < 0.0) == rising {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn radio(ns: u32, gamma_s: f64, gamma_i: f64) -> RadioParams {
        // sigma_u2 = sigma_s2 = 1 so chi2 is the INR.
        RadioParams::new(ns, gamma_s, gamma_i, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn hypothesis_table_rows() {
        let p = RadioParams::new(200, 0.3, 0.02, 2.0, 10.0, 1.0).unwrap();
        let h00 = hypothesis_stats(&p, Hypothesis::H00);
        assert_eq!(h00.mean, 2.0);
        assert_eq!(h00.var, 4.0 / 200.0);
        let h11 = hypothesis_stats(&p, Hypothesis::H11);
        assert_relative_eq!(h11.mean, (1.0 + 0.3 + 0.1) * 2.0, max_relative = 1e-15);
        for h in Hypothesis::ALL {
            let s = hypothesis_stats(&p, h);
            assert_eq!(s.var, s.mean * s.mean / 200.0);
            assert!(s.mean >= p.sigma_u2());
        }
    }

    #[test]
    fn zero_interference_collapses_hypotheses() {
        let p = radio(300, 0.3, 0.0);
        assert_eq!(
            hypothesis_stats(&p, Hypothesis::H10),
            hypothesis_stats(&p, Hypothesis::H00)
        );
        assert_eq!(
            hypothesis_stats(&p, Hypothesis::H11),
            hypothesis_stats(&p, Hypothesis::H01)
        );
    }

    #[test]
    fn rejects_small_sample_counts() {
        assert!(RadioParams::new(49, 0.1, 0.1, 1.0, 1.0, 1.0).is_err());
        assert!(RadioParams::new(50, 0.1, 0.1, 1.0, 1.0, 1.0).is_ok());
        assert!(RadioParams::new(100, 0.1, 0.1, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn thresholds_at_the_means_give_coin_flips() {
        let p = radio(100, 0.1, 0.5);
        let e = error_probs(&p, &ThresholdPair::new(1.0, 1.1).unwrap());
        assert_eq!(e.pf0(), 0.5);
        let e = error_probs(&p, &ThresholdPair::new(1.1, 1.0).unwrap());
        assert_relative_eq!(e.pm0(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn false_alarm_one_sigma_above() {
        let p = radio(100, 0.1, 0.0);
        let e = error_probs(&p, &ThresholdPair::new(1.1, 1.1).unwrap());
        assert_relative_eq!(e.pf0(), 0.158_655_253_931_457_05, max_relative = 1e-12);
    }

    #[test]
    fn pf0_of_pm_reference() {
        let p = radio(400, 0.1, 0.0);
        assert_relative_eq!(
            pf0_of_pm(0.5, &p).unwrap(),
            0.022_750_131_948_179_21,
            max_relative = 1e-13
        );
        let p = radio(400, 0.0, 0.0);
        for pm in [0.01, 0.2, 0.7] {
            assert_relative_eq!(pf0_of_pm(pm, &p).unwrap(), 1.0 - pm, max_relative = 1e-13);
        }
    }

    #[test]
    fn pf1_reference_point() {
        // pm = 0.094, gamma_s = -5 dB, chi2 = -10 dB, sigma_s2 / sigma_u2 = 10 dB
        let p = RadioParams::new(300, 10f64.powf(-0.5), 0.1, 1.0, 10.0, 1.0).unwrap();
        assert_relative_eq!(
            pf1_of_pm(0.094, &p).unwrap(),
            0.112_386_429_267_254_28,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            pf0_of_pm(0.094, &p).unwrap(),
            9.041_734_009_100_344e-5,
            max_relative = 1e-11
        );
    }

    #[test]
    fn pf1_equals_pf0_without_interference() {
        let p = radio(300, 0.2, 0.0);
        for pm in [0.001, 0.05, 0.5, 0.93] {
            assert_eq!(pf1_of_pm(pm, &p).unwrap(), pf0_of_pm(pm, &p).unwrap());
        }
    }

    #[test]
    fn pf1_saturates_at_one_minus_pm() {
        let p = radio(300, 0.2, 1e9);
        assert_relative_eq!(pf1_of_pm(0.094, &p).unwrap(), 0.906, max_relative = 1e-7);
    }

    #[test]
    fn pm_domain_checked() {
        let p = radio(300, 0.2, 0.1);
        for pm in [0.0, 1.0, -1.0] {
            assert!(pf0_of_pm(pm, &p).is_err());
            assert!(pf1_of_pm(pm, &p).is_err());
            assert!(thresholds_from_pm(pm, &p).is_err());
        }
    }

    #[test]
    fn median_thresholds() {
        let p = radio(300, 0.2, 0.7);
        let th = thresholds_from_pm(0.5, &p).unwrap();
        assert_relative_eq!(th.eps0(), 1.2, max_relative = 1e-15);
        assert_relative_eq!(th.eps1(), 1.9, max_relative = 1e-15);
        let p0 = radio(300, 0.2, 0.0);
        let th0 = thresholds_from_pm(0.2, &p0).unwrap();
        assert_eq!(th0.eps0(), th0.eps1());
    }

    #[test]
    fn threshold_lift_is_linear_in_inr() {
        let p = RadioParams::new(250, 0.15, 0.3, 1.5, 2.0, 1.0).unwrap();
        let pm = 0.08;
        let th = thresholds_from_pm(pm, &p).unwrap();
        let want = (q_inv(1.0 - pm).unwrap() / 250f64.sqrt() + 1.0) * p.gamma_i() * p.sigma_u2();
        assert_relative_eq!(th.eps1() - th.eps0(), want, max_relative = 1e-12);
        assert!(th.eps1() > th.eps0());
    }

    #[test]
    fn approx_pm_arithmetic() {
        let t = TransitionProbs::new(0.002, 0.012).unwrap();
        let p = radio(300, 0.3, 1.0);
        assert_relative_eq!(
            required_pm(0.1, &t, PmMode::Approx, &p).unwrap(),
            0.094,
            max_relative = 1e-14
        );
    }

    #[test]
    fn infeasible_at_boundary() {
        let t = TransitionProbs::new(0.002, 0.012).unwrap();
        let p = radio(300, 0.3, 1.0);
        for mode in [PmMode::Approx, PmMode::Exact] {
            assert!(matches!(
                required_pm(0.006, &t, mode, &p),
                Err(Error::InfeasibleConstraint { .. })
            ));
            assert!(matches!(
                required_pm(0.005, &t, mode, &p),
                Err(Error::InfeasibleConstraint { .. })
            ));
        }
    }

    #[test]
    fn exact_and_approx_agree_for_slow_traffic() {
        let mu = 1e-5;
        let t = TransitionProbs::new(mu, 6.0 * mu).unwrap();
        let p = radio(200, 0.1, 10f64.sqrt());
        for i in 0..=18 {
            let pc = 0.02 + 0.01 * f64::from(i);
            let exact = required_pm(pc, &t, PmMode::Exact, &p).unwrap();
            let approx = required_pm(pc, &t, PmMode::Approx, &p).unwrap();
            assert!((exact - approx).abs() < 1e-3, "pc = {pc}: {exact} vs {approx}");
        }
    }

    #[test]
    fn exact_root_solves_the_constraint() {
        let t = TransitionProbs::new(1e-3, 6e-3).unwrap();
        let p = radio(200, 0.1, 10f64.sqrt());
        let pm = required_pm(0.1, &t, PmMode::Exact, &p).unwrap();
        assert!((collision_for_pm(pm, &t, &p).unwrap() - 0.1).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn thresholds_round_trip(pm in 0.001f64..0.999, gs in 0.0f64..2.0, gi in 0.0f64..50.0, ns in 50u32..2000) {
            let p = radio(ns, gs, gi);
            let th = thresholds_from_pm(pm, &p).unwrap();
            let e = error_probs(&p, &th);
            prop_assert!((e.pm0() - pm).abs() < 1e-10);
            prop_assert!((e.pm1() - pm).abs() < 1e-10);
            prop_assert!((e.pf0() - pf0_of_pm(pm, &p).unwrap()).abs() < 1e-10);
            prop_assert!((e.pf1() - pf1_of_pm(pm, &p).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn false_alarm_decreases_in_pm(pm in 0.001f64..0.99, d in 1e-4f64..0.009, gs in 0.01f64..1.0, gi in 0.0f64..20.0) {
            let p = radio(300, gs, gi);
            prop_assert!(pf0_of_pm(pm + d, &p).unwrap() < pf0_of_pm(pm, &p).unwrap());
            prop_assert!(pf1_of_pm(pm + d, &p).unwrap() < pf1_of_pm(pm, &p).unwrap());
        }

        #[test]
        fn false_alarm_rises_with_transmit_power(pm in 0.001f64..0.5, s in 0.0f64..1e3, ds in 0.0f64..1e3) {
            let base = RadioParams::new(300, 0.3, 0.05, 1.0, s, 1.0).unwrap();
            let hotter = base.with_sigma_s2(s + ds).unwrap();
            prop_assert!(pf1_of_pm(pm, &hotter).unwrap() >= pf1_of_pm(pm, &base).unwrap());
        }

        #[test]
        fn threshold_lift(pm in 0.001f64..=0.5, gi in 0.0f64..100.0) {
            let th = thresholds_from_pm(pm, &radio(300, 0.3, gi)).unwrap();
            prop_assert!(th.eps1() >= th.eps0());
        }
    }
}
