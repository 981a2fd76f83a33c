//! Secondary throughput as a function of transmit power, its derivative and
//! the locally optimal transmit power.
//!
//! The miss-detection probability `pm` is held fixed while the transmit
//! power varies: thresholds are re-derived at every power so only the
//! active false-alarm probability moves with the RSI.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::markov::waste_ratio;
use crate::sensing::{pf0_of_pm, profile_from_pm, q, q_inv, RadioParams};
use crate::traffic::TransitionProbs;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputPoint {
    pub sigma_s2: f64,
    /// `log2(1 + gamma_t)`
    pub rate: f64,
    pub waste: f64,
    pub c: f64,
    pub dc: f64,
}

/// Intermediate quantities shared by the derivative forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeTerms {
    /// Argument with `q(rho)` equal to the active false-alarm probability.
    pub rho: f64,
    /// `gamma_s * chi2 * (Q^-1(1 - pm) + sqrt(ns))`
    pub big_xi: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub pf0: f64,
    pub gamma_i: f64,
    pub gamma_t: f64,
}

pub fn derivative_terms(p: &RadioParams, t: &TransitionProbs, pm: f64) -> Result<DerivativeTerms> {
    let pf0 = pf0_of_pm(pm, p)?;
    let a = -q_inv(pm)?;
    let gi = p.gamma_i();
    let g = p.gamma_s() / (gi + 1.0);
    let rho = a * (g + 1.0) + g * p.sqrt_ns();
    let k = 1.0 / t.mu() - 1.0;
    let alpha = k * (q(rho) - pf0 + 1.0) + 1.0;
    Ok(DerivativeTerms {
        rho,
        big_xi: p.gamma_s() * p.chi2() * (a + p.sqrt_ns()),
        alpha,
        kappa: (k * (1.0 - pf0) + pm) / alpha,
        pf0,
        gamma_i: gi,
        gamma_t: p.gamma_t(),
    })
}

/// The two additive parts of `dC/dsigma_s2`: the RSI penalty (through the
/// active false alarm) and the rate gain.
pub fn derivative_parts(p: &RadioParams, t: &TransitionProbs, pm: f64) -> Result<(f64, f64)> {
    let d = derivative_terms(p, t, pm)?;
    let k = 1.0 / t.mu() - 1.0;
    let penalty = -(d.gamma_t + 1.0).ln() * (-0.5 * d.rho * d.rho).exp() * k * d.big_xi * d.kappa
        / ((2.0 * PI).sqrt() * (d.gamma_i + 1.0).powi(2) * d.alpha);
    let gain = -p.sigma_t2() * (t.mu() / 2.0 - d.kappa) / (d.gamma_t + 1.0);
    let s = 1.0 / (LN_2 * p.sigma_u2());
    Ok((s * penalty, s * gain))
}

/// `dC/dsigma_s2` written out in full, with every quantity expanded.
pub fn dthroughput(p: &RadioParams, t: &TransitionProbs, pm: f64) -> Result<f64> {
    let pf0 = pf0_of_pm(pm, p)?;
    let a = q_inv(1.0 - pm)?;
    let gi = p.gamma_i();
    let gt = p.gamma_t();
    let rho = a * (p.gamma_s() / (gi + 1.0) + 1.0) + p.gamma_s() / (gi + 1.0) * p.sqrt_ns();
    let k = 1.0 / t.mu() - 1.0;
    let den = k * (q(rho) - pf0 + 1.0) + 1.0;
    let first = -(gt + 1.0).log2()
        * (-rho * rho / 2.0).exp()
        * k
        * (p.gamma_s() * p.chi2() * (a + p.sqrt_ns()) / (gi + 1.0).powi(2))
        / ((2.0 * PI).sqrt() * den * den)
        * (k * (1.0 - pf0) + pm);
    let second = -p.sigma_t2() / (LN_2 * (gt + 1.0)) * (t.mu() / 2.0 + (q(rho) * k - pm + 1.0) / den - 1.0);
    Ok((first + second) / p.sigma_u2())
}

/// `dC/dsigma_s2` in the compact rho/alpha/kappa/Xi notation.
pub fn dthroughput_notated(p: &RadioParams, t: &TransitionProbs, pm: f64) -> Result<f64> {
    let d = derivative_terms(p, t, pm)?;
    let k = 1.0 / t.mu() - 1.0;
    let lhs = d.kappa * (d.gamma_t + 1.0).ln() * (-d.rho * d.rho / 2.0).exp() * k * d.big_xi
        / ((2.0 * PI).sqrt() * (d.gamma_i + 1.0).powi(2) * d.alpha)
        + p.sigma_t2() * (t.mu() / 2.0 - d.kappa) / (d.gamma_t + 1.0);
    Ok(-lhs / (LN_2 * p.sigma_u2()))
}

pub fn throughput(p: &RadioParams, t: &TransitionProbs, pm: f64) -> Result<ThroughputPoint> {
    let e = profile_from_pm(pm, p)?;
    let waste = waste_ratio(&e, t)?;
    let rate = p.gamma_t().ln_1p() / LN_2;
    Ok(ThroughputPoint {
        sigma_s2: p.sigma_s2(),
        rate,
        waste,
        c: rate * (1.0 - waste),
        dc: dthroughput(p, t, pm)?,
    })
}

/// Both sides of the small-arrival-rate stationarity condition at the
/// current transmit power; a stationary point needs them equal.
pub fn existence_sides(p: &RadioParams, t: &TransitionProbs, pm: f64) -> Result<(f64, f64)> {
    let d = derivative_terms(p, t, pm)?;
    let lhs = (-d.rho * d.rho / 2.0).exp() * (d.gamma_t + 1.0) * (d.gamma_t + 1.0).ln() / (d.gamma_i + 1.0).powi(2);
    let rhs = (2.0 * PI).sqrt() * p.sigma_t2() * (1.0 - d.pf0 + q(d.rho)) / d.big_xi;
    Ok((lhs, rhs))
}

/// Log-spaced transmit-power grid for the stationary-point scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSearch {
    lo: f64,
    hi: f64,
    points: usize,
}

impl PowerSearch {
    pub const MIN_POINTS: usize = 100;

    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo > 0.0 && lo.is_finite()) {
            return Err(Error::invalid("lo", format!("must be finite and > 0, got {lo}")));
        }
        if !(hi > lo && hi.is_finite()) {
            return Err(Error::invalid("hi", format!("must be finite and > lo, got {hi}")));
        }
        if points < Self::MIN_POINTS {
            return Err(Error::invalid(
                "points",
                format!("need at least {} points, got {points}", Self::MIN_POINTS),
            ));
        }
        Ok(Self { lo, hi, points })
    }

    /// -20 dB to 60 dB relative to the noise power, 400 points.
    pub fn default_for(p: &RadioParams) -> Self {
        Self {
            lo: 1e-2 * p.sigma_u2(),
            hi: 1e6 * p.sigma_u2(),
            points: 400,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn grid(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let n = self.points - 1;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.hi
                } else {
                    (a + (b - a) * i as f64 / n as f64).exp()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPowerResult {
    pub exists: bool,
    pub local_max: Option<f64>,
    /// The following local minimum, when it falls inside the search range.
    pub local_min: Option<f64>,
    pub c_at_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Crossing {
    Max(f64),
    Min(f64),
}

/// Scans the derivative over `search` and refines every sign change.
/// The RSI factor and other link parameters come from `p`; its transmit
/// power is ignored.
pub fn optimal_power(
    p: &RadioParams,
    t: &TransitionProbs,
    pm: f64,
    search: &PowerSearch,
) -> Result<OptimalPowerResult> {
    let dc_at = |s: f64| -> Result<f64> { dthroughput(&p.with_sigma_s2(s)?, t, pm) };
    let grid = search.grid();
    let dcs = grid.iter().map(|&s| dc_at(s)).collect::<Result<Vec<_>>>()?;

    let mut crossings = Vec::new();
    for i in 1..grid.len() {
        let (d0, d1) = (dcs[i - 1], dcs[i]);
        if (d0 >= 0.0) == (d1 >= 0.0) {
            continue;
        }
        let root = bisect_log(&dc_at, grid[i - 1], grid[i], d0 >= 0.0)?;
        crossings.push(if d0 >= 0.0 {
            Crossing::Max(root)
        } else {
            Crossing::Min(root)
        });
    }
    if crossings.len() > 2 {
        return Err(Error::AmbiguousLandscape {
            roots: crossings
                .iter()
                .map(|c| match *c {
                    Crossing::Max(s) | Crossing::Min(s) => s,
                })
                .collect(),
        });
    }
    let local_max = crossings.iter().find_map(|c| match *c {
        Crossing::Max(s) => Some(s),
        Crossing::Min(_) => None,
    });
    let local_min = crossings.iter().find_map(|c| match *c {
        Crossing::Min(s) if local_max.is_some_and(|m| s > m) => Some(s),
        _ => None,
    });
    let c_at_max = match local_max {
        Some(s) => Some(throughput(&p.with_sigma_s2(s)?, t, pm)?.c),
        None => None,
    };
    Ok(OptimalPowerResult {
        exists: local_max.is_some(),
        local_max,
        local_min,
        c_at_max,
    })
}

/// Bisection in log-power to relative tolerance 1e-8.
fn bisect_log(f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64, positive_at_lo: bool) -> Result<f64> {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    while b - a > 1e-9 {
        let m = 0.5 * (a + b);
        if (f(m.exp())? >= 0.0) == positive_at_lo {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// One point of the stationary-point existence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistencePoint {
    pub chi2: f64,
    /// Transmit power maximizing the left side.
    pub argmax: f64,
    pub lhs_max: f64,
    /// Right side evaluated at `argmax`.
    pub rhs: f64,
}

impl ExistencePoint {
    /// Stationary points are expected when the left side can reach the right.
    pub fn predicts_optimum(&self) -> bool {
        self.lhs_max > self.rhs
    }
}

pub fn existence_curves(
    p: &RadioParams,
    t: &TransitionProbs,
    pm: f64,
    chi2_grid: &[f64],
    search: &PowerSearch,
) -> Result<Vec<ExistencePoint>> {
    if chi2_grid.is_empty() {
        return Err(Error::invalid("chi2_grid", "must not be empty"));
    }
    chi2_grid
        .iter()
        .map(|&chi2| existence_point(&p.with_chi2(chi2)?, t, pm, search))
        .collect()
}

fn existence_point(p: &RadioParams, t: &TransitionProbs, pm: f64, search: &PowerSearch) -> Result<ExistencePoint> {
    let lhs_at = |ln_s: f64| -> Result<f64> { Ok(existence_sides(&p.with_sigma_s2(ln_s.exp())?, t, pm)?.0) };
    let grid: Vec<f64> = search.grid().iter().map(|s| s.ln()).collect();
    let vals = grid.iter().map(|&x| lhs_at(x)).collect::<Result<Vec<_>>>()?;
    let best = vals
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v > vals[b] { i } else { b });
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);

    // Golden-section refinement of the bracketing cell pair.
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (lhs_at(x1)?, lhs_at(x2)?);
    while b - a > 1e-10 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = lhs_at(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = lhs_at(x1)?;
        }
    }
    let (mut x, mut lhs_max) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    if vals[best] > lhs_max {
        x = grid[best];
        lhs_max = vals[best];
    }
    let argmax = x.exp();
    let (_, rhs) = existence_sides(&p.with_sigma_s2(argmax)?, t, pm)?;
    Ok(ExistencePoint {
        chi2: p.chi2(),
        argmax,
        lhs_max,
        rhs,
    })
}

/// RSI factor at which the existence test changes verdict, interpolated
/// in log scale between the first pair of grid points that disagree.
pub fn existence_threshold(curve: &[ExistencePoint]) -> Option<f64> {
    curve.windows(2).find_map(|w| {
        let (d0, d1) = (w[0].lhs_max.ln() - w[0].rhs.ln(), w[1].lhs_max.ln() - w[1].rhs.ln());
        if (d0 > 0.0) == (d1 > 0.0) {
            return None;
        }
        let (x0, x1) = (w[0].chi2.ln(), w[1].chi2.ln());
        Some((x0 + (x1 - x0) * d0 / (d0 - d1)).exp())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{pf1_of_pm, required_pm, PmMode};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn db(x: f64) -> f64 {
        10f64.powf(x / 10.0)
    }

    /// Ns = 300, gamma_s = -5 dB, sigma_t2 = 10 dB, mu = 1/500, r = 6, Pc = 0.1.
    fn defaults(chi2: f64, sigma_s2: f64) -> (RadioParams, TransitionProbs, f64) {
        let p = RadioParams::new(300, db(-5.0), chi2, 1.0, sigma_s2, 10.0).unwrap();
        let t = TransitionProbs::new(1.0 / 500.0, 6.0 / 500.0).unwrap();
        let pm = required_pm(0.1, &t, PmMode::Approx, &p).unwrap();
        (p, t, pm)
    }

    fn fd(p: &RadioParams, t: &TransitionProbs, pm: f64) -> f64 {
        let s = p.sigma_s2();
        let h = s * 1e-5;
        let c = |x: f64| throughput(&p.with_sigma_s2(x).unwrap(), t, pm).unwrap().c;
        (c(s + h) - c(s - h)) / (2.0 * h)
    }

    #[test]
    fn rate_without_waste() {
        let p = RadioParams::new(300, 0.3, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.gamma_t().ln_1p() / LN_2, 1.0);
    }

    #[test]
    fn c_is_rate_times_utilization() {
        let (p, t, pm) = defaults(0.01, 10.0);
        let pt = throughput(&p, &t, pm).unwrap();
        assert!((pt.c - pt.rate * (1.0 - pt.waste)).abs() < 1e-12);
        let d = derivative_terms(&p, &t, pm).unwrap();
        assert_relative_eq!(1.0 - pt.waste, d.kappa - t.mu() / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn rho_reproduces_active_false_alarm() {
        for chi2 in [0.0, 1e-3, 0.1, 0.9] {
            let (p, t, pm) = defaults(chi2, 30.0);
            let d = derivative_terms(&p, &t, pm).unwrap();
            assert_relative_eq!(q(d.rho), pf1_of_pm(pm, &p).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn ideal_cancellation_is_monotone() {
        let (p, t, pm) = defaults(0.0, 1.0);
        let mut last = f64::NEG_INFINITY;
        for i in 0..=400 {
            let s = db(-10.0 + 0.125 * f64::from(i));
            let pt = throughput(&p.with_sigma_s2(s).unwrap(), &t, pm).unwrap();
            assert!(pt.c > last);
            assert!(pt.dc > 0.0);
            last = pt.c;
        }
        let r = optimal_power(&p, &t, pm, &PowerSearch::default_for(&p)).unwrap();
        assert!(!r.exists);
        assert_eq!(r.local_min, None);
    }

    #[test]
    fn high_power_limit() {
        let (p, t, pm) = defaults(0.1, db(60.0));
        let pt = throughput(&p, &t, pm).unwrap();
        let pf0 = pf0_of_pm(pm, &p).unwrap();
        let e = crate::sensing::ErrorProfile::new(pf0, pm, 1.0 - pm, pm).unwrap();
        let pw_inf = waste_ratio(&e, &t).unwrap();
        // gamma_i = 1e5 here, so pf1 sits just short of its limit.
        assert_relative_eq!(pt.c, pt.rate * (1.0 - pw_inf), max_relative = 1e-4);
    }

    #[test]
    fn notated_and_expanded_forms_agree() {
        for chi2 in [0.0, 1e-3, 1e-2, 0.1, 0.9] {
            for s_db in [-10.0, 0.0, 10.0, 25.0, 40.0] {
                let (p, t, pm) = defaults(chi2, db(s_db));
                let a = dthroughput(&p, &t, pm).unwrap();
                let b = dthroughput_notated(&p, &t, pm).unwrap();
                let (pen, gain) = derivative_parts(&p, &t, pm).unwrap();
                let scale = pen.abs().max(gain.abs());
                assert!((a - b).abs() <= 1e-12 * scale, "{chi2} {s_db}: {a} {b}");
                assert!((a - pen - gain).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for chi2 in [1e-3, 1e-2, 0.1] {
            for s_db in [-5.0, 5.0, 15.0, 30.0] {
                let (p, t, pm) = defaults(chi2, db(s_db));
                let (pen, gain) = derivative_parts(&p, &t, pm).unwrap();
                let a = dthroughput(&p, &t, pm).unwrap();
                let scale = pen.abs().max(gain.abs());
                assert!((a - fd(&p, &t, pm)).abs() <= 1e-4 * scale);
            }
        }
    }

    #[test]
    fn sign_change_brackets_the_optimum() {
        let (p, t, pm) = defaults(db(-20.0), 1.0);
        let r = optimal_power(&p, &t, pm, &PowerSearch::default_for(&p)).unwrap();
        let s = r.local_max.unwrap();
        let below = p.with_sigma_s2(s * db(-0.1)).unwrap();
        let above = p.with_sigma_s2(s * db(0.1)).unwrap();
        assert!(fd(&below, &t, pm) > 0.0);
        assert!(fd(&above, &t, pm) < 0.0);
    }

    #[test]
    fn optimum_moves_up_as_rsi_falls() {
        let mut last = 0.0;
        for chi2_db in [-10.0, -20.0, -30.0] {
            let (p, t, pm) = defaults(db(chi2_db), 1.0);
            let search = PowerSearch::default_for(&p);
            let r = optimal_power(&p, &t, pm, &search).unwrap();
            assert!(r.exists);
            let s = r.local_max.unwrap();
            assert!(s > last);
            last = s;
            // Root quality: C at the root beats the neighbouring grid points.
            let grid = search.grid();
            let k = grid.partition_point(|&g| g < s);
            let c = |x: f64| throughput(&p.with_sigma_s2(x).unwrap(), &t, pm).unwrap().c;
            assert!(r.c_at_max.unwrap() >= c(grid[k - 1]));
            assert!(r.c_at_max.unwrap() >= c(grid[k]));
            if let Some(m) = r.local_min {
                assert!(m > s);
                let k = grid.partition_point(|&g| g < m);
                assert!(c(m) <= c(grid[k - 1]) && c(m) <= c(grid[k]));
            }
        }
    }

    #[test]
    fn small_mu_collapse() {
        let p = RadioParams::new(300, db(-5.0), db(-20.0), 1.0, 1.0, 10.0).unwrap();
        let t = TransitionProbs::new(1e-6, 6e-6).unwrap();
        let pm = required_pm(0.1, &t, PmMode::Approx, &p).unwrap();
        let r = optimal_power(&p, &t, pm, &PowerSearch::default_for(&p)).unwrap();
        let (lhs, rhs) = existence_sides(&p.with_sigma_s2(r.local_max.unwrap()).unwrap(), &t, pm).unwrap();
        assert!((lhs - rhs).abs() <= 1e-6 * lhs.abs().max(rhs.abs()), "{lhs} {rhs}");
    }

    #[test]
    fn existence_flips_near_high_rsi() {
        let (p, t, pm) = defaults(0.5, 1.0);
        let search = PowerSearch::default_for(&p);
        let curve = existence_curves(&p, &t, pm, &[0.1, 0.5, 0.95, 2.0], &search).unwrap();
        assert!(curve[0].predicts_optimum());
        assert!(curve[1].predicts_optimum());
        assert!(!curve[2].predicts_optimum());
        assert!(!curve[3].predicts_optimum());
        let x = existence_threshold(&curve).unwrap();
        assert!(x > 0.5 && x < 0.95);
    }

    #[test]
    fn existence_gap_widens_as_rsi_vanishes() {
        let (p, t, pm) = defaults(0.1, 1.0);
        let curve = existence_curves(
            &p,
            &t,
            pm,
            &[1e-1, 1e-3, 1e-5],
            &PowerSearch::new(1e-2, 1e12, 400).unwrap(),
        )
        .unwrap();
        let ratios: Vec<f64> = curve.iter().map(|c| c.lhs_max / c.rhs).collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    }

    #[test]
    fn search_validation() {
        assert!(PowerSearch::new(0.0, 1.0, 200).is_err());
        assert!(PowerSearch::new(1.0, 1.0, 200).is_err());
        assert!(PowerSearch::new(1.0, 2.0, 99).is_err());
        let g = PowerSearch::new(1.0, 100.0, 101).unwrap().grid();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[100], 100.0);
        assert_relative_eq!(g[50], 10.0, max_relative = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn derivative_consistency(
            ns in 100u32..600,
            gs_db in -10.0f64..0.0,
            chi2_db in -35.0f64..-5.0,
            st_db in 0.0f64..15.0,
            mu in 1e-4f64..0.02,
            r in 2.0f64..8.0,
            s_db in -10.0f64..40.0,
        ) {
            let p = RadioParams::new(ns, db(gs_db), db(chi2_db), 1.0, db(s_db), db(st_db)).unwrap();
            let t = TransitionProbs::new(mu, r * mu).unwrap();
            let pm = 0.05 + 0.5 * mu;
            let (pen, gain) = derivative_parts(&p, &t, pm).unwrap();
            let scale = pen.abs().max(gain.abs());
            let a = dthroughput(&p, &t, pm).unwrap();
            prop_assert!((a - dthroughput_notated(&p, &t, pm).unwrap()).abs() <= 1e-12 * scale);
            prop_assert!((a - fd(&p, &t, pm)).abs() <= 1e-4 * scale);
        }
    }
}
