//! Base parameter sets, sweep axes and the per-point analysis pipeline.

use super::params::{db_to_linear, parse_quantity, Preset};
use super::table::{Cell, ResultTable};
use crate::error::{Error, Result};
use crate::markov::{collision_ratio, waste_ratio};
use crate::power::throughput;
use crate::sensing::{error_probs, required_pm, thresholds_from_pm, PmMode, RadioParams, ThresholdPair};
use crate::sim::{SimConfig, SimMetrics, SimMode};
use crate::traffic::{PuTraffic, TransitionProbs};

/// Every model input, in linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub ns: u32,
    pub mu: f64,
    /// Departure probability; `None` means `r * mu`.
    pub nu: Option<f64>,
    pub r: f64,
    /// Slot length in seconds.
    pub slot: f64,
    pub pc: f64,
    pub gamma_s: f64,
    pub chi2: f64,
    pub sigma_u2: f64,
    pub sigma_s2: f64,
    pub sigma_t2: f64,
    pub pm_mode: PmMode,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            ns: 300,
            mu: 1.0 / 500.0,
            nu: None,
            r: 6.0,
            slot: 1e-3,
            pc: 0.1,
            gamma_s: db_to_linear(-5.0),
            chi2: 0.01,
            sigma_u2: 1.0,
            sigma_s2: 10.0,
            sigma_t2: 10.0,
            pm_mode: PmMode::Approx,
        }
    }
}

/// Keys accepted by [`Scenario::set`].
pub const SCENARIO_KEYS: [&str; 12] = [
    "ns", "mu", "nu", "r", "slot", "pc", "gamma_s", "chi2", "sigma_u2", "sigma_s2", "sigma_t2", "pm_mode",
];

impl Scenario {
    /// Sets one parameter from its textual form. Powers accept `dB`; the
    /// transmit power in dB is taken relative to the noise power.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || parse_quantity(value);
        match key {
            "ns" => {
                self.ns = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid("ns", format!("expected a positive integer, got `{value}`")))?
            }
            "mu" => {
                self.mu = num()?;
            }
            "nu" => self.nu = Some(num()?),
            "r" => {
                self.r = num()?;
                self.nu = None;
            }
            "slot" => self.slot = num()?,
            "pc" => self.pc = num()?,
            "gamma_s" => self.gamma_s = num()?,
            "chi2" => self.chi2 = num()?,
            "sigma_u2" => self.sigma_u2 = num()?,
            "sigma_s2" => {
                self.sigma_s2 = num()?
                    * if value.trim().ends_with("dB") {
                        self.sigma_u2
                    } else {
                        1.0
                    }
            }
            "sigma_t2" => self.sigma_t2 = num()?,
            "pm_mode" => self.pm_mode = value.parse()?,
            other => return Err(Error::invalid("key", format!("unknown parameter `{other}`"))),
        }
        Ok(())
    }

    pub fn nu(&self) -> f64 {
        self.nu.unwrap_or(self.r * self.mu)
    }

    pub fn transition_probs(&self) -> Result<TransitionProbs> {
        TransitionProbs::new(self.mu, self.nu())
    }

    pub fn traffic(&self) -> Result<PuTraffic> {
        PuTraffic::from_probs(self.mu, self.nu(), self.slot)
    }

    pub fn radio(&self) -> Result<RadioParams> {
        RadioParams::new(
            self.ns,
            self.gamma_s,
            self.chi2,
            self.sigma_u2,
            self.sigma_s2,
            self.sigma_t2,
        )
    }

    /// `name = value` lines describing every parameter.
    pub fn echo(&self) -> Vec<String> {
        let f = super::table::format_sig;
        vec![
            format!("param ns = {}", self.ns),
            format!("param mu = {}", f(self.mu)),
            format!("param nu = {}", f(self.nu())),
            format!("param slot = {}", f(self.slot)),
            format!("param pc = {}", f(self.pc)),
            format!("param gamma_s = {}", f(self.gamma_s)),
            format!("param chi2 = {}", f(self.chi2)),
            format!("param sigma_u2 = {}", f(self.sigma_u2)),
            format!("param sigma_s2 = {}", f(self.sigma_s2)),
            format!("param sigma_t2 = {}", f(self.sigma_t2)),
            format!("param pm_mode = {}", self.pm_mode),
        ]
    }

    /// Applies every scenario key found in `preset`.
    pub fn apply_preset(&mut self, preset: &Preset) -> Result<()> {
        for (k, v, line) in preset.entries() {
            if SCENARIO_KEYS.contains(&k) {
                self.set(k, v).map_err(|e| at_line(e, line))?;
            }
        }
        Ok(())
    }
}

fn at_line(e: Error, line: usize) -> Error {
    match e {
        Error::Parse { message, .. } => Error::Parse { line, message },
        Error::InvalidParameter { name, reason } if line > 0 => Error::Parse {
            line,
            message: format!("invalid parameter `{name}`: {reason}"),
        },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Transmit power over noise power, in dB.
    SigmaS2Db,
    /// RSI factor in dB.
    Chi2Db,
    PcConstraint,
    Mu,
    Ns,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SigmaS2Db => "sigma_s2_db",
            SweepAxis::Chi2Db => "chi2_db",
            SweepAxis::PcConstraint => "pc_constraint",
            SweepAxis::Mu => "mu",
            SweepAxis::Ns => "ns",
        }
    }

    pub fn apply(self, s: &Scenario, v: f64) -> Result<Scenario> {
        let mut s = *s;
        match self {
            SweepAxis::SigmaS2Db => s.sigma_s2 = s.sigma_u2 * db_to_linear(v),
            SweepAxis::Chi2Db => s.chi2 = if v == f64::NEG_INFINITY { 0.0 } else { db_to_linear(v) },
            SweepAxis::PcConstraint => s.pc = v,
            SweepAxis::Mu => s.mu = v,
            SweepAxis::Ns => {
                if !(v >= 1.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX)) {
                    return Err(Error::invalid(
                        "ns",
                        format!("sweep value {v} is not a positive integer"),
                    ));
                }
                s.ns = v as u32;
            }
        }
        Ok(s)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sigma_s2_db" => Ok(SweepAxis::SigmaS2Db),
            "chi2_db" => Ok(SweepAxis::Chi2Db),
            "pc_constraint" => Ok(SweepAxis::PcConstraint),
            "mu" => Ok(SweepAxis::Mu),
            "ns" => Ok(SweepAxis::Ns),
            other => Err(Error::invalid(
                "sweep",
                format!("unknown axis `{other}` (expected sigma_s2_db, chi2_db, pc_constraint, mu or ns)"),
            )),
        }
    }
}

/// Outcome of the threshold design at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Infeasible,
    NoRoot,
    Degenerate,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Infeasible => "infeasible",
            Status::NoRoot => "no_root",
            Status::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analytic {
    pub gamma_i: f64,
    pub pm: f64,
    pub pf0: f64,
    pub pf1: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub pc: f64,
    pub pw: f64,
    pub c: f64,
    pub dc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub mode: SimMode,
    pub metrics: SimMetrics,
}

/// One output line: a sweep point with its analysis and, optionally, a
/// Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: Option<f64>,
    pub status: Status,
    pub analytic: Option<Analytic>,
    pub marker: Option<&'static str>,
    pub simulated: Option<Simulated>,
}

impl ResultRow {
    pub const COLUMNS: [&'static str; 23] = [
        "sweep_value",
        "status",
        "gamma_i",
        "pm",
        "pf0",
        "pf1",
        "eps0",
        "eps1",
        "pc",
        "pw",
        "c",
        "dc",
        "marker",
        "sim_mode",
        "sim_pc",
        "sim_pc_se",
        "sim_pw",
        "sim_pw_se",
        "sim_throughput",
        "sim_throughput_se",
        "diff_pc",
        "diff_pw",
        "diff_throughput",
    ];

    pub fn table() -> ResultTable {
        ResultTable::new(&Self::COLUMNS)
    }

    pub fn cells(&self) -> Vec<Cell> {
        let a = self.analytic.as_ref();
        let s = self.simulated.as_ref().map(|s| &s.metrics);
        let diff = |f: fn(&Analytic) -> f64, g: fn(&SimMetrics) -> f64| -> Cell {
            match (a, s) {
                (Some(a), Some(s)) => Cell::Num((g(s) - f(a)).abs()),
                _ => Cell::Empty,
            }
        };
        vec![
            self.sweep_value.into(),
            self.status.as_str().into(),
            a.map(|a| a.gamma_i).into(),
            a.map(|a| a.pm).into(),
            a.map(|a| a.pf0).into(),
            a.map(|a| a.pf1).into(),
            a.map(|a| a.eps0).into(),
            a.map(|a| a.eps1).into(),
            a.map(|a| a.pc).into(),
            a.map(|a| a.pw).into(),
            a.map(|a| a.c).into(),
            a.map(|a| a.dc).into(),
            self.marker.unwrap_or("").into(),
            self.simulated
                .as_ref()
                .map_or(Cell::Empty, |s| Cell::Text(s.mode.to_string())),
            s.map(|m| m.empirical_pc).into(),
            s.map(|m| m.pc_se).into(),
            s.map(|m| m.empirical_pw).into(),
            s.map(|m| m.pw_se).into(),
            s.map(|m| m.throughput).into(),
            s.map(|m| m.throughput_se).into(),
            diff(|a| a.pc, |m| m.empirical_pc),
            diff(|a| a.pw, |m| m.empirical_pw),
            diff(|a| a.c, |m| m.throughput),
        ]
    }
}

/// Designs thresholds for the collision constraint and evaluates every
/// closed form at the scenario.
pub fn evaluate(s: &Scenario) -> Result<(Analytic, ThresholdPair)> {
    let tp = s.transition_probs()?;
    let radio = s.radio()?;
    let pm = required_pm(s.pc, &tp, s.pm_mode, &radio)?;
    let th = thresholds_from_pm(pm, &radio)?;
    let e = error_probs(&radio, &th);
    let pnt = throughput(&radio, &tp, pm)?;
    let analytic = Analytic {
        gamma_i: radio.gamma_i(),
        pm,
        pf0: e.pf0(),
        pf1: e.pf1(),
        eps0: th.eps0(),
        eps1: th.eps1(),
        pc: collision_ratio(&e, &tp)?,
        pw: waste_ratio(&e, &tp)?,
        c: pnt.c,
        dc: pnt.dc,
    };
    Ok((analytic, th))
}

/// Like [`evaluate`], with constraint and degeneracy failures reported as a
/// status so a sweep can carry on.
pub fn analyze(s: &Scenario) -> Result<(Status, Option<(Analytic, ThresholdPair)>)> {
    match evaluate(s) {
        Ok(v) => Ok((Status::Ok, Some(v))),
        Err(Error::InfeasibleConstraint { .. }) => Ok((Status::Infeasible, None)),
        Err(Error::NoRoot { .. }) => Ok((Status::NoRoot, None)),
        Err(Error::DegenerateDenominator { .. }) => Ok((Status::Degenerate, None)),
        Err(e) => Err(e),
    }
}

/// Monte Carlo settings shared by a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub slots: u64,
    pub seed: u64,
    pub mode: SimMode,
}

pub fn sim_config(s: &Scenario, th: ThresholdPair, sim: &SimSettings, stream: u64) -> Result<SimConfig> {
    Ok(SimConfig::new(s.traffic()?, s.radio()?, th, sim.slots, sim.seed, sim.mode)?.with_stream(stream))
}
