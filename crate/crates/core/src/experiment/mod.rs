//! Parameter sweeps that regenerate the standard figure data as CSV.
//!
//! An experiment is described by a preset file of `key = value` lines:
//!
//! ```text
//! figure = fig4a
//! sweep = sigma_s2_db
//! grid = lin:-10:40:201
//! chi2 = -20 dB
//! curve = rsi_m30db: chi2 = -30 dB
//! ```
//!
//! Scenario keys (see [`SCENARIO_KEYS`]) set the base parameters, each
//! `curve` line names one output table and lists per-curve overrides, and
//! command-line overrides are applied last.

pub mod params;
pub mod scenario;
pub mod table;

mod figures;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sim::SimMode;

pub use figures::{run_experiment, Progress};
pub use params::{check_grid, db_to_linear, linear_to_db, parse_db, parse_grid, parse_quantity, Preset};
pub use scenario::{
    analyze, evaluate, sim_config, Analytic, ResultRow, Scenario, SimSettings, Simulated, Status, SweepAxis,
    SCENARIO_KEYS,
};
pub use table::{format_sig, Cell, ResultTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    Fig3,
    Fig4a,
    Fig4b,
    Fig5,
    Fig6,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig3, Figure::Fig4a, Figure::Fig4b, Figure::Fig5, Figure::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
        }
    }

    /// The preset shipped with the crate.
    pub fn preset(self) -> &'static str {
        match self {
            Figure::Fig3 => include_str!("../../presets/fig3.preset"),
            Figure::Fig4a => include_str!("../../presets/fig4a.preset"),
            Figure::Fig4b => include_str!("../../presets/fig4b.preset"),
            Figure::Fig5 => include_str!("../../presets/fig5.preset"),
            Figure::Fig6 => include_str!("../../presets/fig6.preset"),
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL.into_iter().find(|f| f.name() == s.trim()).ok_or_else(|| {
            Error::invalid(
                "figure",
                format!("unknown figure `{s}` (expected fig3, fig4a, fig4b, fig5 or fig6)"),
            )
        })
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What each row of an experiment reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Threshold design and closed forms at each sweep point.
    Sweep,
    /// The stationary-point existence test against the RSI factor.
    Existence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub overrides: Vec<(String, String)>,
}

/// Which simulations to attach to a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPlan {
    pub slots: u64,
    pub seed: u64,
    pub modes: Vec<SimMode>,
    /// Simulate every k-th grid point; 0 disables simulation.
    pub every: usize,
}

impl SimPlan {
    pub fn enabled(&self) -> bool {
        self.every > 0 && !self.modes.is_empty()
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub figure: String,
    pub kind: Kind,
    pub base: Scenario,
    pub axis: SweepAxis,
    pub grid_text: String,
    pub grid: Vec<f64>,
    pub curves: Vec<Curve>,
    /// Command-line overrides, applied after each curve's own keys.
    pub overrides: Vec<(String, String)>,
    /// Add rows at the local throughput optimum and minimum.
    pub markers: bool,
    pub sim: SimPlan,
    pub notes: Vec<String>,
}

/// Keys an experiment preset accepts besides [`SCENARIO_KEYS`].
pub const EXPERIMENT_KEYS: [&str; 11] = [
    "figure",
    "kind",
    "sweep",
    "grid",
    "curve",
    "markers",
    "sim_every",
    "slots",
    "seed",
    "sim_mode",
    "note",
];

/// Parses `both`, or one simulation mode name.
pub fn parse_sim_modes(s: &str) -> Result<Vec<SimMode>> {
    match s.trim() {
        "both" => Ok(vec![SimMode::SampleLevel, SimMode::SlotStatistical]),
        "none" => Ok(Vec::new()),
        other => Ok(vec![other.parse()?]),
    }
}

fn parse_curve(value: &str, line: usize) -> Result<Curve> {
    let (name, rest) = value.split_once(':').unwrap_or((value, ""));
    let name = name.trim();
    if name.is_empty()
        || !name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
    {
        return Err(Error::parse(line, format!("invalid curve name `{name}`")));
    }
    let mut overrides = Vec::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected `key = value` in curve `{name}`, got `{part}`")))?;
        let k = k.trim();
        if !SCENARIO_KEYS.contains(&k) {
            return Err(Error::parse(line, format!("unknown parameter `{k}` in curve `{name}`")));
        }
        overrides.push((k.to_string(), v.trim().to_string()));
    }
    Ok(Curve {
        name: name.to_string(),
        overrides,
    })
}

fn with_line<T>(r: Result<T>, line: usize) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse { line, message },
        Error::InvalidParameter { name, reason } => Error::Parse {
            line,
            message: format!("invalid `{name}`: {reason}"),
        },
        other => other,
    })
}

impl ExperimentSpec {
    /// Resolves a preset and command-line overrides. Overrides may name
    /// scenario keys or the experiment keys `grid`, `sweep`, `slots`,
    /// `seed`, `sim_mode`, `sim_every` and `markers`.
    pub fn from_preset(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut preset = Preset::parse(text)?;
        let mut scenario_overrides = Vec::new();
        for (k, v) in overrides {
            if SCENARIO_KEYS.contains(&k.as_str()) {
                scenario_overrides.push((k.clone(), v.clone()));
            } else if ["grid", "sweep", "slots", "seed", "sim_mode", "sim_every", "markers"].contains(&k.as_str()) {
                preset.set(k, v);
            } else {
                return Err(Error::invalid("override", format!("unknown key `{k}`")));
            }
        }
        for (k, _, line) in preset.entries() {
            if !SCENARIO_KEYS.contains(&k) && !EXPERIMENT_KEYS.contains(&k) {
                return Err(Error::parse(line, format!("unknown key `{k}`")));
            }
        }

        let required = |k: &str| {
            preset
                .get(k)
                .ok_or_else(|| Error::parse(0, format!("missing key `{k}`")))
        };
        let figure = required("figure")?.to_string();
        let kind = match preset.get("kind").unwrap_or("sweep") {
            "sweep" => Kind::Sweep,
            "existence" => Kind::Existence,
            other => return Err(Error::parse(preset.line_of("kind"), format!("unknown kind `{other}`"))),
        };
        let axis = with_line(required("sweep")?.parse::<SweepAxis>(), preset.line_of("sweep"))?;
        if kind == Kind::Existence && axis != SweepAxis::Chi2Db {
            return Err(Error::parse(
                preset.line_of("sweep"),
                "the existence test sweeps chi2_db",
            ));
        }
        let grid_text = required("grid")?.to_string();
        let grid = with_line(parse_grid(&grid_text), preset.line_of("grid"))?;

        let mut base = Scenario::default();
        base.apply_preset(&preset)?;

        let mut curves = Vec::new();
        for (k, v, line) in preset.entries() {
            if k == "curve" {
                let c = parse_curve(v, line)?;
                if curves.iter().any(|o: &Curve| o.name == c.name) {
                    return Err(Error::parse(line, format!("duplicate curve `{}`", c.name)));
                }
                curves.push(c);
            }
        }
        if curves.is_empty() {
            curves.push(Curve {
                name: "main".into(),
                overrides: Vec::new(),
            });
        }

        let int = |k: &str, default: u64| -> Result<u64> {
            match preset.get(k) {
                None => Ok(default),
                Some(v) => v.trim().parse().map_err(|_| {
                    Error::parse(
                        preset.line_of(k),
                        format!("`{k}` must be a non-negative integer, got `{v}`"),
                    )
                }),
            }
        };
        let markers = match preset.get("markers").unwrap_or("none") {
            "none" => false,
            "optima" => true,
            other => {
                return Err(Error::parse(
                    preset.line_of("markers"),
                    format!("unknown markers `{other}`"),
                ))
            }
        };
        let sim = SimPlan {
            slots: int("slots", 1_000_000)?,
            seed: int("seed", 1)?,
            modes: with_line(
                parse_sim_modes(preset.get("sim_mode").unwrap_or("sample_level")),
                preset.line_of("sim_mode"),
            )?,
            every: usize::try_from(int("sim_every", 0)?)
                .map_err(|_| Error::parse(preset.line_of("sim_every"), "sim_every too large"))?,
        };
        let notes = preset.get_all("note").map(str::to_string).collect();

        let spec = Self {
            figure,
            kind,
            base,
            axis,
            grid_text,
            grid,
            curves,
            overrides: scenario_overrides,
            markers,
            sim,
            notes,
        };
        // Surface bad values now rather than halfway through a run.
        for c in &spec.curves {
            spec.curve_scenario(c)?;
        }
        Ok(spec)
    }

    /// Base parameters with the curve's and the command line's overrides.
    pub fn curve_scenario(&self, curve: &Curve) -> Result<Scenario> {
        let mut s = self.base;
        for (k, v) in curve.overrides.iter().chain(&self.overrides) {
            s.set(k, v)?;
        }
        Ok(s)
    }

    /// Output file name for a curve.
    pub fn file_name(&self, curve: &Curve) -> String {
        format!("{}_{}.csv", self.figure, curve.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_presets_resolve() {
        for f in Figure::ALL {
            let spec = ExperimentSpec::from_preset(f.preset(), &[]).unwrap();
            assert_eq!(spec.figure, f.name());
            assert!(!spec.notes.is_empty() || f != Figure::Fig3);
        }
        assert_eq!("fig4b".parse::<Figure>().unwrap(), Figure::Fig4b);
        assert!("fig7".parse::<Figure>().is_err());
    }

    #[test]
    fn overrides_win() {
        let text = "figure = t\nsweep = chi2_db\ngrid = -20, -10\nns = 300\ncurve = a: ns = 400\n";
        let o = vec![
            ("ns".to_string(), "500".to_string()),
            ("seed".to_string(), "9".to_string()),
        ];
        let spec = ExperimentSpec::from_preset(text, &o).unwrap();
        assert_eq!(spec.curve_scenario(&spec.curves[0]).unwrap().ns, 500);
        assert_eq!(spec.sim.seed, 9);
        assert_eq!(spec.file_name(&spec.curves[0]), "t_a.csv");
    }

    #[test]
    fn bad_presets_name_the_line() {
        let cases = [
            ("figure = t\nsweep = nope\ngrid = 1\n", 2),
            ("figure = t\nsweep = mu\ngrid = 2, 1\n", 3),
            ("figure = t\nsweep = mu\ngrid = 1\nbogus = 3\n", 4),
            ("figure = t\nsweep = mu\ngrid = 1\ncurve = a: zz = 1\n", 4),
            ("figure = t\nsweep = mu\ngrid = 1\ncurve = a\ncurve = a\n", 5),
            ("figure = t\nsweep = mu\ngrid = 1\nmu = x\n", 4),
        ];
        for (text, line) in cases {
            match ExperimentSpec::from_preset(text, &[]) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(ExperimentSpec::from_preset("sweep = mu\ngrid = 1\n", &[]).is_err());
        let o = vec![("colour".to_string(), "red".to_string())];
        assert!(ExperimentSpec::from_preset(Figure::Fig3.preset(), &o).is_err());
    }
}
