use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::params::{db_to_linear, linear_to_db};
use super::scenario::{analyze, evaluate, sim_config, ResultRow, Scenario, SimSettings, Simulated, Status};
use super::table::{format_sig, Cell, ResultTable};
use super::{Curve, ExperimentSpec, Kind, SweepAxis};
use crate::error::{Error, Result};
use crate::power::{existence_curves, existence_threshold, optimal_power, PowerSearch};
use crate::sim::{run, SimConfig};

/// Progress notice passed to the caller while an experiment runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Progress<'a> {
    pub curve: &'a str,
    pub done: usize,
    pub total: usize,
}

/// Runs every curve of `spec` and returns `(file name, table)` pairs in
/// curve order. `command` is echoed in each table's header.
pub fn run_experiment(
    spec: &ExperimentSpec,
    command: &str,
    progress: &(dyn Fn(&Progress<'_>) + Sync),
) -> Result<Vec<(String, ResultTable)>> {
    spec.curves
        .iter()
        .enumerate()
        .map(|(k, curve)| {
            let s = spec.curve_scenario(curve)?;
            let mut table = match spec.kind {
                Kind::Sweep => sweep_curve(spec, k, curve, &s, progress)?,
                Kind::Existence => existence_curve(spec, &s)?,
            };
            let mut header = vec![
                format!("latcr {}", env!("CARGO_PKG_VERSION")),
                format!("figure = {}", spec.figure),
                format!("curve = {}", curve.name),
                format!("command = {command}"),
                format!("sweep = {} {}", spec.axis.name(), spec.grid_text),
            ];
            if spec.kind == Kind::Sweep && spec.sim.enabled() {
                let modes: Vec<String> = spec.sim.modes.iter().map(|m| m.to_string()).collect();
                header.push(format!("seed = {}", spec.sim.seed));
                header.push(format!(
                    "simulation = {} slots, every {} points, {}",
                    spec.sim.slots,
                    spec.sim.every,
                    modes.join(" ")
                ));
            }
            header.extend(s.echo());
            header.extend(spec.notes.iter().map(|n| format!("note = {n}")));
            header.append(&mut table.comments);
            table.comments = header;
            Ok((spec.file_name(curve), table))
        })
        .collect()
}

fn sweep_curve(
    spec: &ExperimentSpec,
    curve_idx: usize,
    curve: &Curve,
    s: &Scenario,
    progress: &(dyn Fn(&Progress<'_>) + Sync),
) -> Result<ResultTable> {
    let mut table = ResultRow::table();
    let mut rows = Vec::with_capacity(spec.grid.len());
    for &v in &spec.grid {
        let (status, a) = analyze(&spec.axis.apply(s, v)?)?;
        rows.push((
            ResultRow {
                sweep_value: Some(v),
                status,
                analytic: a.map(|x| x.0),
                marker: None,
                simulated: None,
            },
            a.map(|x| x.1),
        ));
    }

    // Simulations for every k-th feasible grid point, one row per mode.
    let mut sims: Vec<Vec<Simulated>> = vec![Vec::new(); rows.len()];
    if spec.sim.enabled() {
        let mut jobs: Vec<(usize, SimConfig)> = Vec::new();
        for (i, (row, th)) in rows.iter().enumerate() {
            let Some(th) = th.filter(|_| i % spec.sim.every == 0 && row.status == Status::Ok) else {
                continue;
            };
            let sc = spec.axis.apply(s, spec.grid[i])?;
            for &mode in &spec.sim.modes {
                let settings = SimSettings {
                    slots: spec.sim.slots,
                    seed: spec.sim.seed,
                    mode,
                };
                jobs.push((
                    i,
                    sim_config(&sc, th, &settings, ((curve_idx as u64) << 32) | i as u64)?,
                ));
            }
        }
        let done = AtomicUsize::new(0);
        let total = jobs.len();
        let results: Vec<(usize, Simulated)> = jobs
            .par_iter()
            .map(|(i, cfg)| {
                let metrics = run(cfg);
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                progress(&Progress {
                    curve: &curve.name,
                    done: n,
                    total,
                });
                (
                    *i,
                    Simulated {
                        mode: cfg.mode,
                        metrics,
                    },
                )
            })
            .collect();
        for (i, sim) in results {
            sims[i].push(sim);
        }
    }

    let mut out: Vec<ResultRow> = Vec::new();
    for ((row, _), sim) in rows.into_iter().zip(sims) {
        if sim.is_empty() {
            out.push(row);
            continue;
        }
        for s in sim {
            out.push(ResultRow {
                simulated: Some(s),
                ..row.clone()
            });
        }
    }

    if spec.markers {
        if spec.axis != SweepAxis::SigmaS2Db {
            return Err(Error::invalid("markers", "optimum markers need a sigma_s2_db sweep"));
        }
        let (lo, hi) = (spec.grid[0], spec.grid[spec.grid.len() - 1]);
        for (name, value_db) in optimum_markers(s, &mut table.comments)? {
            if value_db < lo || value_db > hi {
                continue;
            }
            let (status, a) = analyze(&spec.axis.apply(s, value_db)?)?;
            let at = out.partition_point(|r| r.sweep_value.is_some_and(|x| x <= value_db));
            out.insert(
                at,
                ResultRow {
                    sweep_value: Some(value_db),
                    status,
                    analytic: a.map(|x| x.0),
                    marker: Some(name),
                    simulated: None,
                },
            );
        }
    }

    for row in &out {
        table.push(row.cells())?;
    }
    Ok(table)
}

/// Local optimum and following minimum of the throughput curve, in dB
/// over the noise power. Also records them as comments.
fn optimum_markers(s: &Scenario, comments: &mut Vec<String>) -> Result<Vec<(&'static str, f64)>> {
    let (a, _) = match evaluate(s) {
        Ok(v) => v,
        Err(Error::InfeasibleConstraint { .. } | Error::NoRoot { .. } | Error::DegenerateDenominator { .. }) => {
            comments.push("optimum = none (constraint not met)".into());
            return Ok(Vec::new());
        }
        Err(e) => return Err(e),
    };
    let radio = s.radio()?;
    let to_db = |x: f64| linear_to_db(x / s.sigma_u2);
    let opt = match optimal_power(&radio, &s.transition_probs()?, a.pm, &PowerSearch::default_for(&radio)) {
        Ok(o) => o,
        Err(Error::AmbiguousLandscape { roots }) => {
            let r: Vec<String> = roots.iter().map(|&x| format_sig(to_db(x))).collect();
            comments.push(format!("optimum = ambiguous, stationary points at {} dB", r.join(" ")));
            return Ok(Vec::new());
        }
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    match opt.local_max {
        Some(m) => {
            comments.push(format!(
                "local_max_sigma_s2_db = {}, throughput = {}",
                format_sig(to_db(m)),
                format_sig(opt.c_at_max.unwrap_or(f64::NAN))
            ));
            out.push(("local_max", to_db(m)));
        }
        None => comments.push("local_max_sigma_s2_db = none".into()),
    }
    if let Some(m) = opt.local_min {
        comments.push(format!("local_min_sigma_s2_db = {}", format_sig(to_db(m))));
        out.push(("local_min", to_db(m)));
    }
    Ok(out)
}

pub(crate) const EXISTENCE_COLUMNS: [&str; 7] = [
    "sweep_value",
    "chi2",
    "lhs_max",
    "rhs",
    "argmax_sigma_s2_db",
    "predicts",
    "exact_exists",
];

fn existence_curve(spec: &ExperimentSpec, s: &Scenario) -> Result<ResultTable> {
    let mut table = ResultTable::new(&EXISTENCE_COLUMNS);
    let (a, _) = evaluate(s)?;
    let radio = s.radio()?;
    let tp = s.transition_probs()?;
    let search = PowerSearch::default_for(&radio);
    let chi2s: Vec<f64> = spec
        .grid
        .iter()
        .map(|&v| if v == f64::NEG_INFINITY { 0.0 } else { db_to_linear(v) })
        .collect();
    let points = existence_curves(&radio, &tp, a.pm, &chi2s, &search)?;
    let exact: Vec<&str> = chi2s
        .par_iter()
        .map(|&c| -> Result<&str> {
            match optimal_power(&radio.with_chi2(c)?, &tp, a.pm, &search) {
                Ok(o) => Ok(if o.exists { "true" } else { "false" }),
                Err(Error::AmbiguousLandscape { .. }) => Ok("ambiguous"),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    match existence_threshold(&points) {
        Some(t) => table.comments.push(format!("threshold_chi2 = {}", format_sig(t))),
        None => table.comments.push("threshold_chi2 = none".into()),
    }
    for ((v, p), e) in spec.grid.iter().zip(&points).zip(exact) {
        table.push(vec![
            Cell::Num(*v),
            Cell::Num(p.chi2),
            Cell::Num(p.lhs_max),
            Cell::Num(p.rhs),
            Cell::Num(linear_to_db(p.argmax / s.sigma_u2)),
            Cell::from(if p.predicts_optimum() { "true" } else { "false" }),
            Cell::from(e),
        ])?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::super::Figure;
    use super::*;

    fn quiet(_: &Progress<'_>) {}

    #[test]
    fn marker_rows_sit_in_order() {
        let text = "figure = t\nsweep = sigma_s2_db\ngrid = lin:-10:40:51\nchi2 = -20 dB\nmarkers = optima\n";
        let spec = ExperimentSpec::from_preset(text, &[]).unwrap();
        let out = run_experiment(&spec, "latcr figure t", &quiet).unwrap();
        let t = &out[0].1;
        assert_eq!(t.rows.len(), 53);
        let xs: Vec<f64> = t
            .column("sweep_value")
            .unwrap()
            .into_iter()
            .map(Option::unwrap)
            .collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0]));
        let markers: Vec<_> = t.text_column("marker").unwrap().into_iter().flatten().collect();
        assert_eq!(markers, vec!["local_max", "local_min"]);
        assert!(
            t.comments
                .iter()
                .any(|c| c.starts_with("local_max_sigma_s2_db = 18.98")),
            "{:?}",
            t.comments
        );
    }

    #[test]
    fn both_modes_give_two_rows_with_differences() {
        let text = "figure = t\nsweep = chi2_db\ngrid = -20, -10\nsim_every = 2\nslots = 20000\nsim_mode = both\n";
        let spec = ExperimentSpec::from_preset(text, &[]).unwrap();
        let out = run_experiment(&spec, "x", &quiet).unwrap();
        let t = &out[0].1;
        assert_eq!(t.rows.len(), 3);
        let modes = t.text_column("sim_mode").unwrap();
        assert_eq!(modes, vec![Some("sample_level"), Some("slot_statistical"), None]);
        let d = t.column("diff_pc").unwrap();
        assert!(d[0].is_some() && d[1].is_some() && d[2].is_none());
        assert!(t.comments.contains(&"seed = 1".to_string()));
    }

    #[test]
    fn infeasible_points_are_kept() {
        let spec = ExperimentSpec::from_preset(Figure::Fig3.preset(), &[]).unwrap();
        let out = run_experiment(&spec, "x", &quiet).unwrap();
        let t = &out.iter().find(|(n, _)| n.contains("mu_1e-2")).unwrap().1;
        let status = t.text_column("status").unwrap();
        assert_eq!(status[0], Some("infeasible"));
        assert_eq!(*status.last().unwrap(), Some("ok"));
    }
}
