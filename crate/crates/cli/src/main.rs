mod args;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use latcr_core::experiment::{
    evaluate, format_sig, linear_to_db, parse_sim_modes, run_experiment, sim_config, ExperimentSpec, Figure, Progress,
    ResultRow, ResultTable, Scenario, SimSettings, Simulated, Status,
};
use latcr_core::power::{optimal_power, PowerSearch};
use latcr_core::sim::{run_batch, SimMode};
use latcr_core::Error;

use args::{push_flag, Cli, Command, ScenarioArgs, SimArgs};

enum Failure {
    Usage(String),
    Model(Error),
    Io(PathBuf, io::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Model(e) => match e {
                Error::InfeasibleConstraint { .. } | Error::NoRoot { .. } => 2,
                Error::SingularSystem
                | Error::DegenerateDenominator { .. }
                | Error::ColumnSumViolation { .. }
                | Error::AmbiguousLandscape { .. } => 3,
                Error::InvalidParameter { .. } | Error::Parse { .. } => 1,
            },
            Failure::Io(..) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Model(e) => write!(f, "{e}"),
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cli: Cli) -> Outcome {
    let quiet = cli.quiet;
    match cli.command {
        Command::Analyze { scenario, out } => analyze(&scenario, out.as_deref()),
        Command::Simulate { scenario, sim, out } => simulate(&scenario, &sim, out.as_deref(), quiet),
        Command::Figure {
            which,
            preset,
            grid,
            simulate,
            scenario,
            sim,
            out,
        } => figure(
            which.as_deref(),
            preset.as_deref(),
            grid,
            simulate,
            &scenario,
            &sim,
            &out,
            quiet,
        ),
        Command::OptimalPower {
            scenario,
            lo_db,
            hi_db,
            points,
            out,
        } => optimal(&scenario, lo_db, hi_db, points, out.as_deref()),
    }
}

fn build_scenario(a: &ScenarioArgs) -> Result<Scenario, Failure> {
    let mut s = Scenario::default();
    for (key, value, flag) in a.overrides() {
        s.set(key, &value)
            .map_err(|e| Failure::Usage(format!("{flag} {value}: {e}")))?;
    }
    Ok(s)
}

fn command_line(sub: &str, scenario: &ScenarioArgs, extra: impl FnOnce(&mut Vec<String>)) -> String {
    let mut words = vec!["latcr".to_string(), sub.to_string()];
    extra(&mut words);
    scenario.canonical(&mut words);
    words.join(" ")
}

fn header(command: &str, s: &Scenario) -> Vec<String> {
    let mut h = vec![
        format!("latcr {}", env!("CARGO_PKG_VERSION")),
        format!("command = {command}"),
    ];
    h.extend(s.echo());
    h
}

fn emit(table: &ResultTable, out: Option<&Path>) -> Outcome {
    let text = table.to_csv();
    match out {
        Some(p) => write_file(p, &text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn write_file(p: &Path, text: &str) -> Outcome {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.to_path_buf(), e))?;
    }
    fs::write(p, text).map_err(|e| Failure::Io(p.to_path_buf(), e))
}

fn analyze(a: &ScenarioArgs, out: Option<&Path>) -> Outcome {
    let s = build_scenario(a)?;
    let (analytic, _) = evaluate(&s)?;
    let mut t = ResultRow::table();
    t.comments = header(&command_line("analyze", a, |_| {}), &s);
    t.push(
        ResultRow {
            sweep_value: None,
            status: Status::Ok,
            analytic: Some(analytic),
            marker: None,
            simulated: None,
        }
        .cells(),
    )?;
    emit(&t, out)
}

fn sim_modes(sim: &SimArgs, default: &str) -> Result<Vec<SimMode>, Failure> {
    let text = sim.mode.as_deref().unwrap_or(default);
    let modes = parse_sim_modes(text).map_err(|e| Failure::Usage(format!("--mode {text}: {e}")))?;
    if modes.is_empty() {
        return Err(Failure::Usage("--mode none leaves nothing to simulate".into()));
    }
    Ok(modes)
}

fn simulate(a: &ScenarioArgs, sim: &SimArgs, out: Option<&Path>, quiet: bool) -> Outcome {
    let s = build_scenario(a)?;
    let (analytic, th) = evaluate(&s)?;
    let modes = sim_modes(sim, "both")?;
    let slots = sim.slots.unwrap_or(1_000_000);
    let seed = sim.seed.unwrap_or(1);
    let cfgs = modes
        .iter()
        .map(|&mode| sim_config(&s, th, &SimSettings { slots, seed, mode }, 0))
        .collect::<latcr_core::Result<Vec<_>>>()?;
    if !quiet {
        eprintln!("simulating {slots} slots in {} mode(s)", cfgs.len());
    }
    let metrics = run_batch(&cfgs)?;

    let mut t = ResultRow::table();
    let command = command_line("simulate", a, |w| {
        push_flag(w, "--slots", &slots.to_string());
        push_flag(w, "--seed", &seed.to_string());
        if let Some(m) = &sim.mode {
            push_flag(w, "--mode", m);
        }
    });
    t.comments = header(&command, &s);
    t.comments.push(format!("seed = {seed}"));
    for (mode, m) in modes.into_iter().zip(metrics) {
        t.comments.push(format!(
            "{mode}: throughput_per_total = {}, idle_toggle_rate = {}",
            format_sig(m.throughput_per_total),
            format_sig(m.idle_toggle_rate)
        ));
        t.push(
            ResultRow {
                sweep_value: None,
                status: Status::Ok,
                analytic: Some(analytic),
                marker: None,
                simulated: Some(Simulated { mode, metrics: m }),
            }
            .cells(),
        )?;
    }
    emit(&t, out)
}

#[allow(clippy::too_many_arguments)]
fn figure(
    which: Option<&str>,
    preset: Option<&Path>,
    grid: Option<String>,
    simulate: Option<usize>,
    a: &ScenarioArgs,
    sim: &SimArgs,
    out: &Path,
    quiet: bool,
) -> Outcome {
    let text = match (which, preset) {
        (_, Some(p)) => fs::read_to_string(p).map_err(|e| Failure::Io(p.to_path_buf(), e))?,
        (Some(w), None) => w.parse::<Figure>()?.preset().to_string(),
        (None, None) => {
            return Err(Failure::Usage(
                "name a figure (fig3 ... fig6) or pass --preset FILE".into(),
            ))
        }
    };

    let mut overrides: Vec<(String, String)> = a.overrides().into_iter().map(|(k, v, _)| (k.to_string(), v)).collect();
    let mut extra = Vec::new();
    if let Some(g) = &grid {
        overrides.push(("grid".into(), g.clone()));
        push_flag(&mut extra, "--grid", g);
    }
    if let Some(k) = simulate {
        overrides.push(("sim_every".into(), k.to_string()));
        push_flag(&mut extra, "--simulate", &k.to_string());
    }
    if let Some(n) = sim.slots {
        overrides.push(("slots".into(), n.to_string()));
    }
    if let Some(n) = sim.seed {
        overrides.push(("seed".into(), n.to_string()));
    }
    if let Some(m) = &sim.mode {
        overrides.push(("sim_mode".into(), m.clone()));
    }
    sim.canonical(&mut extra);
    let spec = ExperimentSpec::from_preset(&text, &overrides)?;

    let command = command_line("figure", a, |w| {
        if let Some(w0) = which {
            w.push(w0.to_string());
        }
        if let Some(p) = preset {
            push_flag(w, "--preset", &p.display().to_string());
        }
        w.append(&mut extra);
    });
    let report = |p: &Progress<'_>| {
        let step = (p.total / 10).max(1);
        if !quiet && (p.done.is_multiple_of(step) || p.done == p.total) {
            eprintln!("{} {}: {}/{} simulations", spec.figure, p.curve, p.done, p.total);
        }
    };
    let tables = run_experiment(&spec, &command, &report)?;
    fs::create_dir_all(out).map_err(|e| Failure::Io(out.to_path_buf(), e))?;
    for (name, table) in tables {
        let path = out.join(name);
        write_file(&path, &table.to_csv())?;
        if !quiet {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn optimal(a: &ScenarioArgs, lo_db: f64, hi_db: f64, points: usize, out: Option<&Path>) -> Outcome {
    let s = build_scenario(a)?;
    let (analytic, _) = evaluate(&s)?;
    let radio = s.radio()?;
    let search = PowerSearch::new(
        s.sigma_u2 * 10f64.powf(lo_db / 10.0),
        s.sigma_u2 * 10f64.powf(hi_db / 10.0),
        points,
    )?;
    let r = optimal_power(&radio, &s.transition_probs()?, analytic.pm, &search)?;
    let to_db = |x: Option<f64>| x.map(|v| linear_to_db(v / s.sigma_u2));

    let mut t = ResultTable::new(&[
        "chi2",
        "pm",
        "exists",
        "local_max_sigma_s2_db",
        "local_min_sigma_s2_db",
        "c_at_max",
    ]);
    let command = command_line("optimal-power", a, |w| {
        push_flag(w, "--lo-db", &lo_db.to_string());
        push_flag(w, "--hi-db", &hi_db.to_string());
        push_flag(w, "--points", &points.to_string());
    });
    t.comments = header(&command, &s);
    t.push(vec![
        s.chi2.into(),
        analytic.pm.into(),
        if r.exists { "true" } else { "false" }.into(),
        to_db(r.local_max).into(),
        to_db(r.local_min).into(),
        r.c_at_max.into(),
    ])?;
    emit(&t, out)
}
