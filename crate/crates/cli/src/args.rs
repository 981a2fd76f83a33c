use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "latcr",
    version,
    about = "Listen-and-talk cognitive radio analysis and simulation"
)]
pub struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design thresholds for the collision constraint and print the closed forms.
    Analyze {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze, then run the Monte Carlo simulator at the same point.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the CSV data of one figure, one file per curve.
    Figure {
        /// fig3, fig4a, fig4b, fig5 or fig6.
        which: Option<String>,
        /// Preset file to use instead of the built-in one.
        #[arg(long)]
        preset: Option<PathBuf>,
        /// Sweep grid: lin:a:b:n, log:a:b:n or a comma-separated list.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Simulate every K-th grid point (10 when K is omitted).
        #[arg(long, value_name = "K", num_args = 0..=1, default_missing_value = "10")]
        simulate: Option<usize>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Locate the locally optimal transmit power.
    OptimalPower {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Lower end of the power search, dB over the noise power.
        #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
        lo_db: f64,
        /// Upper end of the power search, dB over the noise power.
        #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
        hi_db: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Default)]
pub struct ScenarioArgs {
    /// Sensing samples per slot.
    #[arg(long)]
    pub ns: Option<u32>,
    /// PU arrival probability per slot (a number or a ratio such as 1/500).
    #[arg(long)]
    pub mu: Option<String>,
    /// PU departure probability per slot; defaults to r * mu.
    #[arg(long)]
    pub nu: Option<String>,
    /// Departure to arrival ratio.
    #[arg(long)]
    pub r: Option<String>,
    /// Slot length in seconds.
    #[arg(long)]
    pub slot: Option<String>,
    /// Collision ratio constraint.
    #[arg(long)]
    pub pc: Option<String>,
    /// PU SNR at the SU, dB.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_s_db: Option<String>,
    /// RSI attenuation factor chi^2, dB (`-inf` for perfect cancellation).
    #[arg(long, allow_hyphen_values = true)]
    pub chi2_db: Option<String>,
    /// Noise power.
    #[arg(long)]
    pub sigma_u2: Option<String>,
    /// SU transmit power, dB over the noise power.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_s_db: Option<String>,
    /// Channel gain to the secondary receiver over its noise, dB.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_t_db: Option<String>,
    /// How the miss-detection target is derived: exact or approx.
    #[arg(long)]
    pub pm_mode: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SimArgs {
    #[arg(long)]
    pub slots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// sample_level, slot_statistical or both.
    #[arg(long)]
    pub mode: Option<String>,
}

impl ScenarioArgs {
    /// `(scenario key, value, flag)` for every flag given.
    pub fn overrides(&self) -> Vec<(&'static str, String, &'static str)> {
        let db = |v: &String| format!("{} dB", v.trim());
        let mut out = Vec::new();
        let mut put = |key, value: Option<String>, flag| {
            if let Some(v) = value {
                out.push((key, v, flag));
            }
        };
        put("ns", self.ns.map(|n| n.to_string()), "--ns");
        put("mu", self.mu.clone(), "--mu");
        put("r", self.r.clone(), "--r");
        put("nu", self.nu.clone(), "--nu");
        put("slot", self.slot.clone(), "--slot");
        put("pc", self.pc.clone(), "--pc");
        put("gamma_s", self.gamma_s_db.as_ref().map(db), "--gamma-s-db");
        put("chi2", self.chi2_db.as_ref().map(db), "--chi2-db");
        put("sigma_u2", self.sigma_u2.clone(), "--sigma-u2");
        put("sigma_s2", self.sigma_s_db.as_ref().map(db), "--sigma-s-db");
        put("sigma_t2", self.sigma_t_db.as_ref().map(db), "--sigma-t-db");
        put("pm_mode", self.pm_mode.clone(), "--pm-mode");
        out
    }

    /// Flags as typed, for the canonical command line.
    pub fn canonical(&self, words: &mut Vec<String>) {
        let raw = [
            ("--ns", self.ns.map(|n| n.to_string())),
            ("--mu", self.mu.clone()),
            ("--r", self.r.clone()),
            ("--nu", self.nu.clone()),
            ("--slot", self.slot.clone()),
            ("--pc", self.pc.clone()),
            ("--gamma-s-db", self.gamma_s_db.clone()),
            ("--chi2-db", self.chi2_db.clone()),
            ("--sigma-u2", self.sigma_u2.clone()),
            ("--sigma-s-db", self.sigma_s_db.clone()),
            ("--sigma-t-db", self.sigma_t_db.clone()),
            ("--pm-mode", self.pm_mode.clone()),
        ];
        for (flag, v) in raw {
            if let Some(v) = v {
                push_flag(words, flag, &v);
            }
        }
    }
}

impl SimArgs {
    pub fn canonical(&self, words: &mut Vec<String>) {
        if let Some(n) = self.slots {
            push_flag(words, "--slots", &n.to_string());
        }
        if let Some(n) = self.seed {
            push_flag(words, "--seed", &n.to_string());
        }
        if let Some(m) = &self.mode {
            push_flag(words, "--mode", m);
        }
    }
}

/// Appends `--flag=value`, quoting the value when a shell would split it.
pub fn push_flag(words: &mut Vec<String>, flag: &str, value: &str) {
    let plain = !value.is_empty()
        && value
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"-+._:,/=".contains(&b));
    if plain {
        words.push(format!("{flag}={value}"));
    } else {
        words.push(format!("{flag}='{}'", value.replace('\'', r"'\''")));
    }
}
