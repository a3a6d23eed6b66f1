//! Run configuration: the JSON document that fully determines a run, its
//! merge with command-line flags, and resolution of defaults.

use std::f64::consts::PI;

use clap::ValueEnum;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CommandKind {
    Weight,
    Passbands,
    Decay,
    Sensitivity,
    Montecarlo,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Weight => "weight",
            CommandKind::Passbands => "passbands",
            CommandKind::Decay => "decay",
            CommandKind::Sensitivity => "sensitivity",
            CommandKind::Montecarlo => "montecarlo",
        }
    }

    /// Config keys meaningful for this command besides the global ones.
    fn keys(self) -> &'static [&'static str] {
        match self {
            CommandKind::Weight => &["schemes", "k", "n", "rabi", "period", "grid"],
            CommandKind::Passbands => &["k", "n", "rabi", "p_max"],
            CommandKind::Decay => &[
                "schemes",
                "k",
                "n",
                "rabi",
                "period",
                "sigma",
                "tau_c",
                "trajectories",
                "steps_per_period",
            ],
            CommandKind::Montecarlo => &[
                "schemes",
                "k",
                "n",
                "rabi",
                "period",
                "sigma",
                "tau_c",
                "trajectories",
                "steps_per_period",
                "readout",
            ],
            CommandKind::Sensitivity => &[
                "schemes",
                "k",
                "n",
                "n_max",
                "rabi",
                "period",
                "axis",
                "range",
                "band",
                "phase",
                "decay_model",
                "t2",
                "sigma",
                "tau_c",
                "trajectories",
                "steps_per_period",
                "c",
                "gamma",
            ],
        }
    }
}

const GLOBAL_KEYS: [&str; 5] = ["command", "seed", "units", "format", "out"];

/// Unit of frequency-valued inputs (Rabi frequency, noise dispersion,
/// frequency-axis values).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Hz,
    Rads,
}

impl Units {
    /// Factor converting an input value to rad/s.
    pub fn to_rad_s(self) -> f64 {
        match self {
            Units::Hz => 2.0 * PI,
            Units::Rads => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum AxisArg {
    /// Total interrogation time (s) at fixed n.
    Time,
    /// Field frequency, period matched to the band.
    Frequency,
    /// Echo index at fixed Rabi frequency.
    K,
    /// Cycle count at fixed period.
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum BandArg {
    Opt,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DecayArg {
    Noiseless,
    /// e^{-t³/(n²T₂³)} with `t2`.
    Cubic,
    /// Long-correlation cubic law from `sigma`, `tau_c`.
    LongTc,
    /// Closed-form OU envelope (rotary echo).
    Ou,
    /// Monte Carlo envelope.
    Mc,
}

/// Complete description of a run. Every key is optional in a config file;
/// omitted keys take the documented defaults, and command-line flags
/// override file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand; must agree with the one given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    /// Schemes: `re` (uses `k`), `re:K`, `pdd`, `constant`, `spin_lock`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<String>>,
    /// Echo index for plain `re` entries (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Cycle count; for `decay`, the largest cycle count of the curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    /// Largest cycle count searched when optimizing n in a scan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    /// Rabi frequency in `units` (default 1 MHz).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<f64>,
    /// PDD period (s); defaults to the 2πk rotary-echo period at `rabi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Frequency grid `start:stop:count[:log]` in units of the Rabi frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    /// Highest pass-band index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<i64>,
    /// OU noise dispersion in `units`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// OU correlation time (s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_c: Option<f64>,
    /// Monte Carlo trajectories (at most 10⁶).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    /// Propagation steps per period (even, >= 100).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_period: Option<usize>,
    /// Readout axis: auto, x, y or z.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<AxisArg>,
    /// Scan values `start:stop:count[:log]`; seconds for time, `units` for
    /// frequency, integers for k and n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<BandArg>,
    /// Field phase in rad, `optimal`, or `unknown`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_model: Option<DecayArg>,
    /// Coherence time T₂ (s) of the cubic decay model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    /// Readout efficiency C.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Gyromagnetic ratio (rad s⁻¹ T⁻¹).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Units>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    /// Values present in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(
            self, top, command, schemes, k, n, n_max, rabi, period, grid, p_max, sigma, tau_c,
            trajectories, steps_per_period, readout, axis, range, band, phase, decay_model, t2,
            c, gamma, seed, units, format, out
        );
        self
    }

    /// Keys set in this config.
    pub fn present_keys(&self) -> Vec<String> {
        match serde_json::to_value(self).expect("config serializes") {
            serde_json::Value::Object(map) => map.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }

    /// Rejects keys that do not apply to `command` and fills defaults.
    pub fn resolve(mut self, command: CommandKind) -> Result<Self, CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::Config(format!(
                    "config is for command {:?} but {:?} was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        self.command = Some(command);
        for key in self.present_keys() {
            if !GLOBAL_KEYS.contains(&key.as_str()) && !command.keys().contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "key {key:?} does not apply to the {} command",
                    command.name()
                )));
            }
        }

        let units = *self.units.get_or_insert(Units::Hz);
        self.seed.get_or_insert(0);
        self.format.get_or_insert(match command {
            CommandKind::Passbands => Format::Json,
            _ => Format::Csv,
        });
        self.k.get_or_insert(1);
        self.rabi.get_or_insert(match units {
            Units::Hz => 1.0e6,
            Units::Rads => 2.0 * PI * 1.0e6,
        });
        let uses = |key: &str| command.keys().contains(&key);
        if uses("schemes") {
            self.schemes.get_or_insert_with(|| vec!["re".to_string()]);
        }
        self.n.get_or_insert(match command {
            CommandKind::Decay => 10,
            _ => 1,
        });
        match command {
            CommandKind::Weight => {
                self.grid.get_or_insert_with(|| "0.05:4.0:2000".to_string());
            }
            CommandKind::Passbands => {
                self.p_max.get_or_insert(5);
            }
            CommandKind::Decay | CommandKind::Montecarlo => {
                self.trajectories.get_or_insert(match command {
                    CommandKind::Decay => 0,
                    _ => 10_000,
                });
                self.steps_per_period.get_or_insert(4096);
                if command == CommandKind::Montecarlo {
                    self.readout.get_or_insert_with(|| "auto".to_string());
                }
            }
            CommandKind::Sensitivity => {
                let axis = *self.axis.get_or_insert(AxisArg::Time);
                self.range.get_or_insert_with(|| {
                    match axis {
                        AxisArg::Time => "5e-6:1e-3:200",
                        AxisArg::Frequency => "1e4:1e7:61:log",
                        AxisArg::K => "1:8:8",
                        AxisArg::N => "1:50:50",
                    }
                    .to_string()
                });
                self.band.get_or_insert(BandArg::Opt);
                self.phase.get_or_insert_with(|| "optimal".to_string());
                let model = *self.decay_model.get_or_insert(if self.t2.is_some() {
                    DecayArg::Cubic
                } else {
                    DecayArg::Noiseless
                });
                if model == DecayArg::Mc {
                    self.trajectories.get_or_insert(10_000);
                    self.steps_per_period.get_or_insert(4096);
                }
                self.c.get_or_insert(ddmag_core::sensitivity::DEFAULT_READOUT_EFFICIENCY);
                self.gamma
                    .get_or_insert(ddmag_core::sensitivity::ELECTRON_GYROMAGNETIC_RATIO);
            }
        }
        Ok(self)
    }

    /// Configuration as embedded in outputs: everything except the output
    /// path, so that the data do not depend on where they are written.
    pub fn provenance(&self) -> RunConfig {
        RunConfig {
            out: None,
            ..self.clone()
        }
    }
}

/// `start:stop:count[:log]`, inclusive, linear unless `log`.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("range {text:?} is not start:stop:count[:log]"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    if !(parts.len() == 3 || parts.len() == 4) {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    let log = match parts.get(3) {
        None => false,
        Some(&"log") => true,
        Some(&"lin") => false,
        Some(_) => return Err(bad()),
    };
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    if log && !(start > 0.0 && stop > 0.0) {
        return Err(CliError::Config(format!("log range needs positive bounds: {text:?}")));
    }
    let last = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            let f = i as f64 / last;
            if i + 1 == count {
                stop
            } else if log {
                (start.ln() + f * (stop.ln() - start.ln())).exp()
            } else {
                start + f * (stop - start)
            }
        })
        .collect())
}
