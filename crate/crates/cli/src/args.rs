//! Command-line flags and their translation into a [`RunConfig`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{AxisArg, BandArg, CommandKind, DecayArg, Format, RunConfig, Units};

#[derive(Debug, Parser)]
#[command(
    name = "ddmag",
    version,
    about = "Weight functions, decay envelopes and sensitivities of dynamically decoupled AC magnetometers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file (default: standard output).
    #[arg(long, global = true)]
    pub out: Option<String>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Seed of the Monte Carlo noise streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Unit of frequency inputs (Rabi frequency, noise dispersion, frequency ranges).
    #[arg(long, global = true, value_enum)]
    pub units: Option<Units>,

    /// Worker threads (default: all cores). Does not affect results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weight function W(ω) on a frequency grid.
    Weight(RunArgs),
    /// Rotary-echo pass-band centers and heights.
    Passbands(RunArgs),
    /// Decay envelope per cycle, analytic with optional Monte Carlo columns.
    Decay(RunArgs),
    /// Sensitivity scan over time, frequency, k or n.
    Sensitivity(RunArgs),
    /// Monte Carlo signal per cycle.
    Montecarlo(RunArgs),
    /// Print the JSON schema of the run configuration.
    Schema,
}

impl Command {
    pub fn split(&self) -> Option<(CommandKind, &RunArgs)> {
        match self {
            Command::Weight(a) => Some((CommandKind::Weight, a)),
            Command::Passbands(a) => Some((CommandKind::Passbands, a)),
            Command::Decay(a) => Some((CommandKind::Decay, a)),
            Command::Sensitivity(a) => Some((CommandKind::Sensitivity, a)),
            Command::Montecarlo(a) => Some((CommandKind::Montecarlo, a)),
            Command::Schema => None,
        }
    }
}

/// Run parameters. Which ones apply depends on the subcommand; the others
/// are rejected.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Scheme (repeatable): re, re:K, pdd, constant, spin_lock.
    #[arg(long = "scheme")]
    pub schemes: Vec<String>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long, alias = "n_max")]
    pub n_max: Option<u32>,
    #[arg(long)]
    pub rabi: Option<f64>,
    #[arg(long)]
    pub period: Option<f64>,
    /// start:stop:count[:log] in units of the Rabi frequency.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, alias = "p_max")]
    pub p_max: Option<i64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, alias = "tau_c")]
    pub tau_c: Option<f64>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long, alias = "steps_per_period")]
    pub steps_per_period: Option<usize>,
    #[arg(long)]
    pub readout: Option<String>,
    #[arg(long, value_enum)]
    pub axis: Option<AxisArg>,
    /// start:stop:count[:log]
    #[arg(long)]
    pub range: Option<String>,
    #[arg(long, value_enum)]
    pub band: Option<BandArg>,
    /// Field phase in rad, `optimal` or `unknown`.
    #[arg(long, allow_hyphen_values = true)]
    pub phase: Option<String>,
    #[arg(long, alias = "decay_model", value_enum)]
    pub decay_model: Option<DecayArg>,
    #[arg(long)]
    pub t2: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

impl Cli {
    /// Flags as a partial configuration (no defaults applied).
    pub fn flags_config(&self, args: &RunArgs) -> RunConfig {
        RunConfig {
            command: None,
            schemes: (!args.schemes.is_empty()).then(|| args.schemes.clone()),
            k: args.k,
            n: args.n,
            n_max: args.n_max,
            rabi: args.rabi,
            period: args.period,
            grid: args.grid.clone(),
            p_max: args.p_max,
            sigma: args.sigma,
            tau_c: args.tau_c,
            trajectories: args.trajectories,
            steps_per_period: args.steps_per_period,
            readout: args.readout.clone(),
            axis: args.axis,
            range: args.range.clone(),
            band: args.band,
            phase: args.phase.clone(),
            decay_model: args.decay_model,
            t2: args.t2,
            c: args.c,
            gamma: args.gamma,
            seed: self.seed,
            units: self.units,
            format: self.format,
            out: self.out.clone(),
        }
    }
}
