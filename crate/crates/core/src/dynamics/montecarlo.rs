//! Monte Carlo ensemble signals under OU dephasing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ou::OuNoise;
use super::propagate::{evolve_by_cycle, sampling_ratio, SensedField};
use crate::error::{invalid, Error, Result};
use crate::exec::{ordered_sum, try_map_indexed, Execution};
use crate::sequence::SequenceSpec;
use crate::spin::Axis;

/// Readout axis for the survival probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// The scheme's prepared axis.
    #[default]
    Auto,
    X,
    Y,
    Z,
}

impl Readout {
    pub fn resolve(self, seq: &SequenceSpec) -> Axis {
        match self {
            Readout::Auto => seq.scheme().prepared_axis(),
            Readout::X => Axis::X,
            Readout::Y => Axis::Y,
            Readout::Z => Axis::Z,
        }
    }
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Readout::Auto),
            "x" => Ok(Readout::X),
            "y" => Ok(Readout::Y),
            "z" => Ok(Readout::Z),
            _ => Err(Error::UnknownReadout(s.to_string())),
        }
    }
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Readout::Auto => "auto",
            Readout::X => "x",
            Readout::Y => "y",
            Readout::Z => "z",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub trajectories: usize,
    pub steps_per_period: usize,
    pub readout: Readout,
    pub exec: Execution,
    pub field: Option<SensedField>,
}

impl McConfig {
    pub const DEFAULT_STEPS_PER_PERIOD: usize = 4096;
    pub const MIN_TRAJECTORIES: usize = 100;

    pub fn new(trajectories: usize) -> Self {
        Self {
            trajectories,
            steps_per_period: Self::DEFAULT_STEPS_PER_PERIOD,
            readout: Readout::Auto,
            exec: Execution::default(),
            field: None,
        }
    }

    pub fn steps_per_period(mut self, steps: usize) -> Self {
        self.steps_per_period = steps;
        self
    }

    pub fn readout(mut self, readout: Readout) -> Self {
        self.readout = readout;
        self
    }

    pub fn exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn field(mut self, field: SensedField) -> Self {
        self.field = Some(field);
        self
    }
}

/// Ensemble estimate of the survival probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    /// Mean survival probability S̄ ∈ [0, 1].
    pub signal: f64,
    /// Sample standard deviation divided by √count.
    pub std_error: f64,
    pub count: usize,
}

impl TrajectoryResult {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = ordered_sum(samples) / n;
        let sq: Vec<f64> = samples.iter().map(|s| (s - mean).powi(2)).collect();
        let var = if samples.len() > 1 {
            ordered_sum(&sq) / (n - 1.0)
        } else {
            0.0
        };
        Self {
            signal: mean,
            std_error: (var / n).sqrt(),
            count: samples.len(),
        }
    }

    /// Signal contrast D = 2S̄ - 1 and its standard error.
    pub fn contrast(&self) -> (f64, f64) {
        (2.0 * self.signal - 1.0, 2.0 * self.std_error)
    }
}

/// Survival probability along the readout axis after the full sequence.
pub fn mc_signal(seq: &SequenceSpec, noise: &OuNoise, cfg: &McConfig) -> Result<TrajectoryResult> {
    let curve = mc_signal_by_cycle(seq, noise, cfg)?;
    Ok(*curve.last().expect("cycle 0 is always present"))
}

/// Survival probability at every cycle boundary 0, T, …, nT, estimated from
/// the same trajectories.
pub fn mc_signal_by_cycle(
    seq: &SequenceSpec,
    noise: &OuNoise,
    cfg: &McConfig,
) -> Result<Vec<TrajectoryResult>> {
    if cfg.trajectories < McConfig::MIN_TRAJECTORIES {
        return Err(invalid(format!(
            "at least {} trajectories required, got {}",
            McConfig::MIN_TRAJECTORIES,
            cfg.trajectories
        )));
    }
    sampling_ratio(seq, None, cfg.steps_per_period)?;
    let axis = cfg.readout.resolve(seq);
    let steps = seq.cycles() as usize * cfg.steps_per_period;
    let dt = seq.period() / cfg.steps_per_period as f64;
    let initial = seq.initial_state();

    let per_traj: Vec<Vec<f64>> = try_map_indexed(cfg.exec, cfg.trajectories, |i| {
        let mut rng = noise.trajectory_rng(i as u64);
        let mut path = vec![0.0; steps + 1];
        noise.sample_into(dt, &mut rng, &mut path);
        let states = evolve_by_cycle(
            seq,
            cfg.field.as_ref(),
            Some(&path),
            cfg.steps_per_period,
            initial,
        )?;
        Ok::<_, Error>(
            states
                .iter()
                .map(|s| 0.5 * (1.0 + s.component(axis)))
                .collect(),
        )
    })?;

    let cycles = seq.cycles() as usize + 1;
    Ok((0..cycles)
        .map(|c| {
            let column: Vec<f64> = per_traj.iter().map(|row| row[c]).collect();
            TrajectoryResult::from_samples(&column)
        })
        .collect())
}
