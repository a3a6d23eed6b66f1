//! Sensitivity calculus: ideal and effective η, the optimal interrogation
//! time of the cubic-decay model, and parameter scans.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::decay::{envelope_pdd, envelope_re_at, gamma2_long_tc};
use crate::dynamics::{mc_signal, McConfig, OuNoise};
use crate::error::{invalid, require_positive, Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::response::{field_factor, phase_penalty, weight, PhaseSpec};
use crate::sequence::{Scheme, SequenceSpec};
use crate::table::fmt_float;

/// Electron gyromagnetic ratio (rad s⁻¹ T⁻¹).
pub const ELECTRON_GYROMAGNETIC_RATIO: f64 = 1.760859e11;

/// Readout efficiency of a single NV readout.
pub const DEFAULT_READOUT_EFFICIENCY: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    /// Gyromagnetic ratio γ_g (rad s⁻¹ T⁻¹).
    pub gamma: f64,
    /// Readout efficiency C ∈ (0, 1].
    pub readout_efficiency: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            gamma: ELECTRON_GYROMAGNETIC_RATIO,
            readout_efficiency: DEFAULT_READOUT_EFFICIENCY,
        }
    }
}

impl SensorParams {
    pub fn new(gamma: f64, readout_efficiency: f64) -> Result<Self> {
        require_positive("gyromagnetic ratio", gamma)?;
        require_positive("readout efficiency", readout_efficiency)?;
        if readout_efficiency > 1.0 {
            return Err(invalid(format!(
                "readout efficiency must be <= 1, got {readout_efficiency}"
            )));
        }
        Ok(Self {
            gamma,
            readout_efficiency,
        })
    }

    /// η = π/(2γC√t), the PDD sensitivity with ideal readout slope.
    pub fn base_eta(&self, t: f64) -> f64 {
        PI / (2.0 * self.gamma * self.readout_efficiency * t.sqrt())
    }
}

/// Which rotary-echo pass-band is used; other schemes have a single band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// ω_opt = Ω(2k-1)/(2k), harmonic m = 2k-1.
    #[default]
    Optimal,
    /// ω_low = Ω/(2k), harmonic m = 1.
    Low,
}

impl Band {
    fn harmonic(self, scheme: Scheme) -> i64 {
        match (scheme, self) {
            (Scheme::RotaryEcho { k }, Band::Optimal) => 2 * k as i64 - 1,
            _ => 1,
        }
    }

    /// Matched field frequency of the band for a sequence.
    pub fn frequency(self, seq: &SequenceSpec) -> f64 {
        let m = seq.matched_frequencies();
        match self {
            Band::Optimal => m.opt,
            Band::Low => m.low,
        }
    }

    /// Period that matches field frequency `omega`.
    pub fn period_for(self, scheme: Scheme, omega: f64) -> f64 {
        2.0 * PI * self.harmonic(scheme) as f64 / omega
    }
}

/// η_scheme/η = b̄_PDD/b̄_scheme.
pub fn eta_ratio(scheme: Scheme, band: Band) -> Result<f64> {
    let pdd = field_factor(Scheme::Pdd, 1)?;
    Ok(pdd / field_factor(scheme, band.harmonic(scheme))?)
}

/// Ideal sensitivity (T Hz^{-1/2}) after a total time `t`.
pub fn eta_ideal(scheme: Scheme, band: Band, t: f64, sensor: &SensorParams) -> Result<f64> {
    require_positive("interrogation time", t)?;
    Ok(eta_ratio(scheme, band)? * sensor.base_eta(t))
}

/// Time minimizing e^{t³/(n²T₂³)}/√t: t* = T₂ (n²/6)^{1/3}.
pub fn optimal_time(n: u32, t2: f64) -> Result<f64> {
    require_positive("T2", t2)?;
    if n == 0 {
        return Err(invalid("optimal_time needs n >= 1"));
    }
    Ok(t2 * ((n as f64).powi(2) / 6.0).cbrt())
}

/// Source of the decay envelope D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum DecayModel {
    Noiseless,
    /// D = e^{-t³/(n²T₂³)} for every scheme.
    Cubic { t2: f64 },
    /// Long-correlation limit D = e^{-(Γ₂t)³/n²} with the scheme's Γ₂
    /// (rotary echo and PDD).
    LongCorrelation { sigma: f64, tau_c: f64 },
    /// Closed-form OU cumulant envelope (rotary echo).
    Ou { sigma: f64, tau_c: f64 },
    /// Monte Carlo contrast 2S̄ - 1 (any scheme).
    MonteCarlo {
        noise: OuNoise,
        trajectories: usize,
        steps_per_period: usize,
    },
}

impl DecayModel {
    /// Envelope after the whole-cycle sequence `seq`.
    pub fn envelope(&self, seq: &SequenceSpec, exec: Execution) -> Result<f64> {
        let n = seq.cycles();
        let t = seq.duration();
        match *self {
            DecayModel::Noiseless => Ok(1.0),
            DecayModel::Cubic { t2 } => envelope_pdd(t, n, t2),
            DecayModel::LongCorrelation { sigma, tau_c } => {
                let g = gamma2_long_tc(seq.scheme(), sigma, tau_c)?;
                Ok((-(g * t).powi(3) / (n as f64).powi(2)).exp())
            }
            DecayModel::Ou { sigma, tau_c } => match seq.scheme() {
                Scheme::RotaryEcho { k } => envelope_re_at(sigma, tau_c, k, n, seq.period()),
                other => Err(Error::Unsupported(format!(
                    "closed-form OU envelope exists only for rotary echo, not {other}; \
                     use the monte_carlo model"
                ))),
            },
            DecayModel::MonteCarlo {
                noise,
                trajectories,
                steps_per_period,
            } => {
                let cfg = McConfig::new(trajectories)
                    .steps_per_period(steps_per_period)
                    .exec(exec);
                Ok(mc_signal(seq, &noise, &cfg)?.contrast().0)
            }
        }
    }
}

/// A sensing configuration: sequence period, requested total time, field
/// frequency and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operating {
    pub scheme: Scheme,
    pub period: f64,
    /// Requested total time; rounded down to whole cycles.
    pub time: f64,
    /// Field angular frequency; `None` selects the band's matched frequency.
    pub omega: Option<f64>,
    pub band: Band,
    pub phase: PhaseSpec,
}

impl Operating {
    /// Matched field, optimal phase.
    pub fn matched(scheme: Scheme, period: f64, time: f64) -> Self {
        Self {
            scheme,
            period,
            time,
            omega: None,
            band: Band::Optimal,
            phase: PhaseSpec::Fixed(scheme.optimal_phase()),
        }
    }

    /// The whole-cycle sequence realizing this operating point.
    pub fn sequence(&self) -> Result<SequenceSpec> {
        require_positive("period", self.period)?;
        require_positive("interrogation time", self.time)?;
        let ratio = self.time / self.period;
        let cycles = (ratio * (1.0 + 1e-12)).floor();
        if cycles < 1.0 {
            return Err(invalid(format!(
                "time {} s is shorter than one period {} s",
                self.time, self.period
            )));
        }
        if cycles > u32::MAX as f64 {
            return Err(invalid("too many cycles"));
        }
        SequenceSpec::with_period(self.scheme, self.period, cycles as u32)
    }
}

/// Ideal and effective sensitivity with all degradation factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub scheme: String,
    pub k: Option<u32>,
    pub n: u32,
    pub period_s: f64,
    pub time_requested_s: f64,
    /// Whole-cycle time nT actually used.
    pub time_s: f64,
    pub omega_rad_s: f64,
    pub matched_freq_hz: f64,
    pub eta_ideal: f64,
    pub phi: f64,
    pub w: f64,
    pub d: f64,
    pub eta_eff: f64,
}

impl SensitivityResult {
    pub fn is_detectable(&self) -> bool {
        self.eta_eff.is_finite()
    }
}

/// η_eff = η_ideal Φ/(W D). Fails with [`Error::NotDetectable`] in a stop
/// band, at a divergent phase penalty or when the envelope has vanished.
pub fn eta_effective(
    op: &Operating,
    decay: &DecayModel,
    sensor: &SensorParams,
    exec: Execution,
) -> Result<SensitivityResult> {
    let r = evaluate(op, decay, sensor, exec)?;
    if !r.is_detectable() {
        return Err(Error::NotDetectable {
            omega: r.omega_rad_s,
            weight: r.w * r.d,
            penalty: r.phi,
        });
    }
    Ok(r)
}

fn evaluate(
    op: &Operating,
    decay: &DecayModel,
    sensor: &SensorParams,
    exec: Execution,
) -> Result<SensitivityResult> {
    let seq = op.sequence()?;
    let t = seq.duration();
    let matched = op.band.frequency(&seq);
    let omega = op.omega.unwrap_or(matched);
    let ideal = eta_ideal(op.scheme, Band::Optimal, t, sensor)?;
    let phi = phase_penalty(op.scheme, op.phase);
    let w = weight(&seq, omega)?;
    let d = decay.envelope(&seq, exec)?;
    let eta_eff = if w > 1e-12 && d > 0.0 && phi.is_finite() {
        ideal * phi / (w * d)
    } else {
        f64::INFINITY
    };
    Ok(SensitivityResult {
        scheme: op.scheme.name().to_string(),
        k: op.scheme.echo_index(),
        n: seq.cycles(),
        period_s: seq.period(),
        time_requested_s: op.time,
        time_s: t,
        omega_rad_s: omega,
        matched_freq_hz: matched / (2.0 * PI),
        eta_ideal: ideal,
        phi,
        w,
        d,
        eta_eff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    /// Total time t with fixed n; the period follows as T = t/n.
    Time,
    /// Field frequency ω; the period is matched to the band.
    Frequency,
    /// Echo index k at fixed Rabi frequency (rotary echo only).
    EchoIndex,
    /// Cycle count n at fixed period.
    Cycles,
}

/// Cycle count used at each scan point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleChoice {
    Fixed(u32),
    /// The n in 1..=max with the smallest η_eff.
    Optimal { max: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub axis: ScanAxis,
    pub values: Vec<f64>,
    pub scheme: Scheme,
    pub band: Band,
    pub phase: PhaseSpec,
    pub cycles: CycleChoice,
    /// Period for the `Cycles` axis.
    pub period: Option<f64>,
    /// Rabi frequency for the `EchoIndex` axis.
    pub rabi: Option<f64>,
    pub decay: DecayModel,
    pub sensor: SensorParams,
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub axis_value: f64,
    #[serde(flatten)]
    pub result: SensitivityResult,
}

/// Evaluates the scan in the order of `values`. Points outside a pass band
/// are kept with an infinite η_eff.
pub fn scan(spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    if spec.values.is_empty() {
        return Err(invalid("scan range is empty"));
    }
    if let CycleChoice::Fixed(0) | CycleChoice::Optimal { max: 0 } = spec.cycles {
        return Err(invalid("cycle count must be >= 1"));
    }
    if matches!(spec.cycles, CycleChoice::Optimal { .. })
        && matches!(spec.axis, ScanAxis::Cycles | ScanAxis::Time)
    {
        return Err(invalid("optimal cycle count only applies to frequency and k scans"));
    }
    // Monte Carlo runs parallelize internally; the outer loop stays ordered.
    let inner = spec.exec;
    let outer = match spec.decay {
        DecayModel::MonteCarlo { .. } => Execution::Sequential,
        _ => spec.exec,
    };
    try_map_indexed(outer, spec.values.len(), |i| {
        let x = spec.values[i];
        let point = |n: u32| -> Result<SensitivityResult> {
            let op = operating_point(spec, x, n)?;
            evaluate(&op, &spec.decay, &spec.sensor, inner)
        };
        let result = match spec.cycles {
            CycleChoice::Fixed(n) => point(n)?,
            CycleChoice::Optimal { max } => {
                let mut best = point(1)?;
                for n in 2..=max {
                    let r = point(n)?;
                    if r.eta_eff < best.eta_eff {
                        best = r;
                    }
                }
                best
            }
        };
        Ok(ScanRow {
            axis_value: x,
            result,
        })
    })
}

fn operating_point(spec: &ScanSpec, x: f64, n: u32) -> Result<Operating> {
    let nf = n as f64;
    let base = |scheme: Scheme, period: f64| Operating {
        scheme,
        period,
        time: nf * period,
        omega: None,
        band: spec.band,
        phase: spec.phase,
    };
    match spec.axis {
        ScanAxis::Time => {
            require_positive("time", x)?;
            Ok(base(spec.scheme, x / nf))
        }
        ScanAxis::Frequency => {
            require_positive("frequency", x)?;
            let mut op = base(spec.scheme, spec.band.period_for(spec.scheme, x));
            op.omega = Some(x);
            Ok(op)
        }
        ScanAxis::EchoIndex => {
            let rabi = spec
                .rabi
                .ok_or_else(|| invalid("k scan needs a Rabi frequency"))?;
            require_positive("Rabi frequency", rabi)?;
            if !matches!(spec.scheme, Scheme::RotaryEcho { .. }) {
                return Err(invalid("k scan applies to rotary echo only"));
            }
            if !(x >= 1.0 && x.fract() == 0.0 && x <= u32::MAX as f64) {
                return Err(invalid(format!("echo index must be a positive integer, got {x}")));
            }
            let scheme = Scheme::RotaryEcho { k: x as u32 };
            let period = scheme.period_for_rabi(rabi).expect("driven scheme");
            Ok(base(scheme, period))
        }
        ScanAxis::Cycles => {
            let period = spec
                .period
                .ok_or_else(|| invalid("n scan needs a period"))?;
            if !(x >= 1.0 && x.fract() == 0.0 && x <= u32::MAX as f64) {
                return Err(invalid(format!("cycle count must be a positive integer, got {x}")));
            }
            Ok(base(spec.scheme, period).with_time(x * period))
        }
    }
}

impl Operating {
    fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }
}

/// Column order of [`write_scan_csv`].
pub const SCAN_COLUMNS: [&str; 12] = [
    "axis_value",
    "eta_ideal_T_sqrtHz",
    "Phi",
    "W",
    "D",
    "eta_eff_T_sqrtHz",
    "matched_freq_Hz",
    "scheme",
    "k",
    "n",
    "t_s",
    "omega_rad_s",
];

/// Writes scan rows as CSV with the columns of [`SCAN_COLUMNS`].
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{}", SCAN_COLUMNS.join(","))?;
    for row in rows {
        let r = &row.result;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_float(row.axis_value),
            fmt_float(r.eta_ideal),
            fmt_float(r.phi),
            fmt_float(r.w),
            fmt_float(r.d),
            fmt_float(r.eta_eff),
            fmt_float(r.matched_freq_hz),
            r.scheme,
            r.k.map_or(String::new(), |k| k.to_string()),
            r.n,
            fmt_float(r.time_s),
            fmt_float(r.omega_rad_s),
        )?;
    }
    Ok(())
}
