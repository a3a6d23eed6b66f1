//! Decoupling schemes, their control fields and toggling-frame filter
//! functions.
//!
//! Conventions: the drive is Ω·SW(t)·S_x (rotary echo) or Ω·S_x (constant,
//! spin lock); the sensed field couples as γ b cos(ωt + φ) S_z. In the
//! toggling frame of the drive, S_z maps to cos θ(t) S_z + sin θ(t) S_y with
//! θ(t) the accumulated drive angle. Each scheme prepares a state that is
//! rotated by exactly one of these two components; that component is the
//! scheme's filter function f(t).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Error, Result};
use crate::spin::{Axis, Spinor, TwoLevelOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Periodic dynamical decoupling: instantaneous π pulses about x.
    Pdd,
    /// Constant on-resonance drive.
    Constant,
    /// Constant drive along the direction of a transversely prepared spin.
    SpinLock,
    /// 2πk rotary echo: drive phase inverted every half period.
    RotaryEcho { k: u32 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Pdd => "pdd",
            Scheme::Constant => "constant",
            Scheme::SpinLock => "spin_lock",
            Scheme::RotaryEcho { .. } => "rotary_echo",
        }
    }

    pub fn echo_index(&self) -> Option<u32> {
        match self {
            Scheme::RotaryEcho { k } => Some(*k),
            _ => None,
        }
    }

    /// Field phase φ that maximizes the accumulated signal.
    pub fn optimal_phase(&self) -> f64 {
        match self {
            Scheme::RotaryEcho { .. } | Scheme::SpinLock => 0.0,
            Scheme::Pdd | Scheme::Constant => 0.5 * PI,
        }
    }

    /// Initial state after the ideal preparation pulse. The same axis is used
    /// for survival readout in the noise simulations.
    pub fn prepared_axis(&self) -> Axis {
        match self {
            Scheme::RotaryEcho { .. } | Scheme::Constant => Axis::Z,
            Scheme::Pdd | Scheme::SpinLock => Axis::X,
        }
    }

    /// Rabi period for a given drive strength.
    pub fn period_for_rabi(&self, rabi: f64) -> Option<f64> {
        match self {
            Scheme::RotaryEcho { k } => Some(4.0 * PI * *k as f64 / rabi),
            Scheme::Constant | Scheme::SpinLock => Some(2.0 * PI / rabi),
            Scheme::Pdd => None,
        }
    }

    /// Drive strength implied by a period, if the scheme has a drive.
    pub fn rabi_for_period(&self, period: f64) -> Option<f64> {
        match self {
            Scheme::RotaryEcho { k } => Some(4.0 * PI * *k as f64 / period),
            Scheme::Constant | Scheme::SpinLock => Some(2.0 * PI / period),
            Scheme::Pdd => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::RotaryEcho { k } => write!(f, "rotary_echo(k={k})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Parses `pdd`, `constant`, `spin_lock`, `re:K` / `rotary_echo:K`.
impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (head, tail) = match lower.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (lower.as_str(), None),
        };
        let scheme = match head {
            "pdd" | "p" => Scheme::Pdd,
            "constant" | "c" | "rabi" => Scheme::Constant,
            "spin_lock" | "spinlock" | "spin-lock" | "s" => Scheme::SpinLock,
            "re" | "rotary_echo" | "rotary-echo" | "r" => {
                let k = match tail {
                    Some(t) => t
                        .parse::<u32>()
                        .map_err(|_| invalid(format!("bad echo index in {s:?}")))?,
                    None => 1,
                };
                if k == 0 {
                    return Err(invalid("echo index k must be >= 1"));
                }
                return Ok(Scheme::RotaryEcho { k });
            }
            _ => return Err(invalid(format!("unknown scheme {s:?}"))),
        };
        if tail.is_some() {
            return Err(invalid(format!("only rotary echo takes an index: {s:?}")));
        }
        Ok(scheme)
    }
}

/// ±1 square wave of period `period`: +1 on [0, T/2), -1 on [T/2, T).
pub fn square_wave(t: f64, period: f64) -> f64 {
    if t.rem_euclid(period) < 0.5 * period {
        1.0
    } else {
        -1.0
    }
}

/// A decoupling sequence: scheme, drive strength, cycle count and period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceSpec {
    scheme: Scheme,
    rabi: f64,
    cycles: u32,
    period: f64,
}

impl SequenceSpec {
    /// 2πk rotary echo with Rabi angular frequency `rabi`; T = 4πk/Ω.
    pub fn rotary_echo(rabi: f64, k: u32, cycles: u32) -> Result<Self> {
        require_positive("Rabi frequency", rabi)?;
        if k == 0 {
            return Err(invalid("echo index k must be >= 1"));
        }
        Ok(Self::driven(Scheme::RotaryEcho { k }, rabi, cycles))
    }

    /// Constant drive; one Rabi cycle defines the period, T = 2π/Ω.
    pub fn constant(rabi: f64, cycles: u32) -> Result<Self> {
        require_positive("Rabi frequency", rabi)?;
        Ok(Self::driven(Scheme::Constant, rabi, cycles))
    }

    pub fn spin_lock(rabi: f64, cycles: u32) -> Result<Self> {
        require_positive("Rabi frequency", rabi)?;
        Ok(Self::driven(Scheme::SpinLock, rabi, cycles))
    }

    /// PDD with free period `period`: π pulses at every multiple of T/2
    /// strictly inside the sequence window.
    pub fn pdd(period: f64, cycles: u32) -> Result<Self> {
        require_positive("period", period)?;
        Ok(Self {
            scheme: Scheme::Pdd,
            rabi: 0.0,
            cycles,
            period,
        })
    }

    /// Builds the sequence for `scheme` with the given period.
    pub fn with_period(scheme: Scheme, period: f64, cycles: u32) -> Result<Self> {
        require_positive("period", period)?;
        match scheme.rabi_for_period(period) {
            Some(rabi) => Ok(Self {
                scheme,
                rabi,
                cycles,
                period,
            }),
            None => Self::pdd(period, cycles),
        }
    }

    /// Builds the sequence for `scheme` with the given drive strength.
    pub fn with_rabi(scheme: Scheme, rabi: f64, cycles: u32) -> Result<Self> {
        match scheme {
            Scheme::RotaryEcho { k } => Self::rotary_echo(rabi, k, cycles),
            Scheme::Constant => Self::constant(rabi, cycles),
            Scheme::SpinLock => Self::spin_lock(rabi, cycles),
            Scheme::Pdd => Err(invalid("PDD has no drive; specify its period")),
        }
    }

    fn driven(scheme: Scheme, rabi: f64, cycles: u32) -> Self {
        let period = scheme.period_for_rabi(rabi).expect("driven scheme");
        Self {
            scheme,
            rabi,
            cycles,
            period,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Rabi angular frequency Ω (rad/s); zero for PDD.
    pub fn rabi(&self) -> f64 {
        self.rabi
    }

    pub fn cycles(&self) -> u32 {
        self.cycles
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Total interrogation time nT.
    pub fn duration(&self) -> f64 {
        self.cycles as f64 * self.period
    }

    pub fn with_cycles(&self, cycles: u32) -> Self {
        Self { cycles, ..*self }
    }

    pub fn initial_state(&self) -> Spinor {
        Spinor::along(self.scheme.prepared_axis())
    }

    /// Instants of the PDD π pulses: j·T/2 for j = 1 … 2n-1.
    pub fn pulse_times(&self) -> Vec<f64> {
        match self.scheme {
            Scheme::Pdd => (1..2 * self.cycles as usize)
                .map(|j| 0.5 * j as f64 * self.period)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Signed drive amplitude multiplying S_x at time `t`.
    #[inline]
    pub fn drive_amplitude(&self, t: f64) -> f64 {
        match self.scheme {
            Scheme::RotaryEcho { .. } => self.rabi * square_wave(t, self.period),
            Scheme::Constant | Scheme::SpinLock => self.rabi,
            Scheme::Pdd => 0.0,
        }
    }

    /// Control Hamiltonian (rad/s) at time `t`. PDD returns the zero operator;
    /// its pulses are listed by [`SequenceSpec::pulse_times`], and state
    /// preparation by [`SequenceSpec::initial_state`].
    pub fn control_field(&self, t: f64) -> Result<TwoLevelOp> {
        let end = self.duration();
        let slack = 1e-12 * end.max(self.period);
        if !(t >= -slack && t <= end + slack) {
            return Err(Error::OutsideWindow { t, end });
        }
        Ok(TwoLevelOp::sx().scale(self.drive_amplitude(t)))
    }

    /// Toggling-frame filter f(t).
    pub fn filter_function(&self, t: f64) -> f64 {
        self.filter_with_sign(t, square_wave(t, self.period))
    }

    /// Filter with the square-wave sign supplied by the caller, so that
    /// quadrature on a segment between switch points can use the segment's
    /// sign at its end nodes.
    pub(crate) fn filter_with_sign(&self, t: f64, sign: f64) -> f64 {
        match self.scheme {
            Scheme::RotaryEcho { .. } => sign * (self.rabi * t).sin(),
            Scheme::Pdd => sign,
            Scheme::Constant => (self.rabi * t).sin(),
            Scheme::SpinLock => (self.rabi * t).cos(),
        }
    }

    /// Field frequencies the sequence is matched to.
    pub fn matched_frequencies(&self) -> MatchedFrequencies {
        match self.scheme {
            Scheme::RotaryEcho { k } => {
                let k = k as f64;
                MatchedFrequencies {
                    low: self.rabi / (2.0 * k),
                    opt: self.rabi * (2.0 * k - 1.0) / (2.0 * k),
                }
            }
            Scheme::Constant | Scheme::SpinLock => MatchedFrequencies {
                low: self.rabi,
                opt: self.rabi,
            },
            Scheme::Pdd => {
                let w = 2.0 * PI / self.period;
                MatchedFrequencies { low: w, opt: w }
            }
        }
    }

    /// Points where the filter function may be discontinuous within one
    /// period, as fractions of T.
    pub(crate) fn switch_fractions(&self) -> &'static [f64] {
        match self.scheme {
            Scheme::RotaryEcho { .. } | Scheme::Pdd => &[0.0, 0.5, 1.0],
            Scheme::Constant | Scheme::SpinLock => &[0.0, 1.0],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SequenceJson::from(*self)).expect("plain struct serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: SequenceJson =
            serde_json::from_str(s).map_err(|e| invalid(format!("sequence JSON: {e}")))?;
        raw.try_into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedFrequencies {
    pub low: f64,
    pub opt: f64,
}

/// JSON form of [`SequenceSpec`]: `{scheme, omega, k, n, period}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceJson {
    pub scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

impl From<SequenceSpec> for SequenceJson {
    fn from(s: SequenceSpec) -> Self {
        let driven = s.scheme != Scheme::Pdd;
        SequenceJson {
            scheme: s.scheme.name().to_string(),
            omega: driven.then_some(s.rabi),
            k: s.scheme.echo_index(),
            n: s.cycles,
            period: Some(s.period),
        }
    }
}

impl TryFrom<SequenceJson> for SequenceSpec {
    type Error = Error;

    fn try_from(raw: SequenceJson) -> Result<Self> {
        let kind: Scheme = raw.scheme.parse()?;
        let scheme = match (kind, raw.k) {
            (Scheme::RotaryEcho { .. }, Some(k)) => Scheme::RotaryEcho { k },
            (Scheme::RotaryEcho { .. }, None) => {
                return Err(invalid("rotary echo requires k"));
            }
            (_, Some(_)) => return Err(invalid("k is only meaningful for rotary echo")),
            (other, None) => other,
        };
        match scheme {
            Scheme::Pdd => {
                if raw.omega.is_some() {
                    return Err(invalid("PDD has no drive; omega not accepted"));
                }
                let period = raw.period.ok_or_else(|| invalid("PDD requires period"))?;
                SequenceSpec::pdd(period, raw.n)
            }
            _ => {
                let omega = raw
                    .omega
                    .ok_or_else(|| invalid("driven schemes require omega"))?;
                let spec = SequenceSpec::with_rabi(scheme, omega, raw.n)?;
                if let Some(p) = raw.period {
                    if (p - spec.period).abs() > 1e-12 * spec.period {
                        return Err(invalid(format!(
                            "period {p} contradicts the derived period {}",
                            spec.period
                        )));
                    }
                }
                Ok(spec)
            }
        }
    }
}

/// The AC field to be sensed, b cos(ωt + φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcField {
    /// Amplitude b (tesla).
    pub amplitude: f64,
    /// Angular frequency ω (rad/s).
    pub omega: f64,
    /// Phase φ (rad).
    pub phase: f64,
}

impl AcField {
    pub fn new(amplitude: f64, omega: f64, phase: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(invalid(format!("field amplitude must be >= 0, got {amplitude}")));
        }
        require_positive("field frequency", omega)?;
        if !phase.is_finite() {
            return Err(invalid("field phase must be finite"));
        }
        Ok(Self {
            amplitude,
            omega,
            phase,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t + self.phase).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::simpson;

    const RABI: f64 = 2.0 * PI * 1.0e6;

    #[test]
    fn square_wave_convention_and_periodicity() {
        let period = 3.7e-6;
        assert_eq!(square_wave(0.0, period), 1.0);
        assert_eq!(square_wave(0.75 * period, period), -1.0);
        for i in 0..200 {
            let t = i as f64 * period / 97.0;
            assert_eq!(square_wave(t + period, period), square_wave(t, period));
        }
    }

    #[test]
    fn periods_follow_scheme() {
        let re = SequenceSpec::rotary_echo(RABI, 3, 2).unwrap();
        assert!((re.period() - 4.0 * PI * 3.0 / RABI).abs() < 1e-22);
        let c = SequenceSpec::constant(RABI, 1).unwrap();
        assert!((c.period() - 1e-6).abs() < 1e-20);
        assert!(SequenceSpec::rotary_echo(RABI, 0, 1).is_err());
        assert!(SequenceSpec::pdd(-1.0, 1).is_err());
    }

    #[test]
    fn control_field_signs() {
        let re = SequenceSpec::rotary_echo(RABI, 1, 2).unwrap();
        let h = re.control_field(0.6 * re.period()).unwrap();
        assert!(h.max_abs_diff(&TwoLevelOp::sx().scale(-RABI)) < 1e-6);
        let c = SequenceSpec::constant(RABI, 3).unwrap();
        for f in [0.0, 0.3, 0.9, 2.5] {
            let h = c.control_field(f * c.period()).unwrap();
            assert!(h.max_abs_diff(&TwoLevelOp::sx().scale(RABI)) < 1e-6);
        }
        assert!(matches!(
            re.control_field(2.5 * re.period()),
            Err(Error::OutsideWindow { .. })
        ));
        let p = SequenceSpec::pdd(1e-6, 1).unwrap();
        assert_eq!(p.control_field(0.2e-6).unwrap(), TwoLevelOp::zero());
        assert_eq!(p.pulse_times(), vec![0.5e-6]);
        let p3 = SequenceSpec::pdd(2.0, 3).unwrap();
        assert_eq!(p3.pulse_times(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn filter_function_values() {
        let re = SequenceSpec::rotary_echo(RABI, 1, 1).unwrap();
        assert!(re.filter_function(re.period() / 4.0).abs() < 1e-12);
        let p = SequenceSpec::pdd(1.0, 1).unwrap();
        assert_eq!(p.filter_function(0.25), 1.0);
        // period average of f² for constant drive is 1/2
        let c = SequenceSpec::constant(RABI, 1).unwrap();
        let t = c.period();
        let avg = simpson(|s| c.filter_function(s).powi(2), 0.0, t, 4096) / t;
        assert!((avg - 0.5).abs() < 1e-12);
    }

    #[test]
    fn filter_integrates_to_zero_over_a_period() {
        let specs = [
            SequenceSpec::rotary_echo(RABI, 1, 1).unwrap(),
            SequenceSpec::rotary_echo(RABI, 4, 1).unwrap(),
            SequenceSpec::pdd(1e-6, 1).unwrap(),
            SequenceSpec::constant(RABI, 1).unwrap(),
            SequenceSpec::spin_lock(RABI, 1).unwrap(),
        ];
        for s in specs {
            let t = s.period();
            let mut total = 0.0;
            for w in s.switch_fractions().windows(2) {
                let sign = square_wave(0.5 * (w[0] + w[1]) * t, t);
                total += simpson(|x| s.filter_with_sign(x, sign), w[0] * t, w[1] * t, 4096);
            }
            assert!(total.abs() < 1e-10 * t, "{}: {total:e}", s.scheme());
        }
    }

    #[test]
    fn rotary_echo_filter_is_continuous_at_the_flip() {
        for k in 1..=5 {
            let re = SequenceSpec::rotary_echo(RABI, k, 1).unwrap();
            let half = 0.5 * re.period();
            let eps = 1e-9 * re.period();
            let left = re.filter_function(half - eps);
            let right = re.filter_function(half + eps);
            assert!((left - right).abs() < 1e-7, "k={k}: {left} vs {right}");
        }
    }

    #[test]
    fn matched_frequencies_follow_echo_index() {
        let re1 = SequenceSpec::rotary_echo(RABI, 1, 1).unwrap().matched_frequencies();
        assert!((re1.low - RABI / 2.0).abs() < 1e-6 && (re1.opt - RABI / 2.0).abs() < 1e-6);
        let re4 = SequenceSpec::rotary_echo(RABI, 4, 1).unwrap();
        let m = re4.matched_frequencies();
        assert!((m.low - RABI / 8.0).abs() < 1e-6);
        assert!((m.opt - 7.0 * RABI / 8.0).abs() < 1e-6);
        // ω_low T = 2π and ω_opt T = 2π(2k-1)
        assert!((m.low * re4.period() - 2.0 * PI).abs() < 1e-12);
        assert!((m.opt * re4.period() - 14.0 * PI).abs() < 1e-12);
        let c = SequenceSpec::constant(RABI, 1).unwrap().matched_frequencies();
        assert_eq!(c.opt, RABI);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let re = SequenceSpec::rotary_echo(RABI, 2, 5).unwrap();
        assert_eq!(SequenceSpec::from_json(&re.to_json()).unwrap(), re);
        let p = SequenceSpec::pdd(2e-6, 3).unwrap();
        assert_eq!(SequenceSpec::from_json(&p.to_json()).unwrap(), p);

        let bad_period = r#"{"scheme":"re","omega":1.0,"k":1,"n":2,"period":5.0}"#;
        assert!(SequenceSpec::from_json(bad_period).is_err());
        let ok_period = format!(
            r#"{{"scheme":"re","omega":1.0,"k":1,"n":2,"period":{}}}"#,
            4.0 * PI
        );
        assert!(SequenceSpec::from_json(&ok_period).is_ok());
        assert!(SequenceSpec::from_json(r#"{"scheme":"pdd","n":2}"#).is_err());
        assert!(SequenceSpec::from_json(r#"{"scheme":"pdd","n":2,"period":1,"x":1}"#).is_err());
        assert!(SequenceSpec::from_json(r#"{"scheme":"constant","omega":1,"k":2,"n":1}"#).is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("re:4".parse::<Scheme>().unwrap(), Scheme::RotaryEcho { k: 4 });
        assert_eq!("RE".parse::<Scheme>().unwrap(), Scheme::RotaryEcho { k: 1 });
        assert_eq!("spinlock".parse::<Scheme>().unwrap(), Scheme::SpinLock);
        assert!("pdd:2".parse::<Scheme>().is_err());
        assert!("re:0".parse::<Scheme>().is_err());
        assert!("cpmg".parse::<Scheme>().is_err());
    }
}
