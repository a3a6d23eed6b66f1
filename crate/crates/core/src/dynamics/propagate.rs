//! Time-ordered propagation of the lab-frame Hamiltonian
//! H(t) = drive(t)·S_x + [γ b cos(ωt + φ) + 2δ(t)]·S_z
//! as a product of piecewise-constant exact exponentials.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Error, Result};
use crate::sequence::{AcField, Scheme, SequenceSpec};
use crate::spin::{Spinor, TwoLevelOp};

/// The AC field together with the coupling that converts it to rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensedField {
    pub field: AcField,
    /// Gyromagnetic ratio γ_g (rad s⁻¹ T⁻¹).
    pub gamma: f64,
}

impl SensedField {
    pub fn new(field: AcField, gamma: f64) -> Result<Self> {
        require_positive("gyromagnetic ratio", gamma)?;
        Ok(Self { field, gamma })
    }

    /// Coefficient of S_z in rad/s.
    #[inline]
    pub fn coupling(&self, t: f64) -> f64 {
        self.gamma * self.field.value(t)
    }
}

/// Instantaneous π rotation about x, exp(-iπS_x) = -iσ_x.
pub fn pi_pulse_x() -> TwoLevelOp {
    let z = Complex64::new(0.0, 0.0);
    let m = Complex64::new(0.0, -1.0);
    TwoLevelOp::new(z, m, m, z)
}

pub(crate) enum Event {
    Step(TwoLevelOp),
    Pulse,
    /// Emitted after the last step of each cycle, before any pulse scheduled
    /// at that instant.
    CycleEnd,
}

/// Checks the step count and returns the noise oversampling ratio r.
pub(crate) fn sampling_ratio(
    seq: &SequenceSpec,
    noise_len: Option<usize>,
    steps_per_period: usize,
) -> Result<usize> {
    if steps_per_period < 100 || steps_per_period % 2 != 0 {
        return Err(invalid(format!(
            "steps_per_period must be even and >= 100, got {steps_per_period}"
        )));
    }
    let steps = seq.cycles() as usize * steps_per_period;
    let Some(len) = noise_len else {
        return Ok(0);
    };
    if steps == 0 {
        return if len >= 1 {
            Ok(1)
        } else {
            Err(Error::InsufficientSampling { got: len, steps })
        };
    }
    if len < steps + 1 || (len - 1) % steps != 0 {
        return Err(Error::InsufficientSampling { got: len, steps });
    }
    Ok((len - 1) / steps)
}

/// Drives `visit` through the step unitaries, pulses and cycle boundaries of
/// the sequence in time order.
pub(crate) fn walk(
    seq: &SequenceSpec,
    field: Option<&SensedField>,
    noise: Option<&[f64]>,
    steps_per_period: usize,
    mut visit: impl FnMut(Event),
) -> Result<()> {
    let ratio = sampling_ratio(seq, noise.map(<[f64]>::len), steps_per_period)?;
    let dt = seq.period() / steps_per_period as f64;
    let half = steps_per_period / 2;
    let cycles = seq.cycles() as usize;
    let total = cycles * steps_per_period;
    let pulsed = seq.scheme() == Scheme::Pdd;
    let inv_ratio = if ratio > 0 { 1.0 / ratio as f64 } else { 0.0 };

    for i in 0..total {
        let t_mid = (i as f64 + 0.5) * dt;
        let hx = seq.drive_amplitude(t_mid);
        let mut hz = field.map_or(0.0, |f| f.coupling(t_mid));
        if let Some(path) = noise {
            // trapezoid mean of δ over the step
            let s = &path[i * ratio..=(i + 1) * ratio];
            let interior: f64 = s[1..ratio].iter().sum();
            let mean = (interior + 0.5 * (s[0] + s[ratio])) * inv_ratio;
            hz += 2.0 * mean;
        }
        visit(Event::Step(TwoLevelOp::spin_rotation(hx, 0.0, hz, dt)));
        let done = i + 1;
        if done % steps_per_period == 0 {
            visit(Event::CycleEnd);
        }
        if pulsed && done % half == 0 && done < total {
            visit(Event::Pulse);
        }
    }
    Ok(())
}

/// Propagator U(nT, 0) of the sequence with an optional sensed field and an
/// optional noise path δ sampled on a grid of r·n·steps_per_period + 1
/// points (integer r ≥ 1).
pub fn propagate(
    seq: &SequenceSpec,
    field: Option<&SensedField>,
    noise: Option<&[f64]>,
    steps_per_period: usize,
) -> Result<TwoLevelOp> {
    let pulse = pi_pulse_x();
    let mut u = TwoLevelOp::identity();
    walk(seq, field, noise, steps_per_period, |ev| match ev {
        Event::Step(step) => u = step * u,
        Event::Pulse => u = pulse * u,
        Event::CycleEnd => {}
    })?;
    Ok(u)
}

/// Evolves `state` through the sequence, recording the state at every cycle
/// boundary (index 0 is the initial state).
pub fn evolve_by_cycle(
    seq: &SequenceSpec,
    field: Option<&SensedField>,
    noise: Option<&[f64]>,
    steps_per_period: usize,
    state: Spinor,
) -> Result<Vec<Spinor>> {
    let pulse = pi_pulse_x();
    let mut psi = state;
    let mut out = Vec::with_capacity(seq.cycles() as usize + 1);
    out.push(psi);
    walk(seq, field, noise, steps_per_period, |ev| match ev {
        Event::Step(step) => psi = step.apply(&psi),
        Event::Pulse => psi = pulse.apply(&psi),
        Event::CycleEnd => out.push(psi),
    })?;
    Ok(out)
}
