//! Spectral response: average-field factors, weight functions, pass-bands,
//! main-peak width and phase penalties.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::sequence::{square_wave, Scheme, SequenceSpec};
use crate::table::fmt_float;

/// Half-width of the window in Tω around removable singularities inside
/// which the closed-form weight switches to its series expansion.
pub const POLE_GUARD: f64 = 1e-6;

/// Minimum Simpson intervals per period for the numeric weight.
pub const MIN_INTERVALS_PER_PERIOD: usize = 4096;

/// Period-averaged field factor b̄/b at the m-th harmonic ωT = 2πm, with
/// the scheme's optimal phase. Returns a magnitude.
pub fn avg_field_factor(seq: &SequenceSpec, m: i64) -> Result<f64> {
    field_factor(seq.scheme(), m)
}

/// [`avg_field_factor`] for a scheme, independent of Ω and n.
pub fn field_factor(scheme: Scheme, m: i64) -> Result<f64> {
    if m < 1 {
        return Err(invalid(format!("harmonic index must be >= 1, got {m}")));
    }
    let mf = m as f64;
    match scheme {
        Scheme::RotaryEcho { k } => {
            if m % 2 == 0 {
                return Err(Error::EvenHarmonic(m));
            }
            let k = k as f64;
            Ok((4.0 * k / (PI * (4.0 * k * k - mf * mf))).abs())
        }
        Scheme::Pdd => Ok(if m % 2 == 1 { 2.0 / (PI * mf) } else { 0.0 }),
        Scheme::Constant | Scheme::SpinLock => Ok(if m == 1 { 0.5 } else { 0.0 }),
    }
}

/// Average-field factor at the scheme's best-sensitivity frequency.
pub fn optimal_field_factor(scheme: Scheme) -> f64 {
    match scheme {
        Scheme::RotaryEcho { k } => {
            let k = k as f64;
            4.0 * k / (PI * (4.0 * k - 1.0))
        }
        Scheme::Pdd => 2.0 / PI,
        Scheme::Constant | Scheme::SpinLock => 0.5,
    }
}

/// Closed-form rotary-echo weight
/// W = (4k-1)/n / |(4k)² - (Tω/π)²| · |sin(nTω) tan(Tω/4)|,
/// with its removable singularities resolved analytically.
pub fn weight_re(omega: f64, k: u32, n: u32, period: f64) -> Result<f64> {
    require_positive("frequency", omega)?;
    require_positive("period", period)?;
    if k == 0 || n == 0 {
        return Err(invalid("weight_re needs k >= 1 and n >= 1"));
    }
    Ok(weight_re_unchecked(omega, k, n, period))
}

pub(crate) fn weight_re_unchecked(omega: f64, k: u32, n: u32, period: f64) -> f64 {
    let kf = k as f64;
    let nf = n as f64;
    let phase = period * omega;
    let x = phase / PI;
    let den = (16.0 * kf * kf - x * x).abs();
    let pref = (4.0 * kf - 1.0) / nf;

    // tangent poles at Tω = 2π(2j-1), where sin(nTω) also vanishes
    let j = (phase / (2.0 * PI) + 1.0) / 2.0;
    let pole = 2.0 * PI * (2.0 * j.round() - 1.0);
    let eps = phase - pole;
    if j.round() >= 1.0 && eps.abs() < POLE_GUARD {
        let num = 4.0 * nf * (1.0 - (nf * nf / 6.0 + 1.0 / 48.0) * eps * eps);
        return pref * num / den;
    }

    // ω = Ω: both factors of the numerator and the denominator vanish
    let centre = 4.0 * PI * kf;
    let eps = phase - centre;
    if eps.abs() < POLE_GUARD {
        return (4.0 * kf - 1.0) * PI * eps.abs() / (32.0 * kf);
    }

    pref * ((nf * phase).sin() * (0.25 * phase).tan()).abs() / den
}

/// True when Tω lies within the series guard window of a removable
/// singularity of [`weight_re`].
pub fn in_guard_window(omega: f64, k: u32, period: f64) -> bool {
    let phase = period * omega;
    let j = ((phase / (2.0 * PI) + 1.0) / 2.0).round().max(1.0);
    let pole = 2.0 * PI * (2.0 * j - 1.0);
    (phase - pole).abs() < POLE_GUARD || (phase - 4.0 * PI * k as f64).abs() < POLE_GUARD
}

/// One-period quadrature of e^{iωt} f(t) by composite Simpson on each
/// segment between the filter's switch points, extended to n cycles by the
/// exact geometric sum over periods.
#[derive(Debug, Clone)]
pub struct PhaseIntegrator {
    seq: SequenceSpec,
    nodes: Vec<Segment>,
}

#[derive(Debug, Clone)]
struct Segment {
    start: f64,
    step: f64,
    /// Simpson weight times filter value at each node.
    weighted: Vec<f64>,
}

impl PhaseIntegrator {
    /// Builds a rule resolving frequencies up to `omega_max` with at least
    /// 200 nodes per oscillation of the integrand and never fewer than
    /// [`MIN_INTERVALS_PER_PERIOD`] intervals per period.
    pub fn new(seq: &SequenceSpec, omega_max: f64) -> Self {
        let t = seq.period();
        let oscillations = (omega_max.abs() + seq.rabi()) * t / (2.0 * PI);
        let per_period = MIN_INTERVALS_PER_PERIOD.max((200.0 * oscillations).ceil() as usize);
        let fractions = seq.switch_fractions();
        let pieces = fractions.len() - 1;
        let per_piece = per_period.div_ceil(pieces).next_multiple_of(2);
        let nodes = fractions
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0] * t, w[1] * t);
                let sign = square_wave(0.5 * (a + b), t);
                let h = (b - a) / per_piece as f64;
                let weighted = (0..=per_piece)
                    .map(|i| {
                        let c = if i == 0 || i == per_piece {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        c * h / 3.0 * seq.filter_with_sign(a + i as f64 * h, sign)
                    })
                    .collect();
                Segment {
                    start: a,
                    step: h,
                    weighted,
                }
            })
            .collect();
        Self {
            seq: *seq,
            nodes,
        }
    }

    /// ∫₀ᵀ e^{iωt} f(t) dt.
    pub fn one_period(&self, omega: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for seg in &self.nodes {
            let rot = Complex64::from_polar(1.0, omega * seg.step);
            let mut z = Complex64::from_polar(1.0, omega * seg.start);
            let mut part = Complex64::new(0.0, 0.0);
            for (i, w) in seg.weighted.iter().enumerate() {
                // re-anchor periodically to keep the recurrence exact
                if i % 256 == 0 {
                    z = Complex64::from_polar(1.0, omega * (seg.start + i as f64 * seg.step));
                }
                part += z * *w;
                z *= rot;
            }
            acc += part;
        }
        acc
    }

    /// B̄t = ∫₀^{nT} cos(ωt + φ) f(t) dt (seconds).
    pub fn accumulated_phase(&self, omega: f64, phase: f64) -> f64 {
        let n = self.seq.cycles();
        let step = Complex64::from_polar(1.0, omega * self.seq.period());
        let mut geometric = Complex64::new(0.0, 0.0);
        let mut z = Complex64::new(1.0, 0.0);
        for j in 0..n {
            if j % 64 == 0 {
                z = Complex64::from_polar(1.0, omega * self.seq.period() * j as f64);
            }
            geometric += z;
            z *= step;
        }
        (Complex64::from_polar(1.0, phase) * geometric * self.one_period(omega)).re
    }
}

/// Accumulated phase integral ∫₀^{nT} cos(ωt + φ) f(t) dt (seconds).
pub fn accumulated_phase(seq: &SequenceSpec, omega: f64, phase: f64) -> f64 {
    PhaseIntegrator::new(seq, omega).accumulated_phase(omega, phase)
}

/// Weight by quadrature, normalized at the scheme's best-sensitivity
/// frequency and evaluated at the scheme's optimal phase.
pub fn weight_numeric(seq: &SequenceSpec, omega: f64) -> Result<f64> {
    require_positive("frequency", omega)?;
    Ok(weight_numeric_grid(seq, &[omega], Execution::Sequential)?[0])
}

/// [`weight_numeric`] over a grid, sharing one quadrature rule.
pub fn weight_numeric_grid(seq: &SequenceSpec, omegas: &[f64], exec: Execution) -> Result<Vec<f64>> {
    if seq.cycles() == 0 {
        return Err(invalid("weight requires n >= 1"));
    }
    if let Some(bad) = omegas.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(invalid(format!("frequency must be finite and > 0, got {bad}")));
    }
    let reference = seq.matched_frequencies().opt;
    let omega_max = omegas.iter().fold(reference, |m, w| m.max(*w));
    let rule = PhaseIntegrator::new(seq, omega_max);
    let phi = seq.scheme().optimal_phase();
    let norm = rule.accumulated_phase(reference, phi).abs();
    try_map_indexed(exec, omegas.len(), |i| {
        Ok(rule.accumulated_phase(omegas[i], phi).abs() / norm)
    })
}

/// Weight function of any scheme: closed form for rotary echo, quadrature
/// otherwise.
pub fn weight(seq: &SequenceSpec, omega: f64) -> Result<f64> {
    match seq.scheme() {
        Scheme::RotaryEcho { k } => weight_re(omega, k, seq.cycles(), seq.period()),
        _ => weight_numeric(seq, omega),
    }
}

/// Weight over a grid, evaluated concurrently with results in grid order.
pub fn weight_grid(seq: &SequenceSpec, omegas: &[f64], exec: Execution) -> Result<Vec<f64>> {
    match seq.scheme() {
        Scheme::RotaryEcho { k } => try_map_indexed(exec, omegas.len(), |i| {
            weight_re(omegas[i], k, seq.cycles(), seq.period())
        }),
        _ => weight_numeric_grid(seq, omegas, exec),
    }
}

/// Weight function sampled on a frequency grid, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub scheme: String,
    pub k: Option<u32>,
    pub n: u32,
    pub period: f64,
    /// Frequency unit of the `omega_over_Omega` column: the Rabi frequency
    /// for driven schemes and 2π/T for PDD.
    pub reference_omega: f64,
    pub omega: Vec<f64>,
    pub weight: Vec<f64>,
}

impl WeightProfile {
    pub fn compute(seq: &SequenceSpec, omegas: &[f64], exec: Execution) -> Result<Self> {
        let weight = weight_grid(seq, omegas, exec)?;
        Ok(Self {
            scheme: seq.scheme().name().to_string(),
            k: seq.scheme().echo_index(),
            n: seq.cycles(),
            period: seq.period(),
            reference_omega: reference_omega(seq),
            omega: omegas.to_vec(),
            weight,
        })
    }

    /// Writes `omega_rad_s,omega_over_Omega,W` rows.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "omega_rad_s,omega_over_Omega,W")?;
        for (w, v) in self.omega.iter().zip(&self.weight) {
            writeln!(
                out,
                "{},{},{}",
                fmt_float(*w),
                fmt_float(w / self.reference_omega),
                fmt_float(*v)
            )?;
        }
        Ok(())
    }
}

/// Unit of relative frequency: Ω for driven schemes, 2π/T for PDD.
pub fn reference_omega(seq: &SequenceSpec) -> f64 {
    match seq.scheme() {
        Scheme::Pdd => 2.0 * PI / seq.period(),
        _ => seq.rabi(),
    }
}

/// A rotary-echo pass-band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassBand {
    pub p: i64,
    /// Center ω = 2π(2(k+p)-1)/T (rad/s).
    pub center: f64,
    /// Weight at the center.
    pub height: f64,
}

/// Pass-bands p = 1-k … p_max of a 2πk rotary echo.
pub fn passbands(k: u32, period: f64, n: u32, p_max: i64) -> Result<Vec<PassBand>> {
    require_positive("period", period)?;
    if k == 0 || n == 0 {
        return Err(invalid("passbands need k >= 1 and n >= 1"));
    }
    if p_max < 0 {
        return Err(invalid(format!("p_max must be >= 0, got {p_max}")));
    }
    let kf = k as i64;
    Ok((1 - kf..=p_max)
        .map(|p| {
            let m = 2 * (kf + p) - 1;
            let center = 2.0 * PI * m as f64 / period;
            let x = 2.0 * m as f64;
            let kk = k as f64;
            let height = 4.0 * (4.0 * kk - 1.0) / (16.0 * kk * kk - x * x).abs();
            PassBand { p, center, height }
        })
        .collect())
}

/// Full width at half maximum of the main peak (rad/s).
pub fn fwhm_main_peak(seq: &SequenceSpec) -> Result<f64> {
    let n = seq.cycles();
    if n == 0 {
        return Err(invalid("FWHM requires n >= 1"));
    }
    let centre = seq.matched_frequencies().opt;
    let lobe = PI / seq.duration();
    let rule = PhaseIntegrator::new(seq, centre + 4.0 * lobe);
    let phi = seq.scheme().optimal_phase();
    let w = |omega: f64| -> f64 {
        match seq.scheme() {
            Scheme::RotaryEcho { k } => weight_re_unchecked(omega, k, n, seq.period()),
            _ => rule.accumulated_phase(omega, phi).abs(),
        }
    };

    let (peak, top) = golden_max(&w, centre - 0.5 * lobe, centre + 0.5 * lobe);
    let half = 0.5 * top;
    let edge = |dir: f64| -> Result<f64> {
        let step = 0.05 * lobe;
        let mut inner = peak;
        for i in 1..=60 {
            let outer = peak + dir * step * i as f64;
            if outer <= 0.0 {
                break;
            }
            if w(outer) < half {
                return Ok(bisect(&w, half, inner, outer));
            }
            inner = outer;
        }
        Err(Error::PeakNotBracketed(format!(
            "no half-height crossing within {} rad/s of the peak at {peak} rad/s",
            3.0 * lobe
        )))
    };
    Ok(edge(1.0)? - edge(-1.0)?)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * b.abs().max(1.0) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Crossing of `level` between `inside` (above) and `outside` (below).
fn bisect(f: &impl Fn(f64) -> f64, level: f64, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if f(mid) >= level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// Field phase knowledge for the penalty Φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSpec {
    Fixed(f64),
    /// Random phase, signal averaged over φ.
    Unknown,
}

/// Sensitivity penalty Φ(φ) ≥ 1 relative to the optimal phase; infinite
/// where the accumulated phase vanishes.
pub fn phase_penalty(scheme: Scheme, phase: PhaseSpec) -> f64 {
    match phase {
        PhaseSpec::Unknown => SQRT_2,
        PhaseSpec::Fixed(phi) => {
            let overlap = (phi - scheme.optimal_phase()).cos().abs();
            if overlap < 1e-15 {
                f64::INFINITY
            } else {
                (1.0 / overlap).max(1.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RABI: f64 = 2.0 * PI * 1.0e6;

    fn re(k: u32, n: u32) -> SequenceSpec {
        SequenceSpec::rotary_echo(RABI, k, n).unwrap()
    }

    #[test]
    fn average_field_factors() {
        let r1 = re(1, 1);
        assert!((avg_field_factor(&r1, 1).unwrap() - 4.0 / (3.0 * PI)).abs() < 1e-15);
        assert!(matches!(avg_field_factor(&r1, 2), Err(Error::EvenHarmonic(2))));
        let p = SequenceSpec::pdd(1e-6, 1).unwrap();
        assert!((avg_field_factor(&p, 1).unwrap() - 2.0 / PI).abs() < 1e-15);
        assert_eq!(avg_field_factor(&p, 2).unwrap(), 0.0);
        let c = SequenceSpec::constant(RABI, 1).unwrap();
        assert_eq!(avg_field_factor(&c, 1).unwrap(), 0.5);
        for k in 1..=6 {
            let s = re(k, 1);
            let m = 2 * k as i64 - 1;
            assert_eq!(avg_field_factor(&s, m).unwrap(), optimal_field_factor(s.scheme()));
        }
    }

    #[test]
    fn average_field_factor_matches_quadrature() {
        let cases: Vec<(SequenceSpec, i64)> = vec![
            (re(1, 1), 1),
            (re(3, 1), 5),
            (re(3, 1), 1),
            (re(4, 1), 9),
            (SequenceSpec::pdd(1e-6, 1).unwrap(), 1),
            (SequenceSpec::pdd(1e-6, 1).unwrap(), 3),
            (SequenceSpec::constant(RABI, 1).unwrap(), 1),
            (SequenceSpec::spin_lock(RABI, 1).unwrap(), 1),
        ];
        for (s, m) in cases {
            let omega = 2.0 * PI * m as f64 / s.period();
            let q = accumulated_phase(&s, omega, s.scheme().optimal_phase()).abs() / s.period();
            let exact = avg_field_factor(&s, m).unwrap();
            assert!((q - exact).abs() < 1e-10, "{} m={m}: {q} vs {exact}", s.scheme());
        }
    }

    #[test]
    fn weight_re_special_values() {
        for k in 1..=6 {
            let s = re(k, 3);
            let m = s.matched_frequencies();
            let w = weight_re(m.opt, k, 3, s.period()).unwrap();
            assert!((w - 1.0).abs() < 1e-12, "k={k}: {w}");
        }
        let s = re(4, 2);
        let low = weight_re(s.matched_frequencies().low, 4, 2, s.period()).unwrap();
        assert!((low - 5.0 / 21.0).abs() < 1e-12);
        // a zero of sin(nTω) away from the poles
        let omega = PI / (2.0 * s.period());
        assert!(weight_re(omega, 4, 2, s.period()).unwrap() < 1e-12);
        assert!(weight_re(RABI, 4, 2, s.period()).unwrap() < 1e-12);
        assert!(weight_re(-1.0, 1, 1, 1.0).is_err());
    }

    #[test]
    fn weight_re_is_continuous_across_guard_windows() {
        let s = re(2, 5);
        let t = s.period();
        for centre in [2.0 * PI, 6.0 * PI, 8.0 * PI, 10.0 * PI] {
            for off in [0.9e-6, 1.1e-6, -0.9e-6, -1.1e-6] {
                let a = weight_re((centre + off) / t, 2, 5, t).unwrap();
                let b = weight_re((centre + off * 0.999) / t, 2, 5, t).unwrap();
                assert!((a - b).abs() < 1e-8, "centre {centre} off {off}: {a} {b}");
            }
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for k in [1, 2, 4] {
            for n in [1, 2, 5] {
                let s = re(k, n);
                let grid: Vec<f64> = (0..200)
                    .map(|i| RABI * (0.05 + 3.95 * i as f64 / 199.0))
                    .filter(|w| !in_guard_window(*w, k, s.period()))
                    .collect();
                let num = weight_numeric_grid(&s, &grid, Execution::Sequential).unwrap();
                for (w, q) in grid.iter().zip(&num) {
                    let c = weight_re(*w, k, n, s.period()).unwrap();
                    assert!((c - q).abs() < 1e-6, "k={k} n={n} ω={w}: {c} vs {q}");
                }
            }
        }
    }

    #[test]
    fn passband_structure() {
        let t = re(1, 1).period();
        let b1 = passbands(1, t, 1, 3).unwrap();
        assert_eq!(b1[0].p, 0);
        assert!((b1[0].center - RABI / 2.0).abs() < 1e-6);
        assert!((b1[0].height - 1.0).abs() < 1e-15);
        let t4 = re(4, 1).period();
        let b4 = passbands(4, t4, 1, 4).unwrap();
        assert_eq!(b4[0].p, -3);
        assert!((b4[0].center - RABI / 8.0).abs() < 1e-6);
        let best = b4.iter().max_by(|a, b| a.height.total_cmp(&b.height)).unwrap();
        assert_eq!(best.p, 0);
        for b in &b4 {
            let ratio = b.center / RABI;
            let law = 15.0 / 64.0 / (ratio * ratio - 1.0).abs();
            assert!((b.height / law - 1.0).abs() < 1e-12);
            let w = weight_re(b.center, 4, 1, t4).unwrap();
            assert!((w - b.height).abs() < 1e-9);
        }
        assert!(passbands(1, t, 1, -1).is_err());
    }

    #[test]
    fn fwhm_follows_sinc_law() {
        for n in [2, 5, 10] {
            let s = re(1, n);
            let f = fwhm_main_peak(&s).unwrap();
            let law = 7.58 / (2.0 * n as f64 * s.period());
            assert!((f / law - 1.0).abs() < 0.05, "n={n}: {}", f / law);
        }
        // the constant-drive period is half the k=1 rotary-echo period
        let fr = fwhm_main_peak(&re(1, 2)).unwrap();
        let same_n = fwhm_main_peak(&SequenceSpec::constant(RABI, 2).unwrap()).unwrap();
        assert!((same_n / fr - 2.0).abs() < 0.05, "{}", same_n / fr);
        let same_t = fwhm_main_peak(&SequenceSpec::constant(RABI, 4).unwrap()).unwrap();
        assert!((same_t / fr - 1.0).abs() < 0.05, "{}", same_t / fr);
    }

    #[test]
    fn pdd_harmonics_decay_as_one_over_m() {
        let s = SequenceSpec::pdd(1e-6, 2).unwrap();
        let base = 2.0 * PI / s.period();
        for m in [1, 3, 5, 7, 9] {
            let w = weight_numeric(&s, m as f64 * base).unwrap();
            assert!((w * m as f64 - 1.0).abs() < 1e-9, "m={m}: {w}");
        }
        let even = weight_numeric(&s, 2.0 * base).unwrap();
        assert!(even < 1e-9);
    }

    #[test]
    fn constant_drive_single_passband() {
        let s = SequenceSpec::constant(RABI, 2).unwrap();
        assert!((weight_numeric(&s, RABI).unwrap() - 1.0).abs() < 1e-12);
        for m in 2..=9 {
            let w = weight_numeric(&s, m as f64 * RABI).unwrap();
            assert!(w < 0.02, "m={m}: {w}");
        }
    }

    #[test]
    fn phase_penalties() {
        assert_eq!(phase_penalty(Scheme::Pdd, PhaseSpec::Fixed(PI / 2.0)), 1.0);
        let p = phase_penalty(Scheme::RotaryEcho { k: 1 }, PhaseSpec::Fixed(PI / 4.0));
        assert!((p - SQRT_2).abs() < 1e-12);
        assert_eq!(phase_penalty(Scheme::Constant, PhaseSpec::Unknown), SQRT_2);
        assert!(phase_penalty(Scheme::Pdd, PhaseSpec::Fixed(0.0)).is_infinite());
        let c = phase_penalty(Scheme::Constant, PhaseSpec::Fixed(PI / 6.0));
        assert!((c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn weight_profile_csv() {
        let s = re(1, 2);
        let grid = [0.25 * RABI, 0.5 * RABI];
        let p = WeightProfile::compute(&s, &grid, Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "omega_rad_s,omega_over_Omega,W");
        assert!(lines[2].ends_with("1.0000000000000000e0"));
    }

    proptest! {
        #[test]
        fn duality_of_low_band(k in 1u32..=8) {
            let kf = k as f64;
            let s = re(k, 1);
            let w_low = weight_re(s.matched_frequencies().low, k, 1, s.period()).unwrap();
            let eta_ratio = (4.0 * kf * kf - 1.0) / (4.0 * kf - 1.0);
            prop_assert!((eta_ratio * w_low - 1.0).abs() < 1e-12);
        }

        #[test]
        fn weight_is_nonnegative_and_bounded(k in 1u32..=4, n in 2u32..=6, x in 0.05f64..4.0) {
            let s = re(k, n);
            let w = weight_re(x * RABI, k, n, s.period()).unwrap();
            prop_assert!(w >= 0.0);
            // small overshoot of the main peak is a property of the closed form
            prop_assert!(w <= 1.05, "{}", w);
        }

        #[test]
        fn penalty_at_least_one(phi in -10.0f64..10.0) {
            for s in [Scheme::Pdd, Scheme::Constant, Scheme::SpinLock, Scheme::RotaryEcho { k: 2 }] {
                prop_assert!(phase_penalty(s, PhaseSpec::Fixed(phi)) >= 1.0);
            }
        }
    }
}
