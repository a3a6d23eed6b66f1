//! Decay envelopes under Ornstein–Uhlenbeck dephasing.
//!
//! The production path is the closed-form second cumulant of the rotary
//! echo, written so that every exponential has a non-positive argument. The
//! [`cumulant_numeric`] oracle rebuilds the same cumulant by quadrature in the
//! Liouville representation and exponentiates it.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryResult;
use crate::error::{invalid, require_positive, Error, Result};
use crate::quad::UnitRule;
use crate::sequence::{square_wave, Scheme};
use crate::table::fmt_float;

/// Relative precision below which a coefficient is flagged as affected by
/// cancellation.
pub const CANCELLATION_TOL: f64 = 1e-8;

/// Coefficients of the rotary-echo second cumulant. `gamma_c` is the
/// non-negative root; its sign does not enter the envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantCoeffs {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_c: f64,
    pub sigma: f64,
    pub tau_c: f64,
    pub k: u32,
    pub n: u32,
    pub period: f64,
    /// Estimated relative rounding error of the coefficients exceeds
    /// [`CANCELLATION_TOL`].
    pub ill_conditioned: bool,
}

/// Closed-form α, β, γ_c for a 2πk rotary echo of `n` cycles of period
/// `period` under OU noise (σ in rad/s, τ_c in s).
pub fn cumulant_coeffs(sigma: f64, tau_c: f64, k: u32, n: u32, period: f64) -> Result<CumulantCoeffs> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!("noise dispersion must be >= 0, got {sigma}")));
    }
    require_positive("correlation time", tau_c)?;
    require_positive("period", period)?;
    if k == 0 {
        return Err(invalid("echo index k must be >= 1"));
    }
    let t = period;
    let nf = n as f64;
    let c = (t / (4.0 * tau_c)).tanh();
    let e1 = -(-nf * t / tau_c).exp_m1();
    let q = 16.0 * PI * PI * (k as f64).powi(2) * tau_c * tau_c;
    let pf = 2.0 * sigma * sigma * t * t * tau_c / (q + t * t).powi(2);

    let alpha_terms = [
        nf * t * q,
        nf * 4.0 * q * tau_c * c,
        nf * t.powi(3),
        -tau_c * e1 * t * t,
        -tau_c * e1 * q * c * c,
    ];
    let alpha_sum: f64 = alpha_terms.iter().sum();
    let alpha = pf * alpha_sum;

    let y_terms = [4.0 * nf * q * c, -q * c * c * e1, t * t * e1];
    let y: f64 = y_terms.iter().sum();
    let beta = -pf * tau_c * y;
    let gamma_c = pf * tau_c * (y * y + 4.0 * q * (t * e1 * c).powi(2)).sqrt();

    let rel_error = |terms: &[f64], value: f64| {
        let scale = terms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            0.0
        } else {
            terms.len() as f64 * f64::EPSILON * scale / value.abs()
        }
    };
    let ill_conditioned = rel_error(&alpha_terms, alpha_sum) > CANCELLATION_TOL
        || rel_error(&y_terms, y) > CANCELLATION_TOL;

    Ok(CumulantCoeffs {
        alpha,
        beta,
        gamma_c,
        sigma,
        tau_c,
        k,
        n,
        period,
        ill_conditioned: ill_conditioned && sigma > 0.0 && n > 0,
    })
}

/// D_R = e^{-α}(cosh γ_c + (β/γ_c) sinh γ_c).
pub fn envelope_re(c: &CumulantCoeffs) -> f64 {
    let (a, b, g) = (c.alpha, c.beta, c.gamma_c);
    if g.abs() < 1e-6 {
        let g2 = g * g;
        return (-a).exp() * (1.0 + 0.5 * g2 + b * (1.0 + g2 / 6.0));
    }
    let r = b / g;
    0.5 * ((g - a).exp() * (1.0 + r) + (-g - a).exp() * (1.0 - r))
}

/// Rotary-echo envelope after `n` cycles of period `period`.
pub fn envelope_re_at(sigma: f64, tau_c: f64, k: u32, n: u32, period: f64) -> Result<f64> {
    Ok(envelope_re(&cumulant_coeffs(sigma, tau_c, k, n, period)?))
}

/// Long-correlation-time decay rate Γ₂ (rad/s) of the cubic envelope
/// e^{-(Γ₂t)³/n²}.
pub fn gamma2_long_tc(scheme: Scheme, sigma: f64, tau_c: f64) -> Result<f64> {
    require_positive("correlation time", tau_c)?;
    let s2 = sigma * sigma;
    match scheme {
        Scheme::RotaryEcho { k } => {
            let k = k as f64;
            Ok((3.0 * s2 / (8.0 * k * k * PI * PI * tau_c)).cbrt())
        }
        Scheme::Pdd => Ok((2.0 * s2 / (3.0 * tau_c)).cbrt()),
        other => Err(Error::Unsupported(format!(
            "no long-correlation rate for {other}"
        ))),
    }
}

/// e^{-t³/(n²T₂³)}.
pub fn envelope_pdd(t: f64, n: u32, t2: f64) -> Result<f64> {
    require_positive("T2", t2)?;
    if n == 0 {
        return Err(invalid("envelope_pdd needs n >= 1"));
    }
    let nf = n as f64;
    Ok((-(t / t2).powi(3) / (nf * nf)).exp())
}

/// Least-squares Γ₂³ from envelope samples assuming D = e^{-Γ₂³t³/n²}
/// (fit of -n² ln D against t³ through the origin).
pub fn fit_cubic_rate(times: &[f64], envelope: &[f64], n: u32) -> Result<f64> {
    if times.len() != envelope.len() || times.is_empty() {
        return Err(invalid("fit needs equally many, non-zero, samples"));
    }
    let n2 = (n as f64).powi(2);
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, d) in times.iter().zip(envelope) {
        if !(*d > 0.0) {
            return Err(invalid(format!("envelope must be > 0 for a log fit, got {d}")));
        }
        let x = t.powi(3);
        num += x * (-d.ln() * n2);
        den += x * x;
    }
    Ok(num / den)
}

/// A decay curve on a time grid with optional Monte Carlo columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub t_s: Vec<f64>,
    pub envelope: Vec<f64>,
    pub mc: Option<Vec<TrajectoryResult>>,
}

impl DecayCurve {
    /// Writes `t_s,envelope[,envelope_mc,envelope_mc_std_error]` rows; the
    /// Monte Carlo columns are the contrast 2S̄ - 1 and its standard error.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        match &self.mc {
            None => writeln!(out, "t_s,envelope")?,
            Some(_) => writeln!(out, "t_s,envelope,envelope_mc,envelope_mc_std_error")?,
        }
        for (i, (t, d)) in self.t_s.iter().zip(&self.envelope).enumerate() {
            write!(out, "{},{}", fmt_float(*t), fmt_float(*d))?;
            if let Some(mc) = &self.mc {
                let (c, e) = mc[i].contrast();
                write!(out, ",{},{}", fmt_float(c), fmt_float(e))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Quadrature resolution of [`cumulant_numeric`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResolution {
    /// Gauss–Legendre panels per half period.
    pub panels_per_half: usize,
    /// Nodes per panel.
    pub nodes_per_panel: usize,
}

impl Default for OracleResolution {
    /// 512 nodes per period.
    fn default() -> Self {
        Self {
            panels_per_half: 8,
            nodes_per_panel: 32,
        }
    }
}

/// Second-cumulant generator assembled by quadrature, with its signal.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericCumulant {
    /// Liouville-space exponent M, ρ(nT) = exp(M)ρ(0) with row-major
    /// vectorized density matrices.
    pub generator: Matrix4<Complex64>,
    /// ⟨σ_z⟩ at the end of the sequence for the initial state |0⟩.
    pub signal: f64,
}

/// Oracle for [`envelope_re`]: builds the one-period double integrals of the
/// toggling-frame noise operator N(t) = cos(Ωt)σ_z + SW(t) sin(Ωt)σ_y weighted
/// by the OU autocovariance, assembles the n-cycle cumulant
/// n·△ + □·Σ_d (n-d)e^{-(d-1)T/τ_c}, exponentiates it, and returns the signal.
pub fn cumulant_numeric(
    sigma: f64,
    tau_c: f64,
    k: u32,
    n: u32,
    rabi: f64,
    res: OracleResolution,
) -> Result<NumericCumulant> {
    require_positive("correlation time", tau_c)?;
    require_positive("Rabi frequency", rabi)?;
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!("noise dispersion must be >= 0, got {sigma}")));
    }
    if k == 0 || res.panels_per_half == 0 || res.nodes_per_panel == 0 {
        return Err(invalid("k and the oracle resolution must be >= 1"));
    }
    let period = 4.0 * PI * k as f64 / rabi;
    let s2 = sigma * sigma;
    let rule = UnitRule::new(res.nodes_per_panel);
    let panels = 2 * res.panels_per_half;
    let width = period / panels as f64;
    // components of N along σ_z and σ_y
    let comp = |t: f64, sign: f64| -> [f64; 2] { [(rabi * t).cos(), sign * (rabi * t).sin()] };
    let panel_sign = |p: usize| square_wave((p as f64 + 0.5) * width, period);

    struct Node {
        t: f64,
        w: f64,
        f: [f64; 2],
    }
    let nodes: Vec<Vec<Node>> = (0..panels)
        .map(|p| {
            let a = p as f64 * width;
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| {
                    let t = a + x * width;
                    Node {
                        t,
                        w: w * width,
                        f: comp(t, panel_sign(p)),
                    }
                })
                .collect()
        })
        .collect();

    // △: ordered pairs t2 < t1 within one period
    let mut tri = [[0.0f64; 2]; 2];
    for (p, panel) in nodes.iter().enumerate() {
        for outer in panel {
            let mut inner = [0.0f64; 2];
            for lower in &nodes[..p] {
                for nd in lower {
                    let g = (-(outer.t - nd.t) / tau_c).exp();
                    inner[0] += nd.w * g * nd.f[0];
                    inner[1] += nd.w * g * nd.f[1];
                }
            }
            let a = p as f64 * width;
            let span = outer.t - a;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let t2 = a + x * span;
                let g = (-(outer.t - t2) / tau_c).exp();
                let f = comp(t2, panel_sign(p));
                inner[0] += w * span * g * f[0];
                inner[1] += w * span * g * f[1];
            }
            for i in 0..2 {
                for j in 0..2 {
                    tri[i][j] += outer.w * outer.f[i] * inner[j];
                }
            }
        }
    }

    // □: t1 in a later period than t2 by one, kernel e^{-(T + t1 - t2)/τ_c}
    let mut early = [0.0f64; 2];
    let mut late = [0.0f64; 2];
    for nd in nodes.iter().flatten() {
        let e1 = (-nd.t / tau_c).exp();
        let e2 = (-(period - nd.t) / tau_c).exp();
        for i in 0..2 {
            early[i] += nd.w * e1 * nd.f[i];
            late[i] += nd.w * e2 * nd.f[i];
        }
    }
    let mut weight = 0.0;
    for d in 1..n as usize {
        weight += (n as usize - d) as f64 * (-((d - 1) as f64) * period / tau_c).exp();
    }

    let ops = [liouvillian(&pauli_z()), liouvillian(&pauli_y())];
    let mut generator = Matrix4::<Complex64>::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let coeff = s2 * (n as f64 * tri[i][j] + weight * early[i] * late[j]);
            generator += (ops[i] * ops[j]).scale(coeff);
        }
    }
    let rho0 = Vector4::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    );
    let rho = generator.exp() * rho0;
    Ok(NumericCumulant {
        generator,
        signal: (rho[0] - rho[3]).re,
    })
}

fn pauli_z() -> [[Complex64; 2]; 2] {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    [[one, zero], [zero, -one]]
}

fn pauli_y() -> [[Complex64; 2]; 2] {
    let i = Complex64::new(0.0, 1.0);
    let zero = Complex64::new(0.0, 0.0);
    [[zero, -i], [i, zero]]
}

/// Superoperator of ρ ↦ -i[A, ρ] acting on row-major vec(ρ):
/// -i(A ⊗ 1 - 1 ⊗ Aᵀ).
fn liouvillian(a: &[[Complex64; 2]; 2]) -> Matrix4<Complex64> {
    let mut m = Matrix4::<Complex64>::zeros();
    let minus_i = Complex64::new(0.0, -1.0);
    for r in 0..2 {
        for c in 0..2 {
            for s in 0..2 {
                // (A ⊗ 1)[(r,s),(c,s)] = A[r][c]
                m[(2 * r + s, 2 * c + s)] += minus_i * a[r][c];
                // (1 ⊗ Aᵀ)[(s,r),(s,c)] = A[c][r]
                m[(2 * s + r, 2 * s + c)] -= minus_i * a[c][r];
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RABI: f64 = 2.0 * PI * 1.0e6;

    fn period(k: u32) -> f64 {
        4.0 * PI * k as f64 / RABI
    }

    #[test]
    fn vanish_at_zero_cycles_and_zero_noise() {
        let c = cumulant_coeffs(0.1 * RABI, period(1), 1, 0, period(1)).unwrap();
        assert_eq!((c.alpha, c.beta, c.gamma_c), (0.0, 0.0, 0.0));
        assert_eq!(envelope_re(&c), 1.0);
        let c = cumulant_coeffs(0.0, period(1), 2, 5, period(2)).unwrap();
        assert_eq!((c.alpha, c.beta, c.gamma_c), (0.0, 0.0, 0.0));
        assert!(!c.ill_conditioned);
    }

    #[test]
    fn envelope_limits() {
        let mut c = cumulant_coeffs(0.0, 1.0, 1, 1, 1.0).unwrap();
        c.alpha = 0.3;
        assert!((envelope_re(&c) - (-0.3f64).exp()).abs() < 1e-15);
        c.gamma_c = 1e-7;
        c.beta = 1e-8;
        let series = envelope_re(&c);
        c.gamma_c = 1.0000001e-6;
        let direct = envelope_re(&c);
        assert!((series - direct).abs() < 1e-10);
    }

    #[test]
    fn closed_form_matches_quadrature_oracle() {
        for (k, n, ratio, s) in [
            (1, 3, 0.1, 0.2),
            (1, 2, 1.0, 0.1),
            (2, 4, 10.0, 0.1),
            (1, 1, 100.0, 0.5),
        ] {
            let t = period(k);
            let sigma = s * RABI;
            let tau_c = ratio * t;
            let closed = envelope_re_at(sigma, tau_c, k, n, t).unwrap();
            let oracle = cumulant_numeric(sigma, tau_c, k, n, RABI, OracleResolution::default())
                .unwrap()
                .signal;
            assert!(
                ((closed - oracle) / oracle).abs() < 1e-6,
                "k={k} n={n} τc/T={ratio}: {closed} vs {oracle}"
            );
        }
    }

    #[test]
    fn oracle_zero_noise_is_identity() {
        let r = cumulant_numeric(0.0, 1e-6, 1, 3, RABI, OracleResolution::default()).unwrap();
        assert_eq!(r.generator, Matrix4::zeros());
        assert_eq!(r.signal, 1.0);
    }

    #[test]
    fn overflow_safe_for_long_sequences() {
        let t = period(1);
        let c = cumulant_coeffs(0.01 * RABI, t, 1, 1000, t).unwrap();
        assert!(c.alpha.is_finite() && c.beta.is_finite() && c.gamma_c.is_finite());
        let d = envelope_re(&c);
        assert!(d.is_finite() && (0.0..=1.0).contains(&d));
    }

    #[test]
    fn long_correlation_rate() {
        let k = 1;
        let n = 2;
        let tau_c = 1.0;
        let t_max = tau_c / (1000.0 * n as f64);
        let times: Vec<f64> = (5..=10).map(|i| t_max * i as f64 / 10.0).collect();
        let sigma = 60.0 * k as f64 * n as f64 / t_max;
        let env: Vec<f64> = times
            .iter()
            .map(|t| envelope_re_at(sigma, tau_c, k, n, t / n as f64).unwrap())
            .collect();
        let fit = fit_cubic_rate(&times, &env, n).unwrap();
        let expected = gamma2_long_tc(Scheme::RotaryEcho { k }, sigma, tau_c).unwrap().powi(3);
        assert!((fit / expected - 1.0).abs() < 0.05, "{}", fit / expected);
    }

    #[test]
    fn gain_over_pdd() {
        let re = gamma2_long_tc(Scheme::RotaryEcho { k: 1 }, 1.0, 1.0).unwrap();
        let pdd = gamma2_long_tc(Scheme::Pdd, 1.0, 1.0).unwrap();
        let gain = (16.0 * PI * PI / 9.0f64).cbrt();
        assert!((pdd / re - gain).abs() < 1e-12);
        assert!(gamma2_long_tc(Scheme::Constant, 1.0, 1.0).is_err());
    }

    #[test]
    fn cubic_envelope_values() {
        assert_eq!(envelope_pdd(0.0, 1, 5e-4).unwrap(), 1.0);
        assert!((envelope_pdd(5e-4, 1, 5e-4).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!((envelope_pdd(5e-4, 10, 5e-4).unwrap() - (-0.01f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn liouvillian_generates_rotation() {
        // exp(-i θ σ_z) on |+><+| turns the coherence by e^{-2iθ}
        let l = liouvillian(&pauli_z());
        let theta = 0.3;
        let u = (l * Complex64::new(theta, 0.0)).exp();
        let half = Complex64::new(0.5, 0.0);
        let rho = u * Vector4::new(half, half, half, half);
        assert!((rho[1] - half * Complex64::from_polar(1.0, -2.0 * theta)).norm() < 1e-14);
        assert!((rho[0] - half).norm() < 1e-14);
    }

    #[test]
    fn csv_columns() {
        let curve = DecayCurve {
            t_s: vec![0.0, 1e-6],
            envelope: vec![1.0, 0.5],
            mc: None,
        };
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_s,envelope\n"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn coefficients_scale_with_variance(
            s in 0.001f64..0.3, ratio in 0.05f64..500.0, k in 1u32..5, n in 1u32..20, c in 0.1f64..10.0
        ) {
            let t = period(k);
            let a = cumulant_coeffs(s * RABI, ratio * t, k, n, t).unwrap();
            let b = cumulant_coeffs(s * RABI * c.sqrt(), ratio * t, k, n, t).unwrap();
            prop_assert!((b.alpha - c * a.alpha).abs() <= 1e-12 * b.alpha.abs().max(1e-300));
            prop_assert!((b.beta - c * a.beta).abs() <= 1e-12 * b.beta.abs().max(1e-300));
            prop_assert!((b.gamma_c - c * a.gamma_c).abs() <= 1e-12 * b.gamma_c.abs().max(1e-300));
        }

        #[test]
        fn coefficient_signs(
            s in 0.001f64..0.3, ratio in 0.05f64..1000.0, k in 1u32..5, n in 1u32..50
        ) {
            let t = period(k);
            let c = cumulant_coeffs(s * RABI, ratio * t, k, n, t).unwrap();
            prop_assert!(c.alpha >= 0.0);
            prop_assert!(c.gamma_c >= c.beta.abs());
        }

        #[test]
        fn envelope_bounded_and_monotone(
            s in 0.001f64..0.1, ratio in 0.1f64..1000.0, k in 1u32..5
        ) {
            let t = period(k);
            let mut last = 1.0;
            for n in 0..30 {
                let d = envelope_re_at(s * RABI, ratio * t, k, n, t).unwrap();
                prop_assert!(d > 0.0 && d <= 1.0 + 1e-15);
                prop_assert!(d <= last + 1e-12);
                last = d;
            }
        }
    }
}
