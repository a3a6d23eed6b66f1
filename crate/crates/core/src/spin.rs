//! Two-level operators and states.
//!
//! Spin components follow S = σ/2 throughout. Bloch vectors are r_i = ⟨σ_i⟩,
//! so |0⟩ is r = (0, 0, 1) and ⟨S_i⟩ = r_i / 2.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on |H - H†| (relative to max(1, |H|)) before a generator is rejected.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// A 2×2 complex operator, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct TwoLevelOp(pub [[Complex64; 2]; 2]);

impl fmt::Debug for TwoLevelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            m[0][0], m[0][1], m[1][0], m[1][1]
        )
    }
}

impl TwoLevelOp {
    pub const fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Self([[a, b], [c, d]])
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn pauli_x() -> Self {
        Self::new(ZERO, ONE, ONE, ZERO)
    }

    pub const fn pauli_y() -> Self {
        Self::new(ZERO, Complex64::new(0.0, -1.0), I, ZERO)
    }

    pub const fn pauli_z() -> Self {
        Self::new(ONE, ZERO, ZERO, Complex64::new(-1.0, 0.0))
    }

    pub fn sx() -> Self {
        Self::pauli_x().scale(0.5)
    }

    pub fn sy() -> Self {
        Self::pauli_y().scale(0.5)
    }

    pub fn sz() -> Self {
        Self::pauli_z().scale(0.5)
    }

    /// h_x S_x + h_y S_y + h_z S_z.
    pub fn spin_hamiltonian(hx: f64, hy: f64, hz: f64) -> Self {
        Self::new(
            Complex64::new(0.5 * hz, 0.0),
            Complex64::new(0.5 * hx, -0.5 * hy),
            Complex64::new(0.5 * hx, 0.5 * hy),
            Complex64::new(-0.5 * hz, 0.0),
        )
    }

    /// exp(-i (h_x S_x + h_y S_y + h_z S_z) dt), a rotation by |h|·dt about ĥ.
    ///
    /// Unchecked fast path for the propagation loops.
    #[inline]
    pub fn spin_rotation(hx: f64, hy: f64, hz: f64, dt: f64) -> Self {
        let norm = (hx * hx + hy * hy + hz * hz).sqrt();
        let half = 0.5 * norm * dt;
        let c = half.cos();
        // sin(|h| dt / 2) / |h|, finite as |h| -> 0
        let s = if half.abs() > 1e-8 {
            half.sin() / norm
        } else {
            0.5 * dt * (1.0 - half * half / 6.0)
        };
        Self::new(
            Complex64::new(c, -s * hz),
            Complex64::new(-s * hy, -s * hx),
            Complex64::new(s * hy, -s * hx),
            Complex64::new(c, s * hz),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let m = &self.0;
        Self::new(f(m[0][0]), f(m[0][1]), f(m[1][0]), f(m[1][1]))
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Self::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Self::new(m[0][0], m[1][0], m[0][1], m[1][1])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol * self.max_abs().max(1.0)
    }

    /// max |U†U - 1|.
    pub fn unitarity_defect(&self) -> f64 {
        (self.dagger() * *self).max_abs_diff(&Self::identity())
    }

    /// Coefficients (h0, hx, hy, hz) of the Pauli decomposition
    /// h0·1 + hx·σx + hy·σy + hz·σz of a Hermitian operator.
    pub fn pauli_coefficients(&self) -> [f64; 4] {
        let m = &self.0;
        let off = 0.5 * (m[1][0] + m[0][1].conj());
        [
            0.5 * (m[0][0].re + m[1][1].re),
            off.re,
            off.im,
            0.5 * (m[0][0].re - m[1][1].re),
        ]
    }

    /// Rotation vector θ·n̂ of an SU(2) element U = exp(-i θ n̂·S), after
    /// removing the global phase. The angle is reported in [0, 2π].
    pub fn rotation_vector(&self) -> [f64; 3] {
        let det = self.det();
        let phase = Complex64::from_polar(1.0, -0.5 * det.arg());
        let u = self.scale_complex(phase);
        // u = cos(θ/2) 1 - i sin(θ/2) n̂·σ
        let c = 0.5 * (u.0[0][0] + u.0[1][1]).re;
        let nx = -0.5 * (u.0[0][1] + u.0[1][0]).im;
        let ny = 0.5 * (u.0[1][0] - u.0[0][1]).re;
        let nz = -0.5 * (u.0[0][0] - u.0[1][1]).im;
        let s = (nx * nx + ny * ny + nz * nz).sqrt();
        if s == 0.0 {
            return [0.0; 3];
        }
        let theta = 2.0 * s.atan2(c);
        [theta * nx / s, theta * ny / s, theta * nz / s]
    }

    pub fn apply(&self, psi: &Spinor) -> Spinor {
        let m = &self.0;
        let [a, b] = psi.0;
        Spinor([m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b])
    }
}

impl Add for TwoLevelOp {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        Self::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

impl Sub for TwoLevelOp {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for TwoLevelOp {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for TwoLevelOp {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// exp(-i H t) for Hermitian `h`, via the closed form on the Pauli basis:
/// e^{-i h0 t} [cos(|h| t) 1 - i sin(|h| t) ĥ·σ].
pub fn expm_antihermitian(h: &TwoLevelOp, t: f64) -> Result<TwoLevelOp> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("duration must be finite, got {t}")));
    }
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let [h0, hx, hy, hz] = h.pauli_coefficients();
    let norm = (hx * hx + hy * hy + hz * hz).sqrt();
    let angle = norm * t;
    let c = angle.cos();
    let s = if norm > 0.0 { angle.sin() / norm } else { t };
    let phase = Complex64::from_polar(1.0, -h0 * t);
    let u = TwoLevelOp::new(
        Complex64::new(c, -s * hz),
        Complex64::new(-s * hy, -s * hx),
        Complex64::new(s * hy, -s * hx),
        Complex64::new(c, s * hz),
    );
    Ok(u.scale_complex(phase))
}

/// ⟨ψ|O|ψ⟩ for Hermitian `obs`; the vanishing imaginary part is dropped.
pub fn expect(state: &Spinor, obs: &TwoLevelOp) -> f64 {
    let o = obs.apply(state);
    let [a, b] = state.0;
    (a.conj() * o.0[0] + b.conj() * o.0[1]).re
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> TwoLevelOp {
        match self {
            Axis::X => TwoLevelOp::pauli_x(),
            Axis::Y => TwoLevelOp::pauli_y(),
            Axis::Z => TwoLevelOp::pauli_z(),
        }
    }
}

/// Pure state as a normalized complex 2-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor(pub [Complex64; 2]);

impl Spinor {
    /// |0⟩, Bloch vector +z.
    pub const fn up() -> Self {
        Spinor([ONE, ZERO])
    }

    pub const fn down() -> Self {
        Spinor([ZERO, ONE])
    }

    /// Normalizes (a, b); rejects the zero vector.
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter("state vector has zero norm".into()));
        }
        Ok(Spinor([a / norm, b / norm]))
    }

    /// +1 eigenstate of σ along `axis`.
    pub fn along(axis: Axis) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match axis {
            Axis::X => Spinor([Complex64::new(h, 0.0), Complex64::new(h, 0.0)]),
            Axis::Y => Spinor([Complex64::new(h, 0.0), Complex64::new(0.0, h)]),
            Axis::Z => Self::up(),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.0[0].norm_sqr() + self.0[1].norm_sqr()).sqrt()
    }

    pub fn bloch(&self) -> Bloch {
        let [a, b] = self.0;
        let ab = a.conj() * b;
        Bloch {
            x: 2.0 * ab.re,
            y: 2.0 * ab.im,
            z: a.norm_sqr() - b.norm_sqr(),
        }
    }

    /// ⟨σ_axis⟩. The z component is formed as 1 - 2|b|² so that tiny
    /// deviations from |0⟩ keep full relative precision.
    pub fn component(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Z => {
                let n2 = self.0[0].norm_sqr() + self.0[1].norm_sqr();
                n2 - 2.0 * self.0[1].norm_sqr()
            }
            Axis::X => self.bloch().x,
            Axis::Y => self.bloch().y,
        }
    }
}

/// Bloch vector r_i = ⟨σ_i⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bloch {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Bloch {
    pub fn length(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn component(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }
}
