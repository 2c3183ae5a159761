//! SU(2) evolution operators in the two-entry `(u11, u21)` form.
//!
//! A special unitary 2×2 matrix is fully determined by its first column:
//!
//! ```text
//! U = | u11  -conj(u21) |
//!     | u21   conj(u11) |      |u11|² + |u21|² = 1
//! ```
//!
//! Every comparison in this crate is blind to global phase; see [`infidelity`].

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|u11|² + |u21|² = 1` accepted by [`Unitary2::new`].
pub const UNITARITY_TOL: f64 = 1e-12;

/// Rotation angles below this (or within this of 2π) have no recoverable axis.
pub const ANGLE_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Su2Error {
    #[error("not unitary: |u11|^2 + |u21|^2 - 1 = {defect:e}")]
    NotUnitary { defect: f64 },
    #[error("rotation angle {angle:e} too close to 0 (mod 2pi) to determine an axis")]
    IndeterminateAxis { angle: f64 },
}

/// General complex 2×2 matrix, row-major.
pub type Mat2 = [[C64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unitary2 {
    pub u11: C64,
    pub u21: C64,
}

impl Unitary2 {
    pub const IDENTITY: Unitary2 = Unitary2 {
        u11: C64::new(1.0, 0.0),
        u21: C64::new(0.0, 0.0),
    };

    /// Validating constructor.
    pub fn new(u11: C64, u21: C64) -> Result<Self, Su2Error> {
        let u = Unitary2 { u11, u21 };
        let defect = u.norm_defect();
        if defect.abs() > UNITARITY_TOL || !defect.is_finite() {
            return Err(Su2Error::NotUnitary { defect });
        }
        Ok(u)
    }

    /// Builds the pair without checking normalization. Callers that construct
    /// entries from an exactly normalized parametrization use this, as do
    /// tests that need deliberately corrupted operators.
    pub const fn from_parts_unchecked(u11: C64, u21: C64) -> Self {
        Unitary2 { u11, u21 }
    }

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// `exp(-i θ (n·σ)/2)`; `axis` is normalized internally.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if norm == 0.0 {
            return Self::IDENTITY;
        }
        let [nx, ny, nz] = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
        let (s, c) = (0.5 * angle).sin_cos();
        Unitary2 {
            u11: C64::new(c, -s * nz),
            u21: C64::new(s * ny, -s * nx),
        }
    }

    /// `exp(-i (b·σ) dt / 2)` for a field vector `b` (Hamiltonian `b·σ/2`).
    pub fn from_field_step(field: [f64; 3], dt: f64) -> Self {
        let norm = (field[0] * field[0] + field[1] * field[1] + field[2] * field[2]).sqrt();
        if norm == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * norm * dt).sin_cos();
        let k = s / norm;
        Unitary2 {
            u11: C64::new(c, -k * field[2]),
            u21: C64::new(k * field[1], -k * field[0]),
        }
    }

    pub fn x_rotation(angle: f64) -> Self {
        Self::from_axis_angle([1.0, 0.0, 0.0], angle)
    }

    pub fn z_rotation(angle: f64) -> Self {
        Self::from_axis_angle([0.0, 0.0, 1.0], angle)
    }

    /// `|u11|² + |u21|² - 1`.
    pub fn norm_defect(&self) -> f64 {
        self.u11.norm_sqr() + self.u21.norm_sqr() - 1.0
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Unitary2) -> Unitary2 {
        let (a, b) = (self.u11, self.u21);
        let (c, d) = (other.u11, other.u21);
        Unitary2 {
            u11: a * c - b.conj() * d,
            u21: b * c + a.conj() * d,
        }
    }

    /// Hermitian conjugate: `(conj(u11), -u21)`.
    pub fn dagger(&self) -> Unitary2 {
        Unitary2 {
            u11: self.u11.conj(),
            u21: -self.u21,
        }
    }

    pub fn to_matrix(&self) -> Mat2 {
        [
            [self.u11, -self.u21.conj()],
            [self.u21, self.u11.conj()],
        ]
    }

    /// `‖U†U − I‖∞` of the reconstructed matrix (max entry modulus).
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.to_matrix();
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..2 {
                    acc += m[k][i].conj() * m[k][j];
                }
                if i == j {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// Largest entry-wise modulus of `self − other`.
    pub fn distance(&self, other: &Unitary2) -> f64 {
        (self.u11 - other.u11).norm().max((self.u21 - other.u21).norm())
    }

    pub fn trace_sigma_x(&self) -> C64 {
        C64::new(0.0, 2.0 * self.u21.im)
    }

    pub fn trace_sigma_y(&self) -> C64 {
        C64::new(0.0, -2.0 * self.u21.re)
    }

    pub fn trace_sigma_z(&self) -> C64 {
        C64::new(0.0, 2.0 * self.u11.im)
    }

    pub fn axis_angle(&self) -> Result<RotationSpec, Su2Error> {
        axis_angle(self)
    }
}

impl Default for Unitary2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Axis and angle of `U = exp(-i θ (n·σ)/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    pub axis: [f64; 3],
    pub angle: f64,
}

impl RotationSpec {
    pub fn to_unitary(&self) -> Unitary2 {
        Unitary2::from_axis_angle(self.axis, self.angle)
    }
}

pub fn compose(u: &Unitary2, v: &Unitary2) -> Unitary2 {
    u.compose(v)
}

pub fn dagger(u: &Unitary2) -> Unitary2 {
    u.dagger()
}

/// `1 − |tr(U†V)|/2`, clamped to `[0, 1]`.
///
/// For `W = U†V` in SU(2), `tr W = 2 Re w11`, and
/// `1 − |Re w11| = (Im² w11 + |w21|²)/(1 + |Re w11|)` keeps full relative
/// precision for nearly equal operators.
pub fn infidelity(u: &Unitary2, v: &Unitary2) -> f64 {
    let w = u.dagger().compose(v);
    let re = w.u11.re.abs();
    let num = w.u11.im * w.u11.im + w.u21.norm_sqr();
    (num / (1.0 + re)).clamp(0.0, 1.0)
}

/// Same metric on arbitrary 2×2 matrices, for inputs carrying a global phase.
pub fn matrix_infidelity(a: &Mat2, b: &Mat2) -> f64 {
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..2 {
        for k in 0..2 {
            tr += a[k][i].conj() * b[k][i];
        }
    }
    (1.0 - 0.5 * tr.norm()).clamp(0.0, 1.0)
}

/// Scales every entry of a matrix by a unit-modulus phase.
pub fn with_global_phase(m: &Mat2, phase: f64) -> Mat2 {
    let p = C64::from_polar(1.0, phase);
    [[m[0][0] * p, m[0][1] * p], [m[1][0] * p, m[1][1] * p]]
}

/// Extracts `(n, θ)` with `θ ∈ [0, 2π)`.
///
/// Reading the entries of `cos(θ/2) I − i sin(θ/2) n·σ`:
/// `Re u11 = cos(θ/2)`, `Im u11 = −n_z sin(θ/2)`, `Im u21 = −n_x sin(θ/2)`,
/// `Re u21 = n_y sin(θ/2)`. The y component is returned as computed so callers
/// can check it vanishes.
pub fn axis_angle(u: &Unitary2) -> Result<RotationSpec, Su2Error> {
    let sx = -u.u21.im;
    let sy = u.u21.re;
    let sz = -u.u11.im;
    let s = (sx * sx + sy * sy + sz * sz).sqrt();
    let angle = 2.0 * s.atan2(u.u11.re);
    if angle < ANGLE_FLOOR || angle > 2.0 * std::f64::consts::PI - ANGLE_FLOOR {
        return Err(Su2Error::IndeterminateAxis { angle });
    }
    Ok(RotationSpec {
        axis: [sx / s, sy / s, sz / s],
        angle,
    })
}
