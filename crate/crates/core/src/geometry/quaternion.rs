//! Quaternion algebra over any [`Real`] scalar.
//!
//! Hamilton convention, scalar-first storage. Rotation matrices are built
//! from unit quaternions; callers normalize first.

use crate::scalar::Real;

use super::GeometryError;

/// Quaternion `r + i*i + j*j + k*k`. The `j` axis is the camera y-axis
/// (vertical), so pure-yaw rotations have only `r` and `j` components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion<T = f64> {
    pub r: T,
    pub i: T,
    pub j: T,
    pub k: T,
}

impl<T: Real> Quaternion<T> {
    pub fn new(r: T, i: T, j: T, k: T) -> Self {
        Self { r, i, j, k }
    }

    pub fn identity() -> Self {
        Self::new(
            T::from_f64(1.0),
            T::from_f64(0.0),
            T::from_f64(0.0),
            T::from_f64(0.0),
        )
    }

    /// Rotation by `angle` about the camera y-axis:
    /// `cos(angle/2) + sin(angle/2)*j`.
    pub fn about_y(angle: T) -> Self {
        let half = angle * T::from_f64(0.5);
        Self::new(half.cos(), T::from_f64(0.0), half.sin(), T::from_f64(0.0))
    }

    /// Hamilton product `self * other`.
    pub fn multiply(&self, other: &Self) -> Self {
        let (r1, i1, j1, k1) = (self.r, self.i, self.j, self.k);
        let (r2, i2, j2, k2) = (other.r, other.i, other.j, other.k);
        Self {
            r: r1 * r2 - i1 * i2 - j1 * j2 - k1 * k2,
            i: r1 * i2 + i1 * r2 + j1 * k2 - k1 * j2,
            j: r1 * j2 - i1 * k2 + j1 * r2 + k1 * i2,
            k: r1 * k2 + i1 * j2 - j1 * i2 + k1 * r2,
        }
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.r, -self.i, -self.j, -self.k)
    }

    pub fn norm(&self) -> T {
        (self.r * self.r + self.i * self.i + self.j * self.j + self.k * self.k).sqrt()
    }

    /// Scale to unit norm. Errors when the norm is below 1e-9 (an
    /// unconstrained network head can emit a near-zero 4-vector).
    pub fn normalized(&self) -> Result<Self, GeometryError> {
        let norm = self.norm();
        if norm.value() < super::MIN_QUATERNION_NORM {
            return Err(GeometryError::ZeroNormQuaternion { norm: norm.value() });
        }
        Ok(Self::new(
            self.r / norm,
            self.i / norm,
            self.j / norm,
            self.k / norm,
        ))
    }

    /// Rotation matrix of a unit quaternion (row-major).
    pub fn rotation_matrix(&self) -> [[T; 3]; 3] {
        let (r, i, j, k) = (self.r, self.i, self.j, self.k);
        let two = T::from_f64(2.0);
        let one = T::from_f64(1.0);
        [
            [
                one - two * (j * j + k * k),
                two * (i * j - k * r),
                two * (i * k + j * r),
            ],
            [
                two * (i * j + k * r),
                one - two * (i * i + k * k),
                two * (j * k - i * r),
            ],
            [
                two * (i * k - j * r),
                two * (j * k + i * r),
                one - two * (i * i + j * j),
            ],
        ]
    }
}

impl Quaternion<f64> {
    /// Recover a unit quaternion from an orthonormal rotation matrix
    /// (largest-pivot branch selection for numerical stability).
    pub fn from_rotation_matrix(m: &[[f64; 3]; 3]) -> Self {
        let trace = m[0][0] + m[1][1] + m[2][2];
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Self::new(
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Self::new(
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Self::new(
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Self::new(
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        }
    }

    /// Resolve the global sign ambiguity (`q` and `-q` are the same
    /// rotation): `r >= 0`, ties broken by the first nonzero component.
    pub fn canonicalized(&self) -> Self {
        let components = [self.r, self.i, self.j, self.k];
        for c in components {
            if c != 0.0 {
                return if c < 0.0 {
                    Self::new(-self.r, -self.i, -self.j, -self.k)
                } else {
                    *self
                };
            }
        }
        *self
    }

    pub fn components(&self) -> [f64; 4] {
        [self.r, self.i, self.j, self.k]
    }
}
