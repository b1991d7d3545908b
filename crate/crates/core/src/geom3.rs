//! Small fixed-size 3D algebra: vectors, unit directions, skew-symmetric
//! generators, rotations and the orthogonal projector `I - y yᵀ`.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vectors shorter than this cannot be turned into a direction.
pub const MIN_DIRECTION_NORM: f64 = 1e-9;

/// Below this rotation angle the Rodrigues coefficients use their series form.
const SMALL_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeomError {
    #[error("cannot normalize vector of norm {norm:e} (minimum {MIN_DIRECTION_NORM:e})")]
    Degenerate { norm: f64 },
    #[error("vector has non-finite components")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn cross(&self, other: &Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Component-wise product.
    #[inline]
    pub fn component_mul(&self, other: &Vec3) -> Vec3 {
        Vec3::new(self.x * other.x, self.y * other.y, self.z * other.z)
    }

    pub fn max_abs(&self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Outer product `self otherᵀ`.
    pub fn outer(&self, other: &Vec3) -> Mat3 {
        let a = self.to_array();
        let b = other.to_array();
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i] * b[j];
            }
        }
        Mat3(m)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl std::iter::Sum for Vec3 {
    fn sum<I: Iterator<Item = Vec3>>(iter: I) -> Vec3 {
        iter.fold(Vec3::ZERO, |a, b| a + b)
    }
}

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::X);
    pub const Y: UnitVec3 = UnitVec3(Vec3::Y);
    pub const Z: UnitVec3 = UnitVec3(Vec3::Z);

    /// Normalizes `v`. Vectors already unit to within a few ulps are kept
    /// bit-for-bit, so normalizing twice is the identity.
    pub fn new(v: Vec3) -> Result<Self, GeomError> {
        if !v.is_finite() {
            return Err(GeomError::NonFinite);
        }
        let norm = v.norm();
        if norm < MIN_DIRECTION_NORM {
            return Err(GeomError::Degenerate { norm });
        }
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            Ok(UnitVec3(v))
        } else {
            Ok(UnitVec3(v / norm))
        }
    }

    #[inline]
    pub fn get(&self) -> Vec3 {
        self.0
    }
}

impl TryFrom<Vec3> for UnitVec3 {
    type Error = GeomError;
    fn try_from(v: Vec3) -> Result<Self, Self::Error> {
        UnitVec3::new(v)
    }
}

impl From<UnitVec3> for Vec3 {
    fn from(u: UnitVec3) -> Vec3 {
        u.0
    }
}

/// Dense 3×3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, other: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|v| *v *= s);
        Mat3(out)
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Mat3) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut out = self.0;
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += o.0[i][j];
            }
        }
        Mat3(out)
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        self + o.scale(-1.0)
    }
}

/// Element of so(3), stored through its axis `z` so that the matrix is `z×`.
/// Antisymmetry holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkewMat3 {
    pub axis: Vec3,
}

impl SkewMat3 {
    pub const ZERO: SkewMat3 = SkewMat3 { axis: Vec3::ZERO };

    /// `self · w = axis × w`
    #[inline]
    pub fn apply(&self, w: &Vec3) -> Vec3 {
        self.axis.cross(w)
    }

    pub fn matrix(&self) -> Mat3 {
        let Vec3 { x, y, z } = self.axis;
        Mat3([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    }

    /// `z× z× = z zᵀ - |z|² I`
    pub fn squared(&self) -> Mat3 {
        let a = self.axis;
        a.outer(&a) - Mat3::IDENTITY.scale(a.norm_squared())
    }

    pub fn scaled(&self, s: f64) -> SkewMat3 {
        SkewMat3 { axis: self.axis * s }
    }

    pub fn is_zero(&self) -> bool {
        self.axis == Vec3::ZERO
    }
}

impl Add for SkewMat3 {
    type Output = SkewMat3;
    fn add(self, o: SkewMat3) -> SkewMat3 {
        SkewMat3 {
            axis: self.axis + o.axis,
        }
    }
}

/// Rotation matrix in SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3(Mat3);

impl Rot3 {
    pub const IDENTITY: Rot3 = Rot3(Mat3::IDENTITY);

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0.mul_vec(v)
    }

    pub fn compose(&self, other: &Rot3) -> Rot3 {
        Rot3(self.0.mul_mat(&other.0))
    }

    pub fn inverse(&self) -> Rot3 {
        Rot3(self.0.transpose())
    }

    /// `max |RᵀR - I|` entrywise.
    pub fn orthogonality_error(&self) -> f64 {
        self.0
            .transpose()
            .mul_mat(&self.0)
            .max_abs_diff(&Mat3::IDENTITY)
    }
}

/// `π_y x = (I - y yᵀ) x`, the component of `x` orthogonal to `y`.
#[inline]
pub fn project_orthogonal(y: &UnitVec3, x: &Vec3) -> Vec3 {
    let y = y.get();
    *x - y * y.dot(x)
}

#[inline]
pub fn skew(z: Vec3) -> SkewMat3 {
    SkewMat3 { axis: z }
}

/// `exp(ε Ω)` via the Rodrigues formula.
pub fn exp_so3(omega: &SkewMat3, epsilon: f64) -> Rot3 {
    let k = omega.scaled(epsilon);
    let theta2 = k.axis.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rot3(Mat3::IDENTITY + k.matrix().scale(a) + k.squared().scale(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn close(a: Vec3, b: Vec3, tol: f64) {
        assert!((a - b).max_abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn projection_examples() {
        close(
            project_orthogonal(&UnitVec3::X, &Vec3::new(3.0, 4.0, 5.0)),
            Vec3::new(0.0, 4.0, 5.0),
            0.0,
        );
        close(
            project_orthogonal(&UnitVec3::Z, &Vec3::new(0.0, 0.0, 7.0)),
            Vec3::ZERO,
            0.0,
        );
        // (I - y yᵀ) with y = (1,1,0)/√2 is [[.5,-.5,0],[-.5,.5,0],[0,0,1]]
        let y = UnitVec3::new(Vec3::new(1.0, 1.0, 0.0)).unwrap();
        close(
            project_orthogonal(&y, &Vec3::X),
            Vec3::new(0.5, -0.5, 0.0),
            1e-15,
        );
    }

    #[test]
    fn skew_examples() {
        close(skew(Vec3::Z).apply(&Vec3::X), Vec3::Y, 0.0);
        close(skew(Vec3::ZERO).apply(&Vec3::new(1.0, -2.0, 3.0)), Vec3::ZERO, 0.0);
        // cross product by hand: (2*6-3*5, 3*4-1*6, 1*5-2*4)
        let w = Vec3::new(4.0, 5.0, 6.0);
        close(skew(Vec3::new(1.0, 2.0, 3.0)).apply(&w), Vec3::new(-3.0, 6.0, -3.0), 0.0);
        let m = skew(Vec3::new(1.0, 2.0, 3.0)).matrix();
        close(m.mul_vec(&w), Vec3::new(-3.0, 6.0, -3.0), 0.0);
        assert_eq!(m.transpose(), m.scale(-1.0));
    }

    #[test]
    fn exp_examples() {
        let r = exp_so3(&skew(Vec3::Z), 0.0);
        assert_eq!(r, Rot3::IDENTITY);
        let r = exp_so3(&skew(Vec3::Z), std::f64::consts::FRAC_PI_2);
        close(r.apply(&Vec3::X), Vec3::Y, 1e-15);
        let axis = Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
        let r = exp_so3(&skew(axis), 0.3);
        assert!(r.orthogonality_error() < 1e-12);
        assert_abs_diff_eq!(r.matrix().determinant(), 1.0, epsilon = 1e-12);
        // the axis is fixed by its own rotation
        close(r.apply(&axis), axis, 1e-15);
    }

    #[test]
    fn exp_small_angle_branch_matches_closed_form() {
        let omega = skew(Vec3::new(0.3, -0.2, 0.9));
        let eps = 2e-7;
        let series = exp_so3(&omega, eps);
        let k = omega.scaled(eps);
        let theta = k.axis.norm();
        let closed = Mat3::IDENTITY
            + k.matrix().scale(theta.sin() / theta)
            + k.squared().scale((1.0 - theta.cos()) / (theta * theta));
        assert!(series.matrix().max_abs_diff(&closed) < 1e-14);
    }

    #[test]
    fn degenerate_direction_is_rejected() {
        assert!(matches!(
            UnitVec3::new(Vec3::new(1e-10, 0.0, 0.0)),
            Err(GeomError::Degenerate { .. })
        ));
        assert!(UnitVec3::new(Vec3::new(f64::NAN, 0.0, 1.0)).is_err());
    }

    #[test]
    fn unit_normalization_is_idempotent() {
        let u = UnitVec3::new(Vec3::new(0.3, -1.7, 2.2)).unwrap();
        assert!((u.get().norm() - 1.0).abs() < 1e-12);
        assert_eq!(UnitVec3::new(u.get()).unwrap(), u);
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn unit() -> impl Strategy<Value = UnitVec3> {
        vec3()
            .prop_filter("non-degenerate", |v| v.norm() > 1e-3)
            .prop_map(|v| UnitVec3::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn projection_is_orthogonal_and_idempotent(y in unit(), x in vec3()) {
            let p = project_orthogonal(&y, &x);
            prop_assert!(y.get().dot(&p).abs() < 1e-12);
            prop_assert!((project_orthogonal(&y, &p) - p).max_abs() < 1e-12);
            let along = y.get().dot(&x);
            prop_assert!((x.norm_squared() - p.norm_squared() - along * along).abs() < 1e-10);
        }

        #[test]
        fn skew_matches_cross(z in vec3(), w in vec3()) {
            prop_assert!((skew(z).matrix().mul_vec(&w) - z.cross(&w)).max_abs() < 1e-12);
            prop_assert!((skew(z).squared().mul_vec(&w) - z.cross(&z.cross(&w))).max_abs() < 1e-10);
        }

        #[test]
        fn exp_is_a_rotation(axis in vec3(), eps in -1.0..1.0f64) {
            prop_assume!(axis.norm() * eps.abs() <= 10.0);
            let r = exp_so3(&skew(axis), eps);
            prop_assert!(r.orthogonality_error() < 1e-10);
            prop_assert!((r.matrix().determinant() - 1.0).abs() < 1e-10);
        }
    }
}
