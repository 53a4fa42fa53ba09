//! Rotation representations and the small amount of 3-vector algebra the
//! simulator needs.
//!
//! Conventions: active rotations acting on column vectors. The columns of a
//! [`RotationMatrix`] are the axes of the rotated frame expressed in the
//! reference frame. Angles are radians everywhere in this crate.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for orthonormality, unit norm and handedness checks.
pub const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
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

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs_diff(self, other: Vec3) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A direction of unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::X);
    pub const Y: UnitVec3 = UnitVec3(Vec3::Y);
    pub const Z: UnitVec3 = UnitVec3(Vec3::Z);

    /// Accepts a vector that is already unit length within [`ORTHO_TOL`].
    pub fn new(v: Vec3) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::invalid("unit vector has non-finite components"));
        }
        if (v.norm() - 1.0).abs() > ORTHO_TOL {
            return Err(Error::invalid(format!(
                "vector norm {} is not 1 within {ORTHO_TOL:e}",
                v.norm()
            )));
        }
        Ok(UnitVec3(v))
    }

    pub fn normalize(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !v.is_finite() || n == 0.0 {
            return Err(Error::invalid(
                "cannot normalize a zero or non-finite vector",
            ));
        }
        Ok(UnitVec3(v * (1.0 / n)))
    }

    pub(crate) fn new_unchecked(v: Vec3) -> Self {
        UnitVec3(v)
    }

    pub fn get(self) -> Vec3 {
        self.0
    }
}

impl TryFrom<Vec3> for UnitVec3 {
    type Error = Error;
    fn try_from(v: Vec3) -> Result<Self> {
        UnitVec3::new(v)
    }
}

impl From<UnitVec3> for Vec3 {
    fn from(u: UnitVec3) -> Vec3 {
        u.0
    }
}

/// Proper rotation matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix {
    rows: [[f64; 3]; 3],
}

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix {
        rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Validates `RᵀR = I` and `det R = +1` within [`ORTHO_TOL`].
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("rotation matrix has non-finite entries"));
        }
        let m = RotationMatrix { rows };
        let err = m.transpose().mul(&m).max_abs_diff(&Self::IDENTITY);
        if err > ORTHO_TOL {
            return Err(Error::invalid(format!(
                "matrix is not orthonormal (max |RᵀR - I| = {err:e})"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::invalid(format!(
                "matrix determinant {det} is not +1"
            )));
        }
        Ok(m)
    }

    pub(crate) fn from_rows_unchecked(rows: [[f64; 3]; 3]) -> Self {
        RotationMatrix { rows }
    }

    /// Matrix whose columns are `x`, `y`, `z`.
    pub fn from_columns(x: Vec3, y: Vec3, z: Vec3) -> Result<Self> {
        Self::from_rows([[x.x, y.x, z.x], [x.y, y.y, z.y], [x.z, y.z, z.z]])
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.rows
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col]
    }

    pub fn column(&self, col: usize) -> Vec3 {
        Vec3::new(self.rows[0][col], self.rows[1][col], self.rows[2][col])
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::from_rows_unchecked([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::from_rows_unchecked([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::from_rows_unchecked([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn mul(&self, other: &RotationMatrix) -> RotationMatrix {
        let a = &self.rows;
        let b = &other.rows;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        RotationMatrix { rows: out }
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    /// `Rᵀ v` without materializing the transpose.
    pub fn transpose_mul_vec(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[1][0] * v.y + r[2][0] * v.z,
            r[0][1] * v.x + r[1][1] * v.y + r[2][1] * v.z,
            r[0][2] * v.x + r[1][2] * v.y + r[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> RotationMatrix {
        let r = &self.rows;
        RotationMatrix {
            rows: [
                [r[0][0], r[1][0], r[2][0]],
                [r[0][1], r[1][1], r[2][1]],
                [r[0][2], r[1][2], r[2][2]],
            ],
        }
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    pub fn trace(&self) -> f64 {
        self.rows[0][0] + self.rows[1][1] + self.rows[2][2]
    }

    /// Elementwise infinity norm of `self - other`.
    pub fn max_abs_diff(&self, other: &RotationMatrix) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Roll, pitch and yaw in radians, each normalized to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpyAngles {
    roll: f64,
    pitch: f64,
    yaw: f64,
}

impl RpyAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Result<Self> {
        if !(roll.is_finite() && pitch.is_finite() && yaw.is_finite()) {
            return Err(Error::invalid("RPY angles must be finite"));
        }
        Ok(RpyAngles {
            roll: normalize_angle(roll),
            pitch: normalize_angle(pitch),
            yaw: normalize_angle(yaw),
        })
    }

    pub fn from_degrees(roll: f64, pitch: f64, yaw: f64) -> Result<Self> {
        Self::new(roll.to_radians(), pitch.to_radians(), yaw.to_radians())
    }

    pub fn roll(&self) -> f64 {
        self.roll
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    /// `(roll, pitch, yaw)` in degrees.
    pub fn to_degrees(&self) -> (f64, f64, f64) {
        (
            self.roll.to_degrees(),
            self.pitch.to_degrees(),
            self.yaw.to_degrees(),
        )
    }

    pub fn with_roll(&self, roll: f64) -> Result<Self> {
        Self::new(roll, self.pitch, self.yaw)
    }
}

/// Camera orientation for the given angles: `Rot(y, yaw) · Rot(x, pitch) · Rot(z, roll)`.
///
/// With this order the camera's Z axis depends only on pitch and yaw; roll
/// spins the camera about its own axis.
pub fn rpy_to_rotation(rpy: &RpyAngles) -> RotationMatrix {
    RotationMatrix::rot_y(rpy.yaw)
        .mul(&RotationMatrix::rot_x(rpy.pitch))
        .mul(&RotationMatrix::rot_z(rpy.roll))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    axis: UnitVec3,
    angle: f64,
}

impl AxisAngle {
    /// Angle must lie in `[0, π]`. A zero angle always stores the axis `(0, 0, 1)`.
    pub fn new(axis: UnitVec3, angle: f64) -> Result<Self> {
        if !angle.is_finite() || !(0.0..=PI).contains(&angle) {
            return Err(Error::invalid(format!(
                "axis-angle angle {angle} outside [0, π]"
            )));
        }
        let axis = if angle == 0.0 { UnitVec3::Z } else { axis };
        Ok(AxisAngle { axis, angle })
    }

    pub fn axis(&self) -> UnitVec3 {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }
}

/// Rodrigues' formula.
pub fn axis_angle_to_rotation(aa: &AxisAngle) -> RotationMatrix {
    let k = aa.axis.get();
    let (s, c) = aa.angle.sin_cos();
    let t = 1.0 - c;
    RotationMatrix::from_rows_unchecked([
        [
            c + k.x * k.x * t,
            k.x * k.y * t - k.z * s,
            k.x * k.z * t + k.y * s,
        ],
        [
            k.y * k.x * t + k.z * s,
            c + k.y * k.y * t,
            k.y * k.z * t - k.x * s,
        ],
        [
            k.z * k.x * t - k.y * s,
            k.z * k.y * t + k.x * s,
            c + k.z * k.z * t,
        ],
    ])
}

pub fn rotation_to_axis_angle(r: &RotationMatrix) -> Result<AxisAngle> {
    // re-validate: callers may hand us a matrix built by composition drift
    let r = RotationMatrix::from_rows(r.rows())?;
    let m = r.rows();
    // 2 sin(angle) * axis
    let v = Vec3::new(m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]);
    let sin = 0.5 * v.norm();
    let cos = 0.5 * (r.trace() - 1.0);
    let angle = sin.atan2(cos);

    if sin == 0.0 && cos > 0.0 {
        return AxisAngle::new(UnitVec3::Z, 0.0);
    }

    let axis = if cos >= 0.0 {
        v * (1.0 / (2.0 * sin))
    } else {
        // Near a half turn the antisymmetric part vanishes; read the axis off
        // the symmetric part instead and take the sign from `v`.
        let one_minus = 1.0 - cos;
        let sq = [
            ((m[0][0] - cos) / one_minus).max(0.0),
            ((m[1][1] - cos) / one_minus).max(0.0),
            ((m[2][2] - cos) / one_minus).max(0.0),
        ];
        let i = (0..3).max_by(|&a, &b| sq[a].total_cmp(&sq[b])).unwrap_or(0);
        let ki = sq[i].sqrt();
        let mut k = [0.0; 3];
        k[i] = ki;
        for j in 0..3 {
            if j != i {
                k[j] = (m[i][j] + m[j][i]) / (2.0 * one_minus * ki);
            }
        }
        let mut axis = Vec3::from_array(k);
        if axis.dot(v) < 0.0 {
            axis = -axis;
        }
        axis
    };
    AxisAngle::new(UnitVec3::normalize(axis)?, angle)
}

/// Right-handed orthonormal axes of a coordinate frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTriad {
    pub x: UnitVec3,
    pub y: UnitVec3,
    pub z: UnitVec3,
}

impl FrameTriad {
    pub const IDENTITY: FrameTriad = FrameTriad {
        x: UnitVec3::X,
        y: UnitVec3::Y,
        z: UnitVec3::Z,
    };

    pub fn new(x: Vec3, y: Vec3, z: Vec3) -> Result<Self> {
        let (xu, yu, zu) = (UnitVec3::new(x)?, UnitVec3::new(y)?, UnitVec3::new(z)?);
        if x.dot(y).abs() > ORTHO_TOL || y.dot(z).abs() > ORTHO_TOL || x.dot(z).abs() > ORTHO_TOL {
            return Err(Error::invalid("frame axes are not mutually orthogonal"));
        }
        if x.cross(y).max_abs_diff(z) > ORTHO_TOL {
            return Err(Error::invalid("frame is not right-handed (X × Y ≠ Z)"));
        }
        Ok(FrameTriad {
            x: xu,
            y: yu,
            z: zu,
        })
    }

    /// Builds a frame from nine numbers laid out as X, Y, Z rows.
    pub fn from_row_major(v: [f64; 9]) -> Result<Self> {
        Self::new(
            Vec3::new(v[0], v[1], v[2]),
            Vec3::new(v[3], v[4], v[5]),
            Vec3::new(v[6], v[7], v[8]),
        )
    }

    pub fn to_rotation(&self) -> RotationMatrix {
        let (x, y, z) = (self.x.get(), self.y.get(), self.z.get());
        RotationMatrix::from_rows_unchecked([[x.x, y.x, z.x], [x.y, y.y, z.y], [x.z, y.z, z.z]])
    }

    pub fn max_abs_diff(&self, other: &FrameTriad) -> f64 {
        self.x
            .get()
            .max_abs_diff(other.x.get())
            .max(self.y.get().max_abs_diff(other.y.get()))
            .max(self.z.get().max_abs_diff(other.z.get()))
    }
}

/// The frame whose axes are the columns of `r`.
pub fn frame_from_rotation(r: &RotationMatrix) -> FrameTriad {
    FrameTriad {
        x: UnitVec3::new_unchecked(r.column(0)),
        y: UnitVec3::new_unchecked(r.column(1)),
        z: UnitVec3::new_unchecked(r.column(2)),
    }
}

/// `1 - cos` of the angle between `a` and `b`; lies in `[0, 2]`.
pub fn cosine_distance(a: Vec3, b: Vec3) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("cosine distance of non-finite vector"));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine distance of zero-norm vector"));
    }
    let cos = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}
