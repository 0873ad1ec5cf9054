//! Rigid TCP poses.

use std::fmt;

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Orthonormality tolerance for rotations entering the library from outside.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Pose of the tool center point: rotation with columns `(r_x, r_y, r_z)` and
/// a position in meters. `r_z` is the approach vector.
#[derive(Clone, Copy, PartialEq)]
pub struct TcpPose {
    pub rotation: Rotation3<f64>,
    pub position: Vector3<f64>,
}

impl TcpPose {
    /// Checked constructor; rejects matrices that are not proper rotations.
    pub fn new(rotation: Matrix3<f64>, position: Vector3<f64>) -> Result<Self> {
        let dev = orthonormality_error(&rotation);
        if dev > ORTHONORMAL_TOL || !dev.is_finite() {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(Self {
            rotation: Rotation3::from_matrix_unchecked(rotation),
            position,
        })
    }

    pub fn from_parts(rotation: Rotation3<f64>, position: Vector3<f64>) -> Self {
        Self { rotation, position }
    }

    pub fn identity() -> Self {
        Self::from_parts(Rotation3::identity(), Vector3::zeros())
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::from_parts(Rotation3::identity(), Vector3::new(x, y, z))
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::from_parts(iso.rotation.to_rotation_matrix(), iso.translation.vector)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::from(self.position),
            UnitQuaternion::from_rotation_matrix(&self.rotation),
        )
    }

    /// Pose whose approach vector is `approach` (normalized internally), with an
    /// arbitrary but deterministic roll.
    pub fn from_approach(approach: Vector3<f64>, position: Vector3<f64>) -> Self {
        let z = approach.normalize();
        let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let y = z.cross(&helper).normalize();
        let x = y.cross(&z);
        let m = Matrix3::from_columns(&[x, y, z]);
        Self::from_parts(Rotation3::from_matrix_unchecked(m), position)
    }

    /// The approach vector `r_z` (third rotation column).
    #[inline]
    pub fn approach(&self) -> Vector3<f64> {
        self.rotation.matrix().column(2).into_owned()
    }

    pub fn compose(&self, rhs: &TcpPose) -> TcpPose {
        TcpPose::from_parts(
            self.rotation * rhs.rotation,
            self.rotation * rhs.position + self.position,
        )
    }

    pub fn inverse(&self) -> TcpPose {
        let r = self.rotation.inverse();
        TcpPose::from_parts(r, -(r * self.position))
    }

    /// `Rz(alpha) * self`: the pose as seen after yawing the world (or the
    /// robot base) about the vertical axis.
    pub fn yawed(&self, alpha: f64) -> TcpPose {
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), alpha);
        TcpPose::from_parts(rz * self.rotation, rz * self.position)
    }

    /// `self * Rz(beta)`: roll about the pose's own approach vector.
    pub fn rolled(&self, beta: f64) -> TcpPose {
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), beta);
        TcpPose::from_parts(self.rotation * rz, self.position)
    }

    /// Rotation row-major followed by position.
    pub fn to_row_major12(&self) -> [f64; 12] {
        let m = self.rotation.matrix();
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
            self.position.x,
            self.position.y,
            self.position.z,
        ]
    }

    pub fn from_row_major12(v: &[f64]) -> Result<Self> {
        if v.len() != 12 {
            return Err(Error::DimensionMismatch {
                expected: 12,
                got: v.len(),
            });
        }
        let m = Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
        Self::new(m, Vector3::new(v[9], v[10], v[11]))
    }
}

impl fmt::Debug for TcpPose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TcpPose")
            .field("position", &self.position.as_slice())
            .field("approach", &self.approach().as_slice())
            .finish()
    }
}

/// Max-abs deviation of `R^T R` from identity, plus deviation of the
/// determinant from one.
pub fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    let gram = m.transpose() * m - Matrix3::identity();
    let det = (m.determinant() - 1.0).abs();
    gram.amax().max(det)
}

/// Roll-pitch-yaw (fixed-axis XYZ, as in URDF) to a rotation.
pub fn rotation_from_rpy(roll: f64, pitch: f64, yaw: f64) -> Rotation3<f64> {
    Rotation3::from_euler_angles(roll, pitch, yaw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(TcpPose::new(m, Vector3::zeros()).is_err());
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(TcpPose::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn yaw_moves_position_and_approach() {
        let p = TcpPose::from_approach(Vector3::x(), Vector3::new(1.0, 0.0, 0.5)).yawed(FRAC_PI_2);
        assert!((p.position - Vector3::new(0.0, 1.0, 0.5)).norm() < 1e-12);
        assert!((p.approach() - Vector3::y()).norm() < 1e-12);
    }

    #[test]
    fn roll_keeps_approach() {
        let p = TcpPose::from_approach(Vector3::new(1.0, 2.0, 3.0), Vector3::zeros());
        let q = p.rolled(0.7);
        assert!((p.approach() - q.approach()).norm() < 1e-12);
    }

    #[test]
    fn row_major_roundtrip() {
        let p = TcpPose::from_approach(Vector3::new(0.3, -0.2, 0.9), Vector3::new(0.1, 0.2, 0.3));
        let q = TcpPose::from_row_major12(&p.to_row_major12()).unwrap();
        assert_eq!(p, q);
    }
}
