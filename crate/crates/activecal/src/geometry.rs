//! Planar geometry primitives shared by every other module: poses, angle
//! arithmetic, rotation matrices, and the 6-parameter extrinsic vector.
//!
//! All quantities are SI (meters, radians). Angles are kept normalized to
//! the half-open interval `(-pi, pi]`; degree conversion happens only at
//! the CLI/config boundary.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Normalize an angle to `(-pi, pi]`.
///
/// Errors on non-finite input; every composition below funnels through
/// this so poses always carry a normalized heading.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap_angle_unchecked(a))
}

/// `wrap_angle` for values already known to be finite.
pub fn wrap_angle_unchecked(a: f64) -> f64 {
    // In-range values pass through unchanged so repeated normalization
    // never perturbs an angle.
    if a > -PI && a <= PI {
        return a;
    }
    // rem_euclid maps into [0, 2pi); shift to (-pi, pi] with pi landing on +pi.
    let r = (-a + PI).rem_euclid(2.0 * PI);
    PI - r
}

/// Rotation matrix for a planar rotation by `theta`.
pub fn rot2(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Derivative of `rot2(theta)^T` with respect to `theta`.
pub fn drot2_transpose(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(-s, c, -c, -s)
}

/// Planar robot pose: position in the global frame plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, normalized to `(-pi, pi]`.
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: wrap_angle_unchecked(theta),
        }
    }

    pub fn identity() -> Self {
        Pose2 {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        rot2(self.theta)
    }

    /// Rigid-body composition: apply `offset` (translation in this pose's
    /// frame plus relative rotation) after `self`.
    pub fn compose(&self, offset: &SensorOffset) -> Pose2 {
        let t = self.translation() + self.rotation() * offset.translation;
        Pose2::new(t.x, t.y, self.theta + offset.rotation)
    }

    /// Inverse pose: `p.compose_pose(&p.inverse())` is the identity.
    pub fn inverse(&self) -> Pose2 {
        let rt = self.rotation().transpose();
        let t = -(rt * self.translation());
        Pose2::new(t.x, t.y, -self.theta)
    }

    /// Composition with another pose treated as an offset.
    pub fn compose_pose(&self, other: &Pose2) -> Pose2 {
        let t = self.translation() + self.rotation() * other.translation();
        Pose2::new(t.x, t.y, self.theta + other.theta)
    }

    /// Relative pose from `self` to `other`, expressed in `self`'s frame.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose_pose(other)
    }
}

/// Rigid offset of a sensor frame relative to the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorOffset {
    pub translation: Vector2<f64>,
    /// Radians, normalized to `(-pi, pi]`.
    pub rotation: f64,
}

impl SensorOffset {
    pub fn new(tx: f64, ty: f64, rotation: f64) -> Self {
        SensorOffset {
            translation: Vector2::new(tx, ty),
            rotation: wrap_angle_unchecked(rotation),
        }
    }

    pub fn as_pose(&self) -> Pose2 {
        Pose2::new(self.translation.x, self.translation.y, self.rotation)
    }
}

/// The six extrinsic parameters under estimation: microphone-array and
/// LiDAR offsets relative to the wheel-odometry frame.
///
/// Flattens to a 6-vector in the fixed order
/// `[mic_tx, mic_ty, mic_theta, lidar_tx, lidar_ty, lidar_theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrinsicParams {
    pub mic: SensorOffset,
    pub lidar: SensorOffset,
}

impl ExtrinsicParams {
    pub fn new(mic: SensorOffset, lidar: SensorOffset) -> Self {
        ExtrinsicParams { mic, lidar }
    }

    pub fn zeros() -> Self {
        ExtrinsicParams {
            mic: SensorOffset::new(0.0, 0.0, 0.0),
            lidar: SensorOffset::new(0.0, 0.0, 0.0),
        }
    }

    pub fn to_vector(&self) -> nalgebra::SVector<f64, 6> {
        nalgebra::SVector::<f64, 6>::from_column_slice(&[
            self.mic.translation.x,
            self.mic.translation.y,
            self.mic.rotation,
            self.lidar.translation.x,
            self.lidar.translation.y,
            self.lidar.rotation,
        ])
    }

    pub fn from_vector(v: &nalgebra::SVector<f64, 6>) -> Self {
        ExtrinsicParams {
            mic: SensorOffset {
                translation: Vector2::new(v[0], v[1]),
                rotation: v[2],
            },
            lidar: SensorOffset {
                translation: Vector2::new(v[3], v[4]),
                rotation: v[5],
            },
        }
    }

    /// Same as `from_vector` but re-normalizes the angle entries.
    pub fn from_vector_wrapped(v: &nalgebra::SVector<f64, 6>) -> Self {
        let mut p = Self::from_vector(v);
        p.mic.rotation = wrap_angle_unchecked(p.mic.rotation);
        p.lidar.rotation = wrap_angle_unchecked(p.lidar.rotation);
        p
    }

    /// Signed component-wise error against `truth`; angle entries wrapped.
    pub fn error_to(&self, truth: &ExtrinsicParams) -> nalgebra::SVector<f64, 6> {
        let mut e = self.to_vector() - truth.to_vector();
        e[2] = wrap_angle_unchecked(e[2]);
        e[5] = wrap_angle_unchecked(e[5]);
        e
    }
}

/// Static description of the simulated world and motion limits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Sound source position in the global frame.
    pub source_position: Vector2<f64>,
    pub bounds_min: Vector2<f64>,
    pub bounds_max: Vector2<f64>,
    /// Maximum steering angle between consecutive sampled poses.
    pub steering_max: f64,
    /// Ground-truth extrinsics (simulation only).
    pub ground_truth: ExtrinsicParams,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bounds_min.x < self.bounds_max.x && self.bounds_min.y < self.bounds_max.y) {
            return Err(Error::InvalidConfig(
                "bounds_min must be componentwise below bounds_max".into(),
            ));
        }
        if !(self.steering_max > 0.0 && self.steering_max < PI) {
            return Err(Error::InvalidConfig(
                "steering_max must lie in (0, pi)".into(),
            ));
        }
        Ok(())
    }
}

impl Default for WorldConfig {
    /// The simulation-study setup: a 2.5 m x 2.5 m motion box, source at
    /// (0, 3.6) m, mic at (0.3, 0.1, 60 deg) and LiDAR at (0.4, 0.2, 30 deg).
    fn default() -> Self {
        WorldConfig {
            source_position: Vector2::new(0.0, 3.6),
            bounds_min: Vector2::new(0.0, 0.0),
            bounds_max: Vector2::new(2.5, 2.5),
            steering_max: 45.0_f64.to_radians(),
            ground_truth: ExtrinsicParams::new(
                SensorOffset::new(0.3, 0.1, 60.0_f64.to_radians()),
                SensorOffset::new(0.4, 0.2, 30.0_f64.to_radians()),
            ),
        }
    }
}
