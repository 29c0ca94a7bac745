//! Ground-truth measurement models for wheel odometry, microphone-array
//! bearing (DOA), and LiDAR relative pose, plus the additive-noise
//! generators used by the simulation.
//!
//! Conventions: odometry increments are expressed in the global frame;
//! the LiDAR relative pose is the motion of the LiDAR between two steps
//! expressed in the previous LiDAR frame; the DOA is a unit vector in the
//! microphone-array frame.

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rot2, wrap_angle_unchecked, Pose2, SensorOffset};

/// Minimum source-to-array distance before the bearing is singular.
pub const MIN_SOURCE_DISTANCE: f64 = 1e-6;

/// Pre-integrated wheel-odometry increment between two steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometryIncrement {
    /// Translation increment in the global frame.
    pub delta_t: Vector2<f64>,
    /// Heading increment, wrapped.
    pub delta_theta: f64,
}

/// Direction of arrival of the sound source in the array frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoaMeasurement {
    /// Unit vector pointing at the source.
    pub direction: Vector2<f64>,
    /// Equivalent angle, `atan2(direction.y, direction.x)`.
    pub alpha: f64,
}

impl DoaMeasurement {
    pub fn from_alpha(alpha: f64) -> Self {
        let alpha = wrap_angle_unchecked(alpha);
        DoaMeasurement {
            direction: Vector2::new(alpha.cos(), alpha.sin()),
            alpha,
        }
    }
}

/// Relative pose of the LiDAR between two consecutive frames, expressed
/// in the earlier LiDAR frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarRelPose {
    pub delta_t: Vector2<f64>,
    pub delta_theta: f64,
}

/// Per-sensor noise standard deviations.
///
/// Odometry noise scales with the distance traveled in the step; the
/// other three are absolute per-measurement standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    /// Odometry std as a fraction of step distance.
    pub odom_frac: f64,
    /// DOA angle std, radians.
    pub doa_std: f64,
    /// LiDAR relative-translation std (isotropic), meters.
    pub lidar_t_std: f64,
    /// LiDAR relative-rotation std, radians.
    pub lidar_theta_std: f64,
}

impl NoiseLevels {
    /// Preset level 1..=5: odometry 2/4/6/8/10 % of distance, DOA
    /// 2/4/6/8/10 deg, LiDAR translation 0.005/0.01/0.03/0.06/0.1 m,
    /// LiDAR rotation 0.5/2/3.5/5/6.5 deg.
    pub fn level(lv: usize) -> Result<Self> {
        let idx = match lv {
            1..=5 => lv - 1,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "noise level {} outside 1..=5",
                    lv
                )))
            }
        };
        let odom: [f64; 5] = [0.02, 0.04, 0.06, 0.08, 0.10];
        let doa_deg: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];
        let lidar_t: [f64; 5] = [0.005, 0.01, 0.03, 0.06, 0.1];
        let lidar_deg: [f64; 5] = [0.5, 2.0, 3.5, 5.0, 6.5];
        Ok(NoiseLevels {
            odom_frac: odom[idx],
            doa_std: doa_deg[idx].to_radians(),
            lidar_t_std: lidar_t[idx],
            lidar_theta_std: lidar_deg[idx].to_radians(),
        })
    }

    pub fn zero() -> Self {
        NoiseLevels {
            odom_frac: 0.0,
            doa_std: 0.0,
            lidar_t_std: 0.0,
            lidar_theta_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.odom_frac < 0.0
            || self.doa_std < 0.0
            || self.lidar_t_std < 0.0
            || self.lidar_theta_std < 0.0
        {
            return Err(Error::InvalidConfig("noise stds must be >= 0".into()));
        }
        Ok(())
    }
}

/// Noise-free per-step measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorTruth {
    pub doa: DoaMeasurement,
    /// Absent on the first step of a run.
    pub lidar: Option<LidarRelPose>,
    pub odom: Option<OdometryIncrement>,
}

/// Noise-corrupted per-step measurements plus the noise levels that
/// produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementBundle {
    pub doa: DoaMeasurement,
    pub lidar: Option<LidarRelPose>,
    pub odom: Option<OdometryIncrement>,
    pub noise: NoiseLevels,
}

/// Differential-drive kinematics over `dt`, integrated with forward-Euler
/// substeps of at most 1 ms.
///
/// `w_l`/`w_r` are wheel angular velocities, `r` the wheel radius and
/// `d_w` the wheelbase.
pub fn wheel_kinematics(
    w_l: f64,
    w_r: f64,
    r: f64,
    d_w: f64,
    dt: f64,
    pose: Pose2,
) -> Result<Pose2> {
    if !(dt > 0.0 && r > 0.0 && d_w > 0.0) {
        return Err(Error::Sensor(
            "wheel kinematics needs dt, r, d_w > 0".into(),
        ));
    }
    let v = 0.5 * r * (w_l + w_r);
    let omega = r * (w_r - w_l) / d_w;
    let n = (dt / 1e-3).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let (mut x, mut y, mut theta) = (pose.x, pose.y, pose.theta);
    for _ in 0..n {
        x += v * theta.cos() * h;
        y += v * theta.sin() * h;
        theta += omega * h;
    }
    Ok(Pose2::new(x, y, theta))
}

/// Bearing of the source `s` as seen from the microphone array mounted at
/// `psi_m` on a robot at `robot`, expressed in the array frame.
pub fn doa_truth(robot: &Pose2, psi_m: &SensorOffset, s: &Vector2<f64>) -> Result<DoaMeasurement> {
    let mic_pos = robot.translation() + robot.rotation() * psi_m.translation;
    let diff = s - mic_pos;
    let d = diff.norm();
    if d <= MIN_SOURCE_DISTANCE {
        return Err(Error::Sensor(
            "source coincides with the microphone array".into(),
        ));
    }
    let frame = robot.rotation() * rot2(psi_m.rotation);
    let direction = frame.transpose() * (diff / d);
    Ok(DoaMeasurement {
        direction,
        alpha: direction.y.atan2(direction.x),
    })
}

/// LiDAR pose change between two robot poses: the rotation difference and
/// translation increment of the robot, pushed through the mounting offset
/// and expressed in the previous LiDAR frame.
pub fn lidar_relpose_truth(prev: &Pose2, curr: &Pose2, psi_l: &SensorOffset) -> LidarRelPose {
    let delta_r = curr.rotation() - prev.rotation();
    let delta_t = curr.translation() - prev.translation();
    let frame = prev.rotation() * rot2(psi_l.rotation);
    LidarRelPose {
        delta_t: frame.transpose() * (delta_r * psi_l.translation + delta_t),
        delta_theta: wrap_angle_unchecked(curr.theta - prev.theta),
    }
}

/// Global-frame odometry increment between two poses.
pub fn odometry_increment_truth(prev: &Pose2, curr: &Pose2) -> OdometryIncrement {
    OdometryIncrement {
        delta_t: curr.translation() - prev.translation(),
        delta_theta: wrap_angle_unchecked(curr.theta - prev.theta),
    }
}

/// Add zero-mean Gaussian noise to a truth bundle.
///
/// DOA noise perturbs the angle and re-embeds the unit vector. Odometry
/// translation noise has std `odom_frac * step_distance` per component;
/// the heading increment gets `odom_frac * step_distance / wheelbase`,
/// mirroring how encoder distance errors map into heading through the
/// wheel separation.
///
/// Exactly seven normal draws are consumed per call regardless of which
/// measurements are present, so parallel runs with shared seeds stay
/// aligned across configurations.
pub fn corrupt(
    truth: &SensorTruth,
    levels: &NoiseLevels,
    wheelbase: f64,
    rng: &mut impl Rng,
) -> MeasurementBundle {
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    let e_doa = draw();
    let e_lidar = [draw(), draw(), draw()];
    let e_odom = [draw(), draw(), draw()];

    let doa = DoaMeasurement::from_alpha(truth.doa.alpha + levels.doa_std * e_doa);
    let lidar = truth.lidar.map(|l| LidarRelPose {
        delta_t: l.delta_t + levels.lidar_t_std * Vector2::new(e_lidar[0], e_lidar[1]),
        delta_theta: wrap_angle_unchecked(l.delta_theta + levels.lidar_theta_std * e_lidar[2]),
    });
    let odom = truth.odom.map(|o| {
        let dist = o.delta_t.norm();
        let t_std = levels.odom_frac * dist;
        let th_std = levels.odom_frac * dist / wheelbase;
        OdometryIncrement {
            delta_t: o.delta_t + t_std * Vector2::new(e_odom[0], e_odom[1]),
            delta_theta: wrap_angle_unchecked(o.delta_theta + th_std * e_odom[2]),
        }
    });
    MeasurementBundle {
        doa,
        lidar,
        odom,
        noise: *levels,
    }
}
