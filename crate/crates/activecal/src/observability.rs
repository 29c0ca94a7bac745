//! Observability machinery: analytic Jacobians of both measurement models
//! with respect to the extrinsics, Fisher-information accumulation over
//! pose sequences, and the minimum-eigenvalue score.
//!
//! Parameter ordering everywhere is the flattened extrinsic vector
//! `[mic_tx, mic_ty, mic_theta, lidar_tx, lidar_ty, lidar_theta]`. The
//! bearing rows only touch the first block, the LiDAR-translation rows
//! only the second, so the information matrix is block diagonal.

use nalgebra::{Matrix2, SMatrix, Vector2};

use crate::error::{Error, Result};
use crate::geometry::{drot2_transpose, rot2, ExtrinsicParams, Pose2, SensorOffset};
use crate::sensors::{NoiseLevels, MIN_SOURCE_DISTANCE};

pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type JacDoa = SMatrix<f64, 2, 3>;
pub type JacLidar = SMatrix<f64, 3, 3>;

/// 6x6 Fisher information matrix over the extrinsic parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fim(pub Matrix6);

impl Fim {
    pub fn zeros() -> Self {
        Fim(Matrix6::zeros())
    }

    pub fn matrix(&self) -> &Matrix6 {
        &self.0
    }

    /// The 2x2 sub-block for the LiDAR translation parameters.
    pub fn lidar_translation_block(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(3, 3).into_owned()
    }
}

/// Jacobian of the bearing measurement with respect to the microphone
/// extrinsics, columns `[mic_tx, mic_ty, mic_theta]`.
pub fn jac_doa(robot: &Pose2, psi_m: &SensorOffset, s: &Vector2<f64>) -> Result<JacDoa> {
    let r_k = robot.rotation();
    let mic_pos = robot.translation() + r_k * psi_m.translation;
    let diff = s - mic_pos;
    let d = diff.norm();
    if d <= MIN_SOURCE_DISTANCE {
        return Err(Error::Observability("singular bearing: source at array".into()));
    }
    let frame_t = (r_k * rot2(psi_m.rotation)).transpose();
    let a = diff * diff.transpose();
    let d_t = frame_t * ((-r_k * d * d + a * r_k) / (d * d * d));
    let d_theta = drot2_transpose(psi_m.rotation) * r_k.transpose() * (diff / d);

    let mut j = JacDoa::zeros();
    j.fixed_view_mut::<2, 2>(0, 0).copy_from(&d_t);
    j.fixed_view_mut::<2, 1>(0, 2).copy_from(&d_theta);
    Ok(j)
}

/// Jacobian of the LiDAR relative pose `[delta_t; delta_theta]` with
/// respect to the LiDAR extrinsics, columns `[lidar_tx, lidar_ty,
/// lidar_theta]`. The rotation row is identically zero: the heading
/// increment carries no information about the mounting.
pub fn jac_lidar(prev: &Pose2, curr: &Pose2, psi_l: &SensorOffset) -> JacLidar {
    let r_prev = prev.rotation();
    let delta_r = curr.rotation() - r_prev;
    let delta_t = curr.translation() - prev.translation();
    let frame_t = (r_prev * rot2(psi_l.rotation)).transpose();

    let d_t = frame_t * delta_r;
    let d_theta =
        drot2_transpose(psi_l.rotation) * r_prev.transpose() * (delta_r * psi_l.translation + delta_t);

    let mut j = JacLidar::zeros();
    j.fixed_view_mut::<2, 2>(0, 0).copy_from(&d_t);
    j.fixed_view_mut::<2, 1>(0, 2).copy_from(&d_theta);
    j
}

/// Information accumulated over one trajectory segment: bearing terms for
/// every pose and LiDAR terms for every consecutive pose pair, each
/// weighted by its inverse noise covariance.
pub fn fim_segment(
    poses: &[Pose2],
    psi: &ExtrinsicParams,
    source: &Vector2<f64>,
    noise: &NoiseLevels,
) -> Result<Fim> {
    if poses.is_empty() {
        return Err(Error::Observability("no poses in segment".into()));
    }
    if noise.doa_std <= 0.0 || noise.lidar_t_std <= 0.0 {
        return Err(Error::Observability(
            "zero noise std makes the information weight singular".into(),
        ));
    }
    let w_doa = 1.0 / (noise.doa_std * noise.doa_std);
    let w_lidar = 1.0 / (noise.lidar_t_std * noise.lidar_t_std);

    let mut m = Matrix6::zeros();
    for pose in poses {
        let j = jac_doa(pose, &psi.mic, source)?;
        let info = j.transpose() * j * w_doa;
        let mut block = m.fixed_view_mut::<3, 3>(0, 0);
        block += info;
    }
    for pair in poses.windows(2) {
        let j = jac_lidar(&pair[0], &pair[1], &psi.lidar);
        // Rotation row is zero; only the translation rows carry weight.
        let jt = j.fixed_view::<2, 3>(0, 0);
        let info = jt.transpose() * jt * w_lidar;
        let mut block = m.fixed_view_mut::<3, 3>(3, 3);
        block += info;
    }
    Ok(Fim(m))
}

/// Entrywise sum of per-segment information matrices.
pub fn fim_total(segments: &[Fim]) -> Result<Fim> {
    if segments.is_empty() {
        return Err(Error::Observability("no segment information".into()));
    }
    let mut acc = Matrix6::zeros();
    for f in segments {
        acc += f.0;
    }
    Ok(Fim(acc))
}

/// Smallest eigenvalue of a symmetric 6x6 matrix via cyclic Jacobi
/// rotations. The input is symmetrized as `(M + M^T)/2`; convergence is
/// an off-diagonal norm below `1e-12` relative to the Frobenius norm.
pub fn min_eigenvalue(m: &Matrix6) -> Result<f64> {
    Ok(*eigenvalues_sym6(m)?
        .iter()
        .min_by(|a, b| a.partial_cmp(b).unwrap())
        .unwrap())
}

/// All six eigenvalues (unsorted) of a symmetric 6x6 matrix.
pub fn eigenvalues_sym6(m: &Matrix6) -> Result<[f64; 6]> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Observability("non-finite matrix entry".into()));
    }
    let mut a = (m + m.transpose()) * 0.5;
    let scale = a.norm().max(1.0);
    let tol = 1e-12 * scale;

    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..6 {
            for q in (p + 1)..6 {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if (2.0 * off).sqrt() < tol {
            break;
        }
        for p in 0..6 {
            for q in (p + 1)..6 {
                let apq = a[(p, q)];
                if apq.abs() < f64::EPSILON * scale {
                    continue;
                }
                // Classic two-sided rotation annihilating a[(p, q)].
                let theta = 0.5 * (a[(q, q)] - a[(p, p)]) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..6 {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..6 {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    Ok([
        a[(0, 0)],
        a[(1, 1)],
        a[(2, 2)],
        a[(3, 3)],
        a[(4, 4)],
        a[(5, 5)],
    ])
}
