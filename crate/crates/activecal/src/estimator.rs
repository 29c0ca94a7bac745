//! Recursive estimation of the six extrinsic parameters with an EKF.
//!
//! The parameters are static, so prediction is the identity on both the
//! mean and the covariance. Corrections stack up to two measurement
//! blocks per step: the bearing (unit-vector residual against the current
//! mic estimate) and the LiDAR relative translation (residual against the
//! relative-pose model evaluated with the believed robot poses). The
//! LiDAR heading increment has a zero Jacobian row and is not used.
//!
//! Covariance corrections use the Joseph form plus explicit
//! symmetrization.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ExtrinsicParams, Pose2};
use crate::observability::{jac_doa, jac_lidar, Matrix6};
use crate::sensors::{doa_truth, lidar_relpose_truth, DoaMeasurement, LidarRelPose, NoiseLevels};

/// Gaussian belief over the extrinsic parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: ExtrinsicParams,
    pub cov: Matrix6,
}

impl GaussianBelief {
    pub fn new(mean: ExtrinsicParams, cov: Matrix6) -> Self {
        GaussianBelief { mean, cov }
    }

    /// Zero mean, identity covariance.
    pub fn default_prior() -> Self {
        GaussianBelief {
            mean: ExtrinsicParams::zeros(),
            cov: Matrix6::identity(),
        }
    }

    /// Trace of the LiDAR-parameter covariance block.
    pub fn lidar_cov_trace(&self) -> f64 {
        self.cov[(3, 3)] + self.cov[(4, 4)] + self.cov[(5, 5)]
    }

    /// 3-sigma half widths from the covariance diagonal.
    pub fn three_sigma(&self) -> nalgebra::SVector<f64, 6> {
        nalgebra::SVector::<f64, 6>::from_fn(|i, _| 3.0 * self.cov[(i, i)].max(0.0).sqrt())
    }
}

/// Static-parameter prediction: the belief is unchanged.
pub fn predict(belief: &GaussianBelief) -> GaussianBelief {
    belief.clone()
}

/// Bearing measurement with the robot pose it was taken from.
#[derive(Debug, Clone, Copy)]
pub struct DoaUpdate {
    pub robot: Pose2,
    pub source: Vector2<f64>,
    pub z: DoaMeasurement,
}

/// LiDAR relative pose with the believed poses bracketing it.
#[derive(Debug, Clone, Copy)]
pub struct LidarUpdate {
    pub prev: Pose2,
    pub curr: Pose2,
    pub z: LidarRelPose,
}

/// Result of one correction step.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub belief: GaussianBelief,
    /// Norm of the mean increment, used by the convergence monitor.
    pub step_norm: f64,
}

/// EKF correction with whatever measurements are present this step.
pub fn update(
    belief: &GaussianBelief,
    doa: Option<&DoaUpdate>,
    lidar: Option<&LidarUpdate>,
    noise: &NoiseLevels,
) -> Result<UpdateOutcome> {
    let mut rows = 0;
    if doa.is_some() {
        if noise.doa_std <= 0.0 {
            return Err(Error::Estimator("DOA noise std must be positive".into()));
        }
        rows += 2;
    }
    if lidar.is_some() {
        if noise.lidar_t_std <= 0.0 {
            return Err(Error::Estimator("LiDAR noise std must be positive".into()));
        }
        rows += 2;
    }
    if rows == 0 {
        return Ok(UpdateOutcome {
            belief: belief.clone(),
            step_norm: 0.0,
        });
    }

    let psi = &belief.mean;
    let mut g = DMatrix::<f64>::zeros(rows, 6);
    let mut y = DVector::<f64>::zeros(rows);
    let mut n = DMatrix::<f64>::zeros(rows, rows);
    let mut r = 0;

    if let Some(d) = doa {
        let predicted = doa_truth(&d.robot, &psi.mic, &d.source)
            .map_err(|e| Error::Estimator(format!("bearing prediction failed: {}", e)))?;
        let j = jac_doa(&d.robot, &psi.mic, &d.source)
            .map_err(|e| Error::Estimator(format!("bearing Jacobian failed: {}", e)))?;
        let resid = d.z.direction - predicted.direction;
        for rr in 0..2 {
            y[r + rr] = resid[rr];
            for cc in 0..3 {
                g[(r + rr, cc)] = j[(rr, cc)];
            }
            n[(r + rr, r + rr)] = noise.doa_std * noise.doa_std;
        }
        r += 2;
    }

    if let Some(l) = lidar {
        let predicted = lidar_relpose_truth(&l.prev, &l.curr, &psi.lidar);
        let j = jac_lidar(&l.prev, &l.curr, &psi.lidar);
        let resid = l.z.delta_t - predicted.delta_t;
        for rr in 0..2 {
            y[r + rr] = resid[rr];
            for cc in 0..3 {
                g[(r + rr, 3 + cc)] = j[(rr, cc)];
            }
            n[(r + rr, r + rr)] = noise.lidar_t_std * noise.lidar_t_std;
        }
    }

    let p = DMatrix::<f64>::from_fn(6, 6, |i, j| belief.cov[(i, j)]);
    let s = &g * &p * g.transpose() + &n;
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Estimator("innovation covariance not positive definite".into()))?;
    let k = &p * g.transpose() * chol.inverse();

    let dx = &k * &y;
    let mut mean_v = psi.to_vector();
    for i in 0..6 {
        mean_v[i] += dx[i];
    }
    let mean = ExtrinsicParams::from_vector_wrapped(&mean_v);

    // Joseph form: (I - KG) P (I - KG)^T + K N K^T.
    let ikg = DMatrix::<f64>::identity(6, 6) - &k * &g;
    let p_new = &ikg * &p * ikg.transpose() + &k * &n * k.transpose();
    let mut cov = Matrix6::from_fn(|i, j| 0.5 * (p_new[(i, j)] + p_new[(j, i)]));
    // Guard against negative round-off on the diagonal.
    for i in 0..6 {
        cov[(i, i)] = cov[(i, i)].max(0.0);
    }

    Ok(UpdateOutcome {
        belief: GaussianBelief { mean, cov },
        step_norm: dx.norm(),
    })
}

/// Which pose stream feeds the bearing updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoseSourceMode {
    WheelOdometry,
    LidarOdometry,
}

impl std::fmt::Display for PoseSourceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PoseSourceMode::WheelOdometry => write!(f, "wheel"),
            PoseSourceMode::LidarOdometry => write!(f, "lidar"),
        }
    }
}

/// Latching pose-source selector: switches to LiDAR-derived poses once
/// the LiDAR-parameter covariance trace falls below the threshold, and
/// never switches back.
#[derive(Debug, Clone)]
pub struct PoseSource {
    pub mode: PoseSourceMode,
    pub lidar_var_threshold: f64,
}

impl PoseSource {
    pub fn new(lidar_var_threshold: f64) -> Self {
        PoseSource {
            mode: PoseSourceMode::WheelOdometry,
            lidar_var_threshold,
        }
    }

    pub fn select(&mut self, belief: &GaussianBelief) -> PoseSourceMode {
        if self.mode == PoseSourceMode::WheelOdometry
            && belief.lidar_cov_trace() < self.lidar_var_threshold
        {
            self.mode = PoseSourceMode::LidarOdometry;
        }
        self.mode
    }
}

/// Declares convergence once the mean increment stays below a threshold
/// for a required number of consecutive updates.
#[derive(Debug, Clone)]
pub struct ConvergenceMonitor {
    pub step_threshold: f64,
    pub required_consecutive: usize,
    streak: usize,
    converged: bool,
}

impl ConvergenceMonitor {
    pub fn new(step_threshold: f64, required_consecutive: usize) -> Self {
        ConvergenceMonitor {
            step_threshold,
            required_consecutive,
            streak: 0,
            converged: false,
        }
    }

    pub fn observe(&mut self, step_norm: f64) -> bool {
        if step_norm < self.step_threshold {
            self.streak += 1;
            if self.streak >= self.required_consecutive {
                self.converged = true;
            }
        } else {
            self.streak = 0;
        }
        self.converged
    }

    pub fn converged(&self) -> bool {
        self.converged
    }
}
