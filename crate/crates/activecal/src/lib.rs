//! Active extrinsic calibration of a microphone array and a 2-D LiDAR
//! against a wheel-odometry frame.
//!
//! The crate simulates a planar robot that plans observability-maximizing
//! B-spline trajectories (scored by the minimum eigenvalue of the Fisher
//! information matrix of the sensor models), drives them, and estimates
//! the six extrinsic parameters online with an EKF. A Monte Carlo harness
//! reproduces noise-level, trajectory-strategy, and initialization sweeps;
//! the `activecal` binary exposes it all on the command line.

pub mod acoustic;
pub mod config;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod observability;
pub mod planner;
pub mod scan;
pub mod sensors;
pub mod spline;

pub use error::{Error, Result};
pub use geometry::{ExtrinsicParams, Pose2, SensorOffset, WorldConfig};
