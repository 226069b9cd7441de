//! Two-view epipolar machinery and a synthetic oracle.
//!
//! The pipeline this module supports, end to end:
//!
//! ```text
//! correspondences ──► normalized 8-point ──► F (rank 2, ||F||_F = 1)
//!        │                                     │
//!        ├──► RANSAC (Sampson inlier test) ────┤
//!        │                                     ▼
//!        │                        E = Kᵀ F K ──► 4 (R, t) candidates
//!        │                                     │ cheirality vote
//!        ▼                                     ▼
//! synthetic two-view scenes with known (R, t) give exact expected values
//! ```
//!
//! Identical-coordinate correspondences (the poisoning attack's spurious
//! matches) satisfy x·(F x) = 0 for every antisymmetric F, so a contaminated
//! match set pulls the least-squares solution toward a pure-translation
//! geometry unrelated to the true pose. [`diagnose::diagnose_pair`] measures
//! exactly that.

mod diagnose;
mod fundamental;
mod pose;
mod synth;

pub use diagnose::{
    diagnose_pair, fundamental_from_pose, pose_error_no_ransac, DiagnoseParams, DiagnosticReport,
    EstimateSummary, TwoViewGroundTruth,
};
pub use fundamental::{eight_point, normalize_points, ransac_fundamental, sampson_distance};
pub use pose::recover_pose;
pub use synth::{inject_spurious_matches, render_views, synth_two_view, SyntheticTwoView};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("need at least {need} correspondences, got {got}")]
    InsufficientData { got: usize, need: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("no consensus model with at least 8 inliers")]
    EstimationFailure,
    #[error("cheirality vote tied; pose is ambiguous")]
    AmbiguousPose,
    #[error("invalid camera parameters: {0}")]
    BadCamera(String),
}

/// Pinhole camera: `x = K (R X + t)` up to projective scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub intrinsics: Matrix3<f64>,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraModel {
    /// Validates orthonormality (inside 1e-9), positive determinant, and
    /// positive focal lengths.
    pub fn new(
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let rrt = rotation * rotation.transpose();
        if (rrt - Matrix3::identity()).norm() > 1e-9 {
            return Err(GeometryError::BadCamera("rotation not orthonormal".into()));
        }
        if rotation.determinant() < 0.0 {
            return Err(GeometryError::BadCamera("rotation is a reflection".into()));
        }
        if intrinsics[(0, 0)] <= 0.0 || intrinsics[(1, 1)] <= 0.0 {
            return Err(GeometryError::BadCamera("non-positive focal length".into()));
        }
        Ok(Self {
            intrinsics,
            rotation,
            translation,
        })
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -self.rotation.transpose() * self.translation
    }

    /// Pixel projection; `None` when the point is not in front of the camera.
    pub fn project(&self, point: &Vector3<f64>) -> Option<nalgebra::Vector2<f64>> {
        let cam = self.rotation * point + self.translation;
        if cam.z <= 0.0 {
            return None;
        }
        let px = self.intrinsics * cam;
        Some(nalgebra::Vector2::new(px.x / px.z, px.y / px.z))
    }
}

/// Fundamental-matrix estimate with its support set and Sampson residual
/// statistics in pixels.
#[derive(Debug, Clone)]
pub struct FundamentalEstimate {
    /// Rank-2, Frobenius-normalized.
    pub f: Matrix3<f64>,
    pub inliers: Vec<usize>,
    pub median_sampson_px: f64,
    pub max_sampson_px: f64,
}

/// Angle of the relative rotation between two rotation matrices, degrees.
pub fn rotation_error_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let r = a * b.transpose();
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

/// Unsigned angle between two direction vectors, degrees.
pub fn direction_error_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na < 1e-15 || nb < 1e-15 {
        return 90.0;
    }
    let cos = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camera_validation() {
        let k = Matrix3::new(600.0, 0.0, 320.0, 0.0, 600.0, 320.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(k, Matrix3::identity(), Vector3::zeros()).is_ok());
        let skewed = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(k, skewed, Vector3::zeros()).is_err());
        let bad_k = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(bad_k, Matrix3::identity(), Vector3::zeros()).is_err());
    }

    #[test]
    fn rotation_error_of_known_angle() {
        let r = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), 0.25);
        let err = rotation_error_deg(&r.into_inner(), &Matrix3::identity());
        assert!((err - 0.25f64.to_degrees()).abs() < 1e-9);
    }

    #[test]
    fn direction_error_basics() {
        let x = Vector3::new(1.0, 0.0, 0.0);
        let y = Vector3::new(0.0, 2.0, 0.0);
        assert!((direction_error_deg(&x, &y) - 90.0).abs() < 1e-12);
        assert!(direction_error_deg(&x, &x) < 1e-9);
    }
}
