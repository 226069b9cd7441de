//! Per-pair attack-mechanism diagnostics: feature matching, epipolar
//! estimation with and without RANSAC, and pose error against ground truth.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::buffer::{ImageBuffer, Region};
use crate::features::{detect_and_describe, match_descriptors, FeatureConfig, Keypoint};
use crate::SCHEMA_VERSION;

use super::{
    direction_error_deg, eight_point, ransac_fundamental, rotation_error_deg, sampson_distance,
    FundamentalEstimate, recover_pose,
};

/// Known relative pose (A to B) and shared intrinsics for an image pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoViewGroundTruth {
    pub intrinsics: Matrix3<f64>,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Settings for [`diagnose_pair`].
#[derive(Debug, Clone)]
pub struct DiagnoseParams {
    pub features: FeatureConfig,
    pub ransac_threshold_px: f64,
    pub ransac_max_iters: usize,
    pub ransac_seed: u64,
}

impl Default for DiagnoseParams {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            ransac_threshold_px: 1.0,
            ransac_max_iters: 2000,
            ransac_seed: 0,
        }
    }
}

/// Summary of one estimator run on a match set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    /// Inliers over total matches (1.0 for the plain least-squares fit).
    pub inlier_fraction: f64,
    pub median_sampson_px: f64,
    pub max_sampson_px: f64,
    /// Rotation error vs ground truth, degrees; absent without ground truth.
    pub rotation_error_deg: Option<f64>,
    /// Translation direction error vs ground truth, degrees.
    pub translation_error_deg: Option<f64>,
}

/// Attack-mechanism measurements for one image pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub schema_version: u32,
    pub keypoints_a: usize,
    pub keypoints_b: usize,
    pub total_matches: usize,
    pub patch_region: Option<Region>,
    /// |Omega| / (H * W); zero without a region.
    pub patch_area_fraction: f64,
    /// Fraction of matches with both endpoints inside Omega.
    pub patch_match_fraction: f64,
    /// Median Sampson residual of patch matches under the reference F
    /// (ground-truth F when available, else the RANSAC estimate).
    pub median_sampson_patch_px: Option<f64>,
    /// Median Sampson residual of the remaining (scene) matches.
    pub median_sampson_scene_px: Option<f64>,
    /// Least-squares eight-point over all matches.
    pub no_ransac: Option<EstimateSummary>,
    /// RANSAC-filtered estimate.
    pub ransac: Option<EstimateSummary>,
    /// Estimation failures, in the order they occurred.
    pub failures: Vec<String>,
}

/// Runs detect/describe/match on the pair and measures how the match set
/// interacts with epipolar geometry. Fewer than 8 matches is reported, not
/// an error.
pub fn diagnose_pair(
    image_a: &ImageBuffer,
    image_b: &ImageBuffer,
    patch_region: Option<Region>,
    ground_truth: Option<&TwoViewGroundTruth>,
    params: &DiagnoseParams,
) -> DiagnosticReport {
    let mut failures = Vec::new();

    let (kps_a, descs_a) = match detect_and_describe(image_a, &params.features) {
        Ok(v) => v,
        Err(e) => {
            failures.push(format!("features(a): {e}"));
            (Vec::new(), Vec::new())
        }
    };
    let (kps_b, descs_b) = match detect_and_describe(image_b, &params.features) {
        Ok(v) => v,
        Err(e) => {
            failures.push(format!("features(b): {e}"));
            (Vec::new(), Vec::new())
        }
    };
    let matches = match_descriptors(
        &descs_a,
        &descs_b,
        params.features.match_ratio,
        params.features.cross_check,
    );
    let correspondences: Vec<(Vector2<f64>, Vector2<f64>)> = matches
        .iter()
        .map(|m| (point_of(&kps_a[m.index_a]), point_of(&kps_b[m.index_b])))
        .collect();

    let patch_area_fraction = patch_region
        .map(|r| r.area_fraction(image_a.width(), image_a.height()))
        .unwrap_or(0.0);
    let in_patch: Vec<bool> = match patch_region {
        Some(region) => correspondences
            .iter()
            .map(|(a, b)| region.contains(a.x, a.y) && region.contains(b.x, b.y))
            .collect(),
        None => vec![false; correspondences.len()],
    };
    let patch_count = in_patch.iter().filter(|&&v| v).count();
    let patch_match_fraction = if correspondences.is_empty() {
        0.0
    } else {
        patch_count as f64 / correspondences.len() as f64
    };

    let no_ransac_est = eight_point(&correspondences)
        .map_err(|e| failures.push(format!("eight_point: {e}")))
        .ok();
    let ransac_est = ransac_fundamental(
        &correspondences,
        params.ransac_threshold_px,
        params.ransac_max_iters,
        params.ransac_seed,
    )
    .map_err(|e| failures.push(format!("ransac: {e}")))
    .ok();

    // Residuals of patch vs scene matches under the reference geometry.
    let reference_f: Option<Matrix3<f64>> = match ground_truth {
        Some(gt) => Some(fundamental_from_pose(gt)),
        None => ransac_est.as_ref().map(|est| est.f),
    };
    let no_ransac = no_ransac_est
        .map(|est| summarize(&est, &correspondences, ground_truth, &mut failures));
    let ransac = ransac_est
        .map(|est| summarize(&est, &correspondences, ground_truth, &mut failures));
    let (median_sampson_patch_px, median_sampson_scene_px) = match reference_f {
        Some(f) => {
            let mut patch = Vec::new();
            let mut scene = Vec::new();
            for ((a, b), &inside) in correspondences.iter().zip(&in_patch) {
                let d = sampson_distance(&f, a, b);
                if inside {
                    patch.push(d);
                } else {
                    scene.push(d);
                }
            }
            (median(&mut patch), median(&mut scene))
        }
        None => (None, None),
    };

    DiagnosticReport {
        schema_version: SCHEMA_VERSION,
        keypoints_a: kps_a.len(),
        keypoints_b: kps_b.len(),
        total_matches: matches.len(),
        patch_region,
        patch_area_fraction,
        patch_match_fraction,
        median_sampson_patch_px,
        median_sampson_scene_px,
        no_ransac,
        ransac,
        failures,
    }
}

fn point_of(kp: &Keypoint) -> Vector2<f64> {
    Vector2::new(kp.x, kp.y)
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values[values.len() / 2])
}

/// Ground-truth fundamental matrix from a known pose, normalized like the
/// estimators' output.
pub fn fundamental_from_pose(gt: &TwoViewGroundTruth) -> Matrix3<f64> {
    let essential = gt.translation.cross_matrix() * gt.rotation;
    let k_inv = gt.intrinsics.try_inverse().expect("valid intrinsics");
    let mut f = k_inv.transpose() * essential * k_inv;
    let norm = f.norm();
    if norm > 0.0 {
        f /= norm;
    }
    f
}

fn summarize(
    est: &FundamentalEstimate,
    correspondences: &[(Vector2<f64>, Vector2<f64>)],
    ground_truth: Option<&TwoViewGroundTruth>,
    failures: &mut Vec<String>,
) -> EstimateSummary {
    let inlier_fraction = if correspondences.is_empty() {
        0.0
    } else {
        est.inliers.len() as f64 / correspondences.len() as f64
    };
    let (mut rotation_error, mut translation_error) = (None, None);
    if let Some(gt) = ground_truth {
        let inlier_matches: Vec<(Vector2<f64>, Vector2<f64>)> =
            est.inliers.iter().map(|&i| correspondences[i]).collect();
        match recover_pose(&est.f, &gt.intrinsics, &inlier_matches) {
            Ok((r, t)) => {
                rotation_error = Some(rotation_error_deg(&r, &gt.rotation));
                translation_error = Some(direction_error_deg(&t, &gt.translation));
            }
            Err(e) => failures.push(format!("recover_pose: {e}")),
        }
    }
    EstimateSummary {
        inlier_fraction,
        median_sampson_px: est.median_sampson_px,
        max_sampson_px: est.max_sampson_px,
        rotation_error_deg: rotation_error,
        translation_error_deg: translation_error,
    }
}

/// Pose errors for a raw correspondence list against ground truth, without
/// running the feature pipeline. Used for contamination sweeps where matches
/// are injected directly.
pub fn pose_error_no_ransac(
    correspondences: &[(Vector2<f64>, Vector2<f64>)],
    gt: &TwoViewGroundTruth,
) -> Result<(f64, f64), super::GeometryError> {
    let est = eight_point(correspondences)?;
    let (r, t) = recover_pose(&est.f, &gt.intrinsics, correspondences)?;
    Ok((
        rotation_error_deg(&r, &gt.rotation),
        direction_error_deg(&t, &gt.translation),
    ))
}
