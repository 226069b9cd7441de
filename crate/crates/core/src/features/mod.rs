//! Scale-space feature pipeline: DoG keypoint detection, gradient-histogram
//! description, and ratio-test matching.
//!
//! This is the stage of an SfM front-end the poisoning attack targets, built
//! from scratch so the mechanism (dense high-contrast extrema on
//! moderate-frequency checkerboards, matched across views at identical
//! coordinates) is directly observable and testable. The whole chain is
//! deterministic for fixed inputs and parameters.

pub use detect::detect_dbg;
mod describe;
mod detect;
mod matching;
mod pyramid;

pub use describe::{describe, DESCRIPTOR_BORDER, DESCRIPTOR_LEN};
pub use detect::detect_keypoints;
pub use matching::match_descriptors;
pub use pyramid::{build_pyramid, to_gray, GrayF32, PyramidOctave, ScaleSpacePyramid};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::ImageBuffer;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("image {width}x{height} too small for {octaves} octaves")]
    ImageTooSmall {
        width: u32,
        height: u32,
        octaves: usize,
    },
    #[error("need at least 2 scales per octave, got {0}")]
    TooFewScales(usize),
    #[error("need at least 1 octave")]
    NoOctaves,
}

/// Detector, descriptor, and matcher settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub octaves: usize,
    pub scales_per_octave: usize,
    pub sigma0: f64,
    /// Minimum refined DoG magnitude, on [0, 1] intensities.
    pub contrast_threshold: f64,
    /// Principal-curvature ratio bound for edge rejection.
    pub edge_ratio: f64,
    /// Lowe ratio-test threshold for matching.
    pub match_ratio: f64,
    pub cross_check: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            octaves: 4,
            scales_per_octave: 3,
            sigma0: 1.6,
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
            match_ratio: 0.75,
            cross_check: true,
        }
    }
}

/// A refined scale-space extremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    /// Sub-pixel column in input-image coordinates.
    pub x: f64,
    /// Sub-pixel row in input-image coordinates.
    pub y: f64,
    /// Blur level (sigma) of the extremum, in input-image pixels.
    pub scale: f64,
    /// Dominant gradient orientation, radians in [0, 2pi).
    pub orientation: f64,
    /// Magnitude of the refined DoG value.
    pub response: f64,
}

/// 128-dimensional gradient histogram (4x4 cells x 8 bins), L2-normalized
/// with components clamped at 0.2 and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    values: Box<[f32; DESCRIPTOR_LEN]>,
}

impl Descriptor {
    pub(crate) fn from_values(values: [f32; DESCRIPTOR_LEN]) -> Self {
        Self {
            values: Box::new(values),
        }
    }

    pub fn as_slice(&self) -> &[f32] {
        self.values.as_slice()
    }

    /// Euclidean distance, accumulated in f64.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        self.l2_distance_sq(other).sqrt()
    }

    pub(crate) fn l2_distance_sq(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| {
                let d = a as f64 - b as f64;
                d * d
            })
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| v as f64 * v as f64)
            .sum::<f64>()
            .sqrt()
    }
}

impl serde::Serialize for Descriptor {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.values.iter())
    }
}

impl<'de> serde::Deserialize<'de> for Descriptor {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<f32>::deserialize(deserializer)?;
        let values: [f32; DESCRIPTOR_LEN] = raw
            .try_into()
            .map_err(|v: Vec<f32>| serde::de::Error::invalid_length(v.len(), &"128 values"))?;
        Ok(Self::from_values(values))
    }
}

/// One accepted correspondence between two descriptor sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub index_a: usize,
    pub index_b: usize,
    /// L2 distance between the matched descriptors.
    pub distance: f64,
    /// Best-to-second-best distance ratio.
    pub ratio: f64,
}

/// Runs detect -> describe with `config`, returning keypoints aligned
/// index-for-index with their descriptors (border keypoints dropped).
pub fn detect_and_describe(
    image: &ImageBuffer,
    config: &FeatureConfig,
) -> Result<(Vec<Keypoint>, Vec<Descriptor>), FeatureError> {
    let pyramid = build_pyramid(
        image,
        config.octaves,
        config.scales_per_octave,
        config.sigma0,
    )?;
    let keypoints = detect_keypoints(&pyramid, config.contrast_threshold, config.edge_ratio);
    let (descriptors, kept) = describe(image, &keypoints);
    let kept_keypoints = kept.iter().map(|&i| keypoints[i]).collect();
    Ok((kept_keypoints, descriptors))
}

/// Versioned dump of one image pair's features for the diagnose CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureDump {
    pub schema_version: u32,
    pub keypoints_a: Vec<Keypoint>,
    pub keypoints_b: Vec<Keypoint>,
    pub descriptors_a: Vec<Descriptor>,
    pub descriptors_b: Vec<Descriptor>,
    pub matches: Vec<MatchPair>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_serde_round_trip() {
        let mut values = [0.0f32; DESCRIPTOR_LEN];
        for (i, v) in values.iter_mut().enumerate() {
            *v = i as f32 / 128.0;
        }
        let desc = Descriptor::from_values(values);
        let json = serde_json::to_string(&desc).unwrap();
        let back: Descriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, desc);
        assert!(serde_json::from_str::<Descriptor>("[1.0, 2.0]").is_err());
    }
}
