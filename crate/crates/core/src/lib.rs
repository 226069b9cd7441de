//! Multi-view dataset poisoning toolkit.
//!
//! Embeds small high-frequency patches into multi-view image sets, measures
//! how visible the change is (SSIM / PSNR), and verifies the attack mechanism
//! at desk scale: patch-induced keypoints appear at identical pixel
//! coordinates across views, the resulting matches violate the epipolar
//! constraint, and relative-pose estimates computed from the contaminated
//! match set degrade.
//!
//! Modules:
//! - [`pattern`]: procedural patch masks (checkerboard and variants)
//! - [`poison`]: patch embedding, dataset poisoning, baseline perturbations
//! - [`metrics`]: SSIM / PSNR and batch evaluation reports
//! - [`features`]: DoG keypoint detection, descriptors, ratio-test matching
//! - [`geometry`]: two-view epipolar estimation and a synthetic oracle
//! - [`dataset`]: image and scene I/O, camera metadata, JSON artifacts

pub mod buffer;
pub mod dataset;
pub mod features;
pub mod geometry;
pub mod metrics;
pub mod pattern;
pub mod poison;

pub use buffer::{ImageBuffer, Region};
pub use pattern::{Corner, PatchSpec, PatternKind, PatternMask};

/// Version stamped into every JSON artifact this crate writes.
pub const SCHEMA_VERSION: u32 = 1;
