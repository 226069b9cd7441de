//! Patch embedding and dataset-level poisoning.
//!
//! The embedding blend, per color channel of every pixel inside the patch
//! region Ω:
//!
//! ```text
//! out = round(in * (1 - alpha * m) + alpha * m * 255)
//! ```
//!
//! where `m` is the normalized mask value at the pixel. Rounding is
//! half-away-from-zero and the result is clamped to [0, 255]. Pixels outside
//! Ω are byte-identical to the input, and an RGBA alpha plane is never
//! touched. With the default dark level of 0, dark mask cells leave their
//! pixels unchanged at any blend strength.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::{ImageBuffer, Region};
use crate::dataset::{self, BackgroundPolicy, DatasetError};
use crate::pattern::{generate_pattern, Corner, PatchSpec, PatternError, PatternMask};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum PoisonError {
    #[error(
        "patch {patch_w}x{patch_h} with margin {margin} does not fit in {image_w}x{image_h} image"
    )]
    PatchPlacement {
        patch_w: u32,
        patch_h: u32,
        margin: u32,
        image_w: u32,
        image_h: u32,
    },
    #[error("alpha must lie in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("poison ratio must lie in (0, 1], got {0}")]
    BadRatio(f64),
    #[error("blur kernel must be odd and >= 3, got {0}")]
    BadKernel(u32),
    #[error("noise stddev must be finite and >= 0, got {0}")]
    BadStddev(f64),
    #[error("shear ({x}, {y}) is singular")]
    SingularShear { x: f64, y: f64 },
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Placement of a `mask_w`x`mask_h` patch at `corner` with `margin` offset.
pub fn patch_region(
    image_w: u32,
    image_h: u32,
    mask_w: u32,
    mask_h: u32,
    corner: Corner,
    margin: u32,
) -> Result<Region, PoisonError> {
    let fits_w = margin.checked_add(mask_w).is_some_and(|n| n <= image_w);
    let fits_h = margin.checked_add(mask_h).is_some_and(|n| n <= image_h);
    if !fits_w || !fits_h {
        return Err(PoisonError::PatchPlacement {
            patch_w: mask_w,
            patch_h: mask_h,
            margin,
            image_w,
            image_h,
        });
    }
    let x = match corner {
        Corner::TopLeft | Corner::BottomLeft => margin,
        Corner::TopRight | Corner::BottomRight => image_w - margin - mask_w,
    };
    let y = match corner {
        Corner::TopLeft | Corner::TopRight => margin,
        Corner::BottomLeft | Corner::BottomRight => image_h - margin - mask_h,
    };
    Ok(Region {
        x,
        y,
        width: mask_w,
        height: mask_h,
    })
}

/// Alpha-blends `mask` into a copy of `image` at the given corner.
pub fn embed_patch(
    image: &ImageBuffer,
    mask: &PatternMask,
    alpha: f64,
    corner: Corner,
    margin: u32,
) -> Result<ImageBuffer, PoisonError> {
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(PoisonError::BadAlpha(alpha));
    }
    let region = patch_region(
        image.width(),
        image.height(),
        mask.width(),
        mask.height(),
        corner,
        margin,
    )?;
    let mut out = image.clone();
    let color_channels = image.color_channels();
    for my in 0..mask.height() {
        for mx in 0..mask.width() {
            let m = mask.value(mx, my) as f64;
            let x = region.x + mx;
            let y = region.y + my;
            for c in 0..color_channels {
                let v = image.sample(x, y, c) as f64;
                let blended = v * (1.0 - alpha * m) + alpha * m * 255.0;
                out.set_sample(x, y, c, blended.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}

/// One image's record in a [`PoisonManifest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source_path: String,
    pub output_path: String,
    pub poisoned: bool,
    pub region: Option<Region>,
    pub error: Option<String>,
}

/// Complete record of a dataset poisoning run; embedded spec serializes with
/// snake_case field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonManifest {
    pub schema_version: u32,
    pub spec: PatchSpec,
    pub ratio: f64,
    pub seed: u64,
    pub background: BackgroundPolicy,
    pub entries: Vec<ManifestEntry>,
}

impl PoisonManifest {
    pub fn poisoned_count(&self) -> usize {
        self.entries.iter().filter(|e| e.poisoned).count()
    }

    pub fn failed_count(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_some()).count()
    }
}

/// Number of images to poison: `round(ratio * n)`, half away from zero.
pub fn poisoned_count(n: usize, ratio: f64) -> usize {
    (ratio * n as f64).round() as usize
}

/// Deterministic poisoned-image selection: a seeded index shuffle whose
/// prefix of `round(ratio * n)` indices gets the patch.
pub fn select_poisoned(n: usize, ratio: f64, seed: u64) -> Result<Vec<bool>, PoisonError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(PoisonError::BadRatio(ratio));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let count = poisoned_count(n, ratio);
    let mut selected = vec![false; n];
    for &idx in indices.iter().take(count) {
        selected[idx] = true;
    }
    Ok(selected)
}

/// Poisons `round(ratio * N)` of the images into `out_dir`, copying the rest
/// through unchanged. Per-image failures are recorded in the manifest and do
/// not stop the run; an unwritable output directory is fatal up front.
pub fn poison_dataset(
    paths: &[PathBuf],
    spec: &PatchSpec,
    ratio: f64,
    seed: u64,
    out_dir: &Path,
    background: BackgroundPolicy,
) -> Result<PoisonManifest, PoisonError> {
    spec.validate()?;
    let mask = generate_pattern(spec)?;
    dataset::ensure_writable_dir(out_dir)?;
    let selected = select_poisoned(paths.len(), ratio, seed)?;

    let mut entries = Vec::with_capacity(paths.len());
    for (path, &poison_this) in paths.iter().zip(&selected) {
        let file_name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".into());
        let out_path = out_dir.join(&file_name);
        let mut entry = ManifestEntry {
            source_path: path.display().to_string(),
            output_path: out_path.display().to_string(),
            poisoned: poison_this,
            region: None,
            error: None,
        };
        let result = process_one(path, &out_path, poison_this, &mask, spec, background);
        match result {
            Ok(region) => entry.region = region,
            Err(e) => {
                entry.poisoned = false;
                entry.error = Some(e.to_string());
            }
        }
        entries.push(entry);
    }

    Ok(PoisonManifest {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        ratio,
        seed,
        background,
        entries,
    })
}

fn process_one(
    path: &Path,
    out_path: &Path,
    poison_this: bool,
    mask: &PatternMask,
    spec: &PatchSpec,
    background: BackgroundPolicy,
) -> Result<Option<Region>, PoisonError> {
    let raw = dataset::load_image(path)?;
    let img = dataset::composite_background(&raw, background);
    if poison_this {
        let out = embed_patch(&img, mask, spec.alpha, spec.corner, spec.margin_px)?;
        let region = patch_region(
            img.width(),
            img.height(),
            mask.width(),
            mask.height(),
            spec.corner,
            spec.margin_px,
        )?;
        dataset::save_image(out_path, &out)?;
        Ok(Some(region))
    } else {
        dataset::save_image(out_path, &img)?;
        Ok(None)
    }
}

/// Baseline whole-image perturbations the patch attack is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    GaussianBlur { kernel: u32 },
    GaussianNoise { stddev: f64, seed: u64 },
    Rotate { degrees: f64 },
    Shear { x: f64, y: f64 },
}

/// Applies a baseline perturbation to every channel of the image.
pub fn baseline_perturb(image: &ImageBuffer, kind: &BaselineKind) -> Result<ImageBuffer, PoisonError> {
    match *kind {
        BaselineKind::GaussianBlur { kernel } => gaussian_blur(image, kernel),
        BaselineKind::GaussianNoise { stddev, seed } => gaussian_noise(image, stddev, seed),
        BaselineKind::Rotate { degrees } => {
            let theta = degrees.to_radians();
            let (cos, sin) = (theta.cos(), theta.sin());
            // Inverse map for a rotation about the image center.
            Ok(warp(image, |dx, dy| (cos * dx + sin * dy, -sin * dx + cos * dy)))
        }
        BaselineKind::Shear { x, y } => {
            let det = 1.0 - x * y;
            if det.abs() < 1e-12 {
                return Err(PoisonError::SingularShear { x, y });
            }
            Ok(warp(image, move |dx, dy| {
                ((dx - x * dy) / det, (dy - y * dx) / det)
            }))
        }
    }
}

fn gaussian_blur(image: &ImageBuffer, kernel: u32) -> Result<ImageBuffer, PoisonError> {
    if kernel < 3 || kernel % 2 == 0 {
        return Err(PoisonError::BadKernel(kernel));
    }
    let radius = (kernel / 2) as i64;
    let sigma = 0.3 * ((kernel - 1) as f64 / 2.0 - 1.0) + 0.8;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }

    let (w, h, ch) = (
        image.width() as i64,
        image.height() as i64,
        image.channels(),
    );
    // Horizontal pass into f64, then vertical with replicated borders.
    let mut tmp = vec![0.0f64; (w * h) as usize * ch as usize];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, wt) in weights.iter().enumerate() {
                    let sx = (x + k as i64 - radius).clamp(0, w - 1);
                    acc += wt * image.sample(sx as u32, y as u32, c) as f64;
                }
                tmp[((y * w + x) as usize) * ch as usize + c as usize] = acc;
            }
        }
    }
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, wt) in weights.iter().enumerate() {
                    let sy = (y + k as i64 - radius).clamp(0, h - 1);
                    acc += wt * tmp[((sy * w + x) as usize) * ch as usize + c as usize];
                }
                out.set_sample(x as u32, y as u32, c, acc.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}

fn gaussian_noise(image: &ImageBuffer, stddev: f64, seed: u64) -> Result<ImageBuffer, PoisonError> {
    if !stddev.is_finite() || stddev < 0.0 {
        return Err(PoisonError::BadStddev(stddev));
    }
    if stddev == 0.0 {
        return Ok(image.clone());
    }
    let normal = Normal::new(0.0, stddev).map_err(|_| PoisonError::BadStddev(stddev))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = image.clone();
    for v in out.data_mut() {
        let n: f64 = normal.sample(&mut rng);
        *v = (*v as f64 + n).round().clamp(0.0, 255.0) as u8;
    }
    Ok(out)
}

/// Resamples the image through an inverse-mapped warp about the center with
/// bilinear interpolation; samples falling outside the source are black.
fn warp(image: &ImageBuffer, inverse: impl Fn(f64, f64) -> (f64, f64)) -> ImageBuffer {
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = ImageBuffer::new(w, h, ch).expect("same channel count");
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = inverse(x as f64 - cx, y as f64 - cy);
            let (sx, sy) = (sx + cx, sy + cy);
            for c in 0..ch {
                out.set_sample(x, y, c, bilinear(image, sx, sy, c));
            }
        }
    }
    out
}

fn bilinear(image: &ImageBuffer, x: f64, y: f64, c: u8) -> u8 {
    let (w, h) = (image.width() as f64, image.height() as f64);
    if x < 0.0 || y < 0.0 || x > w - 1.0 || y > h - 1.0 {
        return 0;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as u32;
    let y0 = y0 as u32;
    let x1 = (x0 + 1).min(image.width() - 1);
    let y1 = (y0 + 1).min(image.height() - 1);
    let v00 = image.sample(x0, y0, c) as f64;
    let v10 = image.sample(x1, y0, c) as f64;
    let v01 = image.sample(x0, y1, c) as f64;
    let v11 = image.sample(x1, y1, c) as f64;
    let v = v00 * (1.0 - fx) * (1.0 - fy)
        + v10 * fx * (1.0 - fy)
        + v01 * (1.0 - fx) * fy
        + v11 * fx * fy;
    v.round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{generate_checkerboard, PatternKind};
    use rand::RngCore;

    fn random_image(w: u32, h: u32, ch: u8, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0u8; w as usize * h as usize * ch as usize];
        rng.fill_bytes(&mut data);
        ImageBuffer::from_vec(w, h, ch, data).unwrap()
    }

    #[test]
    fn alpha_zero_is_byte_identity() {
        let img = random_image(32, 24, 3, 1);
        let mask = generate_checkerboard(12, 4, 255, 0).unwrap();
        let out = embed_patch(&img, &mask, 0.0, Corner::TopLeft, 0).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn alpha_one_bright_cell_saturates() {
        let mut img = ImageBuffer::new(16, 16, 1).unwrap();
        for v in img.data_mut() {
            *v = 37;
        }
        let mask = generate_checkerboard(8, 2, 255, 0).unwrap();
        let out = embed_patch(&img, &mask, 1.0, Corner::TopLeft, 0).unwrap();
        // Top-left cell is bright -> full replacement with 255.
        assert_eq!(out.sample(0, 0, 0), 255);
        assert_eq!(out.sample(1, 1, 0), 255);
        // Dark cell (m = 0) leaves the pixel untouched.
        assert_eq!(out.sample(2, 0, 0), 37);
    }

    #[test]
    fn half_blend_rounds_half_away_from_zero() {
        // 100 * 0.5 + 0.5 * 255 = 177.5 -> 178
        let mut img = ImageBuffer::new(4, 4, 1).unwrap();
        for v in img.data_mut() {
            *v = 100;
        }
        let mask = generate_checkerboard(2, 2, 255, 0).unwrap();
        let out = embed_patch(&img, &mask, 0.5, Corner::TopLeft, 0).unwrap();
        assert_eq!(out.sample(0, 0, 0), 178);
    }

    #[test]
    fn locality_outside_region() {
        let img = random_image(40, 30, 3, 2);
        let mask = generate_checkerboard(10, 5, 255, 0).unwrap();
        for corner in [
            Corner::TopLeft,
            Corner::TopRight,
            Corner::BottomLeft,
            Corner::BottomRight,
        ] {
            let out = embed_patch(&img, &mask, 0.7, corner, 3).unwrap();
            let region = patch_region(40, 30, 10, 10, corner, 3).unwrap();
            for y in 0..30 {
                for x in 0..40 {
                    if !region.contains(x as f64, y as f64) {
                        for c in 0..3 {
                            assert_eq!(out.sample(x, y, c), img.sample(x, y, c));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn alpha_plane_is_preserved() {
        let img = random_image(16, 16, 4, 3);
        let mask = generate_checkerboard(8, 4, 255, 0).unwrap();
        let out = embed_patch(&img, &mask, 1.0, Corner::TopLeft, 0).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(out.sample(x, y, 3), img.sample(x, y, 3));
            }
        }
    }

    #[test]
    fn idempotent_at_full_alpha_with_binary_mask() {
        let img = random_image(24, 24, 3, 4);
        let mask = generate_checkerboard(12, 3, 255, 0).unwrap();
        let once = embed_patch(&img, &mask, 1.0, Corner::BottomRight, 1).unwrap();
        let twice = embed_patch(&once, &mask, 1.0, Corner::BottomRight, 1).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn distortion_monotone_in_alpha() {
        let img = random_image(20, 20, 3, 5);
        let mask = generate_checkerboard(12, 4, 200, 20).unwrap();
        let alphas = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
        let mut prev: Option<Vec<u16>> = None;
        for &alpha in &alphas {
            let out = embed_patch(&img, &mask, alpha, Corner::TopLeft, 0).unwrap();
            let dist: Vec<u16> = out
                .data()
                .iter()
                .zip(img.data())
                .map(|(&a, &b)| (a as i16 - b as i16).unsigned_abs())
                .collect();
            if let Some(p) = &prev {
                assert!(
                    dist.iter().zip(p).all(|(d, pd)| d >= pd),
                    "distortion decreased between alpha steps"
                );
            }
            prev = Some(dist);
        }
    }

    #[test]
    fn placement_failure_is_an_error() {
        let img = ImageBuffer::new(10, 10, 3).unwrap();
        let mask = generate_checkerboard(12, 4, 255, 0).unwrap();
        assert!(matches!(
            embed_patch(&img, &mask, 1.0, Corner::TopLeft, 0),
            Err(PoisonError::PatchPlacement { .. })
        ));
        // margin pushes an otherwise-fitting patch out
        let mask = generate_checkerboard(8, 4, 255, 0).unwrap();
        assert!(embed_patch(&img, &mask, 1.0, Corner::TopLeft, 3).is_err());
        assert!(embed_patch(&img, &mask, 1.0, Corner::TopLeft, 2).is_ok());
    }

    #[test]
    fn selection_counts_follow_rounding() {
        assert_eq!(
            select_poisoned(100, 1.0, 0).unwrap().iter().filter(|&&b| b).count(),
            100
        );
        assert_eq!(
            select_poisoned(100, 0.05, 9).unwrap().iter().filter(|&&b| b).count(),
            5
        );
        // round(3.5) = 4, half away from zero
        assert_eq!(
            select_poisoned(7, 0.5, 1).unwrap().iter().filter(|&&b| b).count(),
            4
        );
    }

    #[test]
    fn selection_deterministic_per_seed() {
        let a = select_poisoned(50, 0.3, 42).unwrap();
        let b = select_poisoned(50, 0.3, 42).unwrap();
        assert_eq!(a, b);
        let c = select_poisoned(50, 0.3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_ratio_rejected() {
        assert!(matches!(select_poisoned(10, 0.0, 0), Err(PoisonError::BadRatio(_))));
        assert!(matches!(select_poisoned(10, 1.5, 0), Err(PoisonError::BadRatio(_))));
    }

    #[test]
    fn poison_dataset_writes_manifest_and_images() {
        let in_dir = tempfile::tempdir().unwrap();
        let out_dir = tempfile::tempdir().unwrap();
        let mut paths = Vec::new();
        for i in 0..7 {
            let img = random_image(24, 24, 3, 100 + i);
            let path = in_dir.path().join(format!("img_{i}.png"));
            dataset::save_image(&path, &img).unwrap();
            paths.push(path);
        }
        let spec = PatchSpec {
            size_px: 8,
            ..PatchSpec::default()
        };
        let manifest =
            poison_dataset(&paths, &spec, 0.5, 7, out_dir.path(), BackgroundPolicy::Black)
                .unwrap();
        assert_eq!(manifest.entries.len(), 7);
        assert_eq!(manifest.poisoned_count(), 4);
        assert_eq!(manifest.failed_count(), 0);
        for entry in &manifest.entries {
            assert!(Path::new(&entry.output_path).exists());
            if entry.poisoned {
                let region = entry.region.expect("poisoned entries carry a region");
                assert_eq!((region.width, region.height), (8, 8));
                assert!(region.fits_in(24, 24));
            } else {
                assert!(entry.region.is_none());
            }
        }
        // Determinism: same inputs and seed give an identical manifest.
        let again =
            poison_dataset(&paths, &spec, 0.5, 7, out_dir.path(), BackgroundPolicy::Black)
                .unwrap();
        assert_eq!(manifest, again);
    }

    #[test]
    fn poison_dataset_records_per_entry_errors() {
        let in_dir = tempfile::tempdir().unwrap();
        let out_dir = tempfile::tempdir().unwrap();
        let good = in_dir.path().join("good.png");
        dataset::save_image(&good, &random_image(24, 24, 3, 11)).unwrap();
        let bad = in_dir.path().join("bad.png");
        std::fs::write(&bad, b"not a png").unwrap();
        let paths = vec![good, bad];
        let spec = PatchSpec {
            size_px: 8,
            ..PatchSpec::default()
        };
        let manifest =
            poison_dataset(&paths, &spec, 1.0, 0, out_dir.path(), BackgroundPolicy::Black)
                .unwrap();
        assert_eq!(manifest.failed_count(), 1);
        assert!(manifest.entries[0].error.is_none());
        assert!(manifest.entries[1].error.is_some());
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let manifest = PoisonManifest {
            schema_version: SCHEMA_VERSION,
            spec: PatchSpec {
                kind: PatternKind::Circles,
                ..PatchSpec::default()
            },
            ratio: 0.25,
            seed: 99,
            background: BackgroundPolicy::Keep,
            entries: vec![ManifestEntry {
                source_path: "a.png".into(),
                output_path: "out/a.png".into(),
                poisoned: true,
                region: Some(Region {
                    x: 0,
                    y: 0,
                    width: 12,
                    height: 12,
                }),
                error: None,
            }],
        };
        let json = serde_json::to_string(&manifest).unwrap();
        let back: PoisonManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn noise_zero_stddev_is_identity() {
        let img = random_image(16, 16, 3, 8);
        let out = baseline_perturb(
            &img,
            &BaselineKind::GaussianNoise {
                stddev: 0.0,
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn noise_is_seeded_and_clamped() {
        let img = random_image(16, 16, 3, 9);
        let kind = BaselineKind::GaussianNoise {
            stddev: 25.0,
            seed: 5,
        };
        let a = baseline_perturb(&img, &kind).unwrap();
        let b = baseline_perturb(&img, &kind).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, img);
    }

    #[test]
    fn rotate_zero_is_identity() {
        let img = random_image(17, 13, 3, 10);
        let out = baseline_perturb(&img, &BaselineKind::Rotate { degrees: 0.0 }).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn blur_of_constant_is_constant() {
        let mut img = ImageBuffer::new(16, 16, 3).unwrap();
        for v in img.data_mut() {
            *v = 143;
        }
        let out = baseline_perturb(&img, &BaselineKind::GaussianBlur { kernel: 3 }).unwrap();
        assert_eq!(out, img);
        let out = baseline_perturb(&img, &BaselineKind::GaussianBlur { kernel: 21 }).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn even_kernel_rejected() {
        let img = ImageBuffer::new(8, 8, 1).unwrap();
        assert!(matches!(
            baseline_perturb(&img, &BaselineKind::GaussianBlur { kernel: 4 }),
            Err(PoisonError::BadKernel(4))
        ));
        assert!(matches!(
            baseline_perturb(&img, &BaselineKind::GaussianBlur { kernel: 1 }),
            Err(PoisonError::BadKernel(1))
        ));
    }

    #[test]
    fn rotation_fills_missing_area_with_black() {
        let mut img = ImageBuffer::new(21, 21, 1).unwrap();
        for v in img.data_mut() {
            *v = 255;
        }
        let out = baseline_perturb(&img, &BaselineKind::Rotate { degrees: 45.0 }).unwrap();
        assert_eq!(out.sample(0, 0, 0), 0);
        assert_eq!(out.sample(10, 10, 0), 255);
    }
}
