//! Procedural patch masks.
//!
//! Every variant shares one frequency parameter, the block size `b`: the
//! checkerboard uses `b`-sized cells, stripes have width `b` and period `2b`,
//! and circles are concentric rings of stroke width `b` spaced `2b` apart
//! (dark center disk). Combination variants are the pixel-wise maximum of
//! their constituents, so the bright set is the union of the bright sets.
//!
//! Masks are deterministic: the same [`PatchSpec`] always rasterizes to the
//! same bytes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("patch size must be positive")]
    ZeroSize,
    #[error("block size must satisfy 1 <= b <= P, got b={block_px}, P={size_px}")]
    BadBlockSize { block_px: u32, size_px: u32 },
    #[error("alpha must lie in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("dark level {dark} exceeds bright level {bright}")]
    LevelOrder { dark: u8, bright: u8 },
}

/// Pattern family. Combination variants overlay their constituents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Checkerboard,
    Circles,
    DiagonalLines,
    ParallelLines,
    IntersectingLines,
    CheckerboardPlusCircles,
    CheckerboardPlusDiagonals,
    DiagonalsPlusCircles,
    AllPatterns,
}

/// Image corner the patch is anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

/// Full parameterization of a poisoning patch.
///
/// `size_px` is the patch edge length P, `block_px` the cell/stroke size b,
/// `alpha` the blend strength, and `bright_level`/`dark_level` the two mask
/// intensities (`bright_level` plays the role of the contrast delta; the dark
/// cells default to 0, which leaves the underlying pixels untouched at any
/// alpha).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchSpec {
    pub kind: PatternKind,
    pub size_px: u32,
    pub block_px: u32,
    pub alpha: f64,
    pub bright_level: u8,
    pub dark_level: u8,
    pub corner: Corner,
    pub margin_px: u32,
}

impl Default for PatchSpec {
    fn default() -> Self {
        Self {
            kind: PatternKind::Checkerboard,
            size_px: 12,
            block_px: 4,
            alpha: 1.0,
            bright_level: 255,
            dark_level: 0,
            corner: Corner::TopLeft,
            margin_px: 0,
        }
    }
}

impl PatchSpec {
    pub fn validate(&self) -> Result<(), PatternError> {
        if self.size_px == 0 {
            return Err(PatternError::ZeroSize);
        }
        if self.block_px == 0 || self.block_px > self.size_px {
            return Err(PatternError::BadBlockSize {
                block_px: self.block_px,
                size_px: self.size_px,
            });
        }
        if !(0.0..=1.0).contains(&self.alpha) || self.alpha.is_nan() {
            return Err(PatternError::BadAlpha(self.alpha));
        }
        if self.dark_level > self.bright_level {
            return Err(PatternError::LevelOrder {
                dark: self.dark_level,
                bright: self.bright_level,
            });
        }
        Ok(())
    }

    /// Fraction of a `w`x`h` image covered by the patch square.
    pub fn area_fraction(&self, w: u32, h: u32) -> f64 {
        if w == 0 || h == 0 {
            return 0.0;
        }
        (self.size_px as u64 * self.size_px as u64) as f64 / (w as u64 * h as u64) as f64
    }
}

/// Rasterized patch mask with per-pixel normalized intensities in [0, 1].
///
/// For two-level variants every value is exactly `dark_level/255` or
/// `bright_level/255`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternMask {
    width: u32,
    height: u32,
    cells: Vec<f32>,
}

impl PatternMask {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cells(&self) -> &[f32] {
        &self.cells
    }

    #[inline]
    pub fn value(&self, x: u32, y: u32) -> f32 {
        self.cells[y as usize * self.width as usize + x as usize]
    }
}

/// Checkerboard with `block_px` cells; the top-left cell is bright.
///
/// Pixel (x, y) is bright iff `(x / b + y / b)` is even.
pub fn generate_checkerboard(
    size_px: u32,
    block_px: u32,
    bright_level: u8,
    dark_level: u8,
) -> Result<PatternMask, PatternError> {
    let spec = PatchSpec {
        kind: PatternKind::Checkerboard,
        size_px,
        block_px,
        bright_level,
        dark_level,
        ..PatchSpec::default()
    };
    generate_pattern(&spec)
}

/// Rasterizes the mask described by `spec`.
pub fn generate_pattern(spec: &PatchSpec) -> Result<PatternMask, PatternError> {
    spec.validate()?;
    let p = spec.size_px;
    let b = spec.block_px;
    let cells = match spec.kind {
        PatternKind::Checkerboard => raster(p, spec, checker_predicate(b)),
        PatternKind::Circles => raster(p, spec, circles_predicate(p, b)),
        PatternKind::DiagonalLines => raster(p, spec, diagonal_predicate(b)),
        PatternKind::ParallelLines => raster(p, spec, parallel_predicate(b)),
        PatternKind::IntersectingLines => max_of(vec![
            raster(p, spec, diagonal_predicate(b)),
            raster(p, spec, anti_diagonal_predicate(b)),
        ]),
        PatternKind::CheckerboardPlusCircles => max_of(vec![
            raster(p, spec, checker_predicate(b)),
            raster(p, spec, circles_predicate(p, b)),
        ]),
        PatternKind::CheckerboardPlusDiagonals => max_of(vec![
            raster(p, spec, checker_predicate(b)),
            raster(p, spec, diagonal_predicate(b)),
        ]),
        PatternKind::DiagonalsPlusCircles => max_of(vec![
            raster(p, spec, diagonal_predicate(b)),
            raster(p, spec, circles_predicate(p, b)),
        ]),
        PatternKind::AllPatterns => max_of(vec![
            raster(p, spec, checker_predicate(b)),
            raster(p, spec, circles_predicate(p, b)),
            raster(p, spec, diagonal_predicate(b)),
            raster(p, spec, anti_diagonal_predicate(b)),
            raster(p, spec, parallel_predicate(b)),
        ]),
    };
    Ok(PatternMask {
        width: p,
        height: p,
        cells,
    })
}

fn raster(p: u32, spec: &PatchSpec, bright: impl Fn(u32, u32) -> bool) -> Vec<f32> {
    let hi = spec.bright_level as f32 / 255.0;
    let lo = spec.dark_level as f32 / 255.0;
    let mut cells = Vec::with_capacity(p as usize * p as usize);
    for y in 0..p {
        for x in 0..p {
            cells.push(if bright(x, y) { hi } else { lo });
        }
    }
    cells
}

fn max_of(layers: Vec<Vec<f32>>) -> Vec<f32> {
    let mut iter = layers.into_iter();
    let mut acc = iter.next().expect("at least one layer");
    for layer in iter {
        for (a, v) in acc.iter_mut().zip(layer) {
            *a = a.max(v);
        }
    }
    acc
}

fn checker_predicate(b: u32) -> impl Fn(u32, u32) -> bool {
    move |x, y| (x / b + y / b) % 2 == 0
}

fn parallel_predicate(b: u32) -> impl Fn(u32, u32) -> bool {
    move |_, y| (y / b) % 2 == 0
}

fn diagonal_predicate(b: u32) -> impl Fn(u32, u32) -> bool {
    move |x, y| ((x + y) / b) % 2 == 0
}

fn anti_diagonal_predicate(b: u32) -> impl Fn(u32, u32) -> bool {
    move |x, y| {
        let d = x as i64 - y as i64;
        d.div_euclid(b as i64).rem_euclid(2) == 0
    }
}

fn circles_predicate(p: u32, b: u32) -> impl Fn(u32, u32) -> bool {
    let c = (p as f64 - 1.0) / 2.0;
    move |x, y| {
        let r = (x as f64 - c).hypot(y as f64 - c);
        (r / b as f64).floor() as i64 % 2 == 1
    }
}
