//! Rotation-normalized gradient-histogram descriptors.
//!
//! Each keypoint gets a 16x16 sample grid at native resolution, rotated by
//! the keypoint orientation, binned into 4x4 spatial cells with 8 orientation
//! bins each (trilinear weighting), Gaussian-weighted over the window. The
//! raw 128-vector is L2-normalized, clamped at 0.2, and renormalized.

use crate::buffer::ImageBuffer;

use super::pyramid::{to_gray, GrayF32};
use super::{Descriptor, Keypoint};

pub const DESCRIPTOR_LEN: usize = 128;
/// Keypoints closer than this to a border cannot fill the rotated 16x16
/// support window and are dropped.
pub const DESCRIPTOR_BORDER: f64 = 13.0;

const GRID: usize = 16;
const CELLS: usize = 4;
const ORI_BINS: usize = 8;
const WINDOW_SIGMA: f64 = 8.0;
const COMPONENT_CLAMP: f32 = 0.2;

/// Computes descriptors for the keypoints far enough from the border.
///
/// Returns the descriptors plus a parallel index map: descriptor `i` belongs
/// to `keypoints[kept[i]]`.
pub fn describe(image: &ImageBuffer, keypoints: &[Keypoint]) -> (Vec<Descriptor>, Vec<usize>) {
    let gray = to_gray(image);
    let mut descriptors = Vec::new();
    let mut kept = Vec::new();
    for (i, kp) in keypoints.iter().enumerate() {
        if kp.x < DESCRIPTOR_BORDER
            || kp.y < DESCRIPTOR_BORDER
            || kp.x >= gray.width() as f64 - DESCRIPTOR_BORDER
            || kp.y >= gray.height() as f64 - DESCRIPTOR_BORDER
        {
            continue;
        }
        if let Some(desc) = describe_one(&gray, kp) {
            descriptors.push(desc);
            kept.push(i);
        }
    }
    (descriptors, kept)
}

fn describe_one(gray: &GrayF32, kp: &Keypoint) -> Option<Descriptor> {
    let (sin, cos) = kp.orientation.sin_cos();
    let mut hist = [0.0f64; CELLS * CELLS * ORI_BINS];
    let half = GRID as f64 / 2.0;

    for i in 0..GRID {
        for j in 0..GRID {
            // Window coordinates centered on the keypoint.
            let u = j as f64 - (half - 0.5);
            let v = i as f64 - (half - 0.5);
            let dx = cos * u - sin * v;
            let dy = sin * u + cos * v;
            let px = kp.x + dx;
            let py = kp.y + dy;

            let gx = (gray.sample_bilinear(px + 1.0, py) - gray.sample_bilinear(px - 1.0, py)) / 2.0;
            let gy = (gray.sample_bilinear(px, py + 1.0) - gray.sample_bilinear(px, py - 1.0)) / 2.0;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let theta = (gy.atan2(gx) - kp.orientation).rem_euclid(std::f64::consts::TAU);
            let weight = (-(u * u + v * v) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();

            // Trilinear distribution over cell rows, cell columns, and bins.
            let cu = u / (GRID as f64 / CELLS as f64) + (CELLS as f64 - 1.0) / 2.0;
            let cv = v / (GRID as f64 / CELLS as f64) + (CELLS as f64 - 1.0) / 2.0;
            let ob = theta / std::f64::consts::TAU * ORI_BINS as f64;
            let c0 = cu.floor();
            let r0 = cv.floor();
            let o0 = ob.floor();
            let fc = cu - c0;
            let fr = cv - r0;
            let fo = ob - o0;

            for (dc, wc) in [(0i64, 1.0 - fc), (1, fc)] {
                let col = c0 as i64 + dc;
                if !(0..CELLS as i64).contains(&col) {
                    continue;
                }
                for (dr, wr) in [(0i64, 1.0 - fr), (1, fr)] {
                    let row = r0 as i64 + dr;
                    if !(0..CELLS as i64).contains(&row) {
                        continue;
                    }
                    for (dob, wo) in [(0i64, 1.0 - fo), (1, fo)] {
                        let bin = (o0 as i64 + dob).rem_euclid(ORI_BINS as i64) as usize;
                        let idx = (row as usize * CELLS + col as usize) * ORI_BINS + bin;
                        hist[idx] += weight * mag * wc * wr * wo;
                    }
                }
            }
        }
    }

    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return None;
    }
    let mut values = [0.0f32; DESCRIPTOR_LEN];
    for (out, &v) in values.iter_mut().zip(&hist) {
        *out = ((v / norm) as f32).min(COMPONENT_CLAMP);
    }
    let norm2 = values.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
    for v in &mut values {
        *v = (*v as f64 / norm2) as f32;
    }
    Some(Descriptor::from_values(values))
}
