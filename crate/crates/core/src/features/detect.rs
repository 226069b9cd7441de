//! DoG extremum detection with sub-pixel refinement, edge rejection, and
//! orientation assignment.

use super::pyramid::{GrayF32, PyramidOctave, ScaleSpacePyramid};
use super::Keypoint;

const MAX_REFINE_STEPS: usize = 5;

#[doc(hidden)]
pub static DBG_SOLVE_FAIL: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
#[doc(hidden)]
pub static DBG_OOB: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
#[doc(hidden)]
pub static DBG_NOCONV: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
#[doc(hidden)]
pub static DBG_CONTRAST: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
#[doc(hidden)]
pub static DBG_EDGE: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
#[doc(hidden)]
pub static DBG_BOUNDS: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
#[doc(hidden)]
pub static DBG_OK: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
use std::sync::atomic::Ordering as DbgOrd;
const ORIENTATION_BINS: usize = 36;
/// Peaks at or above this fraction of the histogram maximum spawn keypoints.
const ORIENTATION_PEAK_RATIO: f64 = 0.8;

/// Finds 3x3x3 scale-space extrema, refines them by an iterative quadratic
/// fit (at most 5 steps), rejects low-contrast and edge-like responses, and
/// assigns one keypoint per dominant gradient orientation.
///
/// The extremum test is non-strict: exactly periodic patterns put their
/// peaks between pixels, where the surrounding samples tie bit-for-bit, and
/// a strict test would drop them all. The tied candidates refine to the same
/// sub-pixel location and collapse in a final dedup pass.
pub fn detect_keypoints(
    pyramid: &ScaleSpacePyramid,
    contrast_threshold: f64,
    edge_ratio: f64,
) -> Vec<Keypoint> {
    let mut keypoints = Vec::new();
    let s = pyramid.scales_per_octave;
    let prefilter = (0.5 * contrast_threshold) as f32;
    for (octave_index, octave) in pyramid.octaves.iter().enumerate() {
        let (w, h) = (octave.width(), octave.height());
        if w < 3 || h < 3 {
            continue;
        }
        for level in 1..=s {
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let v = octave.dogs[level].at(x, y);
                    if v.abs() < prefilter || !is_extremum(octave, level, x, y, v) {
                        continue;
                    }
                    if let Some(kp) = refine_and_orient(
                        octave,
                        octave_index,
                        s,
                        pyramid.sigma0,
                        level,
                        x,
                        y,
                        contrast_threshold,
                        edge_ratio,
                    ) {
                        keypoints.extend(kp);
                    }
                }
            }
        }
    }
    dedup_keypoints(keypoints)
}

fn is_extremum(octave: &PyramidOctave, level: usize, x: usize, y: usize, v: f32) -> bool {
    let maximum = v > 0.0;
    for dl in -1i64..=1 {
        let dog = &octave.dogs[(level as i64 + dl) as usize];
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dl == 0 && dy == 0 && dx == 0 {
                    continue;
                }
                let n = dog.at((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                if (maximum && n > v) || (!maximum && n < v) {
                    return false;
                }
            }
        }
    }
    true
}

/// Collapses candidates that refined to the same location, scale, and
/// orientation; keeps the first in scan order.
fn dedup_keypoints(keypoints: Vec<Keypoint>) -> Vec<Keypoint> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(keypoints.len());
    for kp in keypoints {
        let key = (
            (kp.x * 4.0).round() as i64,
            (kp.y * 4.0).round() as i64,
            (kp.scale * 50.0).round() as i64,
            (kp.orientation * 100.0).round() as i64,
        );
        if seen.insert(key) {
            out.push(kp);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn refine_and_orient(
    octave: &PyramidOctave,
    octave_index: usize,
    s: usize,
    sigma0: f64,
    level: usize,
    x: usize,
    y: usize,
    contrast_threshold: f64,
    edge_ratio: f64,
) -> Option<Vec<Keypoint>> {
    let (w, h) = (octave.width(), octave.height());
    let mut lx = x as i64;
    let mut ly = y as i64;
    let mut ll = level as i64;
    let mut offset = [0.0f64; 3];
    let mut converged = false;
    let mut response = 0.0f64;

    for _ in 0..MAX_REFINE_STEPS {
        let (g, hess) = local_derivatives(octave, ll as usize, lx as usize, ly as usize);
        let delta = solve3(&hess, &[-g[0], -g[1], -g[2]])?;
        offset = delta;
        let d = octave.dogs[ll as usize].at(lx as usize, ly as usize) as f64;
        response = d + 0.5 * (g[0] * delta[0] + g[1] * delta[1] + g[2] * delta[2]);
        // Move only on a clear offset; a peak between two samples yields
        // offsets of exactly +/-0.5 that would otherwise ping-pong.
        let step = |v: f64| {
            if v > 0.6 {
                1i64
            } else if v < -0.6 {
                -1i64
            } else {
                0i64
            }
        };
        let (sx, sy, sl) = (step(delta[0]), step(delta[1]), step(delta[2]));
        if sx == 0 && sy == 0 && sl == 0 {
            converged = true;
            break;
        }
        lx += sx;
        ly += sy;
        ll += sl;
        if lx < 1 || lx >= w as i64 - 1 || ly < 1 || ly >= h as i64 - 1 || ll < 1 || ll > s as i64 {
            return None;
        }
    }
    if !converged
        || offset[0].abs() > 1.5
        || offset[1].abs() > 1.5
        || offset[2].abs() > 1.5
        || response.abs() < contrast_threshold
    {
        return None;
    }

    // Principal-curvature (edge) rejection on the 2x2 spatial Hessian.
    let dog = &octave.dogs[ll as usize];
    let (ux, uy) = (lx as usize, ly as usize);
    let dxx = (dog.at(ux + 1, uy) + dog.at(ux - 1, uy) - 2.0 * dog.at(ux, uy)) as f64;
    let dyy = (dog.at(ux, uy + 1) + dog.at(ux, uy - 1) - 2.0 * dog.at(ux, uy)) as f64;
    let dxy = ((dog.at(ux + 1, uy + 1) - dog.at(ux - 1, uy + 1) - dog.at(ux + 1, uy - 1)
        + dog.at(ux - 1, uy - 1)) as f64)
        / 4.0;
    let trace = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    let r = edge_ratio;
    if det <= 0.0 || trace * trace * r >= (r + 1.0) * (r + 1.0) * det {
        DBG_EDGE.fetch_add(1, DbgOrd::Relaxed);
        return None;
    }

    let octave_scale = 2f64.powi(octave_index as i32);
    let level_f = ll as f64 + offset[2];
    let x_img = (lx as f64 + offset[0]) * octave_scale;
    let y_img = (ly as f64 + offset[1]) * octave_scale;
    // Stack bottom sits at sigma0 / 2 (see the pyramid module).
    let sigma_local = (sigma0 / 2.0) * 2f64.powf(level_f / s as f64);
    let scale = sigma_local * octave_scale;

    let img_w = (octave.width() as f64) * octave_scale;
    let img_h = (octave.height() as f64) * octave_scale;
    if x_img < 0.0 || y_img < 0.0 || x_img >= img_w || y_img >= img_h {
        DBG_BOUNDS.fetch_add(1, DbgOrd::Relaxed);
        return None;
    }
    DBG_OK.fetch_add(1, DbgOrd::Relaxed);

    // Orientation from the Gaussian level nearest the refined scale.
    let g_level = level_f.round().clamp(0.0, (s + 2) as f64) as usize;
    let gaussian = &octave.gaussians[g_level];
    let hist = orientation_histogram(
        gaussian,
        lx as f64 + offset[0],
        ly as f64 + offset[1],
        sigma_local,
    );
    let orientations = histogram_peaks(&hist);

    let response = response.abs();
    Some(
        orientations
            .into_iter()
            .map(|orientation| Keypoint {
                x: x_img,
                y: y_img,
                scale,
                orientation,
                response,
            })
            .collect(),
    )
}

/// Gradient and Hessian of the DoG stack by central differences.
fn local_derivatives(
    octave: &PyramidOctave,
    level: usize,
    x: usize,
    y: usize,
) -> ([f64; 3], [[f64; 3]; 3]) {
    let d = |l: usize, xx: usize, yy: usize| octave.dogs[l].at(xx, yy) as f64;
    let v = d(level, x, y);
    let gx = (d(level, x + 1, y) - d(level, x - 1, y)) / 2.0;
    let gy = (d(level, x, y + 1) - d(level, x, y - 1)) / 2.0;
    let gs = (d(level + 1, x, y) - d(level - 1, x, y)) / 2.0;
    let dxx = d(level, x + 1, y) + d(level, x - 1, y) - 2.0 * v;
    let dyy = d(level, x, y + 1) + d(level, x, y - 1) - 2.0 * v;
    let dss = d(level + 1, x, y) + d(level - 1, x, y) - 2.0 * v;
    let dxy = (d(level, x + 1, y + 1) - d(level, x - 1, y + 1) - d(level, x + 1, y - 1)
        + d(level, x - 1, y - 1))
        / 4.0;
    let dxs = (d(level + 1, x + 1, y) - d(level + 1, x - 1, y) - d(level - 1, x + 1, y)
        + d(level - 1, x - 1, y))
        / 4.0;
    let dys = (d(level + 1, x, y + 1) - d(level + 1, x, y - 1) - d(level - 1, x, y + 1)
        + d(level - 1, x, y - 1))
        / 4.0;
    (
        [gx, gy, gs],
        [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]],
    )
}

/// Cramer's-rule solve of a symmetric 3x3 system; None when near singular.
fn solve3(m: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-20 {
        return None;
    }
    let mut out = [0.0; 3];
    for i in 0..3 {
        let mut mi = *m;
        for row in 0..3 {
            mi[row][i] = b[row];
        }
        let di = mi[0][0] * (mi[1][1] * mi[2][2] - mi[1][2] * mi[2][1])
            - mi[0][1] * (mi[1][0] * mi[2][2] - mi[1][2] * mi[2][0])
            + mi[0][2] * (mi[1][0] * mi[2][1] - mi[1][1] * mi[2][0]);
        out[i] = di / det;
    }
    Some(out)
}

/// 36-bin gradient-orientation histogram around (x, y), Gaussian-weighted
/// with sigma `1.5 * sigma_local` over a `3 * 1.5 * sigma_local` radius.
fn orientation_histogram(img: &GrayF32, x: f64, y: f64, sigma_local: f64) -> [f64; ORIENTATION_BINS] {
    let sigma_w = 1.5 * sigma_local;
    let radius = (3.0 * sigma_w).round().max(1.0) as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let cx = x.round() as i64;
    let cy = y.round() as i64;
    let mut hist = [0.0f64; ORIENTATION_BINS];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let px = cx + dx;
            let py = cy + dy;
            if px < 1 || px >= w - 1 || py < 1 || py >= h - 1 {
                continue;
            }
            let gx = (img.at((px + 1) as usize, py as usize)
                - img.at((px - 1) as usize, py as usize)) as f64
                / 2.0;
            let gy = (img.at(px as usize, (py + 1) as usize)
                - img.at(px as usize, (py - 1) as usize)) as f64
                / 2.0;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let weight = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_w * sigma_w)).exp();
            let theta = gy.atan2(gx).rem_euclid(std::f64::consts::TAU);
            let bin = ((theta / std::f64::consts::TAU) * ORIENTATION_BINS as f64) as usize
                % ORIENTATION_BINS;
            hist[bin] += weight * mag;
        }
    }
    // Circular box smoothing, applied twice.
    for _ in 0..2 {
        let prev = hist;
        for i in 0..ORIENTATION_BINS {
            let l = prev[(i + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
            let r = prev[(i + 1) % ORIENTATION_BINS];
            hist[i] = 0.25 * l + 0.5 * prev[i] + 0.25 * r;
        }
    }
    hist
}

/// Local maxima at or above 0.8x the global peak, with parabolic
/// interpolation of the angle. A flat histogram yields orientation 0.
fn histogram_peaks(hist: &[f64; ORIENTATION_BINS]) -> Vec<f64> {
    let max = hist.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![0.0];
    }
    let mut out = Vec::new();
    for i in 0..ORIENTATION_BINS {
        let l = hist[(i + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
        let c = hist[i];
        let r = hist[(i + 1) % ORIENTATION_BINS];
        if c >= ORIENTATION_PEAK_RATIO * max && c > l && c > r {
            let denom = l - 2.0 * c + r;
            let interp = if denom.abs() < 1e-12 {
                0.0
            } else {
                0.5 * (l - r) / denom
            };
            let angle = (i as f64 + 0.5 + interp) / ORIENTATION_BINS as f64
                * std::f64::consts::TAU;
            out.push(angle.rem_euclid(std::f64::consts::TAU));
        }
    }
    if out.is_empty() {
        // Plateau ties can suppress every strict local maximum.
        let argmax = hist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        out.push(((argmax as f64 + 0.5) / ORIENTATION_BINS as f64) * std::f64::consts::TAU);
    }
    out
}


#[doc(hidden)]
pub mod detect_dbg {
    use std::sync::atomic::Ordering;
    pub fn solve_fail() -> usize { super::DBG_SOLVE_FAIL.load(Ordering::Relaxed) }
    pub fn oob() -> usize { super::DBG_OOB.load(Ordering::Relaxed) }
    pub fn noconv() -> usize { super::DBG_NOCONV.load(Ordering::Relaxed) }
    pub fn contrast() -> usize { super::DBG_CONTRAST.load(Ordering::Relaxed) }
    pub fn edge() -> usize { super::DBG_EDGE.load(Ordering::Relaxed) }
    pub fn bounds() -> usize { super::DBG_BOUNDS.load(Ordering::Relaxed) }
    pub fn ok() -> usize { super::DBG_OK.load(Ordering::Relaxed) }
}
