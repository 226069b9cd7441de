//! Synthetic two-view scenes with known geometry, plus a texture renderer so
//! the full feature pipeline can run on images with exact ground truth.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::buffer::{ImageBuffer, Region};

use super::diagnose::TwoViewGroundTruth;
use super::CameraModel;

/// Rendered / projected image edge for synthetic scenes.
pub const SYNTH_IMAGE_SIZE: u32 = 640;
const FOCAL: f64 = 600.0;
/// Projections stay this far from the image border so pixel noise and stamp
/// textures stay inside.
const PROJECTION_BORDER: f64 = 24.0;

/// A seeded two-view scene: cameras, world points, and their projections.
#[derive(Debug, Clone)]
pub struct SyntheticTwoView {
    pub camera_a: CameraModel,
    pub camera_b: CameraModel,
    pub world_points: Vec<Vector3<f64>>,
    pub projections_a: Vec<Vector2<f64>>,
    pub projections_b: Vec<Vector2<f64>>,
    /// Set when the camera centers coincide (no epipolar geometry exists).
    pub degenerate: bool,
    seed: u64,
}

impl SyntheticTwoView {
    pub fn intrinsics(&self) -> Matrix3<f64> {
        self.camera_a.intrinsics
    }

    pub fn image_size(&self) -> (u32, u32) {
        (SYNTH_IMAGE_SIZE, SYNTH_IMAGE_SIZE)
    }

    /// Relative pose (R, t) mapping camera-A coordinates to camera-B.
    pub fn relative_pose(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let r = self.camera_b.rotation * self.camera_a.rotation.transpose();
        let t = self.camera_b.translation - r * self.camera_a.translation;
        (r, t)
    }

    /// Ground-truth fundamental matrix, Frobenius-normalized with the
    /// dominant entry positive (the 8-point sign convention).
    pub fn fundamental(&self) -> Matrix3<f64> {
        let mut f = self.fundamental_unnormalized();
        f /= f.norm();
        let mut dominant = 0.0f64;
        for v in f.iter() {
            if v.abs() > dominant.abs() {
                dominant = *v;
            }
        }
        if dominant < 0.0 {
            f = -f;
        }
        f
    }

    /// `K_b^-T [t]x R K_a^-1` without normalization; entries keep the raw
    /// calibrated scale, which keeps the algebraic epipolar residual of exact
    /// correspondences at machine precision.
    pub fn fundamental_unnormalized(&self) -> Matrix3<f64> {
        let (r, t) = self.relative_pose();
        let essential = t.cross_matrix() * r;
        let ka_inv = self.camera_a.intrinsics.try_inverse().expect("valid K");
        let kb_inv = self.camera_b.intrinsics.try_inverse().expect("valid K");
        kb_inv.transpose() * essential * ka_inv
    }

    pub fn ground_truth(&self) -> TwoViewGroundTruth {
        let (rotation, translation) = self.relative_pose();
        TwoViewGroundTruth {
            intrinsics: self.intrinsics(),
            rotation,
            translation,
        }
    }

    /// Projection pairs in input order.
    pub fn matches(&self) -> Vec<(Vector2<f64>, Vector2<f64>)> {
        self.projections_a
            .iter()
            .zip(&self.projections_b)
            .map(|(a, b)| (*a, *b))
            .collect()
    }

    /// Same scene re-generated with camera B translated along +x and not
    /// rotated (pure translation), for oracle cases that need it.
    pub fn with_pure_translation(&self) -> SyntheticTwoView {
        let baseline = (self.camera_b.center() - self.camera_a.center()).norm();
        build_scene(
            self.world_points.len(),
            baseline,
            0.0,
            self.seed,
            CameraLayout::PureTranslation,
        )
    }
}

fn intrinsics_matrix() -> Matrix3<f64> {
    let c = SYNTH_IMAGE_SIZE as f64 / 2.0;
    Matrix3::new(FOCAL, 0.0, c, 0.0, FOCAL, c, 0.0, 0.0, 1.0)
}

enum CameraLayout {
    /// Camera B offset along +x and rotated to look at the scene center.
    LookAt,
    /// Camera B offset along +x with identity rotation.
    PureTranslation,
}

/// Generates a seeded random scene: `n_points` box-distributed points in
/// front of two cameras separated by `baseline` world units, with optional
/// Gaussian pixel noise on the projections. Deterministic per seed.
/// A zero baseline produces a scene flagged degenerate.
pub fn synth_two_view(
    n_points: usize,
    baseline: f64,
    noise_px: f64,
    seed: u64,
) -> SyntheticTwoView {
    build_scene(n_points, baseline, noise_px, seed, CameraLayout::LookAt)
}

fn build_scene(
    n_points: usize,
    baseline: f64,
    noise_px: f64,
    seed: u64,
    layout: CameraLayout,
) -> SyntheticTwoView {
    let k = intrinsics_matrix();
    let camera_a = CameraModel::new(k, Matrix3::identity(), Vector3::zeros()).expect("valid");
    let center_b = Vector3::new(baseline, 0.0, 0.0);
    let rotation_b = match layout {
        CameraLayout::PureTranslation => Matrix3::identity(),
        CameraLayout::LookAt => look_at_rotation(&center_b, &Vector3::new(0.0, 0.0, 6.0)),
    };
    let camera_b = CameraModel::new(k, rotation_b, -rotation_b * center_b).expect("valid");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world_points = Vec::with_capacity(n_points);
    let mut projections_a = Vec::with_capacity(n_points);
    let mut projections_b = Vec::with_capacity(n_points);
    let limit = (SYNTH_IMAGE_SIZE as f64) - PROJECTION_BORDER;
    let mut attempts = 0usize;
    while world_points.len() < n_points && attempts < 10_000 * n_points.max(1) {
        attempts += 1;
        let p = Vector3::new(
            rng.random_range(-2.5..2.5),
            rng.random_range(-2.5..2.5),
            rng.random_range(4.0..8.0),
        );
        let (Some(pa), Some(pb)) = (camera_a.project(&p), camera_b.project(&p)) else {
            continue;
        };
        let inside = |v: &Vector2<f64>| {
            v.x >= PROJECTION_BORDER && v.x < limit && v.y >= PROJECTION_BORDER && v.y < limit
        };
        if !inside(&pa) || !inside(&pb) {
            continue;
        }
        world_points.push(p);
        projections_a.push(pa);
        projections_b.push(pb);
    }

    if noise_px > 0.0 {
        let normal = rand_distr::Normal::new(0.0, noise_px).expect("finite stddev");
        for p in projections_a.iter_mut().chain(projections_b.iter_mut()) {
            p.x += rand_distr::Distribution::sample(&normal, &mut rng);
            p.y += rand_distr::Distribution::sample(&normal, &mut rng);
        }
    }

    SyntheticTwoView {
        camera_a,
        camera_b,
        world_points,
        projections_a,
        projections_b,
        degenerate: baseline.abs() < 1e-12,
        seed,
    }
}

/// World-to-camera rotation for a camera at `center` looking at `target`,
/// x-axis kept roughly aligned with world +x, y pointing down-scene.
fn look_at_rotation(center: &Vector3<f64>, target: &Vector3<f64>) -> Matrix3<f64> {
    let z = (target - center).normalize();
    let x = Vector3::new(0.0, 1.0, 0.0).cross(&z).normalize();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

/// Renders both views as single-channel images: a smooth gradient background
/// plus one unique random texture stamp per world point, placed at the
/// (sub-pixel) projected position in each view. Stamps are smooth mixtures
/// of random Gaussian blobs, so each point keeps a distinctive appearance
/// that survives moderate blur. Deterministic per seed.
pub fn render_views(
    scene: &SyntheticTwoView,
    stamp_px: u32,
    seed: u64,
) -> (ImageBuffer, ImageBuffer) {
    let (w, h) = scene.image_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stamps: Vec<Vec<u8>> = (0..scene.world_points.len())
        .map(|_| make_stamp(stamp_px as usize, &mut rng))
        .collect();

    let render_one = |projections: &[Vector2<f64>]| {
        let mut img = ImageBuffer::new(w, h, 1).expect("valid channels");
        for y in 0..h {
            for x in 0..w {
                let v = 30.0
                    + 40.0 * x as f64 / (w - 1) as f64
                    + 40.0 * y as f64 / (h - 1) as f64
                    + dither(x, y);
                img.set_sample(x, y, 0, v.round().clamp(0.0, 255.0) as u8);
            }
        }
        let half = (stamp_px as f64 - 1.0) / 2.0;
        // Stamps feather into the background over a 3 px ramp so their
        // square outlines do not become features of their own.
        let ramp = 3.0;
        let edge_weight = |s: f64| (s.min(stamp_px as f64 - 1.0 - s) / ramp).clamp(0.0, 1.0);
        for (stamp, p) in stamps.iter().zip(projections) {
            let x0 = (p.x - half).floor().max(0.0) as u32;
            let y0 = (p.y - half).floor().max(0.0) as u32;
            let x1 = ((p.x + half).ceil() as u32 + 1).min(w);
            let y1 = ((p.y + half).ceil() as u32 + 1).min(h);
            for py in y0..y1 {
                for px in x0..x1 {
                    let sx = px as f64 - (p.x - half);
                    let sy = py as f64 - (p.y - half);
                    if let Some(v) = sample_stamp(stamp, stamp_px, sx, sy) {
                        let weight = edge_weight(sx) * edge_weight(sy);
                        let bg = img.sample(px, py, 0) as f64;
                        let blended = bg + weight * (v as f64 - bg);
                        img.set_sample(px, py, 0, blended.round().clamp(0.0, 255.0) as u8);
                    }
                }
            }
        }
        img
    };

    let view_a = render_one(&scene.projections_a);
    let view_b = render_one(&scene.projections_b);
    (view_a, view_b)
}

struct StampBlob {
    cx: f64,
    cy: f64,
    sigma_u: f64,
    sigma_v: f64,
    cos: f64,
    sin: f64,
    amp: f64,
}

fn make_stamp(edge: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    // Two coarse blobs set the stamp's large-scale identity; the fine ones
    // individualize it at detector scales near sigma0.
    let fine_count = rng.random_range(4..=6);
    let mut blobs: Vec<StampBlob> = Vec::new();
    for i in 0..2 + fine_count {
        let coarse = i < 2;
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let sign = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
        let (su, sv) = if coarse {
            (rng.random_range(3.5..6.0), rng.random_range(2.5..4.5))
        } else {
            (rng.random_range(1.4..3.2), rng.random_range(1.0..2.2))
        };
        blobs.push(StampBlob {
            cx: rng.random_range(2.0..edge as f64 - 2.0),
            cy: rng.random_range(2.0..edge as f64 - 2.0),
            sigma_u: su,
            sigma_v: sv,
            cos: theta.cos(),
            sin: theta.sin(),
            amp: sign * rng.random_range(0.35..0.75),
        });
    }
    (0..edge * edge)
        .map(|i| {
            let x = (i % edge) as f64;
            let y = (i / edge) as f64;
            let mut v = 0.5;
            for b in &blobs {
                let dx = x - b.cx;
                let dy = y - b.cy;
                let u = (dx * b.cos + dy * b.sin) / b.sigma_u;
                let w = (-dx * b.sin + dy * b.cos) / b.sigma_v;
                v += b.amp * (-(u * u + w * w) / 2.0).exp();
            }
            (20.0 + 235.0 * v.clamp(0.0, 1.0)).round() as u8
        })
        .collect()
}

fn sample_stamp(stamp: &[u8], edge: u32, x: f64, y: f64) -> Option<u8> {
    if x < 0.0 || y < 0.0 || x > edge as f64 - 1.0 || y > edge as f64 - 1.0 {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(edge as usize - 1);
    let y1 = (y0 + 1).min(edge as usize - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let e = edge as usize;
    let v = stamp[y0 * e + x0] as f64 * (1.0 - fx) * (1.0 - fy)
        + stamp[y0 * e + x1] as f64 * fx * (1.0 - fy)
        + stamp[y1 * e + x0] as f64 * (1.0 - fx) * fy
        + stamp[y1 * e + x1] as f64 * fx * fy;
    Some(v.round() as u8)
}

/// Appends identical-coordinate spurious pairs until they make up
/// `fraction` of the returned match list; coordinates are uniform over
/// `region`. A zero fraction returns the input unchanged.
pub fn inject_spurious_matches(
    matches: &[(Vector2<f64>, Vector2<f64>)],
    fraction: f64,
    region: Region,
    seed: u64,
) -> Vec<(Vector2<f64>, Vector2<f64>)> {
    assert!((0.0..1.0).contains(&fraction), "fraction must be in [0, 1)");
    let mut out = matches.to_vec();
    if fraction == 0.0 {
        return out;
    }
    let n = matches.len() as f64;
    let k = (fraction * n / (1.0 - fraction)).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..k {
        let x = rng.random_range(region.x as f64..(region.x + region.width) as f64);
        let y = rng.random_range(region.y as f64..(region.y + region.height) as f64);
        let p = Vector2::new(x, y);
        out.push((p, p));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_projections_satisfy_epipolar_constraint() {
        let scene = synth_two_view(50, 1.0, 0.0, 31);
        assert_eq!(scene.world_points.len(), 50);
        let f_raw = scene.fundamental_unnormalized();
        for (a, b) in scene.matches() {
            let xa = Vector3::new(a.x, a.y, 1.0);
            let xb = Vector3::new(b.x, b.y, 1.0);
            let residual = xb.dot(&(f_raw * xa));
            assert!(residual.abs() < 1e-10, "residual {residual}");
        }
    }

    #[test]
    fn zero_baseline_sets_degenerate_flag() {
        let scene = synth_two_view(10, 0.0, 0.0, 32);
        assert!(scene.degenerate);
        let scene = synth_two_view(10, 0.5, 0.0, 32);
        assert!(!scene.degenerate);
    }

    #[test]
    fn scenes_are_deterministic_per_seed() {
        let a = synth_two_view(20, 1.0, 0.5, 33);
        let b = synth_two_view(20, 1.0, 0.5, 33);
        assert_eq!(a.world_points, b.world_points);
        assert_eq!(a.projections_a, b.projections_a);
        assert_eq!(a.projections_b, b.projections_b);
        let c = synth_two_view(20, 1.0, 0.5, 34);
        assert_ne!(a.projections_a, c.projections_a);
    }

    #[test]
    fn projections_lie_inside_bounds_and_in_front() {
        let scene = synth_two_view(64, 1.5, 0.0, 35);
        let limit = SYNTH_IMAGE_SIZE as f64;
        for (a, b) in scene.matches() {
            for p in [a, b] {
                assert!(p.x >= 0.0 && p.x < limit);
                assert!(p.y >= 0.0 && p.y < limit);
            }
        }
        for p in &scene.world_points {
            let ca = scene.camera_a.rotation * p + scene.camera_a.translation;
            let cb = scene.camera_b.rotation * p + scene.camera_b.translation;
            assert!(ca.z > 0.0 && cb.z > 0.0);
        }
    }

    #[test]
    fn rendered_views_are_deterministic() {
        let scene = synth_two_view(12, 1.0, 0.0, 36);
        let (a1, b1) = render_views(&scene, 13, 7);
        let (a2, b2) = render_views(&scene, 13, 7);
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_ne!(a1, b1);
    }

    #[test]
    fn injection_reaches_requested_fraction() {
        let scene = synth_two_view(40, 1.0, 0.0, 37);
        let region = Region {
            x: 0,
            y: 0,
            width: 100,
            height: 100,
        };
        let contaminated = inject_spurious_matches(&scene.matches(), 0.75, region, 1);
        let spurious = contaminated.len() - 40;
        let fraction = spurious as f64 / contaminated.len() as f64;
        assert!(fraction >= 0.75);
        for (a, b) in &contaminated[40..] {
            assert_eq!(a, b);
            assert!(region.contains(a.x, a.y));
        }
        let untouched = inject_spurious_matches(&scene.matches(), 0.0, region, 1);
        assert_eq!(untouched.len(), 40);
    }
}
