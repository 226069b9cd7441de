//! Multi-view dataset I/O: image directories, camera metadata, and JSON
//! artifacts.
//!
//! Supported codecs are 8-bit PNG (1/3/4 channels) and binary PPM/PGM. A
//! directory is treated as a scene: images are ordered lexicographically, and
//! a `transforms*.json` camera manifest (fields `camera_angle_x`,
//! `frames[].file_path`, `frames[].transform_matrix`) is picked up when it
//! matches the image set exactly; otherwise it is dropped with a recorded
//! warning. All file writes go through a temp-file-plus-rename so partially
//! written outputs never appear under their final name.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::ImageReader;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::ImageBuffer;
use crate::geometry::TwoViewGroundTruth;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no decodable images found in {0}")]
    NoImages(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("{path}: unsupported format ({reason})")]
    Unsupported { path: PathBuf, reason: String },
    #[error("output directory {path} is not writable: {source}")]
    OutputDir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: cannot encode {channels}-channel image as {format}")]
    Encode {
        path: PathBuf,
        channels: u8,
        format: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// What RGBA images are composited onto when a scene is loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundPolicy {
    Black,
    White,
    Keep,
}

/// Per-frame camera metadata from a `transforms*.json` manifest, aligned with
/// the scene's image order.
#[derive(Debug, Clone)]
pub struct SceneMetadata {
    pub camera_angle_x: f64,
    /// Camera-to-world matrices (OpenGL-style camera: looks down -z, y up).
    pub transforms: Vec<[[f64; 4]; 4]>,
}

impl SceneMetadata {
    /// World-to-camera rotation and translation in the image convention
    /// (x right, y down, z forward) for frame `i`.
    fn world_to_camera(&self, i: usize) -> (Matrix3<f64>, Vector3<f64>) {
        let m = &self.transforms[i];
        let r_c2w = Matrix3::new(
            m[0][0], m[0][1], m[0][2], //
            m[1][0], m[1][1], m[1][2], //
            m[2][0], m[2][1], m[2][2],
        );
        let c = Vector3::new(m[0][3], m[1][3], m[2][3]);
        let r_w2c = r_c2w.transpose();
        let t_w2c = -r_w2c * c;
        // OpenGL camera axes -> image axes: flip y and z.
        let flip = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        (flip * r_w2c, flip * t_w2c)
    }

    /// Ground-truth relative pose and shared intrinsics for an image pair.
    pub fn ground_truth_pair(
        &self,
        i: usize,
        j: usize,
        width: u32,
        height: u32,
    ) -> Option<TwoViewGroundTruth> {
        if i >= self.transforms.len() || j >= self.transforms.len() {
            return None;
        }
        let fx = 0.5 * width as f64 / (0.5 * self.camera_angle_x).tan();
        let intrinsics = Matrix3::new(
            fx,
            0.0,
            width as f64 / 2.0,
            0.0,
            fx,
            height as f64 / 2.0,
            0.0,
            0.0,
            1.0,
        );
        let (r_a, t_a) = self.world_to_camera(i);
        let (r_b, t_b) = self.world_to_camera(j);
        let rotation = r_b * r_a.transpose();
        let translation = t_b - rotation * t_a;
        Some(TwoViewGroundTruth {
            intrinsics,
            rotation,
            translation,
        })
    }
}

/// An ordered multi-view image set plus optional camera metadata.
#[derive(Debug, Clone)]
pub struct SceneDataset {
    pub name: String,
    pub image_paths: Vec<PathBuf>,
    pub metadata: Option<SceneMetadata>,
    pub background: BackgroundPolicy,
    pub warnings: Vec<String>,
}

/// Discovers the images (and camera manifest, if any) under `dir`.
pub fn load_scene(dir: &Path, background: BackgroundPolicy) -> Result<SceneDataset, DatasetError> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut image_paths: Vec<PathBuf> = Vec::new();
    let mut manifest_paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let lower = name.to_ascii_lowercase();
        if lower.ends_with(".png") || lower.ends_with(".ppm") || lower.ends_with(".pgm") {
            image_paths.push(path);
        } else if lower.starts_with("transforms") && lower.ends_with(".json") {
            manifest_paths.push(path);
        }
    }
    if image_paths.is_empty() {
        return Err(DatasetError::NoImages(dir.to_path_buf()));
    }
    image_paths.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));
    manifest_paths.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));

    let mut warnings = Vec::new();
    let mut metadata = None;
    if let Some(manifest) = manifest_paths.first() {
        match read_transforms(manifest, &image_paths) {
            Ok(meta) => metadata = Some(meta),
            Err(reason) => warnings.push(format!(
                "camera metadata {} ignored: {reason}",
                manifest.display()
            )),
        }
    }

    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(SceneDataset {
        name,
        image_paths,
        metadata,
        background,
        warnings,
    })
}

/// Loads a `transforms*.json` camera manifest and aligns it with the given
/// image order. Fails (with the reason) when frames and images do not match
/// one-to-one by file stem.
pub fn load_transforms(
    path: &Path,
    image_paths: &[PathBuf],
) -> Result<SceneMetadata, DatasetError> {
    read_transforms(path, image_paths).map_err(|reason| DatasetError::Decode {
        path: path.to_path_buf(),
        reason,
    })
}

#[derive(Deserialize)]
struct TransformsFile {
    camera_angle_x: f64,
    frames: Vec<TransformsFrame>,
}

#[derive(Deserialize)]
struct TransformsFrame {
    file_path: String,
    transform_matrix: [[f64; 4]; 4],
}

fn read_transforms(path: &Path, image_paths: &[PathBuf]) -> Result<SceneMetadata, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let parsed: TransformsFile = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    if parsed.frames.len() != image_paths.len() {
        return Err(format!(
            "{} frames for {} images",
            parsed.frames.len(),
            image_paths.len()
        ));
    }
    let mut by_stem: BTreeMap<String, [[f64; 4]; 4]> = BTreeMap::new();
    for frame in &parsed.frames {
        let stem = Path::new(&frame.file_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| format!("frame path {:?} has no file stem", frame.file_path))?;
        if by_stem.insert(stem.clone(), frame.transform_matrix).is_some() {
            return Err(format!("duplicate frame for {stem:?}"));
        }
    }
    let mut transforms = Vec::with_capacity(image_paths.len());
    for image in image_paths {
        let stem = image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match by_stem.get(&stem) {
            Some(m) => transforms.push(*m),
            None => return Err(format!("no frame for image {stem:?}")),
        }
    }
    Ok(SceneMetadata {
        camera_angle_x: parsed.camera_angle_x,
        transforms,
    })
}

/// Decodes a PNG/PPM/PGM file into an 8-bit buffer.
pub fn load_image(path: &Path) -> Result<ImageBuffer, DatasetError> {
    let lower = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    match lower.as_str() {
        "png" => load_png(path),
        "ppm" | "pgm" => load_pnm(path),
        other => Err(DatasetError::Unsupported {
            path: path.to_path_buf(),
            reason: format!("extension {other:?}"),
        }),
    }
}

fn load_png(path: &Path) -> Result<ImageBuffer, DatasetError> {
    let reader = ImageReader::open(path).map_err(|e| io_err(path, e))?;
    let decoded = reader.decode().map_err(|e| DatasetError::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (w, h) = (decoded.width(), decoded.height());
    let (channels, data) = match decoded {
        image::DynamicImage::ImageLuma8(img) => (1u8, img.into_raw()),
        image::DynamicImage::ImageRgb8(img) => (3u8, img.into_raw()),
        image::DynamicImage::ImageRgba8(img) => (4u8, img.into_raw()),
        other => {
            return Err(DatasetError::Unsupported {
                path: path.to_path_buf(),
                reason: format!("color type {:?} (expected 8-bit gray/RGB/RGBA)", other.color()),
            })
        }
    };
    ImageBuffer::from_vec(w, h, channels, data).map_err(|e| DatasetError::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn load_pnm(path: &Path) -> Result<ImageBuffer, DatasetError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    parse_pnm(&bytes).map_err(|reason| DatasetError::Decode {
        path: path.to_path_buf(),
        reason,
    })
}

fn parse_pnm(bytes: &[u8]) -> Result<ImageBuffer, String> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1u8,
        Some(b"P6") => 3u8,
        _ => return Err("not a binary PGM/PPM (missing P5/P6 magic)".into()),
    };
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Skip whitespace and '#' comments between header tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if pos == start {
            return Err("malformed header token".into());
        }
        let token = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = token.parse().map_err(|_| "header value out of range")?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported max value {maxval} (expected 255)"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("missing whitespace after header".into()),
    }
    let expected = width * height * channels as usize;
    let data = bytes
        .get(pos..pos + expected)
        .ok_or("truncated pixel data")?
        .to_vec();
    ImageBuffer::from_vec(width as u32, height as u32, channels, data).map_err(|e| e.to_string())
}

/// Encodes `image` to `path`; the format follows the file extension.
///
/// The write is atomic: data goes to a sibling temp file that is renamed into
/// place, so no partial file ever exists under the final name.
pub fn save_image(path: &Path, image: &ImageBuffer) -> Result<(), DatasetError> {
    let lower = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    let mut encoded = Vec::new();
    match lower.as_str() {
        "png" => {
            let color = match image.channels() {
                1 => image::ExtendedColorType::L8,
                3 => image::ExtendedColorType::Rgb8,
                4 => image::ExtendedColorType::Rgba8,
                c => {
                    return Err(DatasetError::Encode {
                        path: path.to_path_buf(),
                        channels: c,
                        format: "png".into(),
                    })
                }
            };
            let encoder = image::codecs::png::PngEncoder::new(&mut encoded);
            image::ImageEncoder::write_image(
                encoder,
                image.data(),
                image.width(),
                image.height(),
                color,
            )
            .map_err(|e| DatasetError::Decode {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        }
        "ppm" | "pgm" => {
            let magic = match (lower.as_str(), image.channels()) {
                ("pgm", 1) => "P5",
                ("ppm", 3) => "P6",
                (_, c) => {
                    return Err(DatasetError::Encode {
                        path: path.to_path_buf(),
                        channels: c,
                        format: lower,
                    })
                }
            };
            encoded.extend_from_slice(
                format!("{magic}\n{} {}\n255\n", image.width(), image.height()).as_bytes(),
            );
            encoded.extend_from_slice(image.data());
        }
        other => {
            return Err(DatasetError::Unsupported {
                path: path.to_path_buf(),
                reason: format!("extension {other:?}"),
            })
        }
    }
    write_atomic(path, &encoded)
}

/// Serializes `value` as pretty JSON to `path` via a temp-file rename.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let json = serde_json::to_vec_pretty(value).expect("JSON serialization cannot fail");
    write_atomic(path, &json)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{file_name}.tmp"));
    {
        let file = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        let mut writer = BufWriter::new(file);
        writer.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
        writer.flush().map_err(|e| io_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Verifies `dir` exists (creating it if needed) and accepts writes.
pub fn ensure_writable_dir(dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|e| DatasetError::OutputDir {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"").map_err(|e| DatasetError::OutputDir {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let _ = fs::remove_file(&probe);
    Ok(())
}

/// Composites RGBA onto the policy background, returning an RGB buffer.
/// Non-RGBA inputs and the `Keep` policy pass through unchanged.
pub fn composite_background(image: &ImageBuffer, policy: BackgroundPolicy) -> ImageBuffer {
    if image.channels() != 4 || policy == BackgroundPolicy::Keep {
        return image.clone();
    }
    let bg = match policy {
        BackgroundPolicy::Black => 0.0,
        BackgroundPolicy::White => 255.0,
        BackgroundPolicy::Keep => unreachable!(),
    };
    let mut out = Vec::with_capacity(image.width() as usize * image.height() as usize * 3);
    for px in image.data().chunks_exact(4) {
        let a = px[3] as f64 / 255.0;
        for &fg in &px[..3] {
            let v = (fg as f64 * a + bg * (1.0 - a)).round();
            out.push(v.clamp(0.0, 255.0) as u8);
        }
    }
    ImageBuffer::from_vec(image.width(), image.height(), 3, out).expect("computed length")
}
