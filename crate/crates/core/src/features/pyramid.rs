//! Gaussian scale space and its difference-of-Gaussian stacks.
//!
//! Octave 0 is at input resolution; each following octave halves it. With
//! `s` scales per octave an octave holds `s + 3` Gaussian levels, so `s + 2`
//! DoG levels, and the per-level blur grows geometrically by `2^(1/s)`.
//!
//! The stack bottom sits at `sigma0 / 2`, so the first DoG level the
//! detector can scan lies near the native image scale. Detectors that
//! upsample the input 2x achieve the same fine-scale coverage; the octave
//! layout here is fixed at native resolution, so the stack shifts down
//! instead. Level sigmas measure blur applied to the input image, which
//! makes the DoG response of a Gaussian blob of scale `sigma*` peak at the
//! level whose sigma is nearest `sigma*`.

use crate::buffer::ImageBuffer;

use super::FeatureError;

/// Single-channel f32 image on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayF32 {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayF32 {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample; coordinates outside the image clamp to the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, self.width as f64 - 1.0);
        let y = y.clamp(0.0, self.height as f64 - 1.0);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = self.at(x0, y0) as f64;
        let v10 = self.at(x1, y0) as f64;
        let v01 = self.at(x0, y1) as f64;
        let v11 = self.at(x1, y1) as f64;
        v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }
}

/// ITU-R BT.601 luma conversion onto [0, 1].
pub fn to_gray(image: &ImageBuffer) -> GrayF32 {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut data = Vec::with_capacity(w * h);
    match image.channels() {
        1 => {
            for &v in image.data() {
                data.push(v as f32 / 255.0);
            }
        }
        _ => {
            let step = image.channels() as usize;
            for px in image.data().chunks_exact(step) {
                let y = 0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32;
                data.push(y / 255.0);
            }
        }
    }
    GrayF32::new(w, h, data)
}

/// Separable Gaussian blur with replicated borders; kernel radius `ceil(4*sigma)`.
pub fn gaussian_blur_f32(img: &GrayF32, sigma: f64) -> GrayF32 {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (sigma * 4.0).ceil().max(1.0) as i64;
    let mut weights: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32)
        .collect();
    let sum: f32 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }

    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut tmp = vec![0.0f32; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &wt) in weights.iter().enumerate() {
                let sx = (x + k as i64 - radius).clamp(0, w - 1);
                acc += wt * img.at(sx as usize, y as usize);
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0f32; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &wt) in weights.iter().enumerate() {
                let sy = (y + k as i64 - radius).clamp(0, h - 1);
                acc += wt * tmp[(sy * w + x) as usize];
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    GrayF32::new(w as usize, h as usize, out)
}

fn downsample2(img: &GrayF32) -> GrayF32 {
    let w = (img.width() / 2).max(1);
    let h = (img.height() / 2).max(1);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(img.at(x * 2, y * 2));
        }
    }
    GrayF32::new(w, h, data)
}

/// One octave: `s + 3` Gaussian levels, `s + 2` DoG levels, and per-level
/// absolute sigmas (blur relative to the input image).
#[derive(Debug, Clone)]
pub struct PyramidOctave {
    pub gaussians: Vec<GrayF32>,
    pub dogs: Vec<GrayF32>,
    pub sigmas: Vec<f64>,
}

impl PyramidOctave {
    pub fn width(&self) -> usize {
        self.gaussians[0].width()
    }

    pub fn height(&self) -> usize {
        self.gaussians[0].height()
    }
}

#[derive(Debug, Clone)]
pub struct ScaleSpacePyramid {
    pub octaves: Vec<PyramidOctave>,
    pub scales_per_octave: usize,
    pub sigma0: f64,
}

/// Builds the Gaussian/DoG scale space.
pub fn build_pyramid(
    image: &ImageBuffer,
    octaves: usize,
    scales_per_octave: usize,
    sigma0: f64,
) -> Result<ScaleSpacePyramid, FeatureError> {
    if octaves == 0 {
        return Err(FeatureError::NoOctaves);
    }
    if scales_per_octave < 2 {
        return Err(FeatureError::TooFewScales(scales_per_octave));
    }
    let min_dim = image.width().min(image.height());
    if (min_dim as u64) < (1u64 << octaves) {
        return Err(FeatureError::ImageTooSmall {
            width: image.width(),
            height: image.height(),
            octaves,
        });
    }

    let s = scales_per_octave;
    let k = 2f64.powf(1.0 / s as f64);
    let levels_per_octave = s + 3;
    let sigma_base = sigma0 / 2.0;
    let gray = to_gray(image);
    let mut base = gaussian_blur_f32(&gray, sigma_base);

    let mut out_octaves = Vec::with_capacity(octaves);
    for o in 0..octaves {
        let octave_scale = 2f64.powi(o as i32);
        let mut gaussians = Vec::with_capacity(levels_per_octave);
        let mut sigmas = Vec::with_capacity(levels_per_octave);
        gaussians.push(base.clone());
        sigmas.push(octave_scale * sigma_base);
        for i in 1..levels_per_octave {
            // Incremental blur in this octave's pixel units.
            let prev = sigma_base * k.powi(i as i32 - 1);
            let next = sigma_base * k.powi(i as i32);
            let diff = (next * next - prev * prev).sqrt();
            let blurred = gaussian_blur_f32(&gaussians[i - 1], diff);
            gaussians.push(blurred);
            sigmas.push(octave_scale * next);
        }
        let dogs = (0..levels_per_octave - 1)
            .map(|i| {
                let a = &gaussians[i];
                let b = &gaussians[i + 1];
                let data = b
                    .data()
                    .iter()
                    .zip(a.data())
                    .map(|(&hi, &lo)| hi - lo)
                    .collect();
                GrayF32::new(a.width(), a.height(), data)
            })
            .collect();

        // Next octave seeds from the level at twice the base blur.
        let next_base = downsample2(&gaussians[s]);
        out_octaves.push(PyramidOctave {
            gaussians,
            dogs,
            sigmas,
        });
        base = next_base;
    }

    Ok(ScaleSpacePyramid {
        octaves: out_octaves,
        scales_per_octave: s,
        sigma0,
    })
}
