//! Image-quality metrics and batch evaluation reports.
//!
//! PSNR is `10 * log10(255^2 / MSE)` over all samples, infinite exactly when
//! the two images are byte-identical. SSIM is the mean local index under a
//! Gaussian window (11x11, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 255),
//! computed per channel and averaged. For images smaller than the standard
//! window, the window shrinks to the largest odd size that fits so the metric
//! stays defined down to 3x3 inputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::ImageBuffer;
use crate::SCHEMA_VERSION;

pub const SSIM_WINDOW: u32 = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_L: f64 = 255.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: {aw}x{ah}x{ac} vs {bw}x{bh}x{bc}")]
    ShapeMismatch {
        aw: u32,
        ah: u32,
        ac: u8,
        bw: u32,
        bh: u32,
        bc: u8,
    },
    #[error("image {0}x{1} too small for ssim (min dimension 3)")]
    TooSmall(u32, u32),
    #[error("pair count mismatch: {0} vs {1}")]
    CountMismatch(usize, usize),
}

fn check_shapes(a: &ImageBuffer, b: &ImageBuffer) -> Result<(), MetricsError> {
    if !a.same_shape(b) {
        return Err(MetricsError::ShapeMismatch {
            aw: a.width(),
            ah: a.height(),
            ac: a.channels(),
            bw: b.width(),
            bh: b.height(),
            bc: b.channels(),
        });
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` iff `a == b` byte-wise.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let mut sum_sq = 0.0f64;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = x as f64 - y as f64;
        sum_sq += d * d;
    }
    if sum_sq == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sum_sq / a.data().len() as f64;
    Ok(10.0 * (SSIM_L * SSIM_L / mse).log10())
}

/// Effective SSIM window edge for a given minimum image dimension.
pub fn ssim_effective_window(min_dim: u32) -> u32 {
    let w = SSIM_WINDOW.min(min_dim);
    if w % 2 == 0 {
        w - 1
    } else {
        w
    }
}

/// Mean structural similarity over all channels; value in (-1, 1].
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let min_dim = a.width().min(a.height());
    if min_dim < 3 {
        return Err(MetricsError::TooSmall(a.width(), a.height()));
    }
    let win = ssim_effective_window(min_dim) as usize;
    let weights = gaussian_window(win, SSIM_SIGMA);
    let (w, h) = (a.width() as usize, a.height() as usize);
    let channels = a.channels();

    let c1 = (SSIM_K1 * SSIM_L) * (SSIM_K1 * SSIM_L);
    let c2 = (SSIM_K2 * SSIM_L) * (SSIM_K2 * SSIM_L);

    let mut channel_sum = 0.0f64;
    for c in 0..channels {
        let xa = channel_f64(a, c);
        let xb = channel_f64(b, c);
        let mu_a = filter_valid(&xa, w, h, &weights);
        let mu_b = filter_valid(&xb, w, h, &weights);
        let sq_a = filter_valid(&mul(&xa, &xa), w, h, &weights);
        let sq_b = filter_valid(&mul(&xb, &xb), w, h, &weights);
        let cross = filter_valid(&mul(&xa, &xb), w, h, &weights);

        let mut acc = 0.0f64;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = sq_a[i] - ma * ma;
            let var_b = sq_b[i] - mb * mb;
            let cov = cross[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            acc += num / den;
        }
        channel_sum += acc / mu_a.len() as f64;
    }
    Ok(channel_sum / channels as f64)
}

fn channel_f64(img: &ImageBuffer, c: u8) -> Vec<f64> {
    let ch = img.channels() as usize;
    img.data()
        .iter()
        .skip(c as usize)
        .step_by(ch)
        .map(|&v| v as f64)
        .collect()
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Normalized 1-D Gaussian taps; the separable product reproduces the
/// normalized 2-D window.
fn gaussian_window(win: usize, sigma: f64) -> Vec<f64> {
    let r = (win / 2) as f64;
    let mut w: Vec<f64> = (0..win)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Separable valid-mode correlation: output is (w - win + 1) x (h - win + 1).
fn filter_valid(data: &[f64], w: usize, h: usize, weights: &[f64]) -> Vec<f64> {
    let win = weights.len();
    let ow = w - win + 1;
    let oh = h - win + 1;
    let mut horiz = vec![0.0f64; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, wt) in weights.iter().enumerate() {
                acc += wt * data[y * w + x + k];
            }
            horiz[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0f64; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, wt) in weights.iter().enumerate() {
                acc += wt * horiz[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Serializes infinite PSNR as the string `"inf"` to mirror results tables.
pub mod psnr_serde {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(*value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Text(s) => Err(D::Error::custom(format!("bad psnr value {s:?}"))),
        }
    }
}

/// Similarity measurements for one image pair. `lpips` is pass-through only,
/// populated from an external sidecar when supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub ssim: f64,
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
    pub lpips: Option<f64>,
}

/// Which way a comparison runs; fixes the desired direction of each metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PoisonedVsOriginal,
    PoisonedVsRender,
}

impl Direction {
    /// (ssim, psnr, lpips) arrows: which way is "good" for this direction.
    pub fn arrows(&self) -> (&'static str, &'static str, &'static str) {
        match self {
            Direction::PoisonedVsOriginal => ("↑", "↑", "↓"),
            Direction::PoisonedVsRender => ("↓", "↓", "↑"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scene: String,
    #[serde(flatten)]
    pub metrics: MetricPair,
}

/// SSIM parameterization recorded alongside every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: u32,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: SSIM_WINDOW,
            sigma: SSIM_SIGMA,
            k1: SSIM_K1,
            k2: SSIM_K2,
        }
    }
}

/// Per-scene metrics plus mean and sample standard deviation. Infinite PSNR
/// values are counted separately and excluded from the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub direction: Direction,
    pub ssim_params: SsimParams,
    pub scenes: Vec<SceneMetrics>,
    pub ssim_mean: f64,
    pub ssim_std: f64,
    pub psnr_mean: Option<f64>,
    pub psnr_std: Option<f64>,
    pub psnr_inf_count: usize,
    pub lpips_mean: Option<f64>,
    pub lpips_std: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Evaluates aligned image sets pairwise. `names[i]` labels pair `i`; `lpips`
/// supplies externally computed values keyed by name.
pub fn evaluate_pairs(
    a: &[ImageBuffer],
    b: &[ImageBuffer],
    names: &[String],
    direction: Direction,
    lpips: Option<&BTreeMap<String, f64>>,
) -> Result<AggregateReport, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::CountMismatch(a.len(), b.len()));
    }
    if names.len() != a.len() {
        return Err(MetricsError::CountMismatch(names.len(), a.len()));
    }
    let mut scenes = Vec::with_capacity(a.len());
    for ((ia, ib), name) in a.iter().zip(b).zip(names) {
        let pair = MetricPair {
            ssim: ssim(ia, ib)?,
            psnr_db: psnr(ia, ib)?,
            lpips: lpips.and_then(|m| m.get(name).copied()),
        };
        scenes.push(SceneMetrics {
            scene: name.clone(),
            metrics: pair,
        });
    }

    let ssim_vals: Vec<f64> = scenes.iter().map(|s| s.metrics.ssim).collect();
    let (ssim_mean, ssim_std) = mean_std(&ssim_vals);
    let psnr_finite: Vec<f64> = scenes
        .iter()
        .map(|s| s.metrics.psnr_db)
        .filter(|v| v.is_finite())
        .collect();
    let psnr_inf_count = scenes.len() - psnr_finite.len();
    let (psnr_mean, psnr_std) = if psnr_finite.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&psnr_finite);
        (Some(m), Some(s))
    };
    let lpips_vals: Vec<f64> = scenes.iter().filter_map(|s| s.metrics.lpips).collect();
    let (lpips_mean, lpips_std) = if lpips_vals.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&lpips_vals);
        (Some(m), Some(s))
    };

    Ok(AggregateReport {
        schema_version: SCHEMA_VERSION,
        direction,
        ssim_params: SsimParams::default(),
        scenes,
        ssim_mean,
        ssim_std,
        psnr_mean,
        psnr_std,
        psnr_inf_count,
        lpips_mean,
        lpips_std,
    })
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

impl AggregateReport {
    /// CSV in the results-table column order: scene, ssim, psnr, lpips.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene,ssim,psnr,lpips\n");
        for s in &self.scenes {
            out.push_str(&format!(
                "{},{:.6},{},{}\n",
                s.scene,
                s.metrics.ssim,
                fmt_psnr(s.metrics.psnr_db),
                fmt_opt(s.metrics.lpips),
            ));
        }
        let psnr_mean = match (self.psnr_mean, self.psnr_inf_count) {
            (Some(m), _) => format!("{m:.4}"),
            (None, n) if n > 0 => "inf".to_string(),
            _ => String::new(),
        };
        out.push_str(&format!(
            "mean,{:.6},{},{}\n",
            self.ssim_mean,
            psnr_mean,
            fmt_opt(self.lpips_mean)
        ));
        out.push_str(&format!(
            "std,{:.6},{},{}\n",
            self.ssim_std,
            fmt_opt(self.psnr_std),
            fmt_opt(self.lpips_std)
        ));
        out
    }

    /// Human-readable table for stdout, with direction arrows.
    pub fn to_table(&self) -> String {
        let (sa, pa, la) = self.direction.arrows();
        let mut out = format!(
            "{:<24} {:>10} {:>10} {:>10}\n",
            "scene",
            format!("ssim{sa}"),
            format!("psnr{pa}"),
            format!("lpips{la}")
        );
        for s in &self.scenes {
            out.push_str(&format!(
                "{:<24} {:>10.4} {:>10} {:>10}\n",
                s.scene,
                s.metrics.ssim,
                fmt_psnr(s.metrics.psnr_db),
                s.metrics
                    .lpips
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into()),
            ));
        }
        let psnr_mean = match (self.psnr_mean, self.psnr_inf_count) {
            (Some(m), _) => format!("{m:.2}"),
            (None, n) if n > 0 => "inf".to_string(),
            _ => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<24} {:>10.4} {:>10} {:>10}\n",
            "mean",
            self.ssim_mean,
            psnr_mean,
            self.lpips_mean
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
        ));
        out.push_str(&format!(
            "{:<24} {:>10.4} {:>10} {:>10}\n",
            "std",
            self.ssim_std,
            self.psnr_std
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "-".into()),
            self.lpips_std
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
        ));
        out
    }
}
