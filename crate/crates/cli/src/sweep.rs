//! Ablation sweeps: poison + evaluate + diagnose once per axis value.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use mvpoison_core::dataset::{self, BackgroundPolicy};
use mvpoison_core::metrics::Direction;
use mvpoison_core::pattern::{PatchSpec, PatternKind};
use mvpoison_core::poison::poison_dataset;

use crate::commands::{diagnose_first_pair, evaluate_directories};
use crate::SweepArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PatchSize,
    BlockSize,
    Contrast,
    Alpha,
    PatternKind,
    PoisonRatio,
}

impl SweepAxis {
    fn name(&self) -> &'static str {
        match self {
            SweepAxis::PatchSize => "patch_size",
            SweepAxis::BlockSize => "block_size",
            SweepAxis::Contrast => "contrast",
            SweepAxis::Alpha => "alpha",
            SweepAxis::PatternKind => "pattern_kind",
            SweepAxis::PoisonRatio => "poison_ratio",
        }
    }
}

fn default_ratio() -> f64 {
    1.0
}

fn default_background() -> BackgroundPolicy {
    BackgroundPolicy::Black
}

/// Sweep configuration file: one axis, its values, and the base spec every
/// cell starts from.
#[derive(Debug, Clone, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<serde_json::Value>,
    #[serde(default)]
    pub base: PatchSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_background")]
    pub background: BackgroundPolicy,
}

/// One validated sweep cell: label, effective spec, effective ratio.
struct SweepCell {
    label: String,
    value_text: String,
    spec: PatchSpec,
    ratio: f64,
}

fn as_u32(value: &serde_json::Value) -> Result<u32> {
    value
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .with_context(|| format!("expected a non-negative integer, got {value}"))
}

fn as_fraction(value: &serde_json::Value) -> Result<f64> {
    value
        .as_f64()
        .with_context(|| format!("expected a number, got {value}"))
}

fn build_cells(config: &SweepConfig) -> Result<Vec<SweepCell>> {
    if config.values.is_empty() {
        bail!("sweep config has an empty values list");
    }
    config
        .values
        .iter()
        .map(|value| {
            let mut spec = config.base.clone();
            let mut ratio = config.ratio;
            let value_text = match config.axis {
                SweepAxis::PatchSize => {
                    spec.size_px = as_u32(value)?;
                    spec.size_px.to_string()
                }
                SweepAxis::BlockSize => {
                    spec.block_px = as_u32(value)?;
                    spec.block_px.to_string()
                }
                SweepAxis::Contrast => {
                    let level = as_u32(value)?;
                    if level > 255 {
                        bail!("contrast {level} out of range 0-255");
                    }
                    spec.bright_level = level as u8;
                    level.to_string()
                }
                SweepAxis::Alpha => {
                    spec.alpha = as_fraction(value)?;
                    format!("{}", spec.alpha)
                }
                SweepAxis::PatternKind => {
                    let kind: PatternKind = serde_json::from_value(value.clone())
                        .with_context(|| format!("bad pattern kind {value}"))?;
                    spec.kind = kind;
                    value.as_str().unwrap_or_default().to_string()
                }
                SweepAxis::PoisonRatio => {
                    ratio = as_fraction(value)?;
                    if !(ratio > 0.0 && ratio <= 1.0) {
                        bail!("poison ratio {ratio} outside (0, 1]");
                    }
                    format!("{ratio}")
                }
            };
            spec.validate()
                .with_context(|| format!("value {value} produces an invalid spec"))?;
            Ok(SweepCell {
                label: format!("{}_{}", config.axis.name(), value_text.replace('.', "p")),
                value_text,
                spec,
                ratio,
            })
        })
        .collect()
}

struct CellRow {
    value: String,
    status: String,
    poisoned: usize,
    ssim_mean: Option<f64>,
    ssim_std: Option<f64>,
    psnr_mean: Option<String>,
    total_matches: Option<usize>,
    patch_match_fraction: Option<f64>,
    patch_area_fraction: Option<f64>,
    rot_err_no_ransac: Option<f64>,
    rot_err_ransac: Option<f64>,
}

pub fn run_sweep(args: &SweepArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("{}", args.config.display()))?;
    let config: SweepConfig =
        serde_json::from_str(&text).with_context(|| format!("{}", args.config.display()))?;
    let cells = build_cells(&config)?;
    let scene = dataset::load_scene(&args.input, config.background)?;
    dataset::ensure_writable_dir(&args.output)?;

    let mut rows = Vec::new();
    let mut any_ok = false;
    for cell in &cells {
        match run_cell(args, &config, cell, &scene) {
            Ok(row) => {
                any_ok = true;
                rows.push(row);
            }
            Err(e) => {
                eprintln!("cell {}: {e:#}", cell.label);
                rows.push(CellRow {
                    value: cell.value_text.clone(),
                    status: format!("error: {e:#}").replace(',', ";"),
                    poisoned: 0,
                    ssim_mean: None,
                    ssim_std: None,
                    psnr_mean: None,
                    total_matches: None,
                    patch_match_fraction: None,
                    patch_area_fraction: None,
                    rot_err_no_ransac: None,
                    rot_err_ransac: None,
                });
            }
        }
    }

    let mut csv = String::from(
        "axis,value,status,poisoned,ssim_mean,ssim_std,psnr_mean,total_matches,\
         patch_match_fraction,patch_area_fraction,rot_err_no_ransac_deg,rot_err_ransac_deg\n",
    );
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            config.axis.name(),
            row.value,
            row.status,
            row.poisoned,
            fmt(row.ssim_mean),
            fmt(row.ssim_std),
            row.psnr_mean.clone().unwrap_or_default(),
            row.total_matches.map(|v| v.to_string()).unwrap_or_default(),
            fmt(row.patch_match_fraction),
            fmt(row.patch_area_fraction),
            fmt(row.rot_err_no_ransac),
            fmt(row.rot_err_ransac),
        )
        .expect("string write");
    }
    let csv_path = args.output.join("sweep.csv");
    let tmp = args.output.join(".sweep.csv.tmp");
    std::fs::write(&tmp, &csv)?;
    std::fs::rename(&tmp, &csv_path)?;
    println!("{}", csv_path.display());

    if any_ok {
        Ok(0)
    } else {
        eprintln!("error: every sweep cell failed");
        Ok(1)
    }
}

fn run_cell(
    args: &SweepArgs,
    config: &SweepConfig,
    cell: &SweepCell,
    scene: &dataset::SceneDataset,
) -> Result<CellRow> {
    let cell_dir = args.output.join(&cell.label);
    let poisoned_dir = cell_dir.join("poisoned");
    let manifest = poison_dataset(
        &scene.image_paths,
        &cell.spec,
        cell.ratio,
        config.seed,
        &poisoned_dir,
        config.background,
    )?;
    dataset::write_json_atomic(&cell_dir.join("poison_manifest.json"), &manifest)?;
    if manifest.failed_count() == manifest.entries.len() {
        bail!("every image failed to poison");
    }

    let outputs: Vec<PathBuf> = manifest
        .entries
        .iter()
        .filter(|e| e.error.is_none())
        .map(|e| PathBuf::from(&e.output_path))
        .collect();
    let originals: Vec<PathBuf> = manifest
        .entries
        .iter()
        .filter(|e| e.error.is_none())
        .map(|e| PathBuf::from(&e.source_path))
        .collect();
    let report = evaluate_directories(
        &outputs,
        &originals,
        config.background,
        Direction::PoisonedVsOriginal,
    )?;
    dataset::write_json_atomic(&cell_dir.join("evaluation_report.json"), &report)?;

    let region = manifest.entries.iter().find_map(|e| e.region);
    let diagnostic = diagnose_first_pair(
        &outputs,
        config.background,
        region,
        scene.metadata.as_ref(),
        config.seed,
    )?;
    if let Some(d) = &diagnostic {
        dataset::write_json_atomic(&cell_dir.join("diagnose_pair_0_1.json"), d)?;
    }

    let psnr_mean = match (report.psnr_mean, report.psnr_inf_count) {
        (Some(m), _) => Some(format!("{m:.4}")),
        (None, n) if n > 0 => Some("inf".to_string()),
        _ => None,
    };
    Ok(CellRow {
        value: cell.value_text.clone(),
        status: "ok".into(),
        poisoned: manifest.poisoned_count(),
        ssim_mean: Some(report.ssim_mean),
        ssim_std: Some(report.ssim_std),
        psnr_mean,
        total_matches: diagnostic.as_ref().map(|d| d.total_matches),
        patch_match_fraction: diagnostic.as_ref().map(|d| d.patch_match_fraction),
        patch_area_fraction: diagnostic.as_ref().map(|d| d.patch_area_fraction),
        rot_err_no_ransac: diagnostic
            .as_ref()
            .and_then(|d| d.no_ransac.as_ref())
            .and_then(|e| e.rotation_error_deg),
        rot_err_ransac: diagnostic
            .as_ref()
            .and_then(|d| d.ransac.as_ref())
            .and_then(|e| e.rotation_error_deg),
    })
}
