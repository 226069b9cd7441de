//! Implementations of the poison, evaluate, and diagnose subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use mvpoison_core::buffer::{ImageBuffer, Region};
use mvpoison_core::dataset::{self, BackgroundPolicy, SceneMetadata};
use mvpoison_core::features::{
    detect_and_describe, match_descriptors, FeatureConfig, FeatureDump,
};
use mvpoison_core::geometry::{diagnose_pair, DiagnoseParams, DiagnosticReport};
use mvpoison_core::metrics;
use mvpoison_core::poison::{poison_dataset, PoisonManifest};
use mvpoison_core::SCHEMA_VERSION;

use crate::{DiagnoseArgs, EvaluateArgs, PoisonArgs};

pub fn run_poison(args: &PoisonArgs) -> Result<u8> {
    let background: BackgroundPolicy = args.background.into();
    let scene = dataset::load_scene(&args.input, background)
        .with_context(|| format!("loading scene {}", args.input.display()))?;
    for warning in &scene.warnings {
        eprintln!("warning: {warning}");
    }
    let spec = args.spec();
    let manifest = poison_dataset(
        &scene.image_paths,
        &spec,
        args.ratio,
        args.seed,
        &args.output,
        background,
    )?;
    let manifest_path = args.output.join("poison_manifest.json");
    dataset::write_json_atomic(&manifest_path, &manifest)?;
    println!("{}", manifest_path.display());
    if manifest.failed_count() > 0 {
        for entry in manifest.entries.iter().filter(|e| e.error.is_some()) {
            eprintln!(
                "error: {}: {}",
                entry.source_path,
                entry.error.as_deref().unwrap_or("unknown")
            );
        }
        return Ok(2);
    }
    Ok(0)
}

fn load_images(
    paths: &[PathBuf],
    background: BackgroundPolicy,
) -> Result<Vec<ImageBuffer>> {
    paths
        .iter()
        .map(|p| {
            let raw = dataset::load_image(p).with_context(|| format!("{}", p.display()))?;
            Ok(dataset::composite_background(&raw, background))
        })
        .collect()
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<u8> {
    let background: BackgroundPolicy = args.background.into();
    let poisoned_scene = dataset::load_scene(&args.poisoned, background)?;
    let reference_scene = dataset::load_scene(&args.reference, background)?;
    if poisoned_scene.image_paths.len() != reference_scene.image_paths.len() {
        bail!(
            "image count mismatch: {} has {}, {} has {}",
            args.poisoned.display(),
            poisoned_scene.image_paths.len(),
            args.reference.display(),
            reference_scene.image_paths.len()
        );
    }
    let poisoned = load_images(&poisoned_scene.image_paths, background)?;
    let reference = load_images(&reference_scene.image_paths, background)?;
    for ((img_a, img_b), path) in poisoned
        .iter()
        .zip(&reference)
        .zip(&poisoned_scene.image_paths)
    {
        if !img_a.same_shape(img_b) {
            bail!(
                "{}: shape {}x{}x{} does not match its reference {}x{}x{}",
                path.display(),
                img_a.width(),
                img_a.height(),
                img_a.channels(),
                img_b.width(),
                img_b.height(),
                img_b.channels()
            );
        }
    }
    let names: Vec<String> = poisoned_scene.image_paths.iter().map(|p| stem_of(p)).collect();
    let lpips = match &args.lpips {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("{}", path.display()))?;
            let map: BTreeMap<String, f64> =
                serde_json::from_str(&text).with_context(|| format!("{}", path.display()))?;
            Some(map)
        }
        None => None,
    };
    let report = metrics::evaluate_pairs(
        &poisoned,
        &reference,
        &names,
        args.direction.into(),
        lpips.as_ref(),
    )?;
    dataset::ensure_writable_dir(&args.output)?;
    dataset::write_json_atomic(&args.output.join("evaluation_report.json"), &report)?;
    let csv_path = args.output.join("evaluation_report.csv");
    let tmp = args.output.join(".evaluation_report.csv.tmp");
    std::fs::write(&tmp, report.to_csv())?;
    std::fs::rename(&tmp, &csv_path)?;
    print!("{}", report.to_table());
    Ok(0)
}

/// Aggregate across all diagnosed pairs.
#[derive(Serialize)]
struct DiagnoseAggregate {
    schema_version: u32,
    pairs: Vec<PairSummary>,
    mean_patch_match_fraction: f64,
    mean_rotation_error_no_ransac_deg: Option<f64>,
    mean_rotation_error_ransac_deg: Option<f64>,
    pairs_with_failures: usize,
}

#[derive(Serialize)]
struct PairSummary {
    a: String,
    b: String,
    total_matches: usize,
    patch_match_fraction: f64,
    rotation_error_no_ransac_deg: Option<f64>,
    rotation_error_ransac_deg: Option<f64>,
    failures: usize,
}

fn parse_region(text: &str) -> Result<Region> {
    let parts: Vec<u32> = text
        .split(',')
        .map(|t| t.trim().parse::<u32>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad region {text:?} (expected X,Y,W,H)"))?;
    if parts.len() != 4 {
        bail!("bad region {text:?} (expected X,Y,W,H)");
    }
    Ok(Region {
        x: parts[0],
        y: parts[1],
        width: parts[2],
        height: parts[3],
    })
}

pub fn run_diagnose(args: &DiagnoseArgs) -> Result<u8> {
    let background: BackgroundPolicy = args.background.into();
    let scene = dataset::load_scene(&args.input, background)?;
    for warning in &scene.warnings {
        eprintln!("warning: {warning}");
    }
    if scene.image_paths.len() < 2 {
        bail!(
            "{} holds {} image(s); diagnosis needs at least 2",
            args.input.display(),
            scene.image_paths.len()
        );
    }
    let images = load_images(&scene.image_paths, background)?;
    let metadata: Option<SceneMetadata> = match &args.gt {
        Some(path) => Some(dataset::load_transforms(path, &scene.image_paths)?),
        None => scene.metadata.clone(),
    };
    let flat_region = args.region.as_deref().map(parse_region).transpose()?;
    let manifest_regions: BTreeMap<String, Region> = match &args.manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("{}", path.display()))?;
            let manifest: PoisonManifest = serde_json::from_str(&text)
                .with_context(|| format!("{}", path.display()))?;
            manifest
                .entries
                .iter()
                .filter_map(|e| {
                    e.region
                        .map(|r| (stem_of(Path::new(&e.output_path)), r))
                })
                .collect()
        }
        None => BTreeMap::new(),
    };

    dataset::ensure_writable_dir(&args.output)?;
    let params = DiagnoseParams {
        ransac_seed: args.seed,
        ..DiagnoseParams::default()
    };

    let mut all_pairs = Vec::new();
    for i in 0..scene.image_paths.len() {
        for j in i + 1..scene.image_paths.len() {
            all_pairs.push((i, j));
        }
    }
    if let Some(k) = args.pairs {
        all_pairs.truncate(k);
    }

    let mut summaries = Vec::new();
    for &(i, j) in &all_pairs {
        let name_a = stem_of(&scene.image_paths[i]);
        let name_b = stem_of(&scene.image_paths[j]);
        let region = flat_region.or_else(|| {
            manifest_regions
                .get(&name_a)
                .or_else(|| manifest_regions.get(&name_b))
                .copied()
        });
        let gt = metadata.as_ref().and_then(|m| {
            m.ground_truth_pair(i, j, images[i].width(), images[i].height())
        });
        let report = diagnose_pair(&images[i], &images[j], region, gt.as_ref(), &params);
        write_pair_report(&args.output, &name_a, &name_b, &report)?;
        if args.dump_features {
            write_feature_dump(&args.output, &name_a, &name_b, &images[i], &images[j], &params)?;
        }
        println!(
            "{name_a} <-> {name_b}: {} matches, patch fraction {:.4}{}",
            report.total_matches,
            report.patch_match_fraction,
            report
                .no_ransac
                .as_ref()
                .and_then(|e| e.rotation_error_deg)
                .map(|e| format!(", rotation error {e:.3} deg"))
                .unwrap_or_default()
        );
        summaries.push(PairSummary {
            a: name_a,
            b: name_b,
            total_matches: report.total_matches,
            patch_match_fraction: report.patch_match_fraction,
            rotation_error_no_ransac_deg: report
                .no_ransac
                .as_ref()
                .and_then(|e| e.rotation_error_deg),
            rotation_error_ransac_deg: report
                .ransac
                .as_ref()
                .and_then(|e| e.rotation_error_deg),
            failures: report.failures.len(),
        });
    }

    let mean = |values: Vec<f64>| {
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    let aggregate = DiagnoseAggregate {
        schema_version: SCHEMA_VERSION,
        mean_patch_match_fraction: summaries
            .iter()
            .map(|s| s.patch_match_fraction)
            .sum::<f64>()
            / summaries.len().max(1) as f64,
        mean_rotation_error_no_ransac_deg: mean(
            summaries
                .iter()
                .filter_map(|s| s.rotation_error_no_ransac_deg)
                .collect(),
        ),
        mean_rotation_error_ransac_deg: mean(
            summaries
                .iter()
                .filter_map(|s| s.rotation_error_ransac_deg)
                .collect(),
        ),
        pairs_with_failures: summaries.iter().filter(|s| s.failures > 0).count(),
        pairs: summaries,
    };
    dataset::write_json_atomic(&args.output.join("diagnose_aggregate.json"), &aggregate)?;
    Ok(0)
}

fn write_pair_report(
    out_dir: &Path,
    name_a: &str,
    name_b: &str,
    report: &DiagnosticReport,
) -> Result<()> {
    let path = out_dir.join(format!("diagnose_{name_a}_{name_b}.json"));
    dataset::write_json_atomic(&path, report)?;
    Ok(())
}

fn write_feature_dump(
    out_dir: &Path,
    name_a: &str,
    name_b: &str,
    image_a: &ImageBuffer,
    image_b: &ImageBuffer,
    params: &DiagnoseParams,
) -> Result<()> {
    let (kps_a, descs_a) = detect_and_describe(image_a, &params.features)?;
    let (kps_b, descs_b) = detect_and_describe(image_b, &params.features)?;
    let matches = match_descriptors(
        &descs_a,
        &descs_b,
        params.features.match_ratio,
        params.features.cross_check,
    );
    let dump = FeatureDump {
        schema_version: SCHEMA_VERSION,
        keypoints_a: kps_a,
        keypoints_b: kps_b,
        descriptors_a: descs_a,
        descriptors_b: descs_b,
        matches,
    };
    let path = out_dir.join(format!("features_{name_a}_{name_b}.json"));
    dataset::write_json_atomic(&path, &dump)?;
    Ok(())
}

/// Shared by the sweep runner: evaluate + diagnose one poisoned output
/// directory against its originals.
pub(crate) fn evaluate_directories(
    poisoned_paths: &[PathBuf],
    original_paths: &[PathBuf],
    background: BackgroundPolicy,
    direction: metrics::Direction,
) -> Result<metrics::AggregateReport> {
    let poisoned = load_images(poisoned_paths, background)?;
    let originals = load_images(original_paths, background)?;
    let names: Vec<String> = poisoned_paths.iter().map(|p| stem_of(p)).collect();
    Ok(metrics::evaluate_pairs(
        &poisoned,
        &originals,
        &names,
        direction,
        None,
    )?)
}

pub(crate) fn diagnose_first_pair(
    paths: &[PathBuf],
    background: BackgroundPolicy,
    region: Option<Region>,
    metadata: Option<&SceneMetadata>,
    seed: u64,
) -> Result<Option<DiagnosticReport>> {
    if paths.len() < 2 {
        return Ok(None);
    }
    let images = load_images(&paths[..2], background)?;
    let gt = metadata.and_then(|m| m.ground_truth_pair(0, 1, images[0].width(), images[0].height()));
    let params = DiagnoseParams {
        ransac_seed: seed,
        features: FeatureConfig::default(),
        ..DiagnoseParams::default()
    };
    Ok(Some(diagnose_pair(
        &images[0],
        &images[1],
        region,
        gt.as_ref(),
        &params,
    )))
}
