//! `mvpoison` — poison, evaluate, diagnose, and sweep multi-view image sets.

mod commands;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvpoison_core::dataset::BackgroundPolicy;
use mvpoison_core::metrics::Direction;
use mvpoison_core::pattern::{Corner, PatchSpec, PatternKind};

#[derive(Parser)]
#[command(
    name = "mvpoison",
    version,
    about = "Multi-view dataset poisoning and two-view diagnosis toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed an adversarial patch into a fraction of a scene's images
    Poison(PoisonArgs),
    /// Compare two aligned image directories (SSIM, PSNR, optional LPIPS)
    Evaluate(EvaluateArgs),
    /// Measure feature matching and two-view pose health of an image set
    Diagnose(DiagnoseArgs),
    /// Run an ablation sweep over one patch parameter from a JSON config
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
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

impl From<PatternArg> for PatternKind {
    fn from(value: PatternArg) -> Self {
        match value {
            PatternArg::Checkerboard => PatternKind::Checkerboard,
            PatternArg::Circles => PatternKind::Circles,
            PatternArg::DiagonalLines => PatternKind::DiagonalLines,
            PatternArg::ParallelLines => PatternKind::ParallelLines,
            PatternArg::IntersectingLines => PatternKind::IntersectingLines,
            PatternArg::CheckerboardPlusCircles => PatternKind::CheckerboardPlusCircles,
            PatternArg::CheckerboardPlusDiagonals => PatternKind::CheckerboardPlusDiagonals,
            PatternArg::DiagonalsPlusCircles => PatternKind::DiagonalsPlusCircles,
            PatternArg::AllPatterns => PatternKind::AllPatterns,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CornerArg {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl From<CornerArg> for Corner {
    fn from(value: CornerArg) -> Self {
        match value {
            CornerArg::TopLeft => Corner::TopLeft,
            CornerArg::TopRight => Corner::TopRight,
            CornerArg::BottomLeft => Corner::BottomLeft,
            CornerArg::BottomRight => Corner::BottomRight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackgroundArg {
    Black,
    White,
    Keep,
}

impl From<BackgroundArg> for BackgroundPolicy {
    fn from(value: BackgroundArg) -> Self {
        match value {
            BackgroundArg::Black => BackgroundPolicy::Black,
            BackgroundArg::White => BackgroundPolicy::White,
            BackgroundArg::Keep => BackgroundPolicy::Keep,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    PoisonedVsOriginal,
    PoisonedVsRender,
}

impl From<DirectionArg> for Direction {
    fn from(value: DirectionArg) -> Self {
        match value {
            DirectionArg::PoisonedVsOriginal => Direction::PoisonedVsOriginal,
            DirectionArg::PoisonedVsRender => Direction::PoisonedVsRender,
        }
    }
}

#[derive(Args)]
struct PoisonArgs {
    /// Scene directory with PNG/PPM/PGM images
    #[arg(long)]
    input: PathBuf,
    /// Output directory for poisoned copies and the manifest
    #[arg(long)]
    output: PathBuf,
    /// Pattern family
    #[arg(long, value_enum, default_value = "checkerboard")]
    pattern: PatternArg,
    /// Patch edge length in pixels
    #[arg(long, default_value_t = 12)]
    size: u32,
    /// Block (cell / stroke) size in pixels
    #[arg(long, default_value_t = 4)]
    block: u32,
    /// Blend strength in [0, 1]
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Bright level of the pattern (0-255)
    #[arg(long, default_value_t = 255)]
    contrast: u8,
    /// Dark level of the pattern (0-255)
    #[arg(long, default_value_t = 0)]
    dark: u8,
    /// Image corner the patch is anchored to
    #[arg(long, value_enum, default_value = "top-left")]
    corner: CornerArg,
    /// Offset from the corner in pixels
    #[arg(long, default_value_t = 0)]
    margin: u32,
    /// Fraction of images to poison, in (0, 1]
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// Seed for the poisoned-subset selection
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Background composited under RGBA inputs
    #[arg(long, value_enum, default_value = "black")]
    background: BackgroundArg,
}

impl PoisonArgs {
    fn spec(&self) -> PatchSpec {
        PatchSpec {
            kind: self.pattern.into(),
            size_px: self.size,
            block_px: self.block,
            alpha: self.alpha,
            bright_level: self.contrast,
            dark_level: self.dark,
            corner: self.corner.into(),
            margin_px: self.margin,
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of poisoned (or otherwise processed) images
    #[arg(long)]
    poisoned: PathBuf,
    /// Directory of reference images (originals, or renders)
    #[arg(long)]
    reference: PathBuf,
    /// Output directory for the JSON and CSV report
    #[arg(long)]
    output: PathBuf,
    /// Comparison direction, which sets the desired metric directions
    #[arg(long, value_enum, default_value = "poisoned-vs-original")]
    direction: DirectionArg,
    /// JSON sidecar of externally computed LPIPS values, keyed by scene name
    #[arg(long)]
    lpips: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "black")]
    background: BackgroundArg,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Scene directory with at least two images
    #[arg(long)]
    input: PathBuf,
    /// Output directory for per-pair and aggregate reports
    #[arg(long)]
    output: PathBuf,
    /// Camera metadata (transforms.json) for ground-truth pose errors
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Diagnose only the first K pairs instead of all pairs
    #[arg(long)]
    pairs: Option<usize>,
    /// Patch region as X,Y,W,H (for patch-match statistics)
    #[arg(long)]
    region: Option<String>,
    /// Poison manifest; per-image patch regions are read from it
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// RANSAC seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write per-pair keypoint/descriptor/match dumps
    #[arg(long)]
    dump_features: bool,
    #[arg(long, value_enum, default_value = "black")]
    background: BackgroundArg,
}

#[derive(Args)]
struct SweepArgs {
    /// Scene directory the sweep poisons repeatedly
    #[arg(long)]
    input: PathBuf,
    /// Output directory; one subdirectory per axis value plus sweep.csv
    #[arg(long)]
    output: PathBuf,
    /// Sweep configuration (JSON)
    #[arg(long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let exit = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1u8,
            };
            let _ = e.print();
            return ExitCode::from(exit);
        }
    };
    let result = match cli.command {
        Command::Poison(args) => commands::run_poison(&args),
        Command::Evaluate(args) => commands::run_evaluate(&args),
        Command::Diagnose(args) => commands::run_diagnose(&args),
        Command::Sweep(args) => sweep::run_sweep(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
