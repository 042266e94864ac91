use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use roiquant_core::frame::PixelFormat;
use roiquant_core::metrics::PlaneWeighting;
use roiquant_core::pipeline::OutputColorSpace;
use roiquant_core::transform::PadMode;

#[derive(Debug, Parser)]
#[command(
    name = "roiquant",
    version,
    about = "Region-of-interest aware quantization preprocessing for video encoders",
    after_help = "Exit codes: 0 success, 1 usage error, 2 I/O or input error, 3 external encoder failure.\n\
                  ROIQUANT_TMPDIR overrides the directory used for sweep scratch files."
)]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only print errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Requantize the background of every frame that has detections.
    Process(ProcessArgs),
    /// Compare a distorted sequence against a reference (PSNR, MS-SSIM, ROI, Bpp).
    Metrics(MetricsArgs),
    /// Encode with external encoders over a bitrate grid, with and without preprocessing.
    Sweep(SweepArgs),
    /// Write a deterministic detection manifest from fixed boxes.
    StubDetect(StubArgs),
}

/// `WIDTHxHEIGHT`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Size {
    pub width: usize,
    pub height: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("`{v}` is not a positive integer"))
        };
        Ok(Size {
            width: parse(w)?,
            height: parse(h)?,
        })
    }
}

impl std::fmt::Display for Size {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

fn parse_with<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

fn pixel_format(s: &str) -> Result<PixelFormat, String> {
    parse_with(s)
}

fn pad_mode(s: &str) -> Result<PadMode, String> {
    parse_with(s)
}

fn output_colorspace(s: &str) -> Result<OutputColorSpace, String> {
    parse_with(s)
}

pub(crate) fn weighting(s: &str) -> Result<PlaneWeighting, String> {
    match s {
        "luma" => Ok(PlaneWeighting::LumaOnly),
        "yuv611" | "yuv" => Ok(PlaneWeighting::Yuv611),
        other => Err(format!("unknown weighting `{other}` (luma, yuv611)")),
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

/// A raw planar sequence or a directory of numbered PPM/PGM frames.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Raw sequence file, or a directory of PPM/PGM frames.
    #[arg(short, long)]
    pub input: PathBuf,

    /// Frame size of a raw sequence, e.g. 1920x1080.
    #[arg(short, long)]
    pub size: Option<Size>,

    /// Raw sample layout: yuv420p, yuv444p or rgb24 [default: yuv420p].
    #[arg(short, long, value_parser = pixel_format)]
    pub format: Option<PixelFormat>,
}

#[derive(Debug, Clone, Args)]
pub struct ProcessArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Detection manifest (JSON).
    #[arg(short, long)]
    pub detections: PathBuf,

    /// Output raw file, or output directory for frame-directory input.
    #[arg(short, long)]
    pub out: PathBuf,

    /// Per-frame JSON-lines report [default: the output path with `.jsonl` appended].
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// TOML config file; flags given here take precedence over it.
    #[arg(short, long)]
    pub config: Option<PathBuf>,

    /// Quantization matrix bank file (eight L/C entries).
    #[arg(long)]
    pub quality_bank: Option<PathBuf>,

    /// Minimum detection confidence, in [0, 1] [default: 0.5].
    #[arg(long, value_parser = unit_interval)]
    pub threshold: Option<f64>,

    /// Padding of partial edge blocks: replicate or zero [default: replicate].
    #[arg(long, value_parser = pad_mode)]
    pub pad: Option<PadMode>,

    /// DC shift applied before the transform, 0..=255 [default: 127].
    #[arg(long)]
    pub shift: Option<i32>,

    /// Grow boxes outward to 8-pixel block boundaries before restoring them.
    #[arg(long)]
    pub align_blocks: bool,

    /// Use the 8-bit fixed-point studio-swing RGB/YUV matrix.
    #[arg(long)]
    pub color_compat: bool,

    /// Colorspace of the output: as-input, yuv or rgb [default: as-input].
    #[arg(long, value_parser = output_colorspace)]
    pub output_colorspace: Option<OutputColorSpace>,

    /// Use this quantization level (0..=3) for every processed frame instead of
    /// deriving it from the object area.
    #[arg(long)]
    pub level: Option<u8>,

    /// Frames processed concurrently; 0 uses one per core [default: 0].
    #[arg(short, long)]
    pub jobs: Option<usize>,

    /// Include per-stage timings in the report (makes it non-reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    /// Reference (ground truth) sequence or frame directory.
    #[arg(short = 'r', long)]
    pub reference: PathBuf,

    /// Distorted sequence or frame directory.
    #[arg(short, long)]
    pub distorted: PathBuf,

    /// Frame size of raw inputs.
    #[arg(short, long)]
    pub size: Option<Size>,

    /// Raw sample layout of both inputs [default: yuv420p].
    #[arg(short, long, value_parser = pixel_format)]
    pub format: Option<PixelFormat>,

    /// Output CSV.
    #[arg(short, long)]
    pub out: PathBuf,

    /// Detection manifest whose boxes define the ROI columns.
    #[arg(long)]
    pub roi: Option<PathBuf>,

    /// Minimum confidence of ROI boxes [default: 0.5].
    #[arg(long, value_parser = unit_interval)]
    pub threshold: Option<f64>,

    /// Also write a per-column SSIM profile CSV and SVG next to the output.
    #[arg(long)]
    pub columns: bool,

    /// Second distorted sequence plotted as `profile_b` in the column outputs.
    #[arg(long)]
    pub compare: Option<PathBuf>,

    /// Encoded stream whose size gives the bpp column.
    #[arg(long)]
    pub stream: Option<PathBuf>,

    /// Plane weighting: luma or yuv611 [default: luma].
    #[arg(long, value_parser = weighting)]
    pub weighting: Option<PlaneWeighting>,

    /// TOML config file ([metrics] section).
    #[arg(short, long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Sweep specification (TOML): bitrates, variants and encoder templates.
    #[arg(long)]
    pub spec: PathBuf,

    /// Raw input sequence; it is also the ground truth.
    #[arg(short, long)]
    pub input: PathBuf,

    #[arg(short, long)]
    pub size: Size,

    /// Raw sample layout [default: yuv420p].
    #[arg(short, long, value_parser = pixel_format)]
    pub format: Option<PixelFormat>,

    /// Frame rate passed to the encoders [default: from the sweep spec file, else 25].
    #[arg(long)]
    pub fps: Option<f64>,

    /// Detection manifest; required for the preprocessed variant and ROI columns.
    #[arg(short, long)]
    pub detections: Option<PathBuf>,

    /// Output CSV; skipped cells go to `<stem>_skipped.csv`.
    #[arg(short, long)]
    pub out: PathBuf,

    /// Also write a rate-quality SVG next to the CSV.
    #[arg(long)]
    pub plot: bool,

    /// Cells run concurrently [default: 1].
    #[arg(short, long)]
    pub jobs: Option<usize>,

    /// Keep per-cell scratch directories.
    #[arg(long)]
    pub keep_temp: bool,

    /// TOML config file; [process] settings apply to the preprocessed variant.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StubArgs {
    /// Frame size `WxH`; boxes are clipped to it.
    #[arg(short, long)]
    pub size: Size,

    /// Number of frames in the manifest.
    #[arg(long, default_value_t = 1)]
    pub frames: usize,

    /// Box `x,y,w,h[@confidence][:label]`, placed on every frame; repeatable.
    #[arg(long = "box", value_name = "BOX")]
    pub boxes: Vec<String>,

    /// Output path [default: stdout].
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}
