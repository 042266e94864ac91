//! TOML configuration and flag merging.
//!
//! Precedence is command-line flag, then config file, then built-in default.
//! Relative paths in a config file resolve against the file's directory.

use std::path::{Path, PathBuf};

use anyhow::Context;
use roiquant_core::colorspace::ColorMatrix;
use roiquant_core::metrics::PlaneWeighting;
use roiquant_core::pipeline::{OutputColorSpace, PipelineConfig};
use roiquant_core::quantizer::{Level, MatrixBank};
use roiquant_core::transform::PadMode;
use serde::Deserialize;

use crate::args::ProcessArgs;
use crate::exit::usage;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub process: ProcessSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ProcessSection {
    pub quality_bank: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub pad: Option<String>,
    pub shift: Option<i32>,
    pub align_blocks: Option<bool>,
    pub color_compat: Option<bool>,
    pub output_colorspace: Option<String>,
    pub level: Option<u8>,
    pub jobs: Option<usize>,
    pub timings: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MetricsSection {
    pub threshold: Option<f64>,
    pub weighting: Option<String>,
    pub jobs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(bank) = &cfg.process.quality_bank {
            if bank.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.process.quality_bank = Some(base.join(bank));
            }
        }
        Ok(cfg)
    }
}

/// The pipeline configuration a run will use, plus its report-header echo.
pub struct Effective {
    pub pipeline: PipelineConfig,
    pub echo: Vec<(String, String)>,
}

fn parse_field<T: std::str::FromStr>(name: &str, v: &str) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| usage(format!("config `{name}`: {e}")))
}

pub fn resolve_process(args: &ProcessArgs, file: &ProcessSection) -> anyhow::Result<Effective> {
    let mut cfg = PipelineConfig::default();
    let mut echo = Vec::new();

    let bank_path = args.quality_bank.clone().or_else(|| file.quality_bank.clone());
    match &bank_path {
        Some(p) => {
            cfg.bank = MatrixBank::load(p).with_context(|| format!("quality bank {}", p.display()))?;
        }
        None => cfg.bank = MatrixBank::default(),
    }
    for line in cfg.bank.describe() {
        let (k, v) = line.split_once('=').unwrap_or(("bank", line.as_str()));
        echo.push((k.trim().to_string(), v.trim().to_string()));
    }

    cfg.confidence_threshold = args.threshold.or(file.threshold).unwrap_or(cfg.confidence_threshold);
    cfg.pad = match (args.pad, &file.pad) {
        (Some(p), _) => p,
        (None, Some(s)) => parse_field::<PadMode>("pad", s)?,
        (None, None) => cfg.pad,
    };
    cfg.shift = args.shift.or(file.shift).unwrap_or(cfg.shift);
    cfg.align_blocks = args.align_blocks || file.align_blocks.unwrap_or(false);
    if args.color_compat || file.color_compat.unwrap_or(false) {
        cfg.color_matrix = ColorMatrix::IntegerStudio;
    }
    cfg.output_colorspace = match (args.output_colorspace, &file.output_colorspace) {
        (Some(o), _) => o,
        (None, Some(s)) => parse_field::<OutputColorSpace>("output-colorspace", s)?,
        (None, None) => cfg.output_colorspace,
    };
    cfg.level_override = match args.level.or(file.level) {
        Some(m) => Some(Level::new(m).map_err(|e| usage(format!("--level: {e}")))?),
        None => None,
    };
    cfg.jobs = args.jobs.or(file.jobs).unwrap_or(0);
    cfg.record_timings = args.timings || file.timings.unwrap_or(false);
    cfg.validate()?;

    echo.extend([
        ("threshold".into(), cfg.confidence_threshold.to_string()),
        ("pad".into(), pad_name(cfg.pad).into()),
        ("shift".into(), cfg.shift.to_string()),
        ("align_blocks".into(), cfg.align_blocks.to_string()),
        (
            "color_matrix".into(),
            match cfg.color_matrix {
                ColorMatrix::FullRange => "full-range",
                ColorMatrix::IntegerStudio => "integer-studio",
            }
            .into(),
        ),
        (
            "output_colorspace".into(),
            match cfg.output_colorspace {
                OutputColorSpace::AsInput => "as-input",
                OutputColorSpace::Yuv => "yuv",
                OutputColorSpace::Rgb => "rgb",
            }
            .into(),
        ),
        (
            "level".into(),
            cfg.level_override.map_or("auto".to_string(), |l| l.to_string()),
        ),
    ]);
    Ok(Effective { pipeline: cfg, echo })
}

pub fn parse_weighting(s: &str) -> anyhow::Result<PlaneWeighting> {
    crate::args::weighting(s).map_err(usage)
}

pub fn weighting_name(w: PlaneWeighting) -> &'static str {
    match w {
        PlaneWeighting::LumaOnly => "luma",
        PlaneWeighting::Yuv611 => "yuv611",
    }
}

fn pad_name(p: PadMode) -> &'static str {
    match p {
        PadMode::ReplicateEdge => "replicate",
        PadMode::ZeroFill => "zero",
    }
}
