//! Per-frame and per-sequence preprocessing.
//!
//! For a frame with at least one detection above the confidence threshold:
//! convert to YUV, save the object patches, DC-shift, tile into 8x8 blocks,
//! quantize/dequantize every block with the level-`m` matrices, inverse
//! transform, unshift with clipping, paste the patches back and optionally
//! convert to RGB. Frames without detections pass through untouched.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colorspace::{self, dc_shift, dc_unshift_clip, ColorMatrix, DEFAULT_SHIFT};
use crate::detections::{
    extract_patches, filter_confidence, plane_region, restore_patches, union_area, BoundingBox,
    DetectionSet, Manifest, DEFAULT_CONFIDENCE_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::frame::{
    self, ColorSpace, Frame, ImageFormat, PixelFormat, Plane, SequenceReader, SequenceSpec,
    SequenceWriter,
};
use crate::fsutil::AtomicFile;
use crate::quantizer::{dequantize, quantize, select_level, zero_fraction, Level, MatrixBank, QuantMatrix};
use crate::transform::{forward_dct, inverse_dct, merge_blocks, split_blocks, PadMode, N};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputColorSpace {
    #[default]
    AsInput,
    Yuv,
    Rgb,
}

impl std::str::FromStr for OutputColorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "as-input" | "input" => Ok(OutputColorSpace::AsInput),
            "yuv" => Ok(OutputColorSpace::Yuv),
            "rgb" => Ok(OutputColorSpace::Rgb),
            other => Err(Error::Config(format!("unknown output colorspace `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub bank: MatrixBank,
    pub confidence_threshold: f64,
    pub pad: PadMode,
    pub shift: i32,
    pub align_blocks: bool,
    pub color_matrix: ColorMatrix,
    pub output_colorspace: OutputColorSpace,
    /// Forces a quantization level instead of deriving it from the object area.
    pub level_override: Option<Level>,
    /// Frames processed concurrently by the sequence runner; 0 means one per core.
    pub jobs: usize,
    pub record_timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            bank: MatrixBank::default(),
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            pad: PadMode::default(),
            shift: DEFAULT_SHIFT,
            align_blocks: false,
            color_matrix: ColorMatrix::default(),
            output_colorspace: OutputColorSpace::default(),
            level_override: None,
            jobs: 0,
            record_timings: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::Config(format!(
                "confidence threshold {} outside [0, 1]",
                self.confidence_threshold
            )));
        }
        if !(0..=255).contains(&self.shift) {
            return Err(Error::Config(format!("shift {} outside 0..=255", self.shift)));
        }
        Ok(())
    }

    /// Output colorspace for an input in `input`.
    pub fn target_colorspace(&self, input: ColorSpace) -> ColorSpace {
        match self.output_colorspace {
            OutputColorSpace::AsInput => input,
            OutputColorSpace::Yuv => ColorSpace::Yuv,
            OutputColorSpace::Rgb => ColorSpace::Rgb,
        }
    }

    /// Raw layout of the processed sequence for a given input layout.
    pub fn output_format(&self, input: PixelFormat) -> Result<PixelFormat> {
        match (input, self.target_colorspace(input.colorspace())) {
            (PixelFormat::Rgb24, ColorSpace::Yuv) => Ok(PixelFormat::Yuv444p),
            (PixelFormat::Yuv444p, ColorSpace::Rgb) => Ok(PixelFormat::Rgb24),
            (PixelFormat::Yuv420p, ColorSpace::Rgb) => Err(Error::Config(
                "4:2:0 input cannot be returned as RGB without chroma upsampling".into(),
            )),
            (f, _) => Ok(f),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub color_ms: f64,
    pub transform_ms: f64,
    pub restore_ms: f64,
    pub total_ms: f64,
}

/// Per-frame observability record, one JSON line per frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame_index: usize,
    pub bypassed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub level: Option<Level>,
    pub frame_area: u64,
    pub object_area: u64,
    pub boxes: usize,
    /// Mean zero fraction of the quantized blocks, per plane. Empty when bypassed.
    pub zero_fraction: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<StageTimings>,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn convert(frame: Frame, target: ColorSpace, matrix: ColorMatrix) -> Result<Frame> {
    match (frame.colorspace(), target) {
        (a, b) if a == b => Ok(frame),
        (ColorSpace::Rgb, ColorSpace::Yuv) => colorspace::rgb_to_yuv_with(&frame, matrix),
        (ColorSpace::Yuv, ColorSpace::Rgb) => colorspace::yuv_to_rgb_with(&frame, matrix),
        _ => unreachable!(),
    }
}

/// Boxes that survive the threshold, optionally grown to block boundaries.
pub fn effective_detections(frame: &Frame, set: &DetectionSet, cfg: &PipelineConfig) -> DetectionSet {
    let mut filtered = filter_confidence(set, cfg.confidence_threshold);
    if cfg.align_blocks {
        let (w, h) = (frame.width() as u32, frame.height() as u32);
        for b in &mut filtered.boxes {
            *b = b.aligned_to_blocks(w, h);
        }
    }
    filtered
}

/// Quantizes one plane through the block transform at a fixed matrix.
///
/// Returns the reconstructed plane and the mean zero fraction of its
/// quantized blocks.
pub fn requantize_plane(plane: &Plane, q: &QuantMatrix, shift: i32, pad: PadMode) -> Result<(Plane, f64)> {
    let shifted = dc_shift(plane, shift);
    let mut grid = split_blocks(&shifted, pad)?;
    let zeros: f64 = grid
        .blocks
        .par_iter_mut()
        .map(|block| {
            let qb = quantize(&forward_dct(block), q);
            *block = inverse_dct(&dequantize(&qb, q));
            zero_fraction(&qb)
        })
        .sum();
    let mean_zero = zeros / grid.blocks.len() as f64;
    Ok((dc_unshift_clip(&merge_blocks(&grid), shift), mean_zero))
}

pub fn preprocess_frame(frame: &Frame, set: &DetectionSet, cfg: &PipelineConfig) -> Result<(Frame, FrameReport)> {
    cfg.validate()?;
    if frame.is_empty() {
        return Err(Error::Dimension("cannot preprocess an empty frame".into()));
    }
    let t0 = Instant::now();
    let detections = effective_detections(frame, set, cfg);
    let frame_area = (frame.width() * frame.height()) as u64;
    let object_area = union_area(&detections.boxes);
    let target = cfg.target_colorspace(frame.colorspace());
    let mut report = FrameReport {
        frame_index: set.frame_index,
        bypassed: true,
        level: None,
        frame_area,
        object_area,
        boxes: detections.boxes.len(),
        zero_fraction: Vec::new(),
        timings: None,
    };

    if detections.is_empty() {
        let out = convert(frame.clone(), target, cfg.color_matrix)?;
        if cfg.record_timings {
            report.timings = Some(StageTimings {
                total_ms: ms(t0),
                ..Default::default()
            });
        }
        return Ok((out, report));
    }

    let level = match cfg.level_override {
        Some(l) => l,
        None => select_level(frame_area, object_area)?,
    };
    let t_color = Instant::now();
    let working = convert(frame.clone(), ColorSpace::Yuv, cfg.color_matrix)?;
    let patches = extract_patches(&working, &detections)?;
    let color_ms = ms(t_color);

    let t_tx = Instant::now();
    let results = working
        .planes()
        .par_iter()
        .enumerate()
        .map(|(i, p)| requantize_plane(p, cfg.bank.for_plane(i, level), cfg.shift, cfg.pad))
        .collect::<Result<Vec<_>>>()?;
    let transform_ms = ms(t_tx);

    let t_restore = Instant::now();
    let (planes, zeros): (Vec<Plane>, Vec<f64>) = results.into_iter().unzip();
    let requantized = Frame::new(planes, ColorSpace::Yuv, working.subsampling())?;
    let restored = restore_patches(&requantized, &patches)?;
    let out = convert(restored, target, cfg.color_matrix)?;
    let restore_ms = ms(t_restore);

    report.bypassed = false;
    report.level = Some(level);
    report.zero_fraction = zeros;
    if cfg.record_timings {
        report.timings = Some(StageTimings {
            color_ms,
            transform_ms,
            restore_ms,
            total_ms: ms(t0),
        });
    }
    Ok((out, report))
}

fn block_hits_any(bx: usize, by: usize, regions: &[(usize, usize, usize, usize)]) -> bool {
    let (x0, y0) = (bx * N, by * N);
    regions
        .iter()
        .any(|&(x, y, w, h)| x < x0 + N && x + w > x0 && y < y0 + N && y + h > y0)
}

/// Mean zero fraction per plane of blocks that touch no box, after quantizing
/// with `luma` (plane 0) or `chroma` (planes 1, 2).
///
/// `None` for a plane without background blocks.
pub fn background_zero_fraction(
    frame: &Frame,
    boxes: &[BoundingBox],
    luma: &QuantMatrix,
    chroma: &QuantMatrix,
    shift: i32,
    pad: PadMode,
) -> Result<Vec<Option<f64>>> {
    frame
        .planes()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let regions: Vec<_> = boxes
                .iter()
                .map(|b| plane_region(b, frame.plane_scale(i), p))
                .collect();
            let grid = split_blocks(&dc_shift(p, shift), pad)?;
            let q = if i == 0 { luma } else { chroma };
            let mut sum = 0.0;
            let mut n = 0usize;
            for by in 0..grid.blocks_y {
                for bx in 0..grid.blocks_x {
                    if block_hits_any(bx, by, &regions) {
                        continue;
                    }
                    sum += zero_fraction(&quantize(&forward_dct(grid.block(bx, by)), q));
                    n += 1;
                }
            }
            Ok((n > 0).then(|| sum / n as f64))
        })
        .collect()
}

fn check_manifest(manifest: &Manifest, width: usize, height: usize, frames: usize) -> Result<()> {
    if manifest.frames.is_empty() {
        return Ok(());
    }
    if manifest.width as usize != width || manifest.height as usize != height {
        return Err(Error::Manifest(format!(
            "manifest geometry {}x{} does not match input {}x{}",
            manifest.width, manifest.height, width, height
        )));
    }
    if let Some(last) = manifest.max_index() {
        if last >= frames {
            return Err(Error::Manifest(format!(
                "manifest references frame {last} but the input has {frames} frames"
            )));
        }
    }
    Ok(())
}

fn batch_size(cfg: &PipelineConfig) -> usize {
    if cfg.jobs == 0 {
        rayon::current_num_threads().max(1)
    } else {
        cfg.jobs
    }
}

/// Processes a raw sequence into `sink`, frame order preserved.
pub fn preprocess_sequence_to<W: Write>(
    spec: &SequenceSpec,
    manifest: &Manifest,
    cfg: &PipelineConfig,
    sink: W,
) -> Result<(Vec<FrameReport>, W)> {
    cfg.validate()?;
    check_manifest(manifest, spec.width, spec.height, spec.frame_count)?;
    let out_format = cfg.output_format(spec.format)?;
    let mut reader = SequenceReader::new(spec.clone())?;
    let mut writer = SequenceWriter::new(sink, out_format);
    let mut reports = Vec::with_capacity(spec.frame_count);
    let batch = batch_size(cfg);
    let mut start = 0;
    while start < spec.frame_count {
        let end = (start + batch).min(spec.frame_count);
        let frames = (start..end)
            .map(|i| reader.read_frame(i).map_err(|e| e.at_frame(i)))
            .collect::<Result<Vec<_>>>()?;
        let processed = frames
            .into_par_iter()
            .enumerate()
            .map(|(k, f)| {
                let index = start + k;
                preprocess_frame(&f, &manifest.detections(index), cfg).map_err(|e| e.at_frame(index))
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, (frame, report)) in processed.into_iter().enumerate() {
            writer
                .write_frame(&frame)
                .map_err(|e| Error::io(&spec.path, e).at_frame(start + k))?;
            reports.push(report);
        }
        start = end;
    }
    let sink = writer.finish().map_err(|e| Error::io(&spec.path, e))?;
    Ok((reports, sink))
}

/// Processes a raw sequence and writes the result atomically to `out`.
pub fn preprocess_sequence(
    spec: &SequenceSpec,
    manifest: &Manifest,
    cfg: &PipelineConfig,
    out: impl AsRef<Path>,
) -> Result<Vec<FrameReport>> {
    let file = AtomicFile::create(out.as_ref())?;
    let (reports, file) = preprocess_sequence_to(spec, manifest, cfg, file)?;
    file.commit()?;
    Ok(reports)
}

/// Processes a directory of numbered PPM/PGM frames into `out_dir`.
///
/// Frame `i` is the `i`-th file in name order; outputs use zero-padded names.
pub fn preprocess_image_dir(
    in_dir: impl AsRef<Path>,
    manifest: &Manifest,
    cfg: &PipelineConfig,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<FrameReport>> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    let files = frame::list_image_dir(in_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut reports = Vec::with_capacity(files.len());
    for (index, path) in files.iter().enumerate() {
        let run = || -> Result<FrameReport> {
            let fmt = ImageFormat::from_path(path).expect("listed by extension");
            let input = frame::load_image(path, fmt)?;
            if index == 0 {
                check_manifest(manifest, input.width(), input.height(), files.len())?;
            }
            let (out, report) = preprocess_frame(&input, &manifest.detections(index), cfg)?;
            let out_fmt = if out.planes().len() == 1 {
                ImageFormat::Pgm
            } else if out.colorspace() == ColorSpace::Rgb {
                ImageFormat::Ppm
            } else {
                return Err(Error::ColorspaceMismatch(
                    "YUV output cannot be stored as PPM; request RGB output".into(),
                ));
            };
            let bytes = frame::encode_image(&out, out_fmt)?;
            crate::fsutil::write_atomic(out_dir.join(frame::numbered_name(index, out_fmt)), &bytes)?;
            Ok(report)
        };
        reports.push(run().map_err(|e| e.at_frame(index))?);
    }
    Ok(reports)
}

/// Brings a frame into the pipeline's working space (YUV) without quantizing.
pub fn working_space(frame: &Frame, matrix: ColorMatrix) -> Result<Frame> {
    convert(frame.clone(), ColorSpace::Yuv, matrix)
}
