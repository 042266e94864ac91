use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use roiquant_core::detections::{filter_confidence, BoundingBox, Manifest, DEFAULT_CONFIDENCE_THRESHOLD};
use roiquant_core::fsutil::{write_atomic, AtomicFile};
use roiquant_core::metrics::{bpp, column_profile, compare_frames, MetricsReport, PlaneWeighting, SsimParams};
use roiquant_core::report::{column_profile_svg, write_column_csv, write_metrics_csv};
use roiquant_core::Frame;

use crate::args::MetricsArgs;
use crate::config::{parse_weighting, weighting_name, FileConfig};
use crate::exit::usage;
use crate::source::{load_manifest, FrameSource};

/// Frames held in memory at once while computing metrics.
const CHUNK: usize = 16;

/// Inputs of one comparison, independent of the command line.
pub struct Comparison<'a> {
    pub reference: &'a Path,
    pub distorted: &'a Path,
    pub size: Option<crate::args::Size>,
    pub format: Option<roiquant_core::frame::PixelFormat>,
    pub roi: Option<&'a Manifest>,
    pub threshold: f64,
    pub weighting: PlaneWeighting,
    pub stream_bytes: Option<u64>,
}

fn roi_boxes(manifest: Option<&Manifest>, index: usize, threshold: f64) -> Vec<BoundingBox> {
    manifest
        .map(|m| filter_confidence(&m.detections(index), threshold).boxes)
        .unwrap_or_default()
}

fn open_pair(c: &Comparison) -> anyhow::Result<(FrameSource, FrameSource)> {
    let a = FrameSource::open(c.reference, c.size, c.format)
        .with_context(|| format!("opening reference {}", c.reference.display()))?;
    let b = FrameSource::open(c.distorted, c.size, c.format)
        .with_context(|| format!("opening distorted {}", c.distorted.display()))?;
    if a.dims() != b.dims() || a.len() != b.len() {
        anyhow::bail!(
            "geometry mismatch: reference is {}x{} with {} frames, distorted is {}x{} with {} frames",
            a.dims().0,
            a.dims().1,
            a.len(),
            b.dims().0,
            b.dims().1,
            b.len()
        );
    }
    if a.is_empty() {
        anyhow::bail!("no frames in {}", c.reference.display());
    }
    Ok((a, b))
}

fn read_chunk(src: &mut FrameSource, range: std::ops::Range<usize>) -> anyhow::Result<Vec<Frame>> {
    range.map(|i| src.read(i)).collect()
}

/// Per-frame PSNR / MS-SSIM (and ROI variants) of `distorted` against `reference`.
pub fn compare(c: &Comparison) -> anyhow::Result<MetricsReport> {
    let (mut a, mut b) = open_pair(c)?;
    if let Some(m) = c.roi {
        let (w, h) = a.dims();
        if !m.frames.is_empty() && (m.width as usize, m.height as usize) != (w, h) {
            anyhow::bail!("ROI manifest is {}x{} but the inputs are {w}x{h}", m.width, m.height);
        }
    }
    let p = SsimParams::default();
    let n = a.len();
    let mut frames = Vec::with_capacity(n);
    let mut scales = 0;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let ra = read_chunk(&mut a, start..end)?;
        let rb = read_chunk(&mut b, start..end)?;
        let rows = ra
            .par_iter()
            .zip(rb.par_iter())
            .enumerate()
            .map(|(k, (fa, fb))| {
                let index = start + k;
                let boxes = roi_boxes(c.roi, index, c.threshold);
                compare_frames(index, fa, fb, &boxes, &p, c.weighting).map_err(|e| e.at_frame(index))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (row, s) in rows {
            scales = s;
            frames.push(row);
        }
        start = end;
    }
    let (w, h) = a.dims();
    let bpp = c.stream_bytes.map(|bytes| bpp(bytes, w, h, n)).transpose()?;
    Ok(MetricsReport {
        frames,
        bpp,
        ms_ssim_scales: scales,
    })
}

/// Luma SSIM column profile averaged over all frames.
pub fn mean_column_profile(c: &Comparison) -> anyhow::Result<Vec<f64>> {
    let (mut a, mut b) = open_pair(c)?;
    let p = SsimParams::default();
    let n = a.len();
    let mut sum = vec![0.0; a.dims().0];
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let ra = read_chunk(&mut a, start..end)?;
        let rb = read_chunk(&mut b, start..end)?;
        let profiles = ra
            .par_iter()
            .zip(rb.par_iter())
            .map(|(fa, fb)| column_profile(fa, fb, &p))
            .collect::<Result<Vec<_>, _>>()?;
        for prof in profiles {
            for (s, v) in sum.iter_mut().zip(prof) {
                *s += v;
            }
        }
        start = end;
    }
    Ok(sum.into_iter().map(|s| s / n as f64).collect())
}

fn sibling(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}{suffix}.{ext}"))
}

pub fn run(args: &MetricsArgs) -> anyhow::Result<MetricsReport> {
    let file = FileConfig::load(args.config.as_deref())?.metrics;
    let threshold = args.threshold.or(file.threshold).unwrap_or(DEFAULT_CONFIDENCE_THRESHOLD);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(usage(format!("threshold {threshold} outside [0, 1]")));
    }
    let weighting = match (args.weighting, &file.weighting) {
        (Some(w), _) => w,
        (None, Some(s)) => parse_weighting(s)?,
        (None, None) => PlaneWeighting::default(),
    };
    if let Some(jobs) = file.jobs {
        log::debug!("config jobs={jobs} is ignored by metrics; use RAYON_NUM_THREADS");
    }

    let manifest = args.roi.as_deref().map(load_manifest).transpose()?;
    if let Some(m) = &manifest {
        let any = m
            .frames
            .values()
            .any(|set| !filter_confidence(set, threshold).is_empty());
        if !any {
            log::warn!("ROI manifest has no boxes at threshold {threshold}; ROI columns will be empty");
        }
    }
    let stream_bytes = match &args.stream {
        Some(p) => Some(
            std::fs::metadata(p)
                .with_context(|| format!("reading stream size of {}", p.display()))?
                .len(),
        ),
        None => None,
    };

    let cmp = Comparison {
        reference: &args.reference,
        distorted: &args.distorted,
        size: args.size,
        format: args.format,
        roi: manifest.as_ref(),
        threshold,
        weighting,
        stream_bytes,
    };
    let report = compare(&cmp)?;

    let mut echo = vec![
        ("weighting".to_string(), weighting_name(weighting).to_string()),
        ("threshold".to_string(), threshold.to_string()),
        ("frames".to_string(), report.frames.len().to_string()),
        ("ms_ssim_scales".to_string(), report.ms_ssim_scales.to_string()),
    ];
    if let Some(s) = args.size {
        echo.push(("size".into(), s.to_string()));
    }
    let mut f = AtomicFile::create(&args.out)?;
    f = write_metrics_csv(f, &report, &echo)?;
    f.commit()?;

    if args.columns {
        let profile_a = mean_column_profile(&cmp)?;
        let profile_b = match &args.compare {
            Some(other) => Some(mean_column_profile(&Comparison {
                distorted: other,
                ..cmp
            })?),
            None => None,
        };
        let mut f = AtomicFile::create(sibling(&args.out, "_columns", "csv"))?;
        f = write_column_csv(f, &profile_a, profile_b.as_deref(), &echo)?;
        f.commit()?;
        let mut series: Vec<(&str, &[f64])> = vec![("profile_a", &profile_a)];
        if let Some(b) = &profile_b {
            series.push(("profile_b", b));
        }
        let svg = column_profile_svg(&series, "Per-column luma SSIM");
        write_atomic(sibling(&args.out, "_columns", "svg"), svg.as_bytes())?;
    } else if args.compare.is_some() {
        log::warn!("--compare only affects --columns output");
    }
    Ok(report)
}
