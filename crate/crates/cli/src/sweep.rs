//! Rate sweeps over external encoders.
//!
//! Every (encoder, variant, bitrate) cell encodes either the raw input
//! (`direct`) or its preprocessed version (`preprocessed`), decodes the stream
//! back to raw, and is scored against the raw input. Cells run in isolated
//! scratch directories.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::Context;
use rayon::prelude::*;
use roiquant_core::detections::Manifest;
use roiquant_core::frame::PixelFormat;
use roiquant_core::fsutil::{write_atomic, AtomicFile};
use roiquant_core::metrics::{bpp, PlaneWeighting};
use roiquant_core::pipeline::OutputColorSpace;
use roiquant_core::report::{fmt_opt, fmt_value, write_config_echo};
use serde::Deserialize;

use crate::args::{InputArgs, ProcessArgs, SweepArgs};
use crate::config::{resolve_process, FileConfig};
use crate::exit::{self, usage, EncoderError};
use crate::metrics_cmd::{compare, Comparison};
use crate::source::{load_manifest, DEFAULT_FORMAT};
use crate::template::Template;

pub const TMPDIR_ENV: &str = "ROIQUANT_TMPDIR";
const DEFAULT_FPS: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Direct,
    Preprocessed,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Direct => "direct",
            Variant::Preprocessed => "preprocessed",
        }
    }
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Direct, Variant::Preprocessed]
}

fn default_extension() -> String {
    "bin".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EncoderSpec {
    pub name: String,
    /// Encode command; in two-pass mode it is the second pass.
    pub command: String,
    /// Decode command turning `{input}` (the stream) into raw `{output}`.
    pub decode: String,
    #[serde(default)]
    pub two_pass: bool,
    /// First-pass command; defaults to `command` with `{pass}` = 1.
    pub first_pass: Option<String>,
    #[serde(default = "default_extension")]
    pub extension: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepSpec {
    pub bitrates: Vec<u32>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    pub fps: Option<f64>,
    pub encoders: Vec<EncoderSpec>,
}

/// An encoder with its templates parsed.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub spec: EncoderSpec,
    pub command: Template,
    pub first_pass: Option<Template>,
    pub decode: Template,
}

impl SweepSpec {
    pub fn load(path: &Path) -> anyhow::Result<SweepSpec> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading sweep spec {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing sweep spec {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<Vec<Encoder>> {
        if self.bitrates.is_empty() {
            return Err(usage("sweep spec lists no bitrates"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &b in &self.bitrates {
            if b == 0 {
                return Err(usage("bitrates must be positive"));
            }
            if !seen.insert(b) {
                return Err(usage(format!("bitrate {b} listed twice")));
            }
        }
        if self.variants.is_empty() {
            return Err(usage("sweep spec lists no variants"));
        }
        if self.encoders.is_empty() {
            return Err(usage("sweep spec lists no encoders"));
        }
        if let Some(fps) = self.fps {
            if fps.is_nan() || fps <= 0.0 {
                return Err(usage(format!("fps {fps} must be positive")));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        self.encoders
            .iter()
            .map(|e| {
                if !names.insert(e.name.as_str()) {
                    return Err(usage(format!("encoder `{}` defined twice", e.name)));
                }
                let command = Template::parse(&e.command)?;
                let decode = Template::parse(&e.decode)?;
                let first_pass = e.first_pass.as_deref().map(Template::parse).transpose()?;
                if e.two_pass && !command.uses("pass") && first_pass.is_none() {
                    return Err(usage(format!(
                        "encoder `{}` is two-pass but neither uses {{pass}} nor defines first-pass",
                        e.name
                    )));
                }
                Ok(Encoder {
                    spec: e.clone(),
                    command,
                    first_pass,
                    decode,
                })
            })
            .collect()
    }
}

/// PATH for child processes: this executable's directory first, so bundled
/// helpers such as `roiquant-mjpeg` resolve without installation.
pub fn child_path() -> OsString {
    let mut dirs: Vec<PathBuf> = Vec::new();
    if let Some(dir) = std::env::current_exe().ok().and_then(|p| p.parent().map(Path::to_path_buf)) {
        dirs.push(dir);
    }
    if let Some(path) = std::env::var_os("PATH") {
        dirs.extend(std::env::split_paths(&path));
    }
    std::env::join_paths(dirs).unwrap_or_default()
}

/// Resolves a program name the way the child's PATH lookup would.
pub fn find_program(program: &str, path: &OsString) -> Option<PathBuf> {
    let p = Path::new(program);
    if p.components().count() > 1 {
        return p.is_file().then(|| p.to_path_buf());
    }
    std::env::split_paths(path).map(|d| d.join(program)).find(|c| is_executable(c))
}

#[cfg(unix)]
fn is_executable(p: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    p.metadata().map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0).unwrap_or(false)
}

#[cfg(not(unix))]
fn is_executable(p: &Path) -> bool {
    p.is_file() || p.with_extension("exe").is_file()
}

pub fn scratch_root() -> PathBuf {
    std::env::var_os(TMPDIR_ENV).map(PathBuf::from).unwrap_or_else(std::env::temp_dir)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub encoder: String,
    pub variant: Variant,
    pub bitrate: u32,
    pub bytes: u64,
    pub bpp: f64,
    pub psnr: Option<f64>,
    pub ms_ssim: Option<f64>,
    pub roi_psnr: Option<f64>,
    pub roi_ms_ssim: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skip {
    pub encoder: String,
    pub variant: Variant,
    pub bitrate: u32,
    pub reason: String,
    pub failed: bool,
}

struct Cell<'a> {
    encoder: &'a Encoder,
    variant: Variant,
    bitrate: u32,
}

struct CellEnv<'a> {
    input: &'a Path,
    preprocessed: Option<&'a Path>,
    width: usize,
    height: usize,
    frames: usize,
    format: PixelFormat,
    fps: f64,
    manifest: Option<&'a Manifest>,
    threshold: f64,
    path: OsString,
    scratch: &'a Path,
    keep_temp: bool,
}

fn run_command(template: &Template, vars: &BTreeMap<&str, String>, ctx: &CellEnv, what: &str) -> anyhow::Result<()> {
    let mut cmd: Command = template.command(vars)?;
    cmd.env("PATH", &ctx.path);
    log::debug!("{what}: {:?}", cmd);
    let out = cmd
        .output()
        .map_err(|e| EncoderError(format!("{what}: cannot run `{}`: {e}", template.program())))?;
    if !out.status.success() {
        let stderr = String::from_utf8_lossy(&out.stderr);
        let tail: Vec<&str> = stderr.lines().rev().take(5).collect();
        let tail: Vec<&str> = tail.into_iter().rev().collect();
        return Err(EncoderError(format!("{what} exited with {}: {}", out.status, tail.join(" | "))).into());
    }
    Ok(())
}

fn run_cell(cell: &Cell, ctx: &CellEnv) -> anyhow::Result<Row> {
    let name = format!("{}-{}-{}k", cell.encoder.spec.name, cell.variant.name(), cell.bitrate);
    let dir = tempfile::Builder::new()
        .prefix(&format!("roiquant-{name}-"))
        .tempdir_in(ctx.scratch)
        .with_context(|| format!("creating scratch directory in {}", ctx.scratch.display()))?;
    let source = match cell.variant {
        Variant::Direct => ctx.input,
        Variant::Preprocessed => ctx.preprocessed.expect("preprocessed variant has an input"),
    };
    let stream = dir.path().join(format!("stream.{}", cell.encoder.spec.extension));
    let decoded = dir.path().join("decoded.yuv");
    let mut vars: BTreeMap<&str, String> = BTreeMap::from([
        ("input", source.display().to_string()),
        ("output", stream.display().to_string()),
        ("decoded", decoded.display().to_string()),
        ("bitrate", cell.bitrate.to_string()),
        ("width", ctx.width.to_string()),
        ("height", ctx.height.to_string()),
        ("fps", ctx.fps.to_string()),
        ("pix_fmt", ctx.format.ffmpeg_name().to_string()),
        ("passlog", dir.path().join("passlog").display().to_string()),
        ("pass", "1".to_string()),
    ]);

    if cell.encoder.spec.two_pass {
        let first = cell.encoder.first_pass.as_ref().unwrap_or(&cell.encoder.command);
        run_command(first, &vars, ctx, &format!("{name} pass 1"))?;
        vars.insert("pass", "2".into());
    }
    run_command(&cell.encoder.command, &vars, ctx, &format!("{name} encode"))?;
    let bytes = std::fs::metadata(&stream)
        .map_err(|e| EncoderError(format!("{name}: encoder produced no stream at {}: {e}", stream.display())))?
        .len();

    vars.insert("input", stream.display().to_string());
    vars.insert("output", decoded.display().to_string());
    run_command(&cell.encoder.decode, &vars, ctx, &format!("{name} decode"))?;

    let report = compare(&Comparison {
        reference: ctx.input,
        distorted: &decoded,
        size: Some(crate::args::Size {
            width: ctx.width,
            height: ctx.height,
        }),
        format: Some(ctx.format),
        roi: ctx.manifest,
        threshold: ctx.threshold,
        weighting: PlaneWeighting::LumaOnly,
        stream_bytes: Some(bytes),
    })
    .map_err(|e| EncoderError(format!("{name}: decoded output unusable: {e:#}")))?;

    if ctx.keep_temp {
        let kept = dir.keep();
        log::info!("kept {}", kept.display());
    }
    Ok(Row {
        encoder: cell.encoder.spec.name.clone(),
        variant: cell.variant,
        bitrate: cell.bitrate,
        bytes,
        bpp: bpp(bytes, ctx.width, ctx.height, ctx.frames)?,
        psnr: report.mean_psnr(),
        ms_ssim: report.mean_ms_ssim(),
        roi_psnr: report.mean_roi_psnr(),
        roi_ms_ssim: report.mean_roi_ms_ssim(),
    })
}

pub const HEADER: [&str; 9] = [
    "encoder",
    "variant",
    "bitrate_kbps",
    "bytes",
    "bpp",
    "psnr",
    "ms_ssim",
    "roi_psnr",
    "roi_ms_ssim",
];

fn write_rows(path: &Path, rows: &[Row], echo: &[(String, String)]) -> anyhow::Result<()> {
    let mut f = AtomicFile::create(path)?;
    write_config_echo(&mut f, echo)?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.encoder.clone(),
            r.variant.name().to_string(),
            r.bitrate.to_string(),
            r.bytes.to_string(),
            fmt_value(r.bpp),
            fmt_opt(r.psnr),
            fmt_opt(r.ms_ssim),
            fmt_opt(r.roi_psnr),
            fmt_opt(r.roi_ms_ssim),
        ])?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?.commit()?;
    Ok(())
}

fn write_skips(path: &Path, skips: &[Skip], echo: &[(String, String)]) -> anyhow::Result<()> {
    let mut f = AtomicFile::create(path)?;
    write_config_echo(&mut f, echo)?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["encoder", "variant", "bitrate_kbps", "status", "reason"])?;
    for s in skips {
        w.write_record([
            s.encoder.as_str(),
            s.variant.name(),
            &s.bitrate.to_string(),
            if s.failed { "failed" } else { "skipped" },
            &s.reason,
        ])?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?.commit()?;
    Ok(())
}

/// Rate-quality plot: full-frame and ROI MS-SSIM against bpp, one colour per
/// encoder/variant series.
pub fn rd_svg(rows: &[Row]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const PAD: f64 = 56.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let mut series: BTreeMap<(String, Variant), Vec<&Row>> = BTreeMap::new();
    for r in rows {
        series.entry((r.encoder.clone(), r.variant)).or_default().push(r);
    }
    let xs = rows.iter().map(|r| r.bpp);
    let ys = rows
        .iter()
        .flat_map(|r| [r.ms_ssim, r.roi_ms_ssim])
        .flatten()
        .filter(|v| v.is_finite());
    let (x0, x1) = (0.0, xs.fold(0.0f64, f64::max).max(1e-6) * 1.05);
    let y_lo = ys.fold(1.0f64, f64::min);
    let (y0, y1) = (((y_lo - 0.01) * 50.0).floor() / 50.0, 1.0);
    let sx = |v: f64| PAD + (W - 2.0 * PAD) * (v - x0) / (x1 - x0);
    let sy = |v: f64| H - PAD - (H - 2.0 * PAD) * (v.clamp(y0, y1) - y0) / (y1 - y0).max(1e-9);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} L{PAD} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">bits per pixel</text>"#,
        W / 2.0,
        H - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">MS-SSIM (solid) / ROI MS-SSIM (dashed)</text>"#,
        H / 2.0,
        H / 2.0
    );
    for k in 0..=4 {
        let yv = y0 + (y1 - y0) * k as f64 / 4.0;
        let xv = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{yv:.3}</text><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="middle">{xv:.3}</text>"#,
            PAD - 4.0,
            sy(yv) + 3.0,
            sx(xv),
            H - PAD + 14.0
        );
    }
    for (i, ((enc, variant), mut pts)) in series.into_iter().enumerate() {
        pts.sort_by(|a, b| a.bpp.total_cmp(&b.bpp));
        let color = COLORS[i % COLORS.len()];
        for (pick, dash) in [(0usize, ""), (1, r#" stroke-dasharray="5 3""#)] {
            let d: Vec<String> = pts
                .iter()
                .filter_map(|r| [r.ms_ssim, r.roi_ms_ssim][pick].map(|v| (r.bpp, v)))
                .enumerate()
                .map(|(j, (x, y))| format!("{}{:.1} {:.1}", if j == 0 { "M" } else { "L" }, sx(x), sy(y)))
                .collect();
            if !d.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"{dash}/>"#,
                    d.join(" ")
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{enc} {}</text>"#,
            PAD + 8.0,
            PAD + 14.0 * (i as f64 + 1.0),
            variant.name()
        );
    }
    s.push_str("</svg>\n");
    s
}

fn sibling(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Runs the sweep; returns the exit code (3 when any cell failed).
pub fn run(args: &SweepArgs) -> anyhow::Result<u8> {
    let spec = SweepSpec::load(&args.spec)?;
    let encoders = spec.validate()?;
    let format = args.format.unwrap_or(DEFAULT_FORMAT);
    let fps = args.fps.or(spec.fps).unwrap_or(DEFAULT_FPS);
    if fps.is_nan() || fps <= 0.0 {
        return Err(usage(format!("fps {fps} must be positive")));
    }
    if spec.variants.contains(&Variant::Preprocessed) && args.detections.is_none() {
        return Err(usage("the preprocessed variant needs --detections"));
    }
    if !args.input.is_file() {
        anyhow::bail!("input not found: {}", args.input.display());
    }
    let input_spec = roiquant_core::frame::SequenceSpec::open(&args.input, args.size.width, args.size.height, format)?;
    if input_spec.frame_count == 0 {
        anyhow::bail!("{} holds no frames", args.input.display());
    }
    let manifest = args.detections.as_deref().map(load_manifest).transpose()?;

    let file_cfg = FileConfig::load(args.config.as_deref())?;
    let scratch_base = scratch_root();
    std::fs::create_dir_all(&scratch_base).with_context(|| format!("creating {}", scratch_base.display()))?;
    let shared = tempfile::Builder::new()
        .prefix("roiquant-sweep-")
        .tempdir_in(&scratch_base)
        .with_context(|| format!("creating scratch directory in {}", scratch_base.display()))?;

    let mut process_args = ProcessArgs {
        input: InputArgs {
            input: args.input.clone(),
            size: Some(args.size),
            format: Some(format),
        },
        detections: args.detections.clone().unwrap_or_default(),
        out: shared.path().join("preprocessed.yuv"),
        report: Some(shared.path().join("preprocessed.jsonl")),
        config: args.config.clone(),
        quality_bank: None,
        threshold: None,
        pad: None,
        shift: None,
        align_blocks: false,
        color_compat: false,
        output_colorspace: None,
        level: None,
        jobs: None,
        timings: false,
    };
    let mut process_section = file_cfg.process.clone();
    if process_section.output_colorspace.is_some() {
        log::warn!("sweep keeps the input layout; ignoring output-colorspace from the config");
        process_section.output_colorspace = None;
    }
    process_args.output_colorspace = Some(OutputColorSpace::AsInput);
    let effective = resolve_process(&process_args, &process_section)?;

    let preprocessed = if spec.variants.contains(&Variant::Preprocessed) {
        let manifest = manifest.as_ref().expect("checked above");
        roiquant_core::pipeline::preprocess_sequence(&input_spec, manifest, &effective.pipeline, &process_args.out)
            .context("preprocessing the sweep input")?;
        Some(process_args.out.clone())
    } else {
        None
    };

    let path = child_path();
    let mut skips = Vec::new();
    let mut cells = Vec::new();
    for enc in &encoders {
        let mut missing: Vec<&str> = [enc.command.program(), enc.decode.program()]
            .into_iter()
            .chain(enc.first_pass.as_ref().map(|t| t.program()))
            .filter(|p| find_program(p, &path).is_none())
            .collect();
        missing.sort_unstable();
        missing.dedup();
        for &variant in &spec.variants {
            for &bitrate in &spec.bitrates {
                if missing.is_empty() {
                    cells.push(Cell {
                        encoder: enc,
                        variant,
                        bitrate,
                    });
                } else {
                    skips.push(Skip {
                        encoder: enc.spec.name.clone(),
                        variant,
                        bitrate,
                        reason: format!("not found: {}", missing.join(", ")),
                        failed: false,
                    });
                }
            }
        }
        if !missing.is_empty() {
            log::warn!("encoder `{}` skipped: {} not found", enc.spec.name, missing.join(", "));
        }
    }

    let ctx = CellEnv {
        input: &args.input,
        preprocessed: preprocessed.as_deref(),
        width: args.size.width,
        height: args.size.height,
        frames: input_spec.frame_count,
        format,
        fps,
        manifest: manifest.as_ref(),
        threshold: effective.pipeline.confidence_threshold,
        path,
        scratch: shared.path(),
        keep_temp: args.keep_temp,
    };
    let jobs = args.jobs.unwrap_or(1).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker pool")?;
    let results: Vec<anyhow::Result<Row>> = pool.install(|| cells.par_iter().map(|c| run_cell(c, &ctx)).collect());

    let mut rows = Vec::new();
    for (cell, result) in cells.iter().zip(results) {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => {
                let failed = exit::code_for(&e) == exit::ENCODER;
                if !failed {
                    return Err(e);
                }
                log::error!("{e:#}");
                skips.push(Skip {
                    encoder: cell.encoder.spec.name.clone(),
                    variant: cell.variant,
                    bitrate: cell.bitrate,
                    reason: format!("{e:#}"),
                    failed: true,
                });
            }
        }
    }

    let mut echo: Vec<(String, String)> = vec![
        ("size".into(), args.size.to_string()),
        ("format".into(), format.ffmpeg_name().into()),
        ("frames".into(), input_spec.frame_count.to_string()),
        ("fps".into(), fps.to_string()),
        (
            "bitrates".into(),
            spec.bitrates.iter().map(u32::to_string).collect::<Vec<_>>().join(" "),
        ),
        (
            "variants".into(),
            spec.variants.iter().map(|v| v.name()).collect::<Vec<_>>().join(" "),
        ),
    ];
    for enc in &encoders {
        echo.push((format!("encoder.{}", enc.spec.name), enc.command.to_string()));
    }
    if preprocessed.is_some() {
        echo.extend(effective.echo.iter().map(|(k, v)| (format!("process.{k}"), v.clone())));
    }
    write_rows(&args.out, &rows, &echo)?;
    let skip_path = sibling(&args.out, "_skipped", "csv");
    if skips.is_empty() {
        let _ = std::fs::remove_file(&skip_path);
    } else {
        write_skips(&skip_path, &skips, &echo)?;
    }
    if args.plot {
        write_atomic(sibling(&args.out, "_rd", "svg"), rd_svg(&rows).as_bytes())?;
    }
    if args.keep_temp {
        let kept = shared.keep();
        log::info!("scratch kept in {}", kept.display());
    }

    let failed = skips.iter().filter(|s| s.failed).count();
    log::info!("{} cells done, {} skipped, {} failed", rows.len(), skips.len() - failed, failed);
    Ok(if failed > 0 { exit::ENCODER } else { exit::OK })
}
