use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use roiquant_core::frame::SequenceSpec;
use roiquant_core::fsutil::AtomicFile;
use roiquant_core::pipeline::{preprocess_image_dir, preprocess_sequence, FrameReport};

use crate::args::ProcessArgs;
use crate::config::{resolve_process, FileConfig};
use crate::exit::usage;
use crate::source::{load_manifest, DEFAULT_FORMAT};

pub fn default_report_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".jsonl");
    out.with_file_name(name)
}

/// Writes the JSON-lines report: a config line, then one line per frame.
pub fn write_report(path: &Path, echo: &[(String, String)], frames: &[FrameReport]) -> anyhow::Result<()> {
    let mut f = AtomicFile::create(path)?;
    let config: serde_json::Map<String, serde_json::Value> = echo
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    serde_json::to_writer(&mut f, &serde_json::json!({ "config": config }))?;
    f.write_all(b"\n")?;
    for r in frames {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.commit()?;
    Ok(())
}

pub fn run(args: &ProcessArgs) -> anyhow::Result<Vec<FrameReport>> {
    let file = FileConfig::load(args.config.as_deref())?;
    let eff = resolve_process(args, &file.process)?;
    let manifest = load_manifest(&args.detections)?;
    let input = &args.input.input;

    let reports = if input.is_dir() {
        preprocess_image_dir(input, &manifest, &eff.pipeline, &args.out)
            .with_context(|| format!("preprocessing frames in {}", input.display()))?
    } else {
        if !input.exists() {
            anyhow::bail!("input not found: {}", input.display());
        }
        let size = args
            .input
            .size
            .ok_or_else(|| usage("--size is required for raw input"))?;
        let format = args.input.format.unwrap_or(DEFAULT_FORMAT);
        let spec = SequenceSpec::open(input, size.width, size.height, format)?;
        preprocess_sequence(&spec, &manifest, &eff.pipeline, &args.out)
            .with_context(|| format!("preprocessing {}", input.display()))?
    };

    let report_path = args.report.clone().unwrap_or_else(|| default_report_path(&args.out));
    write_report(&report_path, &eff.echo, &reports).context("writing frame report")?;
    let processed = reports.iter().filter(|r| !r.bypassed).count();
    log::info!(
        "{} frames, {} requantized, {} bypassed; report {}",
        reports.len(),
        processed,
        reports.len() - processed,
        report_path.display()
    );
    Ok(reports)
}
