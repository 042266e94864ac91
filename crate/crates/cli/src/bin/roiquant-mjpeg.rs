//! Motion-JPEG reference encoder for sweeps on machines without a system encoder.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use roiquant::args::Size;
use roiquant::mjpeg;
use roiquant_core::frame::{encode_raw_frame, read_sequence, PixelFormat, SequenceSpec};
use roiquant_core::fsutil::AtomicFile;

#[derive(Parser)]
#[command(name = "roiquant-mjpeg", version, about = "Clip-level rate-controlled Motion-JPEG encoder and decoder")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

fn pixel_format(s: &str) -> Result<PixelFormat, String> {
    s.parse().map_err(|e: roiquant_core::Error| e.to_string())
}

#[derive(Subcommand)]
enum Cmd {
    /// Encode a raw sequence.
    Encode {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        size: Size,
        #[arg(long, default_value = "yuv420p", value_parser = pixel_format)]
        pix_fmt: PixelFormat,
        /// Target bitrate in kbit/s; ignored when --quality is given.
        #[arg(short, long)]
        bitrate: Option<f64>,
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
        /// Fixed JPEG quality (1..=100) instead of rate control.
        #[arg(short, long)]
        quality: Option<u8>,
        /// 1 writes the chosen quality to --passlog and no stream; 2 reads it back.
        #[arg(long)]
        pass: Option<u8>,
        #[arg(long)]
        passlog: Option<PathBuf>,
        /// Output stream (required except for pass 1).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decode a stream back into a raw sequence.
    Decode {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, default_value = "yuv420p", value_parser = pixel_format)]
        pix_fmt: PixelFormat,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Cmd::Encode {
            input,
            size,
            pix_fmt,
            bitrate,
            fps,
            quality,
            pass,
            passlog,
            output,
        } => {
            let spec = SequenceSpec::open(&input, size.width, size.height, pix_fmt)?;
            let frames = (0..spec.frame_count)
                .map(|i| read_sequence(&spec, i))
                .collect::<Result<Vec<_>, _>>()?;
            anyhow::ensure!(!frames.is_empty(), "{} holds no frames", input.display());
            anyhow::ensure!(fps > 0.0, "fps must be positive");
            let passlog = || passlog.clone().context("--pass needs --passlog");
            let q = match (quality, pass) {
                (Some(q), _) => q,
                (None, Some(2)) => mjpeg::read_passlog(&passlog()?)?,
                (None, _) => {
                    let kbps = bitrate.context("either --bitrate or --quality is required")?;
                    anyhow::ensure!(kbps > 0.0, "bitrate must be positive");
                    mjpeg::search_quality(&frames, mjpeg::budget_bytes(kbps, fps, frames.len()))?
                }
            };
            let images = mjpeg::encode_clip(&frames, q)?;
            let bytes: usize = images.iter().map(Vec::len).sum();
            if pass == Some(1) {
                mjpeg::write_passlog(&passlog()?, q, bytes)?;
                if output.is_none() {
                    return Ok(());
                }
            }
            let output = output.context("--output is required")?;
            let mut f = AtomicFile::create(&output)?;
            for img in &images {
                f.write_all(img).with_context(|| format!("writing {}", output.display()))?;
            }
            f.commit()?;
            eprintln!("roiquant-mjpeg: quality {q}, {bytes} bytes, {} frames", frames.len());
        }
        Cmd::Decode {
            input,
            pix_fmt,
            output,
        } => {
            let bytes = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let mut f = AtomicFile::create(&output)?;
            for (i, img) in mjpeg::split_stream(&bytes)?.into_iter().enumerate() {
                let frame = mjpeg::decode_frame(img, pix_fmt).with_context(|| format!("frame {i}"))?;
                f.write_all(&encode_raw_frame(&frame, pix_fmt)?)?;
            }
            f.commit()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("roiquant-mjpeg: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
