//! Frame sources: a headerless raw sequence or a directory of PPM/PGM frames.

use std::path::{Path, PathBuf};

use anyhow::Context;
use roiquant_core::detections::{parse_manifest, Manifest};
use roiquant_core::frame::{list_image_dir, load_image, ImageFormat, PixelFormat, SequenceReader, SequenceSpec};
use roiquant_core::Frame;

use crate::args::Size;
use crate::exit::usage;

pub const DEFAULT_FORMAT: PixelFormat = PixelFormat::Yuv420p;

pub enum FrameSource {
    Raw(SequenceReader),
    Dir {
        files: Vec<PathBuf>,
        width: usize,
        height: usize,
    },
}

impl FrameSource {
    pub fn open(path: &Path, size: Option<Size>, format: Option<PixelFormat>) -> anyhow::Result<FrameSource> {
        if path.is_dir() {
            let files = list_image_dir(path)?;
            let (width, height) = match files.first() {
                Some(f) => {
                    let frame = load_image(f, ImageFormat::from_path(f).expect("listed by extension"))?;
                    (frame.width(), frame.height())
                }
                None => (0, 0),
            };
            return Ok(FrameSource::Dir { files, width, height });
        }
        if !path.exists() {
            anyhow::bail!("input not found: {}", path.display());
        }
        let size = size.ok_or_else(|| usage(format!("--size is required for raw input {}", path.display())))?;
        let spec = SequenceSpec::open(path, size.width, size.height, format.unwrap_or(DEFAULT_FORMAT))?;
        Ok(FrameSource::Raw(SequenceReader::new(spec)?))
    }

    pub fn len(&self) -> usize {
        match self {
            FrameSource::Raw(r) => r.spec().frame_count,
            FrameSource::Dir { files, .. } => files.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            FrameSource::Raw(r) => (r.spec().width, r.spec().height),
            FrameSource::Dir { width, height, .. } => (*width, *height),
        }
    }

    pub fn read(&mut self, index: usize) -> anyhow::Result<Frame> {
        let frame = match self {
            FrameSource::Raw(r) => r.read_frame(index).map_err(|e| e.at_frame(index))?,
            FrameSource::Dir { files, .. } => {
                let f = files
                    .get(index)
                    .ok_or_else(|| anyhow::anyhow!("frame {index} out of range"))?;
                load_image(f, ImageFormat::from_path(f).expect("listed by extension"))
                    .map_err(|e| e.at_frame(index))?
            }
        };
        Ok(frame)
    }
}

/// Reads a detection manifest, reporting a missing file distinctly.
pub fn load_manifest(path: &Path) -> anyhow::Result<Manifest> {
    if !path.exists() {
        anyhow::bail!("manifest not found: {}", path.display());
    }
    parse_manifest(path).with_context(|| format!("reading manifest {}", path.display()))
}
