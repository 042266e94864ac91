//! Motion-JPEG reference encoder.
//!
//! A clip is stored as concatenated baseline JPEG images. Rate control picks
//! one quality for the whole clip: the highest quality whose total size fits
//! the bitrate budget. A first pass can record that quality in a pass log so
//! the second pass reuses it, mirroring two-pass encoders.

use std::io::Cursor;
use std::path::Path;

use anyhow::Context;
use image::codecs::jpeg::JpegEncoder;
use image::ExtendedColorType;
use rayon::prelude::*;
use roiquant_core::colorspace::yuv_pixel_to_rgb;
use roiquant_core::frame::PixelFormat;
use roiquant_core::{ColorSpace, Frame, Plane, Subsampling};
use zune_core::colorspace::ColorSpace as ZColorSpace;
use zune_core::options::DecoderOptions;
use zune_jpeg::JpegDecoder;

/// Interleaved RGB for the JPEG encoder; 4:2:0 chroma is upsampled by repetition.
pub fn to_rgb(frame: &Frame) -> Vec<u8> {
    let (w, h) = (frame.width(), frame.height());
    let mut out = Vec::with_capacity(w * h * 3);
    match (frame.colorspace(), frame.planes().len()) {
        (_, 1) => {
            for &v in frame.plane(0).data() {
                out.extend_from_slice(&[v, v, v]);
            }
        }
        (ColorSpace::Rgb, _) => {
            for y in 0..h {
                for x in 0..w {
                    out.extend((0..3).map(|i| frame.plane(i).get(x, y)));
                }
            }
        }
        (ColorSpace::Yuv, _) => {
            let (sx, sy) = frame.plane_scale(1);
            for y in 0..h {
                for x in 0..w {
                    let luma = frame.plane(0).get(x, y);
                    let u = frame.plane(1).get(x / sx, y / sy);
                    let v = frame.plane(2).get(x / sx, y / sy);
                    out.extend_from_slice(&yuv_pixel_to_rgb(luma, u, v));
                }
            }
        }
    }
    out
}

pub fn encode_frame(frame: &Frame, quality: u8) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    let rgb = to_rgb(frame);
    JpegEncoder::new_with_quality(&mut buf, quality.clamp(1, 100))
        .encode(&rgb, frame.width() as u32, frame.height() as u32, ExtendedColorType::Rgb8)
        .context("JPEG encoding failed")?;
    Ok(buf)
}

pub fn encode_clip(frames: &[Frame], quality: u8) -> anyhow::Result<Vec<Vec<u8>>> {
    frames.par_iter().map(|f| encode_frame(f, quality)).collect()
}

/// Byte budget of a clip of `frames` frames at `kbps`.
pub fn budget_bytes(kbps: f64, fps: f64, frames: usize) -> f64 {
    kbps * 1000.0 / 8.0 * frames as f64 / fps
}

/// Highest quality in 1..=100 whose encoded size is within `budget`; 1 if none is.
pub fn search_quality(frames: &[Frame], budget: f64) -> anyhow::Result<u8> {
    let size = |q: u8| -> anyhow::Result<usize> { Ok(encode_clip(frames, q)?.iter().map(Vec::len).sum()) };
    let (mut lo, mut hi) = (1u8, 100u8);
    if size(lo)? as f64 > budget {
        return Ok(1);
    }
    // lo always fits the budget.
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if size(mid)? as f64 <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo)
}

/// Splits a concatenation of JPEG images by walking their marker segments.
pub fn split_stream(bytes: &[u8]) -> anyhow::Result<Vec<&[u8]>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let start = pos;
        anyhow::ensure!(bytes[pos..].starts_with(&[0xFF, 0xD8]), "expected SOI at byte {pos}");
        pos += 2;
        loop {
            anyhow::ensure!(pos + 4 <= bytes.len(), "truncated JPEG segment at byte {pos}");
            anyhow::ensure!(bytes[pos] == 0xFF, "expected a marker at byte {pos}");
            let marker = bytes[pos + 1];
            if marker == 0xFF {
                pos += 1;
                continue;
            }
            let len = u16::from_be_bytes([bytes[pos + 2], bytes[pos + 3]]) as usize;
            pos += 2 + len;
            if marker == 0xDA {
                // Entropy-coded data runs until a marker other than a stuffed
                // zero or a restart marker.
                loop {
                    anyhow::ensure!(pos + 1 < bytes.len(), "unterminated scan");
                    if bytes[pos] == 0xFF && bytes[pos + 1] != 0 && !(0xD0..=0xD7).contains(&bytes[pos + 1]) {
                        break;
                    }
                    pos += 1;
                }
                if bytes[pos + 1] == 0xD9 {
                    pos += 2;
                    break;
                }
            }
        }
        out.push(&bytes[start..pos]);
    }
    Ok(out)
}

fn average_2x2(full: &Plane) -> Plane {
    let (w, h) = (full.width(), full.height());
    Plane::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| {
        let mut sum = 0u32;
        let mut n = 0u32;
        for dy in 0..2 {
            for dx in 0..2 {
                let (px, py) = (2 * x + dx, 2 * y + dy);
                if px < w && py < h {
                    sum += full.get(px, py) as u32;
                    n += 1;
                }
            }
        }
        ((sum + n / 2) / n) as u8
    })
}

pub fn decode_frame(jpeg: &[u8], format: PixelFormat) -> anyhow::Result<Frame> {
    let out_cs = match format {
        PixelFormat::Rgb24 => ZColorSpace::RGB,
        _ => ZColorSpace::YCbCr,
    };
    let opts = DecoderOptions::default().jpeg_set_out_colorspace(out_cs);
    let mut dec = JpegDecoder::new_with_options(Cursor::new(jpeg), opts);
    let pixels = dec.decode().map_err(|e| anyhow::anyhow!("JPEG decoding failed: {e:?}"))?;
    let info = dec.info().context("JPEG without header")?;
    let (w, h) = (info.width as usize, info.height as usize);
    let planes: Vec<Plane> = (0..3)
        .map(|k| Plane::from_fn(w, h, |x, y| pixels[3 * (y * w + x) + k]))
        .collect();
    let frame = match format {
        PixelFormat::Rgb24 => Frame::new(planes, ColorSpace::Rgb, Subsampling::S444)?,
        PixelFormat::Yuv444p => Frame::new(planes, ColorSpace::Yuv, Subsampling::S444)?,
        PixelFormat::Yuv420p => {
            let mut it = planes.into_iter();
            let y = it.next().expect("three planes");
            let u = average_2x2(&it.next().expect("three planes"));
            let v = average_2x2(&it.next().expect("three planes"));
            Frame::new(vec![y, u, v], ColorSpace::Yuv, Subsampling::S420)?
        }
    };
    Ok(frame)
}

pub fn read_passlog(path: &Path) -> anyhow::Result<u8> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading pass log {}", path.display()))?;
    let q = text
        .lines()
        .find_map(|l| l.strip_prefix("quality="))
        .and_then(|v| v.trim().parse::<u8>().ok())
        .with_context(|| format!("pass log {} has no quality line", path.display()))?;
    Ok(q)
}

pub fn write_passlog(path: &Path, quality: u8, bytes: usize) -> anyhow::Result<()> {
    roiquant_core::fsutil::write_atomic(path, format!("quality={quality}\nbytes={bytes}\n").as_bytes())?;
    Ok(())
}
