//! Helpers shared by the CLI test targets.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roiquant_core::colorspace::rgb_to_yuv;
use roiquant_core::frame::{encode_raw_frame, PixelFormat};
use roiquant_core::synth::panning_clip;
use roiquant_core::{ColorSpace, Frame, Plane, Subsampling};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_roiquant"))
}

pub fn roiquant(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("roiquant runs")
}

pub fn roiquant_env(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("roiquant runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn halve(p: &Plane) -> Plane {
    let (w, h) = (p.width(), p.height());
    Plane::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| {
        let xs = [2 * x, (2 * x + 1).min(w - 1)];
        let ys = [2 * y, (2 * y + 1).min(h - 1)];
        let sum: u32 = ys.iter().flat_map(|&yy| xs.iter().map(move |&xx| p.get(xx, yy) as u32)).sum();
        ((sum + 2) / 4) as u8
    })
}

/// An RGB frame in the requested raw layout.
pub fn to_format(rgb: &Frame, format: PixelFormat) -> Frame {
    match format {
        PixelFormat::Rgb24 => rgb.clone(),
        PixelFormat::Yuv444p => rgb_to_yuv(rgb).unwrap(),
        PixelFormat::Yuv420p => {
            let yuv = rgb_to_yuv(rgb).unwrap();
            let planes = vec![yuv.plane(0).clone(), halve(yuv.plane(1)), halve(yuv.plane(2))];
            Frame::new(planes, ColorSpace::Yuv, Subsampling::S420).unwrap()
        }
    }
}

/// Writes a textured panning clip and returns its frames.
pub fn write_clip(path: &Path, w: usize, h: usize, frames: usize, format: PixelFormat, seed: u64) -> Vec<Frame> {
    let clip: Vec<Frame> = panning_clip(w, h, frames, seed)
        .iter()
        .map(|f| to_format(f, format))
        .collect();
    let bytes: Vec<u8> = clip
        .iter()
        .flat_map(|f| encode_raw_frame(f, format).unwrap())
        .collect();
    std::fs::write(path, bytes).unwrap();
    clip
}

/// `(x, y, w, h, confidence)`.
pub type RawBox = (i64, i64, i64, i64, f64);

pub fn write_manifest(path: &Path, w: usize, h: usize, frames: &[(usize, &[RawBox])]) {
    let frames: Vec<serde_json::Value> = frames
        .iter()
        .map(|(i, boxes)| {
            let boxes: Vec<_> = boxes
                .iter()
                .map(|&(x, y, bw, bh, c)| serde_json::json!({"label": "obj", "confidence": c, "x": x, "y": y, "w": bw, "h": bh}))
                .collect();
            serde_json::json!({"index": i, "boxes": boxes})
        })
        .collect();
    let doc = serde_json::json!({"version": 1, "width": w, "height": h, "frames": frames});
    std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
}

/// Data rows of a CSV written by the harness (comment lines and header dropped).
pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| format!("{l}\n"))
        .collect();
    csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

pub fn csv_header(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let line = text.lines().find(|l| !l.starts_with('#')).unwrap();
    line.split(',').map(str::to_string).collect()
}

/// Sweep spec for the bundled Motion-JPEG encoder at the given bitrates.
pub fn mjpeg_spec(path: &Path, bitrates: &[u32]) {
    let list: Vec<String> = bitrates.iter().map(u32::to_string).collect();
    std::fs::write(
        path,
        format!(
            r#"bitrates = [{}]
fps = 25

[[encoders]]
name = "mjpeg"
two-pass = true
command = "roiquant-mjpeg encode -i {{input}} -s {{width}}x{{height}} --pix-fmt {{pix_fmt}} -b {{bitrate}} --fps {{fps}} --pass {{pass}} --passlog {{passlog}} -o {{output}}"
decode = "roiquant-mjpeg decode -i {{input}} --pix-fmt {{pix_fmt}} -o {{output}}"
extension = "mjpeg"
"#,
            list.join(", ")
        ),
    )
    .unwrap();
}
