//! RGB/YUV conversion and DC level shifting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ColorSpace, Frame, Plane, Subsampling};

/// Default DC shift applied before the block transform.
pub const DEFAULT_SHIFT: i32 = 127;

/// Which RGB<->YUV matrix to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorMatrix {
    /// Real-valued full-range BT.601 (JFIF). Nearly invertible.
    #[default]
    FullRange,
    /// 8-bit fixed-point studio-swing BT.601 (`(66R + 129G + 25B + 128) >> 8) + 16`, ...).
    IntegerStudio,
}

/// Nearest integer, ties away from zero, saturated to `[0, 255]`.
#[inline]
pub fn round_clip(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn require_rgb(frame: &Frame) -> Result<()> {
    if frame.colorspace() != ColorSpace::Rgb {
        return Err(Error::ColorspaceMismatch(
            "expected an RGB frame".into(),
        ));
    }
    Ok(())
}

fn require_yuv444(frame: &Frame) -> Result<()> {
    if frame.colorspace() != ColorSpace::Yuv || frame.planes().len() != 3 {
        return Err(Error::ColorspaceMismatch(
            "expected a three-plane YUV frame".into(),
        ));
    }
    if frame.subsampling() != Subsampling::S444 {
        return Err(Error::ColorspaceMismatch(
            "4:2:0 frames must be upsampled before conversion to RGB".into(),
        ));
    }
    Ok(())
}

fn map_pixels(frame: &Frame, cs: ColorSpace, f: impl Fn(u8, u8, u8) -> [u8; 3]) -> Result<Frame> {
    let (w, h) = (frame.width(), frame.height());
    let [a, b, c] = [frame.plane(0).data(), frame.plane(1).data(), frame.plane(2).data()];
    let mut out = [
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
    ];
    for i in 0..w * h {
        let px = f(a[i], b[i], c[i]);
        for (o, v) in out.iter_mut().zip(px) {
            o.push(v);
        }
    }
    let planes = out
        .into_iter()
        .map(|d| Plane::new(w, h, d))
        .collect::<Result<Vec<_>>>()?;
    Frame::new(planes, cs, Subsampling::S444)
}

/// Single-pixel full-range BT.601 forward transform.
pub fn rgb_pixel_to_yuv(r: u8, g: u8, b: u8) -> [u8; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    [
        round_clip(0.299 * r + 0.587 * g + 0.114 * b),
        round_clip(-0.168736 * r - 0.331264 * g + 0.5 * b + 128.0),
        round_clip(0.5 * r - 0.418688 * g - 0.081312 * b + 128.0),
    ]
}

pub fn yuv_pixel_to_rgb(y: u8, u: u8, v: u8) -> [u8; 3] {
    let (y, u, v) = (y as f64, u as f64 - 128.0, v as f64 - 128.0);
    [
        round_clip(y + 1.402 * v),
        round_clip(y - 0.344136 * u - 0.714136 * v),
        round_clip(y + 1.772 * u),
    ]
}

/// Fixed-point studio-swing forward transform.
pub fn rgb_pixel_to_yuv_studio(r: u8, g: u8, b: u8) -> [u8; 3] {
    let (r, g, b) = (r as i32, g as i32, b as i32);
    let y = ((66 * r + 129 * g + 25 * b + 128) >> 8) + 16;
    let u = ((-38 * r - 74 * g + 112 * b + 128) >> 8) + 128;
    let v = ((112 * r - 94 * g - 18 * b + 128) >> 8) + 128;
    [y, u, v].map(|c| c.clamp(0, 255) as u8)
}

/// Inverse of the studio-swing transform.
pub fn yuv_pixel_to_rgb_studio(y: u8, u: u8, v: u8) -> [u8; 3] {
    let (y, u, v) = (
        1.164383 * (y as f64 - 16.0),
        u as f64 - 128.0,
        v as f64 - 128.0,
    );
    [
        round_clip(y + 1.596027 * v),
        round_clip(y - 0.391762 * u - 0.812968 * v),
        round_clip(y + 2.017232 * u),
    ]
}

pub fn rgb_to_yuv(frame: &Frame) -> Result<Frame> {
    rgb_to_yuv_with(frame, ColorMatrix::FullRange)
}

pub fn yuv_to_rgb(frame: &Frame) -> Result<Frame> {
    yuv_to_rgb_with(frame, ColorMatrix::FullRange)
}

pub fn rgb_to_yuv_with(frame: &Frame, matrix: ColorMatrix) -> Result<Frame> {
    require_rgb(frame)?;
    match matrix {
        ColorMatrix::FullRange => map_pixels(frame, ColorSpace::Yuv, rgb_pixel_to_yuv),
        ColorMatrix::IntegerStudio => map_pixels(frame, ColorSpace::Yuv, rgb_pixel_to_yuv_studio),
    }
}

pub fn yuv_to_rgb_with(frame: &Frame, matrix: ColorMatrix) -> Result<Frame> {
    require_yuv444(frame)?;
    match matrix {
        ColorMatrix::FullRange => map_pixels(frame, ColorSpace::Rgb, yuv_pixel_to_rgb),
        ColorMatrix::IntegerStudio => map_pixels(frame, ColorSpace::Rgb, yuv_pixel_to_rgb_studio),
    }
}

/// Real-valued plane produced by the DC shift and consumed by the block transform.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ShiftedPlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "shifted plane {}x{} needs {} samples, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(ShiftedPlane {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Subtracts `shift` from every sample. No clipping.
pub fn dc_shift(plane: &Plane, shift: i32) -> ShiftedPlane {
    let s = shift as f64;
    ShiftedPlane {
        width: plane.width(),
        height: plane.height(),
        data: plane.data().iter().map(|&v| v as f64 - s).collect(),
    }
}

/// Rounds, adds `shift` back and clamps into `[0, 255]`.
pub fn dc_unshift_clip(plane: &ShiftedPlane, shift: i32) -> Plane {
    let data = plane
        .data
        .iter()
        .map(|&v| (v.round() as i64 + shift as i64).clamp(0, 255) as u8)
        .collect();
    Plane::new(plane.width, plane.height, data).expect("dimensions carried over")
}
