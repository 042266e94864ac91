//! Full-reference quality and rate metrics: PSNR, SSIM, MS-SSIM, the
//! column SSIM profile, ROI variants and bits per pixel.
//!
//! SSIM statistics use an 11x11 Gaussian window (σ = 1.5) with half-sample
//! symmetric reflection at the borders, so maps have the input's size.
//! MS-SSIM follows the usual five-scale scheme with 2x2 mean pooling between
//! scales; the coarsest scale contributes the full SSIM (luminance included),
//! finer scales only contrast-structure.

use serde::{Deserialize, Serialize};

use crate::detections::{union_bounds, BoundingBox};
use crate::error::{Error, Result};
use crate::frame::{Frame, Plane};

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

#[derive(Clone, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub weights: Vec<f64>,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
            weights: MS_SSIM_WEIGHTS.to_vec(),
        }
    }
}

impl SsimParams {
    pub fn radius(&self) -> usize {
        self.window / 2
    }

    fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn kernel(&self) -> Vec<f64> {
        let r = self.radius() as f64;
        let taps: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / sum).collect()
    }
}

/// Real-valued image used for metric arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn from_plane(p: &Plane) -> Self {
        Image {
            width: p.width(),
            height: p.height(),
            data: p.data().iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// 2x2 mean pooling; an odd trailing row/column is dropped.
    pub fn downsample(&self) -> Image {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.width + 2 * x;
                data.push(0.25 * (self.data[i] + self.data[i + 1] + self.data[i + self.width] + self.data[i + self.width + 1]));
            }
        }
        Image {
            width: w,
            height: h,
            data,
        }
    }
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - i - 1
    } else {
        i
    };
    r.clamp(0, n - 1) as usize
}

fn blur(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut s = 0.0;
            for (t, &kt) in k.iter().enumerate() {
                s += kt * row[reflect(x as isize + t as isize - r, w)];
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (t, &kt) in k.iter().enumerate() {
            let sy = reflect(y as isize + t as isize - r, h);
            let src_row = &tmp[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for x in 0..w {
                dst[x] += kt * src_row[x];
            }
        }
    }
    out
}

/// Per-pixel luminance and contrast-structure terms.
struct SsimTerms {
    luminance: Vec<f64>,
    contrast_structure: Vec<f64>,
}

fn ssim_terms(a: &Image, b: &Image, p: &SsimParams) -> SsimTerms {
    let (w, h) = (a.width, a.height);
    let k = p.kernel();
    let mu_a = blur(&a.data, w, h, &k);
    let mu_b = blur(&b.data, w, h, &k);
    let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u * v).collect::<Vec<_>>();
    let e_aa = blur(&sq(&a.data, &a.data), w, h, &k);
    let e_bb = blur(&sq(&b.data, &b.data), w, h, &k);
    let e_ab = blur(&sq(&a.data, &b.data), w, h, &k);
    let (c1, c2) = (p.c1(), p.c2());
    let mut luminance = Vec::with_capacity(w * h);
    let mut contrast_structure = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        luminance.push((2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1));
        contrast_structure.push((2.0 * cov + c2) / (var_a + var_b + c2));
    }
    SsimTerms {
        luminance,
        contrast_structure,
    }
}

fn check_same(a: &Plane, b: &Plane) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn mse(a: &Plane, b: &Plane) -> Result<f64> {
    check_same(a, b)?;
    if a.data().is_empty() {
        return Err(Error::Dimension("empty plane".into()));
    }
    let sum: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.data().len() as f64)
}

/// PSNR in dB for 8-bit samples; identical planes give `f64::INFINITY`.
pub fn psnr(a: &Plane, b: &Plane) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / m).log10()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SsimMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl SsimMap {
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.width];
        for row in self.data.chunks_exact(self.width) {
            for (c, v) in cols.iter_mut().zip(row) {
                *c += v;
            }
        }
        cols.iter_mut().for_each(|c| *c /= self.height as f64);
        cols
    }
}

pub fn ssim_map(a: &Plane, b: &Plane, p: &SsimParams) -> Result<SsimMap> {
    check_same(a, b)?;
    if a.width() < p.window || a.height() < p.window {
        return Err(Error::TooSmall(format!(
            "{}x{} is smaller than the {}x{} window",
            a.width(),
            a.height(),
            p.window,
            p.window
        )));
    }
    let t = ssim_terms(&Image::from_plane(a), &Image::from_plane(b), p);
    Ok(SsimMap {
        width: a.width(),
        height: a.height(),
        data: t
            .luminance
            .iter()
            .zip(&t.contrast_structure)
            .map(|(l, cs)| l * cs)
            .collect(),
    })
}

/// MS-SSIM score and the number of scales that fit the input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsSsim {
    pub value: f64,
    pub scales: usize,
}

impl MsSsim {
    /// True when fewer scales than requested were used.
    pub fn reduced(&self, p: &SsimParams) -> bool {
        self.scales < p.weights.len()
    }
}

/// Number of dyadic scales for which the window still fits.
pub fn usable_scales(width: usize, height: usize, p: &SsimParams) -> usize {
    let mut n = 0;
    let (mut w, mut h) = (width, height);
    while n < p.weights.len() && w >= p.window && h >= p.window {
        n += 1;
        w /= 2;
        h /= 2;
    }
    n
}

/// Multi-scale SSIM. Inputs too small for every scale fall back to fewer
/// scales with the leading weights renormalized; see [`MsSsim::scales`].
pub fn ms_ssim(a: &Plane, b: &Plane, p: &SsimParams) -> Result<MsSsim> {
    check_same(a, b)?;
    let scales = usable_scales(a.width(), a.height(), p);
    if scales == 0 {
        return Err(Error::TooSmall(format!(
            "{}x{} is smaller than the {}x{} window",
            a.width(),
            a.height(),
            p.window,
            p.window
        )));
    }
    // The standard weights sum to 1.0001; they are used verbatim at full depth.
    let total: f64 = if scales == p.weights.len() {
        1.0
    } else {
        p.weights[..scales].iter().sum()
    };
    let mut ia = Image::from_plane(a);
    let mut ib = Image::from_plane(b);
    let mut value = 1.0;
    for j in 0..scales {
        let t = ssim_terms(&ia, &ib, p);
        let n = t.luminance.len() as f64;
        let weight = p.weights[j] / total;
        let term = if j + 1 == scales {
            t.luminance
                .iter()
                .zip(&t.contrast_structure)
                .map(|(l, cs)| l * cs)
                .sum::<f64>()
                / n
        } else {
            t.contrast_structure.iter().sum::<f64>() / n
        };
        value *= term.max(0.0).powf(weight);
        if j + 1 < scales {
            ia = ia.downsample();
            ib = ib.downsample();
        }
    }
    Ok(MsSsim { value, scales })
}

/// Single-scale SSIM averaged down each luma column.
pub fn column_profile(a: &Frame, b: &Frame, p: &SsimParams) -> Result<Vec<f64>> {
    Ok(ssim_map(a.plane(0), b.plane(0), p)?.column_means())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiMetrics {
    /// Tight rectangle `(x, y, w, h)` around the box union.
    pub rect: (u32, u32, u32, u32),
    pub psnr: f64,
    /// `None` when the region is smaller than the SSIM window.
    pub ms_ssim: Option<MsSsim>,
}

/// PSNR and MS-SSIM on luma restricted to the bounding rectangle of `boxes`.
pub fn roi_metrics(a: &Frame, b: &Frame, boxes: &[BoundingBox], p: &SsimParams) -> Result<RoiMetrics> {
    let rect = union_bounds(boxes).ok_or_else(|| Error::Config("ROI metrics need at least one box".into()))?;
    let (x, y, w, h) = (rect.0 as usize, rect.1 as usize, rect.2 as usize, rect.3 as usize);
    let ca = a.plane(0).crop(x, y, w, h)?;
    let cb = b.plane(0).crop(x, y, w, h)?;
    let ms = match ms_ssim(&ca, &cb, p) {
        Ok(m) => Some(m),
        Err(Error::TooSmall(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(RoiMetrics {
        rect,
        psnr: psnr(&ca, &cb)?,
        ms_ssim: ms,
    })
}

/// `8 · bytes / (width · height · frames)`.
pub fn bpp(stream_bytes: u64, width: usize, height: usize, frames: usize) -> Result<f64> {
    let pixels = width as u128 * height as u128 * frames as u128;
    if pixels == 0 {
        return Err(Error::Dimension("bpp needs a non-zero pixel count".into()));
    }
    Ok(8.0 * stream_bytes as f64 / pixels as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneWeighting {
    #[default]
    LumaOnly,
    /// 6:1:1 weighting of Y, U, V.
    Yuv611,
}

impl PlaneWeighting {
    fn combine(self, frame_planes: usize, per_plane: impl Fn(usize) -> Result<f64>) -> Result<f64> {
        match self {
            PlaneWeighting::LumaOnly => per_plane(0),
            PlaneWeighting::Yuv611 if frame_planes == 3 => {
                Ok((6.0 * per_plane(0)? + per_plane(1)? + per_plane(2)?) / 8.0)
            }
            PlaneWeighting::Yuv611 => per_plane(0),
        }
    }
}

/// Frame-level PSNR under a plane weighting.
pub fn frame_psnr(a: &Frame, b: &Frame, weighting: PlaneWeighting) -> Result<f64> {
    weighting.combine(a.planes().len(), |i| psnr(a.plane(i), b.plane(i)))
}

/// Frame-level MS-SSIM under a plane weighting.
pub fn frame_ms_ssim(a: &Frame, b: &Frame, p: &SsimParams, weighting: PlaneWeighting) -> Result<MsSsim> {
    let luma = ms_ssim(a.plane(0), b.plane(0), p)?;
    let value = weighting.combine(a.planes().len(), |i| {
        if i == 0 {
            Ok(luma.value)
        } else {
            ms_ssim(a.plane(i), b.plane(i), p).map(|m| m.value)
        }
    })?;
    Ok(MsSsim {
        value,
        scales: luma.scales,
    })
}

/// Per-frame row of a metrics report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub psnr: f64,
    pub ms_ssim: f64,
    pub roi_psnr: Option<f64>,
    pub roi_ms_ssim: Option<f64>,
}

/// Full comparison between two sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: Vec<FrameMetrics>,
    pub bpp: Option<f64>,
    /// Scales actually used by MS-SSIM on the full frame.
    pub ms_ssim_scales: usize,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

impl MetricsReport {
    pub fn mean_psnr(&self) -> Option<f64> {
        mean_of(self.frames.iter().map(|f| f.psnr))
    }

    pub fn mean_ms_ssim(&self) -> Option<f64> {
        mean_of(self.frames.iter().map(|f| f.ms_ssim))
    }

    pub fn mean_roi_psnr(&self) -> Option<f64> {
        mean_of(self.frames.iter().filter_map(|f| f.roi_psnr))
    }

    pub fn mean_roi_ms_ssim(&self) -> Option<f64> {
        mean_of(self.frames.iter().filter_map(|f| f.roi_ms_ssim))
    }
}

/// Computes one [`FrameMetrics`] row.
pub fn compare_frames(
    index: usize,
    reference: &Frame,
    distorted: &Frame,
    roi: &[BoundingBox],
    p: &SsimParams,
    weighting: PlaneWeighting,
) -> Result<(FrameMetrics, usize)> {
    if reference.planes().len() != distorted.planes().len() {
        return Err(Error::Dimension("plane count differs".into()));
    }
    for (a, b) in reference.planes().iter().zip(distorted.planes()) {
        check_same(a, b)?;
    }
    let ms = frame_ms_ssim(reference, distorted, p, weighting)?;
    let (roi_psnr, roi_ms_ssim) = if roi.is_empty() {
        (None, None)
    } else {
        let r = roi_metrics(reference, distorted, roi, p)?;
        (Some(r.psnr), r.ms_ssim.map(|m| m.value))
    };
    Ok((
        FrameMetrics {
            frame: index,
            psnr: frame_psnr(reference, distorted, weighting)?,
            ms_ssim: ms.value,
            roi_psnr,
            roi_ms_ssim,
        },
        ms.scales,
    ))
}
