//! Detector output ingestion and object patch handling.
//!
//! Detections come from a JSON sidecar manifest:
//!
//! ```json
//! {"version": 1, "width": 1920, "height": 1080,
//!  "frames": [{"index": 0, "boxes": [
//!     {"label": "person", "confidence": 0.91, "x": 10, "y": 20, "w": 64, "h": 128}]}]}
//! ```
//!
//! Geometry is in luma pixels with a top-left origin. Boxes are clipped to
//! the frame on load; entries repeated for the same frame index are merged.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, Plane};

pub const MANIFEST_VERSION: u32 = 1;
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.5;

/// Axis-aligned detection in luma pixel coordinates, already clipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub confidence: f64,
    pub label: String,
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        BoundingBox {
            x,
            y,
            w,
            h,
            confidence: 1.0,
            label: String::new(),
        }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    #[inline]
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn contains(&self, px: u32, py: u32) -> bool {
        px >= self.x && px < self.right() && py >= self.y && py < self.bottom()
    }

    /// Clips a raw detector box to `width × height`; `None` if nothing remains.
    pub fn clipped(
        x: i64,
        y: i64,
        w: i64,
        h: i64,
        width: u32,
        height: u32,
    ) -> Option<(u32, u32, u32, u32)> {
        let x0 = x.max(0);
        let y0 = y.max(0);
        let x1 = (x + w).min(width as i64);
        let y1 = (y + h).min(height as i64);
        (x1 > x0 && y1 > y0).then(|| (x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32))
    }

    /// Grows the box outward to 8-pixel boundaries, staying inside the frame.
    pub fn aligned_to_blocks(&self, width: u32, height: u32) -> BoundingBox {
        let x0 = self.x / 8 * 8;
        let y0 = self.y / 8 * 8;
        let x1 = self.right().div_ceil(8).saturating_mul(8).min(width);
        let y1 = self.bottom().div_ceil(8).saturating_mul(8).min(height);
        BoundingBox {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
            ..self.clone()
        }
    }
}

/// Detections for one frame. Empty means nothing was found.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub frame_index: usize,
    pub boxes: Vec<BoundingBox>,
}

impl DetectionSet {
    pub fn new(frame_index: usize, boxes: Vec<BoundingBox>) -> Self {
        DetectionSet { frame_index, boxes }
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestFile {
    pub version: u32,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub frames: Vec<ManifestFrame>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub index: usize,
    #[serde(default)]
    pub boxes: Vec<ManifestBox>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestBox {
    #[serde(default)]
    pub label: String,
    pub confidence: f64,
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

/// Parsed, clipped detections keyed by frame index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub width: u32,
    pub height: u32,
    pub frames: BTreeMap<usize, DetectionSet>,
}

impl Manifest {
    /// Detections for `index`; frames absent from the manifest have none.
    pub fn detections(&self, index: usize) -> DetectionSet {
        self.frames
            .get(&index)
            .cloned()
            .unwrap_or_else(|| DetectionSet::new(index, Vec::new()))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.frames.keys().next_back().copied()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ManifestFile =
            serde_json::from_str(text).map_err(|e| Error::Manifest(format!("malformed JSON: {e}")))?;
        if file.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!(
                "unknown schema version {}",
                file.version
            )));
        }
        let mut frames: BTreeMap<usize, DetectionSet> = BTreeMap::new();
        for entry in file.frames {
            let set = frames
                .entry(entry.index)
                .or_insert_with(|| DetectionSet::new(entry.index, Vec::new()));
            for b in entry.boxes {
                if b.w <= 0 || b.h <= 0 {
                    return Err(Error::Manifest(format!(
                        "frame {}: box {}x{} has non-positive size",
                        entry.index, b.w, b.h
                    )));
                }
                if !(0.0..=1.0).contains(&b.confidence) {
                    return Err(Error::Manifest(format!(
                        "frame {}: confidence {} outside [0, 1]",
                        entry.index, b.confidence
                    )));
                }
                if let Some((x, y, w, h)) = BoundingBox::clipped(b.x, b.y, b.w, b.h, file.width, file.height) {
                    set.boxes.push(BoundingBox {
                        x,
                        y,
                        w,
                        h,
                        confidence: b.confidence,
                        label: b.label,
                    });
                }
            }
        }
        Ok(Manifest {
            width: file.width,
            height: file.height,
            frames,
        })
    }

    pub fn to_file(&self) -> ManifestFile {
        ManifestFile {
            version: MANIFEST_VERSION,
            width: self.width,
            height: self.height,
            frames: self
                .frames
                .values()
                .map(|set| ManifestFrame {
                    index: set.frame_index,
                    boxes: set
                        .boxes
                        .iter()
                        .map(|b| ManifestBox {
                            label: b.label.clone(),
                            confidence: b.confidence,
                            x: b.x as i64,
                            y: b.y as i64,
                            w: b.w as i64,
                            h: b.h as i64,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Manifest::from_json(&text)
}

/// Converts darknet-style lines (`label confidence x_center y_center w h`,
/// normalized to `[0, 1]`) into clipped pixel boxes.
pub fn parse_darknet(text: &str, width: u32, height: u32) -> Result<Vec<BoundingBox>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 6 {
            return Err(Error::Manifest(format!(
                "darknet line {}: expected 6 fields, got {}",
                i + 1,
                toks.len()
            )));
        }
        let nums = toks[1..]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Manifest(format!("darknet line {}: {e}", i + 1)))?;
        let (conf, xc, yc, w, h) = (nums[0], nums[1], nums[2], nums[3], nums[4]);
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::Manifest(format!("darknet line {}: empty box", i + 1)));
        }
        let (fw, fh) = (width as f64, height as f64);
        let x0 = ((xc - w / 2.0) * fw).round() as i64;
        let y0 = ((yc - h / 2.0) * fh).round() as i64;
        let x1 = ((xc + w / 2.0) * fw).round() as i64;
        let y1 = ((yc + h / 2.0) * fh).round() as i64;
        if let Some((x, y, w, h)) = BoundingBox::clipped(x0, y0, x1 - x0, y1 - y0, width, height) {
            out.push(BoundingBox {
                x,
                y,
                w,
                h,
                confidence: conf,
                label: toks[0].to_string(),
            });
        }
    }
    Ok(out)
}

/// Keeps boxes whose confidence is at least `threshold`.
pub fn filter_confidence(set: &DetectionSet, threshold: f64) -> DetectionSet {
    DetectionSet {
        frame_index: set.frame_index,
        boxes: set
            .boxes
            .iter()
            .filter(|b| b.confidence >= threshold)
            .cloned()
            .collect(),
    }
}

/// Exact area of the union of the boxes.
///
/// Sweeps the compressed x coordinates; within each vertical slab the
/// covering y-intervals are merged and measured.
pub fn union_area(boxes: &[BoundingBox]) -> u64 {
    let mut xs: Vec<u32> = boxes.iter().flat_map(|b| [b.x, b.right()]).collect();
    xs.sort_unstable();
    xs.dedup();
    let mut total = 0u64;
    let mut spans: Vec<(u32, u32)> = Vec::with_capacity(boxes.len());
    for slab in xs.windows(2) {
        let (x0, x1) = (slab[0], slab[1]);
        spans.clear();
        spans.extend(
            boxes
                .iter()
                .filter(|b| b.x <= x0 && b.right() >= x1)
                .map(|b| (b.y, b.bottom())),
        );
        if spans.is_empty() {
            continue;
        }
        spans.sort_unstable();
        let mut covered = 0u64;
        let (mut lo, mut hi) = spans[0];
        for &(a, b) in &spans[1..] {
            if a > hi {
                covered += (hi - lo) as u64;
                lo = a;
                hi = b;
            } else {
                hi = hi.max(b);
            }
        }
        covered += (hi - lo) as u64;
        total += covered * (x1 - x0) as u64;
    }
    total
}

/// Tight rectangle `(x, y, w, h)` around all boxes.
pub fn union_bounds(boxes: &[BoundingBox]) -> Option<(u32, u32, u32, u32)> {
    let x0 = boxes.iter().map(|b| b.x).min()?;
    let y0 = boxes.iter().map(|b| b.y).min()?;
    let x1 = boxes.iter().map(|b| b.right()).max()?;
    let y1 = boxes.iter().map(|b| b.bottom()).max()?;
    Some((x0, y0, x1 - x0, y1 - y0))
}

/// Region of plane `i` covered by a luma box, given the plane's decimation.
///
/// Returns `(x, y, w, h)` in plane samples: `⌊x/s⌋ .. ⌈(x+w)/s⌉`.
pub fn plane_region(b: &BoundingBox, scale: (usize, usize), plane: &Plane) -> (usize, usize, usize, usize) {
    let (sx, sy) = scale;
    let x0 = b.x as usize / sx;
    let y0 = b.y as usize / sy;
    let x1 = (b.right() as usize).div_ceil(sx).min(plane.width());
    let y1 = (b.bottom() as usize).div_ceil(sy).min(plane.height());
    (x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchPlane {
    pub x: usize,
    pub y: usize,
    pub samples: Plane,
}

/// Saved object pixels for every plane under one box.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub bbox: BoundingBox,
    pub planes: Vec<PatchPlane>,
}

pub fn extract_patches(frame: &Frame, set: &DetectionSet) -> Result<Vec<Patch>> {
    set.boxes
        .iter()
        .map(|b| {
            let planes = frame
                .planes()
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let (x, y, w, h) = plane_region(b, frame.plane_scale(i), p);
                    Ok(PatchPlane {
                        x,
                        y,
                        samples: p.crop(x, y, w, h)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Patch {
                bbox: b.clone(),
                planes,
            })
        })
        .collect()
}

/// Writes saved patches back in order; later patches win where they overlap.
pub fn restore_patches(frame: &Frame, patches: &[Patch]) -> Result<Frame> {
    let mut out = frame.clone();
    for patch in patches {
        if patch.planes.len() != out.planes().len() {
            return Err(Error::PatchMismatch(format!(
                "patch has {} planes, frame has {}",
                patch.planes.len(),
                out.planes().len()
            )));
        }
        for (pp, plane) in patch.planes.iter().zip(out.planes_mut()) {
            let (w, h) = (pp.samples.width(), pp.samples.height());
            if pp.x + w > plane.width() || pp.y + h > plane.height() {
                return Err(Error::PatchMismatch(format!(
                    "{}x{} patch at ({}, {}) exceeds {}x{} plane",
                    w,
                    h,
                    pp.x,
                    pp.y,
                    plane.width(),
                    plane.height()
                )));
            }
            let pw = plane.width();
            let data = plane.data_mut();
            for r in 0..h {
                let dst = (pp.y + r) * pw + pp.x;
                data[dst..dst + w].copy_from_slice(pp.samples.row(r));
            }
        }
    }
    Ok(out)
}
