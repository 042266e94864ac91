//! Quantization matrices, the eight-matrix bank and adaptive level selection.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::FreqBlock;

/// Standard JPEG luminance table (ITU-T T.81 Annex K).
pub const JPEG_LUMA: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Standard JPEG chrominance table (ITU-T T.81 Annex K).
pub const JPEG_CHROMA: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

pub const DEFAULT_LUMA_QUALITIES: [u8; 4] = [20, 35, 50, 70];
pub const DEFAULT_CHROMA_QUALITIES: [u8; 4] = [10, 20, 35, 50];

/// 8x8 divisor table, row-major in `(u, v)`, entries in `[1, 255]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuantMatrix {
    q: [u16; 64],
}

impl QuantMatrix {
    pub fn new(q: [u16; 64]) -> Result<Self> {
        if let Some((i, v)) = q.iter().enumerate().find(|(_, &v)| !(1..=255).contains(&v)) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) = {} outside 1..=255",
                i / 8,
                i % 8,
                v
            )));
        }
        Ok(QuantMatrix { q })
    }

    pub fn flat(value: u16) -> Result<Self> {
        Self::new([value; 64])
    }

    pub fn luma_base() -> Self {
        QuantMatrix { q: JPEG_LUMA }
    }

    pub fn chroma_base() -> Self {
        QuantMatrix { q: JPEG_CHROMA }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u16 {
        self.q[u * 8 + v]
    }

    pub fn entries(&self) -> &[u16; 64] {
        &self.q
    }
}

/// libjpeg-style quality scaling of a base table.
pub fn scale_matrix(base: &QuantMatrix, quality: u8) -> Result<QuantMatrix> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidQuality(quality as i64));
    }
    let q = quality as u32;
    let s = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0u16; 64];
    for (o, &b) in out.iter_mut().zip(base.q.iter()) {
        *o = ((b as u32 * s + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(QuantMatrix { q: out })
}

/// Adaptive quality index: 0 is the most aggressive, 3 the gentlest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Level(u8);

impl Level {
    pub const ALL: [Level; 4] = [Level(0), Level(1), Level(2), Level(3)];

    pub fn new(m: u8) -> Result<Self> {
        if m > 3 {
            return Err(Error::Config(format!("level {m} outside 0..=3")));
        }
        Ok(Level(m))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `m = round(3·(S − A)/S)`, ties away from zero.
///
/// Evaluated in integers as `⌊(6(S − A) + S) / 2S⌋` so ties at `.5` are exact.
pub fn select_level(frame_area: u64, object_area: u64) -> Result<Level> {
    if frame_area == 0 || object_area > frame_area {
        return Err(Error::InvalidArea {
            frame: frame_area,
            object: object_area,
        });
    }
    let s = frame_area as u128;
    let bg = (frame_area - object_area) as u128;
    Ok(Level(((6 * bg + s) / (2 * s)) as u8))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantizedBlock {
    pub coeffs: [i32; 64],
}

/// Entrywise `round(F / Q)`, ties away from zero.
pub fn quantize(freq: &FreqBlock, q: &QuantMatrix) -> QuantizedBlock {
    let mut coeffs = [0i32; 64];
    for ((o, &f), &d) in coeffs.iter_mut().zip(freq.coeffs.iter()).zip(q.q.iter()) {
        *o = (f / d as f64).round() as i32;
    }
    QuantizedBlock { coeffs }
}

pub fn dequantize(qb: &QuantizedBlock, q: &QuantMatrix) -> FreqBlock {
    let mut coeffs = [0.0; 64];
    for ((o, &k), &d) in coeffs.iter_mut().zip(qb.coeffs.iter()).zip(q.q.iter()) {
        *o = k as f64 * d as f64;
    }
    FreqBlock { coeffs }
}

pub fn zero_fraction(qb: &QuantizedBlock) -> f64 {
    qb.coeffs.iter().filter(|&&c| c == 0).count() as f64 / 64.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Luma,
    Chroma,
}

/// How one bank entry was produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixSource {
    Quality { base: Family, quality: u8 },
    Table,
}

/// The eight matrices `L0..L3` (luma) and `C0..C3` (chroma).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBank {
    luma: [QuantMatrix; 4],
    chroma: [QuantMatrix; 4],
    luma_src: [MatrixSource; 4],
    chroma_src: [MatrixSource; 4],
}

impl Default for MatrixBank {
    fn default() -> Self {
        MatrixBank::from_qualities(DEFAULT_LUMA_QUALITIES, DEFAULT_CHROMA_QUALITIES)
            .expect("default qualities are ordered")
    }
}

impl MatrixBank {
    /// Builds the bank from per-level qualities against the standard bases.
    ///
    /// Qualities must rise strictly with the level and chroma must stay below
    /// luma at every level.
    pub fn from_qualities(luma: [u8; 4], chroma: [u8; 4]) -> Result<Self> {
        let src = |base, q: [u8; 4]| q.map(|quality| MatrixSource::Quality { base, quality });
        Self::from_sources(src(Family::Luma, luma), src(Family::Chroma, chroma), None)
    }

    /// Takes explicit tables; no ordering constraints apply.
    pub fn from_matrices(luma: [QuantMatrix; 4], chroma: [QuantMatrix; 4]) -> Self {
        MatrixBank {
            luma,
            chroma,
            luma_src: std::array::from_fn(|_| MatrixSource::Table),
            chroma_src: std::array::from_fn(|_| MatrixSource::Table),
        }
    }

    /// A bank whose eight entries are all `q`.
    pub fn uniform(q: QuantMatrix) -> Self {
        Self::from_matrices([q; 4], [q; 4])
    }

    fn from_sources(
        luma_src: [MatrixSource; 4],
        chroma_src: [MatrixSource; 4],
        tables: Option<&[[Option<QuantMatrix>; 4]; 2]>,
    ) -> Result<Self> {
        let quality = |s: &MatrixSource| match s {
            MatrixSource::Quality { quality, .. } => Some(*quality),
            MatrixSource::Table => None,
        };
        for (name, srcs) in [("L", &luma_src), ("C", &chroma_src)] {
            for k in 0..3 {
                if let (Some(a), Some(b)) = (quality(&srcs[k]), quality(&srcs[k + 1])) {
                    if a >= b {
                        return Err(Error::Config(format!(
                            "{name}{} quality {a} must be below {name}{} quality {b}",
                            k,
                            k + 1
                        )));
                    }
                }
            }
        }
        for k in 0..4 {
            if let (Some(c), Some(l)) = (quality(&chroma_src[k]), quality(&luma_src[k])) {
                if c >= l {
                    return Err(Error::Config(format!(
                        "C{k} quality {c} must be below L{k} quality {l}"
                    )));
                }
            }
        }
        let build = |fam: usize, k: usize, s: &MatrixSource| -> Result<QuantMatrix> {
            match s {
                MatrixSource::Quality { base, quality } => {
                    let base = match base {
                        Family::Luma => QuantMatrix::luma_base(),
                        Family::Chroma => QuantMatrix::chroma_base(),
                    };
                    scale_matrix(&base, *quality)
                }
                MatrixSource::Table => tables
                    .and_then(|t| t[fam][k])
                    .ok_or_else(|| Error::Config("table entry without data".into())),
            }
        };
        let mut luma = [QuantMatrix::luma_base(); 4];
        let mut chroma = [QuantMatrix::chroma_base(); 4];
        for k in 0..4 {
            luma[k] = build(0, k, &luma_src[k])?;
            chroma[k] = build(1, k, &chroma_src[k])?;
        }
        Ok(MatrixBank {
            luma,
            chroma,
            luma_src,
            chroma_src,
        })
    }

    pub fn luma(&self, level: Level) -> &QuantMatrix {
        &self.luma[level.index()]
    }

    pub fn chroma(&self, level: Level) -> &QuantMatrix {
        &self.chroma[level.index()]
    }

    /// Matrix for plane `plane_index` (0 = luma) at `level`.
    pub fn for_plane(&self, plane_index: usize, level: Level) -> &QuantMatrix {
        if plane_index == 0 {
            self.luma(level)
        } else {
            self.chroma(level)
        }
    }

    /// Short description of every entry, e.g. `L0=q20`.
    pub fn describe(&self) -> Vec<String> {
        let fmt = |name: &str, k: usize, s: &MatrixSource| match s {
            MatrixSource::Quality { base, quality } => {
                let default_base = if name == "L" { Family::Luma } else { Family::Chroma };
                if *base == default_base {
                    format!("{name}{k}=q{quality}")
                } else {
                    format!("{name}{k}=q{quality}/{base:?}").to_lowercase()
                }
            }
            MatrixSource::Table => format!("{name}{k}=table"),
        };
        let mut out: Vec<String> = self.luma_src.iter().enumerate().map(|(k, s)| fmt("L", k, s)).collect();
        out.extend(self.chroma_src.iter().enumerate().map(|(k, s)| fmt("C", k, s)));
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses the line-oriented bank format.
    ///
    /// ```text
    /// # comment
    /// L0 quality 20
    /// C3 quality 50 base luma
    /// L3 table
    /// 16 11 10 16 24 40 51 61
    /// ...                         (64 integers in total)
    /// ```
    ///
    /// All eight entries `L0..L3`, `C0..C3` must be present exactly once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut srcs: [[Option<MatrixSource>; 4]; 2] = Default::default();
        let mut tables: [[Option<QuantMatrix>; 4]; 2] = [[None; 4]; 2];
        // (family, level, values so far, line where the table began)
        let mut pending: Option<(usize, usize, Vec<u16>, usize)> = None;
        let err = |line: usize, message: String| Error::BankParse { line, message };

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((fam, k, values, start)) = pending.as_mut() {
                for tok in line.split_whitespace() {
                    let v: u16 = tok
                        .parse()
                        .map_err(|_| err(line_no, format!("`{tok}` is not a table entry")))?;
                    values.push(v);
                }
                if values.len() > 64 {
                    return Err(err(line_no, format!("table started on line {start} has more than 64 entries")));
                }
                if values.len() == 64 {
                    let q: [u16; 64] = values.as_slice().try_into().expect("64 entries");
                    tables[*fam][*k] =
                        Some(QuantMatrix::new(q).map_err(|e| err(line_no, e.to_string()))?);
                    pending = None;
                }
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let name = toks[0];
            let (fam, k) = parse_entry_name(name)
                .ok_or_else(|| err(line_no, format!("expected L0..L3 or C0..C3, found `{name}`")))?;
            if srcs[fam][k].is_some() {
                return Err(err(line_no, format!("{name} defined twice")));
            }
            match toks.get(1).copied() {
                Some("quality") => {
                    let q = toks
                        .get(2)
                        .and_then(|t| t.parse::<i64>().ok())
                        .ok_or_else(|| err(line_no, "quality needs an integer".into()))?;
                    if !(1..=100).contains(&q) {
                        return Err(err(line_no, format!("quality {q} outside 1..=100")));
                    }
                    let base = match (toks.get(3).copied(), toks.get(4).copied()) {
                        (None, _) => if fam == 0 { Family::Luma } else { Family::Chroma },
                        (Some("base"), Some("luma")) => Family::Luma,
                        (Some("base"), Some("chroma")) => Family::Chroma,
                        _ => return Err(err(line_no, "expected `base luma` or `base chroma`".into())),
                    };
                    if toks.len() > 5 {
                        return Err(err(line_no, "trailing tokens".into()));
                    }
                    srcs[fam][k] = Some(MatrixSource::Quality {
                        base,
                        quality: q as u8,
                    });
                }
                Some("table") => {
                    if toks.len() > 2 {
                        return Err(err(line_no, "table values start on the next line".into()));
                    }
                    srcs[fam][k] = Some(MatrixSource::Table);
                    pending = Some((fam, k, Vec::with_capacity(64), line_no));
                }
                other => {
                    return Err(err(
                        line_no,
                        format!("expected `quality` or `table`, found `{}`", other.unwrap_or("")),
                    ))
                }
            }
        }
        let last_line = text.lines().count();
        if let Some((_, _, values, start)) = pending {
            return Err(err(
                last_line,
                format!("table started on line {start} has {} of 64 entries", values.len()),
            ));
        }
        let take = |fam: usize, name: &str| -> Result<[MatrixSource; 4]> {
            let mut out: [MatrixSource; 4] = std::array::from_fn(|_| MatrixSource::Table);
            for k in 0..4 {
                out[k] = srcs[fam][k]
                    .clone()
                    .ok_or_else(|| err(last_line, format!("{name}{k} is missing")))?;
            }
            Ok(out)
        };
        let luma = take(0, "L")?;
        let chroma = take(1, "C")?;
        Self::from_sources(luma, chroma, Some(&tables)).map_err(|e| match e {
            Error::Config(m) => err(last_line, m),
            other => other,
        })
    }
}

fn parse_entry_name(name: &str) -> Option<(usize, usize)> {
    let mut chars = name.chars();
    let fam = match chars.next()? {
        'L' | 'l' => 0,
        'C' | 'c' => 1,
        _ => return None,
    };
    let k: usize = chars.as_str().parse().ok()?;
    (k < 4).then_some((fam, k))
}
