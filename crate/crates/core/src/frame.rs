//! Planar frames and bit-exact image/sequence I/O.
//!
//! Stored frames are 8-bit planar. Single images are read and written as
//! binary PPM (P6) or PGM (P5) with maxval 255. Raw sequences are headerless,
//! frame-sequential planar YUV (Y, U, V) or packed RGB24, the layout produced
//! by `ffmpeg -f rawvideo`.

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single 8-bit sample plane in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "plane {}x{} needs {} samples, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Copies the sub-rectangle `[x, x+w) × [y, y+h)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Plane> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::Dimension(format!(
                "crop {}x{}+{}+{} exceeds plane {}x{}",
                w, h, x, y, self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        Ok(Plane {
            width: w,
            height: h,
            data,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    Yuv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsampling {
    S444,
    S420,
}

impl Subsampling {
    /// Dimensions of a chroma plane for a luma plane of `width × height`.
    pub fn chroma_dims(self, width: usize, height: usize) -> (usize, usize) {
        match self {
            Subsampling::S444 => (width, height),
            Subsampling::S420 => (width.div_ceil(2), height.div_ceil(2)),
        }
    }
}

/// A planar image: one plane (luma only) or three (RGB or YUV).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    planes: Vec<Plane>,
    colorspace: ColorSpace,
    subsampling: Subsampling,
}

impl Frame {
    pub fn new(planes: Vec<Plane>, colorspace: ColorSpace, subsampling: Subsampling) -> Result<Self> {
        match planes.len() {
            1 => {
                if colorspace == ColorSpace::Rgb {
                    return Err(Error::ColorspaceMismatch(
                        "single-plane frames are luma only".into(),
                    ));
                }
                if subsampling != Subsampling::S444 {
                    return Err(Error::Dimension(
                        "single-plane frames carry no chroma to subsample".into(),
                    ));
                }
            }
            3 => {
                if colorspace == ColorSpace::Rgb && subsampling != Subsampling::S444 {
                    return Err(Error::ColorspaceMismatch(
                        "RGB frames must be 4:4:4".into(),
                    ));
                }
                let (w, h) = (planes[0].width, planes[0].height);
                let (cw, ch) = subsampling.chroma_dims(w, h);
                for p in &planes[1..] {
                    if p.width != cw || p.height != ch {
                        return Err(Error::Dimension(format!(
                            "chroma plane {}x{} does not match expected {}x{}",
                            p.width, p.height, cw, ch
                        )));
                    }
                }
            }
            n => {
                return Err(Error::Dimension(format!(
                    "frames have 1 or 3 planes, got {n}"
                )))
            }
        }
        Ok(Frame {
            planes,
            colorspace,
            subsampling,
        })
    }

    pub fn luma_only(plane: Plane) -> Self {
        Frame {
            planes: vec![plane],
            colorspace: ColorSpace::Yuv,
            subsampling: Subsampling::S444,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.planes[0].width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.planes[0].height
    }

    #[inline]
    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    #[inline]
    pub fn subsampling(&self) -> Subsampling {
        self.subsampling
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn planes_mut(&mut self) -> &mut [Plane] {
        &mut self.planes
    }

    pub fn plane(&self, i: usize) -> &Plane {
        &self.planes[i]
    }

    pub fn into_planes(self) -> Vec<Plane> {
        self.planes
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }

    /// Horizontal and vertical decimation of plane `i` relative to luma.
    pub fn plane_scale(&self, i: usize) -> (usize, usize) {
        if i > 0 && self.subsampling == Subsampling::S420 {
            (2, 2)
        } else {
            (1, 1)
        }
    }
}

/// Single-image interchange formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary RGB, `P6`.
    Ppm,
    /// Binary grayscale, `P5`.
    Pgm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ppm" => Some(ImageFormat::Ppm),
            "pgm" => Some(ImageFormat::Pgm),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Ppm => "ppm",
            ImageFormat::Pgm => "pgm",
        }
    }
}

struct HeaderCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            let c = self.buf[self.pos];
            if c == b'#' {
                while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("unparseable {what}")))
    }
}

/// Decodes an in-memory P6/P5 image.
pub fn decode_image(bytes: &[u8], format: ImageFormat) -> Result<Frame> {
    let magic = match format {
        ImageFormat::Ppm => b"P6",
        ImageFormat::Pgm => b"P5",
    };
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::MalformedHeader(format!(
            "expected magic {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut cur = HeaderCursor { buf: bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(Error::MalformedHeader(
                "maxval must be followed by a single whitespace byte".into(),
            ))
        }
    }
    let channels = match format {
        ImageFormat::Ppm => 3,
        ImageFormat::Pgm => 1,
    };
    let expected = width * height * channels;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let payload = &payload[..expected];
    match format {
        ImageFormat::Pgm => Ok(Frame::luma_only(Plane::new(width, height, payload.to_vec())?)),
        ImageFormat::Ppm => {
            let planes = deinterleave_rgb(payload, width, height);
            Frame::new(planes, ColorSpace::Rgb, Subsampling::S444)
        }
    }
}

/// Encodes a frame as P6/P5 bytes.
pub fn encode_image(frame: &Frame, format: ImageFormat) -> Result<Vec<u8>> {
    if frame.is_empty() {
        return Err(Error::Dimension(format!(
            "cannot store a {}x{} image",
            frame.width(),
            frame.height()
        )));
    }
    let (magic, body) = match format {
        ImageFormat::Ppm => {
            if frame.colorspace() != ColorSpace::Rgb {
                return Err(Error::ColorspaceMismatch("PPM stores RGB frames only".into()));
            }
            ("P6", interleave_rgb(frame))
        }
        ImageFormat::Pgm => {
            if frame.planes().len() != 1 {
                return Err(Error::ColorspaceMismatch(
                    "PGM stores single-plane frames only".into(),
                ));
            }
            ("P5", frame.plane(0).data().to_vec())
        }
    };
    let mut out = format!("{}\n{} {}\n255\n", magic, frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn load_image(path: impl AsRef<Path>, format: ImageFormat) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes, format)
}

pub fn save_image(frame: &Frame, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(frame, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn deinterleave_rgb(packed: &[u8], width: usize, height: usize) -> Vec<Plane> {
    let n = width * height;
    let mut r = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for px in packed.chunks_exact(3) {
        r.push(px[0]);
        g.push(px[1]);
        b.push(px[2]);
    }
    [r, g, b]
        .into_iter()
        .map(|data| Plane {
            width,
            height,
            data,
        })
        .collect()
}

fn interleave_rgb(frame: &Frame) -> Vec<u8> {
    let [r, g, b] = [frame.plane(0), frame.plane(1), frame.plane(2)];
    let mut out = Vec::with_capacity(r.data.len() * 3);
    for i in 0..r.data.len() {
        out.extend_from_slice(&[r.data[i], g.data[i], b.data[i]]);
    }
    out
}

/// Raw sequence sample layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelFormat {
    Yuv444p,
    Yuv420p,
    Rgb24,
}

impl PixelFormat {
    pub fn frame_size(self, width: usize, height: usize) -> usize {
        match self {
            PixelFormat::Yuv444p | PixelFormat::Rgb24 => 3 * width * height,
            PixelFormat::Yuv420p => {
                let (cw, ch) = Subsampling::S420.chroma_dims(width, height);
                width * height + 2 * cw * ch
            }
        }
    }

    /// FFmpeg `-pix_fmt` name.
    pub fn ffmpeg_name(self) -> &'static str {
        match self {
            PixelFormat::Yuv444p => "yuv444p",
            PixelFormat::Yuv420p => "yuv420p",
            PixelFormat::Rgb24 => "rgb24",
        }
    }

    pub fn colorspace(self) -> ColorSpace {
        match self {
            PixelFormat::Rgb24 => ColorSpace::Rgb,
            _ => ColorSpace::Yuv,
        }
    }

    pub fn subsampling(self) -> Subsampling {
        match self {
            PixelFormat::Yuv420p => Subsampling::S420,
            _ => Subsampling::S444,
        }
    }

    /// The format able to carry `frame` without resampling.
    pub fn for_frame(frame: &Frame) -> Result<Self> {
        match (frame.colorspace(), frame.subsampling(), frame.planes().len()) {
            (ColorSpace::Rgb, _, _) => Ok(PixelFormat::Rgb24),
            (ColorSpace::Yuv, Subsampling::S444, 3) => Ok(PixelFormat::Yuv444p),
            (ColorSpace::Yuv, Subsampling::S420, 3) => Ok(PixelFormat::Yuv420p),
            _ => Err(Error::ColorspaceMismatch(
                "single-plane frames have no raw sequence format".into(),
            )),
        }
    }
}

impl FromStr for PixelFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "yuv444p" | "yuv444p8" => Ok(PixelFormat::Yuv444p),
            "yuv420p" | "yuv420p8" => Ok(PixelFormat::Yuv420p),
            "rgb24" => Ok(PixelFormat::Rgb24),
            other => Err(Error::Config(format!("unknown pixel format `{other}`"))),
        }
    }
}

/// Splits raw frame bytes into a [`Frame`].
pub fn decode_raw_frame(bytes: &[u8], width: usize, height: usize, format: PixelFormat) -> Result<Frame> {
    let expected = format.frame_size(width, height);
    if bytes.len() != expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    match format {
        PixelFormat::Rgb24 => Frame::new(
            deinterleave_rgb(bytes, width, height),
            ColorSpace::Rgb,
            Subsampling::S444,
        ),
        PixelFormat::Yuv444p | PixelFormat::Yuv420p => {
            let sub = format.subsampling();
            let (cw, ch) = sub.chroma_dims(width, height);
            let (y, rest) = bytes.split_at(width * height);
            let (u, v) = rest.split_at(cw * ch);
            Frame::new(
                vec![
                    Plane::new(width, height, y.to_vec())?,
                    Plane::new(cw, ch, u.to_vec())?,
                    Plane::new(cw, ch, v.to_vec())?,
                ],
                ColorSpace::Yuv,
                sub,
            )
        }
    }
}

/// Serializes a frame in the given raw layout.
pub fn encode_raw_frame(frame: &Frame, format: PixelFormat) -> Result<Vec<u8>> {
    if PixelFormat::for_frame(frame)? != format {
        return Err(Error::ColorspaceMismatch(format!(
            "{:?} {:?} frame cannot be written as {}",
            frame.colorspace(),
            frame.subsampling(),
            format.ffmpeg_name()
        )));
    }
    Ok(match format {
        PixelFormat::Rgb24 => interleave_rgb(frame),
        _ => frame
            .planes()
            .iter()
            .flat_map(|p| p.data.iter().copied())
            .collect(),
    })
}

/// A headerless raw clip on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceSpec {
    pub path: PathBuf,
    pub width: usize,
    pub height: usize,
    pub format: PixelFormat,
    pub frame_count: usize,
}

impl SequenceSpec {
    /// Describes an existing file, deriving the frame count from its size.
    pub fn open(path: impl Into<PathBuf>, width: usize, height: usize, format: PixelFormat) -> Result<Self> {
        let path = path.into();
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("{width}x{height} sequence")));
        }
        let len = std::fs::metadata(&path)
            .map_err(|e| Error::io(&path, e))?
            .len() as usize;
        let frame_size = format.frame_size(width, height);
        if !len.is_multiple_of(frame_size) {
            return Err(Error::Dimension(format!(
                "file size {len} is not a multiple of the {frame_size}-byte frame size"
            )));
        }
        Ok(SequenceSpec {
            path,
            width,
            height,
            format,
            frame_count: len / frame_size,
        })
    }

    pub fn frame_size(&self) -> usize {
        self.format.frame_size(self.width, self.height)
    }
}

/// Reads frame `index` of a raw sequence.
pub fn read_sequence(spec: &SequenceSpec, index: usize) -> Result<Frame> {
    let mut reader = SequenceReader::new(spec.clone())?;
    reader.read_frame(index)
}

/// Holds a sequence file open for repeated frame reads.
pub struct SequenceReader {
    spec: SequenceSpec,
    file: File,
}

impl SequenceReader {
    pub fn new(spec: SequenceSpec) -> Result<Self> {
        let file = File::open(&spec.path).map_err(|e| Error::io(&spec.path, e))?;
        Ok(SequenceReader { spec, file })
    }

    pub fn spec(&self) -> &SequenceSpec {
        &self.spec
    }

    pub fn read_frame(&mut self, index: usize) -> Result<Frame> {
        if index >= self.spec.frame_count {
            return Err(Error::IndexOutOfRange {
                index,
                count: self.spec.frame_count,
            });
        }
        let size = self.spec.frame_size();
        let path = &self.spec.path;
        self.file
            .seek(SeekFrom::Start((index * size) as u64))
            .map_err(|e| Error::io(path, e))?;
        let mut buf = Vec::with_capacity(size);
        (&mut self.file)
            .take(size as u64)
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(path, e))?;
        if buf.len() != size {
            return Err(Error::ShortRead {
                index,
                expected: size,
                found: buf.len(),
            });
        }
        decode_raw_frame(&buf, self.spec.width, self.spec.height, self.spec.format)
    }
}

/// Appends frames to a raw sequence sink.
pub struct SequenceWriter<W: Write> {
    sink: BufWriter<W>,
    format: PixelFormat,
    frames: usize,
}

impl<W: Write> SequenceWriter<W> {
    pub fn new(sink: W, format: PixelFormat) -> Self {
        SequenceWriter {
            sink: BufWriter::new(sink),
            format,
            frames: 0,
        }
    }

    pub fn write_frame(&mut self, frame: &Frame) -> std::io::Result<()> {
        let bytes = encode_raw_frame(frame, self.format)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
        self.sink.write_all(&bytes)?;
        self.frames += 1;
        Ok(())
    }

    pub fn frames_written(&self) -> usize {
        self.frames
    }

    pub fn finish(self) -> std::io::Result<W> {
        self.sink.into_inner().map_err(|e| e.into_error())
    }
}

/// Lists `*.ppm` / `*.pgm` files of a frame directory in name order.
pub fn list_image_dir(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && ImageFormat::from_path(p).is_some())
        .collect();
    files.sort();
    Ok(files)
}

/// Zero-padded file name for frame `index` in a frame directory.
pub fn numbered_name(index: usize, format: ImageFormat) -> String {
    format!("{:06}.{}", index, format.extension())
}
