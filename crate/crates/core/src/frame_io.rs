//! Raw video frames: 8-bit planar YUV 4:2:0 pictures, Y4M / raw file I/O and
//! limited-range BT.709 conversion to and from RGB.

use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameIoError {
    #[error("input truncated: {len} bytes is not a whole number of {frame_size}-byte frames")]
    TruncatedInput { len: usize, frame_size: usize },
    #[error("raw YUV input requires explicit width/height/fps")]
    MissingMeta,
    #[error("odd frame dimensions {0}x{1}; 4:2:0 needs even width and height")]
    OddDimensions(usize, usize),
    #[error("invalid Y4M stream: {0}")]
    InvalidY4m(String),
    #[error("frame {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    InconsistentDimensions {
        index: usize,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("no frames")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FrameIoError> = std::result::Result<T, E>;

/// Frame rate as a positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Self {
        assert!(num > 0 && den > 0, "fps must be positive");
        Fps { num, den }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PixelFormat {
    Yuv420p8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VideoMeta {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub fps: Fps,
    pub pixel_format: PixelFormat,
}

impl VideoMeta {
    pub fn new(width: usize, height: usize, frame_count: usize, fps: Fps) -> Result<Self> {
        check_dims(width, height)?;
        Ok(VideoMeta {
            width,
            height,
            frame_count,
            fps,
            pixel_format: PixelFormat::Yuv420p8,
        })
    }

    pub fn chroma_width(&self) -> usize {
        self.width / 2
    }

    pub fn chroma_height(&self) -> usize {
        self.height / 2
    }

    /// Bytes of one 4:2:0 frame.
    pub fn frame_size(&self) -> usize {
        frame_size(self.width, self.height)
    }
}

fn frame_size(width: usize, height: usize) -> usize {
    width * height + 2 * (width / 2) * (height / 2)
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0 {
        return Err(FrameIoError::OddDimensions(width, height));
    }
    Ok(())
}

/// Geometry for headerless raw input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawGeometry {
    pub width: usize,
    pub height: usize,
    pub fps: Fps,
}

/// A single 8-bit sample plane, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl fmt::Debug for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Plane({}x{})", self.width, self.height)
    }
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height, "plane data length");
        Plane {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// One YUV 4:2:0 picture. `index` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub index: usize,
    pub y: Plane,
    pub u: Plane,
    pub v: Plane,
}

impl Frame {
    pub fn filled(index: usize, width: usize, height: usize, y: u8, u: u8, v: u8) -> Self {
        Frame {
            index,
            y: Plane::filled(width, height, y),
            u: Plane::filled(width / 2, height / 2, u),
            v: Plane::filled(width / 2, height / 2, v),
        }
    }

    pub fn width(&self) -> usize {
        self.y.width
    }

    pub fn height(&self) -> usize {
        self.y.height
    }

    fn has_420_layout(&self) -> bool {
        let (cw, ch) = (self.y.width / 2, self.y.height / 2);
        self.y.width % 2 == 0
            && self.y.height % 2 == 0
            && self.u.width == cw
            && self.u.height == ch
            && self.v.width == cw
            && self.v.height == ch
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pub index: usize,
    pub r: Plane,
    pub g: Plane,
    pub b: Plane,
}

impl RgbFrame {
    pub fn width(&self) -> usize {
        self.r.width
    }

    pub fn height(&self) -> usize {
        self.r.height
    }

    pub fn channels(&self) -> [&Plane; 3] {
        [&self.r, &self.g, &self.b]
    }

    pub fn channels_mut(&mut self) -> [&mut Plane; 3] {
        [&mut self.r, &mut self.g, &mut self.b]
    }
}

/// A decoded sequence with its metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Video {
    pub meta: VideoMeta,
    pub frames: Vec<Frame>,
}

impl Video {
    /// Builds a video from frames, checking that every frame matches the first
    /// one's geometry. Frame indices are rewritten to 1..=T.
    pub fn from_frames(mut frames: Vec<Frame>, fps: Fps) -> Result<Self> {
        let first = frames.first().ok_or(FrameIoError::Empty)?;
        let (w, h) = (first.width(), first.height());
        check_dims(w, h)?;
        for (i, f) in frames.iter_mut().enumerate() {
            if !f.has_420_layout() || f.width() != w || f.height() != h {
                return Err(FrameIoError::InconsistentDimensions {
                    index: i + 1,
                    got_w: f.width(),
                    got_h: f.height(),
                    want_w: w,
                    want_h: h,
                });
            }
            f.index = i + 1;
        }
        let meta = VideoMeta::new(w, h, frames.len(), fps)?;
        Ok(Video { meta, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// 1-based access.
    pub fn frame(&self, t: usize) -> &Frame {
        &self.frames[t - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VideoFormat {
    Y4m,
    Raw,
}

impl VideoFormat {
    /// `.y4m` selects Y4M; anything else is treated as raw planar YUV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("y4m") => VideoFormat::Y4m,
            _ => VideoFormat::Raw,
        }
    }
}

const Y4M_MAGIC: &[u8] = b"YUV4MPEG2";

/// Reads a Y4M file, or a raw YUV420P8 file when `raw` geometry is given.
/// Files that start with the Y4M signature are always parsed as Y4M.
pub fn read_video(path: impl AsRef<Path>, raw: Option<RawGeometry>) -> Result<Video> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.starts_with(Y4M_MAGIC) {
        return parse_y4m(&bytes);
    }
    match raw {
        Some(geom) => parse_raw(&bytes, geom),
        None => Err(FrameIoError::MissingMeta),
    }
}

pub fn write_video(video: &Video, path: impl AsRef<Path>, format: VideoFormat) -> Result<()> {
    let bytes = match format {
        VideoFormat::Y4m => to_y4m(video)?,
        VideoFormat::Raw => to_raw(&video.frames)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn parse_raw(bytes: &[u8], geom: RawGeometry) -> Result<Video> {
    check_dims(geom.width, geom.height)?;
    let fsize = frame_size(geom.width, geom.height);
    if bytes.is_empty() || bytes.len() % fsize != 0 {
        return Err(FrameIoError::TruncatedInput {
            len: bytes.len(),
            frame_size: fsize,
        });
    }
    let frames = bytes
        .chunks_exact(fsize)
        .enumerate()
        .map(|(i, chunk)| frame_from_bytes(i + 1, geom.width, geom.height, chunk))
        .collect();
    Video::from_frames(frames, geom.fps)
}

fn frame_from_bytes(index: usize, width: usize, height: usize, chunk: &[u8]) -> Frame {
    let luma = width * height;
    let chroma = (width / 2) * (height / 2);
    Frame {
        index,
        y: Plane::new(width, height, chunk[..luma].to_vec()),
        u: Plane::new(width / 2, height / 2, chunk[luma..luma + chroma].to_vec()),
        v: Plane::new(width / 2, height / 2, chunk[luma + chroma..luma + 2 * chroma].to_vec()),
    }
}

/// Concatenated planar payload of all frames.
pub fn to_raw(frames: &[Frame]) -> Result<Vec<u8>> {
    let first = frames.first().ok_or(FrameIoError::Empty)?;
    let (w, h) = (first.width(), first.height());
    let mut out = Vec::with_capacity(frames.len() * frame_size(w, h));
    for (i, f) in frames.iter().enumerate() {
        if !f.has_420_layout() || f.width() != w || f.height() != h {
            return Err(FrameIoError::InconsistentDimensions {
                index: i + 1,
                got_w: f.width(),
                got_h: f.height(),
                want_w: w,
                want_h: h,
            });
        }
        out.extend_from_slice(&f.y.data);
        out.extend_from_slice(&f.u.data);
        out.extend_from_slice(&f.v.data);
    }
    Ok(out)
}

pub fn to_y4m(video: &Video) -> Result<Vec<u8>> {
    let payload = to_raw(&video.frames)?;
    let m = &video.meta;
    let header = format!(
        "YUV4MPEG2 W{} H{} F{}:{} Ip A1:1 C420\n",
        m.width, m.height, m.fps.num, m.fps.den
    );
    let fsize = m.frame_size();
    let mut out = Vec::with_capacity(header.len() + payload.len() + 6 * video.frames.len());
    out.extend_from_slice(header.as_bytes());
    for chunk in payload.chunks_exact(fsize) {
        out.extend_from_slice(b"FRAME\n");
        out.extend_from_slice(chunk);
    }
    Ok(out)
}

pub fn parse_y4m(bytes: &[u8]) -> Result<Video> {
    let bad = |msg: &str| FrameIoError::InvalidY4m(msg.to_owned());
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line"))?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| bad("header is not ASCII"))?;
    let mut tokens = header.split_ascii_whitespace();
    if tokens.next() != Some("YUV4MPEG2") {
        return Err(bad("missing YUV4MPEG2 signature"));
    }
    let (mut width, mut height, mut fps) = (None, None, Fps::new(25, 1));
    for tok in tokens {
        let (tag, val) = tok.split_at(1);
        match tag {
            "W" => width = val.parse::<usize>().ok(),
            "H" => height = val.parse::<usize>().ok(),
            "F" => {
                let (n, d) = val.split_once(':').ok_or_else(|| bad("malformed F tag"))?;
                let n: u32 = n.parse().map_err(|_| bad("malformed F tag"))?;
                let d: u32 = d.parse().map_err(|_| bad("malformed F tag"))?;
                if n == 0 || d == 0 {
                    return Err(bad("zero frame rate"));
                }
                fps = Fps::new(n, d);
            }
            "C" => {
                if !val.starts_with("420") || val.contains("p1") {
                    return Err(FrameIoError::InvalidY4m(format!(
                        "unsupported chroma format C{val}; only 8-bit 4:2:0"
                    )));
                }
            }
            _ => {}
        }
    }
    let width = width.ok_or_else(|| bad("missing W"))?;
    let height = height.ok_or_else(|| bad("missing H"))?;
    check_dims(width, height)?;
    let fsize = frame_size(width, height);

    let mut pos = header_end + 1;
    let mut frames = Vec::new();
    while pos < bytes.len() {
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| pos + p)
            .ok_or_else(|| bad("unterminated FRAME header"))?;
        if !bytes[pos..line_end].starts_with(b"FRAME") {
            return Err(bad("expected FRAME marker"));
        }
        let start = line_end + 1;
        if bytes.len() < start + fsize {
            return Err(FrameIoError::TruncatedInput {
                len: bytes.len() - start,
                frame_size: fsize,
            });
        }
        frames.push(frame_from_bytes(
            frames.len() + 1,
            width,
            height,
            &bytes[start..start + fsize],
        ));
        pos = start + fsize;
    }
    Video::from_frames(frames, fps)
}

// BT.709 luma coefficients.
const KR: f64 = 0.2126;
const KB: f64 = 0.0722;
const KG: f64 = 1.0 - KR - KB;

/// Limited-range BT.709 YCbCr sample triple to RGB, unrounded and unclamped.
#[inline]
pub fn ycbcr_to_rgb_f64(y: f64, cb: f64, cr: f64) -> [f64; 3] {
    let yn = (y - 16.0) / 219.0;
    let pb = (cb - 128.0) / 224.0;
    let pr = (cr - 128.0) / 224.0;
    let r = yn + 2.0 * (1.0 - KR) * pr;
    let b = yn + 2.0 * (1.0 - KB) * pb;
    let g = yn - (2.0 * KB * (1.0 - KB) / KG) * pb - (2.0 * KR * (1.0 - KR) / KG) * pr;
    [r * 255.0, g * 255.0, b * 255.0]
}

/// Inverse of [`ycbcr_to_rgb_f64`], unrounded.
#[inline]
pub fn rgb_to_ycbcr_f64(r: f64, g: f64, b: f64) -> [f64; 3] {
    let (r, g, b) = (r / 255.0, g / 255.0, b / 255.0);
    let yn = KR * r + KG * g + KB * b;
    let pb = (b - yn) / (2.0 * (1.0 - KB));
    let pr = (r - yn) / (2.0 * (1.0 - KR));
    [16.0 + 219.0 * yn, 128.0 + 224.0 * pb, 128.0 + 224.0 * pr]
}

/// Round half away from zero, then clamp to the 8-bit range.
#[inline]
pub fn to_u8(value: f64) -> u8 {
    value.round().clamp(0.0, 255.0) as u8
}

/// BT.709 limited range to RGB with nearest-neighbour chroma upsampling.
pub fn yuv_to_rgb(frame: &Frame) -> RgbFrame {
    let (w, h) = (frame.width(), frame.height());
    let mut r = Vec::with_capacity(w * h);
    let mut g = Vec::with_capacity(w * h);
    let mut b = Vec::with_capacity(w * h);
    for yy in 0..h {
        for xx in 0..w {
            let [rf, gf, bf] = ycbcr_to_rgb_f64(
                frame.y.get(xx, yy) as f64,
                frame.u.get(xx / 2, yy / 2) as f64,
                frame.v.get(xx / 2, yy / 2) as f64,
            );
            r.push(to_u8(rf));
            g.push(to_u8(gf));
            b.push(to_u8(bf));
        }
    }
    RgbFrame {
        index: frame.index,
        r: Plane::new(w, h, r),
        g: Plane::new(w, h, g),
        b: Plane::new(w, h, b),
    }
}

/// RGB to BT.709 limited range with 2x2 box-averaged chroma.
///
/// Panics if the frame dimensions are odd.
pub fn rgb_to_yuv(rgb: &RgbFrame) -> Frame {
    let (w, h) = (rgb.width(), rgb.height());
    assert!(w % 2 == 0 && h % 2 == 0, "4:2:0 needs even dimensions");
    let (cw, ch) = (w / 2, h / 2);
    let mut y = vec![0u8; w * h];
    let mut cb_acc = vec![0.0f64; cw * ch];
    let mut cr_acc = vec![0.0f64; cw * ch];
    for yy in 0..h {
        for xx in 0..w {
            let i = yy * w + xx;
            let [yf, cb, cr] = rgb_to_ycbcr_f64(
                rgb.r.data[i] as f64,
                rgb.g.data[i] as f64,
                rgb.b.data[i] as f64,
            );
            y[i] = to_u8(yf);
            let c = (yy / 2) * cw + xx / 2;
            cb_acc[c] += cb;
            cr_acc[c] += cr;
        }
    }
    Frame {
        index: rgb.index,
        y: Plane::new(w, h, y),
        u: Plane::new(cw, ch, cb_acc.into_iter().map(|s| to_u8(s / 4.0)).collect()),
        v: Plane::new(cw, ch, cr_acc.into_iter().map(|s| to_u8(s / 4.0)).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(w: usize, h: usize) -> RawGeometry {
        RawGeometry {
            width: w,
            height: h,
            fps: Fps::new(25, 1),
        }
    }

    #[test]
    fn minimal_raw_frame_is_black() {
        let bytes = [16, 16, 16, 16, 128, 128];
        let v = parse_raw(&bytes, geom(2, 2)).unwrap();
        assert_eq!(v.meta.frame_count, 1);
        assert_eq!(v.frames[0].index, 1);
        let rgb = yuv_to_rgb(&v.frames[0]);
        assert!(rgb.r.data.iter().chain(&rgb.g.data).chain(&rgb.b.data).all(|&s| s == 0));
        assert_eq!(to_raw(&v.frames).unwrap(), bytes);
    }

    #[test]
    fn seven_bytes_is_truncated() {
        let err = parse_raw(&[0u8; 7], geom(2, 2)).unwrap_err();
        assert!(matches!(err, FrameIoError::TruncatedInput { len: 7, frame_size: 6 }));
    }

    #[test]
    fn odd_dims_rejected() {
        assert!(matches!(
            parse_raw(&[0u8; 12], geom(3, 2)),
            Err(FrameIoError::OddDimensions(3, 2))
        ));
    }

    #[test]
    fn raw_file_without_meta_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.yuv");
        fs::write(&p, [16u8, 16, 16, 16, 128, 128]).unwrap();
        assert!(matches!(read_video(&p, None), Err(FrameIoError::MissingMeta)));
        let v = read_video(&p, Some(geom(2, 2))).unwrap();
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn y4m_header_carries_geometry() {
        let v = Video::from_frames(vec![Frame::filled(1, 4, 2, 16, 128, 128)], Fps::new(30000, 1001))
            .unwrap();
        let bytes = to_y4m(&v).unwrap();
        let header = std::str::from_utf8(&bytes[..bytes.iter().position(|&b| b == b'\n').unwrap()])
            .unwrap();
        assert!(header.starts_with("YUV4MPEG2 "));
        assert!(header.contains(" W4 ") && header.contains(" H2 ") && header.contains(" F30000:1001 "));
        assert!(header.ends_with("C420"));
        assert_eq!(parse_y4m(&bytes).unwrap(), v);
    }

    #[test]
    fn y4m_rejects_444_and_truncation() {
        assert!(parse_y4m(b"YUV4MPEG2 W2 H2 F25:1 C444\n").is_err());
        let err = parse_y4m(b"YUV4MPEG2 W2 H2 F25:1 C420\nFRAME\n\x10\x10").unwrap_err();
        assert!(matches!(err, FrameIoError::TruncatedInput { .. }));
    }

    #[test]
    fn inconsistent_frames_rejected() {
        let frames = vec![Frame::filled(1, 2, 2, 0, 0, 0), Frame::filled(2, 4, 2, 0, 0, 0)];
        assert!(matches!(
            to_raw(&frames),
            Err(FrameIoError::InconsistentDimensions { index: 2, .. })
        ));
    }

    #[test]
    fn limited_range_endpoints() {
        let black = yuv_to_rgb(&Frame::filled(1, 2, 2, 16, 128, 128));
        assert_eq!((black.r.data[0], black.g.data[0], black.b.data[0]), (0, 0, 0));
        let white = yuv_to_rgb(&Frame::filled(1, 2, 2, 235, 128, 128));
        assert_eq!((white.r.data[0], white.g.data[0], white.b.data[0]), (255, 255, 255));

        let rgb = |v: u8| RgbFrame {
            index: 1,
            r: Plane::filled(2, 2, v),
            g: Plane::filled(2, 2, v),
            b: Plane::filled(2, 2, v),
        };
        let f = rgb_to_yuv(&rgb(0));
        assert_eq!((f.y.data[0], f.u.data[0], f.v.data[0]), (16, 128, 128));
        let f = rgb_to_yuv(&rgb(255));
        assert_eq!((f.y.data[0], f.u.data[0], f.v.data[0]), (235, 128, 128));
    }

    #[test]
    fn mid_gray_matches_scalar_formula() {
        // Gray has no chroma: R = G = B = (Y - 16) * 255 / 219.
        let expected = ((126.0f64 - 16.0) * 255.0 / 219.0).round() as u8;
        let rgb = yuv_to_rgb(&Frame::filled(1, 2, 2, 126, 128, 128));
        assert_eq!(expected, 128);
        assert_eq!((rgb.r.data[0], rgb.g.data[0], rgb.b.data[0]), (expected, expected, expected));
    }

    #[test]
    fn smooth_gradient_round_trip_within_two() {
        // colors are constant inside each 2x2 chroma block; sub-block detail
        // is lost to 4:2:0 and can push single samples to 3
        let (w, h) = (32, 16);
        let gen = |f: fn(usize, usize) -> u8| {
            let mut d = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    d.push(f(x, y));
                }
            }
            Plane::new(w, h, d)
        };
        let rgb = RgbFrame {
            index: 1,
            r: gen(|x, _| (40 + 3 * (x / 2)) as u8),
            g: gen(|x, y| (60 + 2 * (x / 2) + 5 * (y / 2)) as u8),
            b: gen(|_, y| (220 - 7 * (y / 2)) as u8),
        };
        let back = yuv_to_rgb(&rgb_to_yuv(&rgb));
        for (a, b) in rgb.channels().iter().zip(back.channels()) {
            let max = a.data.iter().zip(&b.data).map(|(&p, &q)| p.abs_diff(q)).max().unwrap();
            assert!(max <= 2, "max error {max}");
        }
    }

    proptest! {
        #[test]
        fn raw_round_trip_is_byte_exact(
            (w, h, t) in (1usize..5, 1usize..5, 1usize..4),
            seed in any::<u64>(),
        ) {
            let (w, h) = (w * 2, h * 2);
            let n = frame_size(w, h) * t;
            let mut state = seed;
            let bytes: Vec<u8> = (0..n).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 56) as u8
            }).collect();
            let v = parse_raw(&bytes, geom(w, h)).unwrap();
            prop_assert_eq!(v.len(), t);
            prop_assert_eq!(to_raw(&v.frames).unwrap(), bytes.clone());
            let y4m = to_y4m(&v).unwrap();
            prop_assert_eq!(&parse_y4m(&y4m).unwrap(), &v);
            prop_assert_eq!(to_y4m(&parse_y4m(&y4m).unwrap()).unwrap(), y4m);
        }

        #[test]
        fn conversion_is_pure(y in any::<u8>(), u in any::<u8>(), v in any::<u8>()) {
            let f = Frame::filled(1, 2, 2, y, u, v);
            prop_assert_eq!(yuv_to_rgb(&f), yuv_to_rgb(&f));
        }
    }
}
