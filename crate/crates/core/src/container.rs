//! The `.cgvc` bitstream: a fixed header, a section table with per-section
//! CRC32, and four sections (keyframe plan, keyframe stream, prior stream,
//! colour statistics). All integers are little-endian. See `docs/format.md`.

use std::fmt;

use thiserror::Error;

use crate::codec::{measure_rate, EncodedStream};
use crate::color_correction::{ChannelStats, ColorParams, Q16};
use crate::control_prior::PriorKind;
use crate::frame_io::{Fps, PixelFormat, VideoMeta};
use crate::keyframe_selection::KeyframePlan;

pub const MAGIC: &[u8; 4] = b"CGVC";
pub const FORMAT_VERSION: u16 = 1;

/// magic + version + meta + section count
const FIXED_HEADER_LEN: usize = 4 + 2 + 5 * 4 + 3 + 1;
const TABLE_ENTRY_LEN: usize = 1 + 4 + 4;
const SECTION_COUNT: usize = 4;
pub const HEADER_LEN: usize = FIXED_HEADER_LEN + SECTION_COUNT * TABLE_ENTRY_LEN + 4;
/// codec id + width + height + frame count
const STREAM_HEADER_LEN: usize = 1 + 3 * 4;
const STATS_ENTRY_LEN: usize = 3 * 2 * 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Header,
    Plan,
    Keyframes,
    Priors,
    Color,
}

impl Section {
    const ORDER: [Section; SECTION_COUNT] = [Section::Plan, Section::Keyframes, Section::Priors, Section::Color];

    pub fn id(self) -> u8 {
        match self {
            Section::Header => 0,
            Section::Plan => 1,
            Section::Keyframes => 2,
            Section::Priors => 3,
            Section::Color => 4,
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Section::Header => "header",
            Section::Plan => "PLAN",
            Section::Keyframes => "B_K",
            Section::Priors => "B_P",
            Section::Color => "B_C",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainerError {
    #[error("not a CGVC stream")]
    BadMagic,
    #[error("unsupported container version {0} (max {FORMAT_VERSION})")]
    UnsupportedVersion(u16),
    #[error("CRC mismatch in {0}")]
    CrcMismatch(Section),
    #[error("keyframe plan invalid for {frame_count} frames: {reason}")]
    PlanOutOfRange { frame_count: usize, reason: String },
    #[error("{0} truncated")]
    TruncatedSection(Section),
    #[error("invalid {section}: {reason}")]
    Invalid { section: Section, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CgvcContainer {
    pub version: u16,
    pub meta: VideoMeta,
    pub plan: KeyframePlan,
    pub prior_kind: PriorKind,
    /// Backend of the keyframe stream.
    pub codec_id: u8,
    pub b_k: EncodedStream,
    pub b_p: EncodedStream,
    pub b_c: ColorParams,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("field exceeds u32").to_le_bytes());
}

fn plan_section(plan: &KeyframePlan) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * plan.keyframes.len());
    put_u32(&mut out, plan.keyframes.len());
    for &k in &plan.keyframes {
        put_u32(&mut out, k);
    }
    out
}

fn stream_section(s: &EncodedStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(STREAM_HEADER_LEN + s.bytes.len());
    out.push(s.codec_id);
    put_u32(&mut out, s.width);
    put_u32(&mut out, s.height);
    put_u32(&mut out, s.frame_count);
    out.extend_from_slice(&s.bytes);
    out
}

fn color_section(c: &ColorParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + STATS_ENTRY_LEN * c.len());
    put_u32(&mut out, c.len());
    for frame in &c.frames {
        for ch in frame {
            out.extend_from_slice(&ch.mean.0.to_le_bytes());
            out.extend_from_slice(&ch.std.0.to_le_bytes());
        }
    }
    out
}

fn pixel_format_id(p: PixelFormat) -> u8 {
    match p {
        PixelFormat::Yuv420p8 => 0,
    }
}

impl CgvcContainer {
    fn sections(&self) -> [Vec<u8>; SECTION_COUNT] {
        [
            plan_section(&self.plan),
            stream_section(&self.b_k),
            stream_section(&self.b_p),
            color_section(&self.b_c),
        ]
    }

    pub fn serialize(&self) -> Vec<u8> {
        let sections = self.sections();
        let body: usize = sections.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(HEADER_LEN + body);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        let m = &self.meta;
        for v in [m.width, m.height, m.frame_count, m.fps.num as usize, m.fps.den as usize] {
            put_u32(&mut out, v);
        }
        out.push(pixel_format_id(m.pixel_format));
        out.push(self.prior_kind.id());
        out.push(self.codec_id);
        out.push(SECTION_COUNT as u8);
        for (sec, data) in Section::ORDER.iter().zip(&sections) {
            out.push(sec.id());
            put_u32(&mut out, data.len());
            out.extend_from_slice(&crc32fast::hash(data).to_le_bytes());
        }
        let header_crc = crc32fast::hash(&out);
        out.extend_from_slice(&header_crc.to_le_bytes());
        for data in &sections {
            out.extend_from_slice(data);
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, ContainerError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let mut hdr = Reader::new(&bytes[4..], Section::Header);
        let version = hdr.u16()?;
        if version == 0 || version > FORMAT_VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        if bytes.len() < HEADER_LEN {
            return Err(ContainerError::TruncatedSection(Section::Header));
        }
        let stored_crc = u32::from_le_bytes(bytes[HEADER_LEN - 4..HEADER_LEN].try_into().unwrap());
        if crc32fast::hash(&bytes[..HEADER_LEN - 4]) != stored_crc {
            return Err(ContainerError::CrcMismatch(Section::Header));
        }
        let invalid = |section, reason: String| ContainerError::Invalid { section, reason };

        let (width, height, frame_count) = (hdr.usize()?, hdr.usize()?, hdr.usize()?);
        let (num, den) = (hdr.u32()?, hdr.u32()?);
        if num == 0 || den == 0 {
            return Err(invalid(Section::Header, format!("frame rate {num}/{den}")));
        }
        let pixel_format = hdr.u8()?;
        if pixel_format != 0 {
            return Err(invalid(Section::Header, format!("pixel format {pixel_format}")));
        }
        let prior_id = hdr.u8()?;
        let prior_kind =
            PriorKind::from_id(prior_id).ok_or_else(|| invalid(Section::Header, format!("prior kind {prior_id}")))?;
        let codec_id = hdr.u8()?;
        let count = hdr.u8()? as usize;
        if count != SECTION_COUNT {
            return Err(invalid(Section::Header, format!("{count} sections")));
        }
        let meta = VideoMeta::new(width, height, frame_count, Fps::new(num, den))
            .map_err(|e| invalid(Section::Header, e.to_string()))?;

        let mut pos = HEADER_LEN;
        let mut payloads = Vec::with_capacity(SECTION_COUNT);
        for sec in Section::ORDER {
            let id = hdr.u8()?;
            if id != sec.id() {
                return Err(invalid(Section::Header, format!("section id {id}, expected {}", sec.id())));
            }
            let len = hdr.usize()?;
            let crc = hdr.u32()?;
            let data = pos
                .checked_add(len)
                .and_then(|end| bytes.get(pos..end))
                .ok_or(ContainerError::TruncatedSection(sec))?;
            if crc32fast::hash(data) != crc {
                return Err(ContainerError::CrcMismatch(sec));
            }
            payloads.push(data);
            pos += len;
        }
        if pos != bytes.len() {
            return Err(invalid(Section::Color, format!("{} trailing bytes", bytes.len() - pos)));
        }

        let plan = parse_plan(payloads[0], frame_count)?;
        let b_k = parse_stream(payloads[1], Section::Keyframes)?;
        let b_p = parse_stream(payloads[2], Section::Priors)?;
        let b_c = parse_color(payloads[3])?;
        if b_c.len() != frame_count {
            return Err(invalid(
                Section::Color,
                format!("{} entries for {frame_count} frames", b_c.len()),
            ));
        }
        Ok(CgvcContainer {
            version,
            meta,
            plan,
            prior_kind,
            codec_id,
            b_k,
            b_p,
            b_c,
        })
    }

    /// Serialized byte count of each part; sums to the file size.
    pub fn size_breakdown(&self) -> SizeBreakdown {
        let [plan, b_k, b_p, b_c] = self.sections().map(|s| s.len());
        SizeBreakdown {
            b_k,
            b_p,
            b_c,
            overhead: HEADER_LEN + plan,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeBreakdown {
    pub b_k: usize,
    pub b_p: usize,
    pub b_c: usize,
    /// Header, section table and keyframe plan.
    pub overhead: usize,
}

impl SizeBreakdown {
    pub fn total(&self) -> usize {
        self.b_k + self.b_p + self.b_c + self.overhead
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    pub total: f64,
    pub b_k: f64,
    pub b_p: f64,
    pub b_c: f64,
    pub overhead: f64,
}

/// Total rate in kbps of the serialized container, with per-section shares.
pub fn total_rate(container: &CgvcContainer, meta: &VideoMeta) -> RateBreakdown {
    let sizes = container.size_breakdown();
    let kbps = |bytes: usize| measure_rate(8 * bytes as u64, meta.fps, meta.frame_count);
    RateBreakdown {
        total: kbps(sizes.total()),
        b_k: kbps(sizes.b_k),
        b_p: kbps(sizes.b_p),
        b_c: kbps(sizes.b_c),
        overhead: kbps(sizes.overhead),
    }
}

fn parse_plan(data: &[u8], frame_count: usize) -> Result<KeyframePlan, ContainerError> {
    let mut r = Reader::new(data, Section::Plan);
    let n = r.usize()?;
    if n.checked_mul(4).map(|b| b + 4) != Some(data.len()) {
        return Err(ContainerError::TruncatedSection(Section::Plan));
    }
    let keyframes = (0..n).map(|_| r.usize()).collect::<Result<Vec<_>, _>>()?;
    KeyframePlan::new(keyframes, frame_count).map_err(|e| ContainerError::PlanOutOfRange {
        frame_count,
        reason: e.to_string(),
    })
}

fn parse_stream(data: &[u8], section: Section) -> Result<EncodedStream, ContainerError> {
    let mut r = Reader::new(data, section);
    let codec_id = r.u8()?;
    let (width, height, frame_count) = (r.usize()?, r.usize()?, r.usize()?);
    Ok(EncodedStream {
        codec_id,
        width,
        height,
        frame_count,
        bytes: data[STREAM_HEADER_LEN..].to_vec(),
    })
}

fn parse_color(data: &[u8]) -> Result<ColorParams, ContainerError> {
    let mut r = Reader::new(data, Section::Color);
    let n = r.usize()?;
    if n.checked_mul(STATS_ENTRY_LEN).map(|b| b + 4) != Some(data.len()) {
        return Err(ContainerError::TruncatedSection(Section::Color));
    }
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        let mut f = [ChannelStats::default(); 3];
        for ch in &mut f {
            ch.mean = Q16(r.i32()?);
            ch.std = Q16(r.i32()?);
            if ch.std.0 < 0 {
                return Err(ContainerError::Invalid {
                    section: Section::Color,
                    reason: "negative standard deviation".into(),
                });
            }
        }
        frames.push(f);
    }
    Ok(ColorParams { frames })
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    section: Section,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], section: Section) -> Self {
        Reader { data, pos: 0, section }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], ContainerError> {
        let s = self
            .data
            .get(self.pos..self.pos + N)
            .ok_or(ContainerError::TruncatedSection(self.section))?;
        self.pos += N;
        Ok(s.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8, ContainerError> {
        Ok(self.take::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16, ContainerError> {
        self.take().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32, ContainerError> {
        self.take().map(u32::from_le_bytes)
    }

    fn i32(&mut self) -> Result<i32, ContainerError> {
        self.take().map(i32::from_le_bytes)
    }

    fn usize(&mut self) -> Result<usize, ContainerError> {
        self.u32().map(|v| v as usize)
    }
}
