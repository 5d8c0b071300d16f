//! Traditional-codec backends for the keyframe and prior streams.
//!
//! `External` shells out to an encoder/decoder pair (VVenC-class tools) through
//! command templates. `Internal` is a small deterministic codec: per-plane
//! uniform quantization with step `q`, left-neighbour prediction of the
//! quantization indices in raster order, and byte-wise run-length coding of the
//! residuals. `q = 1` is lossless; the reconstruction error is at most
//! `floor(q / 2)` per sample.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

use crate::frame_io::{self, Fps, Frame, FrameIoError, Plane, RawGeometry};

pub const CODEC_INTERNAL: u8 = 1;
pub const CODEC_EXTERNAL: u8 = 2;
pub const MAX_QUALITY_STEP: u8 = 64;

pub const DEFAULT_ENCODE_CMD: &str = "vvencapp -i {input} -s {width}x{height} -fr {fps} -f {frames} \
     --preset slower -g 32 -ip 9999 -qp {qp} -b {output}";
pub const DEFAULT_DECODE_CMD: &str = "vvdecapp -b {input} -o {output}";

const PLACEHOLDERS: [&str; 7] = ["input", "output", "width", "height", "fps", "qp", "frames"];

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("no frames to encode")]
    EmptyInput,
    #[error("frame {0} does not match the first frame's geometry")]
    InconsistentFrames(usize),
    #[error("quality step {0} outside 1..={MAX_QUALITY_STEP}")]
    InvalidQuality(u8),
    #[error("command template {template:?} lacks required placeholder {{{name}}}")]
    MissingPlaceholder { template: String, name: &'static str },
    #[error("command template {template:?} uses unknown placeholder {{{name}}}")]
    UnknownPlaceholder { template: String, name: String },
    #[error("external command `{command}` failed ({status}): {stderr}")]
    ExternalFailed {
        command: String,
        status: String,
        stderr: String,
    },
    #[error("corrupt stream: {0}")]
    CorruptStream(String),
    #[error("stream codec id {found} does not match backend {expected}")]
    CodecMismatch { expected: u8, found: u8 },
    #[error(transparent)]
    FrameIo(#[from] FrameIoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalCodec {
    pub encode_cmd: String,
    pub decode_cmd: String,
    pub qp: u32,
    /// Parent for per-call temporary workspaces; system temp dir if unset.
    pub scratch_dir: Option<PathBuf>,
}

impl Default for ExternalCodec {
    fn default() -> Self {
        ExternalCodec {
            encode_cmd: DEFAULT_ENCODE_CMD.to_owned(),
            decode_cmd: DEFAULT_DECODE_CMD.to_owned(),
            qp: 32,
            scratch_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodecSpec {
    Internal { quality: u8 },
    External(ExternalCodec),
}

impl CodecSpec {
    pub fn internal(quality: u8) -> Self {
        CodecSpec::Internal { quality }
    }

    pub fn codec_id(&self) -> u8 {
        match self {
            CodecSpec::Internal { .. } => CODEC_INTERNAL,
            CodecSpec::External(_) => CODEC_EXTERNAL,
        }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        match self {
            CodecSpec::Internal { quality } => {
                if !(1..=MAX_QUALITY_STEP).contains(quality) {
                    return Err(CodecError::InvalidQuality(*quality));
                }
            }
            CodecSpec::External(ext) => {
                check_template(&ext.encode_cmd, &["input", "output"])?;
                check_template(&ext.decode_cmd, &["input", "output"])?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedStream {
    pub codec_id: u8,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub bytes: Vec<u8>,
}

impl EncodedStream {
    /// A stream carrying no frames.
    pub fn empty(codec_id: u8, width: usize, height: usize) -> Self {
        EncodedStream {
            codec_id,
            width,
            height,
            frame_count: 0,
            bytes: Vec::new(),
        }
    }

    pub fn size_bits(&self) -> u64 {
        8 * self.bytes.len() as u64
    }
}

/// Bitrate in kbps of `size_bits` spread over `frame_count` frames at `fps`.
pub fn measure_rate(size_bits: u64, fps: Fps, frame_count: usize) -> f64 {
    assert!(frame_count > 0, "frame_count must be positive");
    size_bits as f64 * fps.as_f64() / frame_count as f64 / 1000.0
}

pub fn encode_stream(frames: &[Frame], fps: Fps, spec: &CodecSpec) -> Result<EncodedStream, CodecError> {
    spec.validate()?;
    let first = frames.first().ok_or(CodecError::EmptyInput)?;
    let (w, h) = (first.width(), first.height());
    if let Some(bad) = frames
        .iter()
        .position(|f| f.width() != w || f.height() != h || f.u.width != w / 2 || f.u.height != h / 2)
    {
        return Err(CodecError::InconsistentFrames(bad + 1));
    }
    let bytes = match spec {
        CodecSpec::Internal { quality } => internal_encode(frames, *quality),
        CodecSpec::External(ext) => external_encode(frames, fps, ext)?,
    };
    Ok(EncodedStream {
        codec_id: spec.codec_id(),
        width: w,
        height: h,
        frame_count: frames.len(),
        bytes,
    })
}

pub fn decode_stream(stream: &EncodedStream, fps: Fps, spec: &CodecSpec) -> Result<Vec<Frame>, CodecError> {
    if stream.codec_id != spec.codec_id() {
        return Err(CodecError::CodecMismatch {
            expected: spec.codec_id(),
            found: stream.codec_id,
        });
    }
    if stream.frame_count == 0 {
        return Ok(Vec::new());
    }
    match spec {
        CodecSpec::Internal { .. } => internal_decode(stream),
        CodecSpec::External(ext) => {
            spec.validate()?;
            external_decode(stream, fps, ext)
        }
    }
}

// ---- internal codec ------------------------------------------------------

const INTERNAL_HEADER_LEN: usize = 13;

fn internal_encode(frames: &[Frame], q: u8) -> Vec<u8> {
    let (w, h) = (frames[0].width(), frames[0].height());
    let mut residuals = Vec::with_capacity(frames.len() * (w * h * 3 / 2));
    for f in frames {
        for plane in [&f.y, &f.u, &f.v] {
            let mut prev = 0u8;
            for &s in &plane.data {
                let idx = s / q;
                residuals.push(idx.wrapping_sub(prev));
                prev = idx;
            }
        }
    }
    let mut out = Vec::with_capacity(INTERNAL_HEADER_LEN + residuals.len() / 4);
    out.push(q);
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    rle_encode(&residuals, &mut out);
    out
}

#[inline]
fn dequantize(idx: u8, q: u8) -> u8 {
    (idx as u32 * q as u32 + q as u32 / 2).min(255) as u8
}

fn internal_decode(stream: &EncodedStream) -> Result<Vec<Frame>, CodecError> {
    let b = &stream.bytes;
    if b.len() < INTERNAL_HEADER_LEN {
        return Err(CodecError::CorruptStream("truncated header".into()));
    }
    let q = b[0];
    if !(1..=MAX_QUALITY_STEP).contains(&q) {
        return Err(CodecError::CorruptStream(format!("quality step {q}")));
    }
    let word = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap()) as usize;
    let (w, h, n) = (word(1), word(5), word(9));
    if (w, h, n) != (stream.width, stream.height, stream.frame_count) || w % 2 != 0 || h % 2 != 0 {
        return Err(CodecError::CorruptStream(format!(
            "header says {w}x{h}x{n}, stream is {}x{}x{}",
            stream.width, stream.height, stream.frame_count
        )));
    }
    let luma = w * h;
    let chroma = (w / 2) * (h / 2);
    let expected = n
        .checked_mul(luma + 2 * chroma)
        .ok_or_else(|| CodecError::CorruptStream("size overflow".into()))?;
    let residuals = rle_decode(&b[INTERNAL_HEADER_LEN..], expected)?;

    let mut frames = Vec::with_capacity(n);
    let mut pos = 0;
    let mut plane = |pw: usize, ph: usize| {
        let mut prev = 0u8;
        let data = residuals[pos..pos + pw * ph]
            .iter()
            .map(|&r| {
                prev = prev.wrapping_add(r);
                dequantize(prev, q)
            })
            .collect();
        pos += pw * ph;
        Plane::new(pw, ph, data)
    };
    for i in 0..n {
        let y = plane(w, h);
        let u = plane(w / 2, h / 2);
        let v = plane(w / 2, h / 2);
        frames.push(Frame { index: i + 1, y, u, v });
    }
    Ok(frames)
}

fn put_varint(mut v: u64, out: &mut Vec<u8>) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn get_varint(data: &[u8], pos: &mut usize) -> Result<u64, CodecError> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let byte = *data
            .get(*pos)
            .ok_or_else(|| CodecError::CorruptStream("truncated run header".into()))?;
        *pos += 1;
        v |= ((byte & 0x7f) as u64) << shift;
        if byte & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(CodecError::CorruptStream("overlong varint".into()))
}

const MIN_REPEAT: usize = 3;

/// Tokens are a varint `v` followed by data: even `v` is a run of
/// `(v >> 1) + 1` copies of the next byte; odd `v` is `(v >> 1) + 1` literal
/// bytes.
fn rle_encode(data: &[u8], out: &mut Vec<u8>) {
    let flush = |lit: &[u8], out: &mut Vec<u8>| {
        if !lit.is_empty() {
            put_varint((((lit.len() - 1) as u64) << 1) | 1, out);
            out.extend_from_slice(lit);
        }
    };
    let mut lit_start = 0;
    let mut i = 0;
    while i < data.len() {
        let run = data[i..].iter().take_while(|&&b| b == data[i]).count();
        if run >= MIN_REPEAT {
            flush(&data[lit_start..i], out);
            put_varint(((run - 1) as u64) << 1, out);
            out.push(data[i]);
            i += run;
            lit_start = i;
        } else {
            i += run;
        }
    }
    flush(&data[lit_start..], out);
}

fn rle_decode(data: &[u8], expected: usize) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(expected);
    let mut pos = 0;
    while pos < data.len() {
        let v = get_varint(data, &mut pos)?;
        let len = (v >> 1) as usize + 1;
        if out.len() + len > expected {
            return Err(CodecError::CorruptStream("run overflows frame data".into()));
        }
        if v & 1 == 0 {
            let b = *data
                .get(pos)
                .ok_or_else(|| CodecError::CorruptStream("truncated run".into()))?;
            pos += 1;
            out.resize(out.len() + len, b);
        } else {
            let lit = data
                .get(pos..pos + len)
                .ok_or_else(|| CodecError::CorruptStream("truncated literal".into()))?;
            out.extend_from_slice(lit);
            pos += len;
        }
    }
    if out.len() != expected {
        return Err(CodecError::CorruptStream(format!(
            "decoded {} samples, expected {expected}",
            out.len()
        )));
    }
    Ok(out)
}

// ---- external codec ------------------------------------------------------

/// Placeholder names used in `template`, in order of appearance.
pub fn template_placeholders(template: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                names.push(after[..close].to_owned());
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    names
}

pub fn check_template(template: &str, required: &[&'static str]) -> Result<(), CodecError> {
    check_template_with(template, required, &PLACEHOLDERS)
}

pub(crate) fn check_template_with(template: &str, required: &[&'static str], known: &[&str]) -> Result<(), CodecError> {
    let used = template_placeholders(template);
    if let Some(unknown) = used.iter().find(|n| !known.contains(&n.as_str())) {
        return Err(CodecError::UnknownPlaceholder {
            template: template.to_owned(),
            name: unknown.clone(),
        });
    }
    if let Some(&missing) = required.iter().find(|&&r| !used.iter().any(|u| u == r)) {
        return Err(CodecError::MissingPlaceholder {
            template: template.to_owned(),
            name: missing,
        });
    }
    Ok(())
}

/// Replaces `{name}` with shell-quoted values.
pub(crate) fn substitute(template: &str, values: &[(&str, String)]) -> String {
    let mut out = template.to_owned();
    for (name, value) in values {
        let quoted = shlex::try_quote(value)
            .map(|q| q.into_owned())
            .unwrap_or_else(|_| value.clone());
        out = out.replace(&format!("{{{name}}}"), &quoted);
    }
    out
}

/// Runs `command` through `sh -c`, mapping a non-zero exit to `ExternalFailed`.
pub(crate) fn run_shell(command: &str, cwd: &Path) -> Result<(), CodecError> {
    let output = Command::new("sh").arg("-c").arg(command).current_dir(cwd).output()?;
    if !output.status.success() {
        return Err(CodecError::ExternalFailed {
            command: command.to_owned(),
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_owned(),
        });
    }
    Ok(())
}

pub(crate) fn scratch(parent: Option<&Path>, prefix: &str) -> Result<tempfile::TempDir, std::io::Error> {
    let mut b = tempfile::Builder::new();
    b.prefix(prefix);
    match parent {
        Some(p) => {
            fs::create_dir_all(p)?;
            b.tempdir_in(p)
        }
        None => b.tempdir(),
    }
}

fn fps_arg(fps: Fps) -> String {
    if fps.den == 1 {
        fps.num.to_string()
    } else {
        format!("{:.3}", fps.as_f64())
    }
}

fn external_values(ext: &ExternalCodec, input: &Path, output: &Path, w: usize, h: usize, fps: Fps, frames: usize) -> Vec<(&'static str, String)> {
    vec![
        ("input", input.display().to_string()),
        ("output", output.display().to_string()),
        ("width", w.to_string()),
        ("height", h.to_string()),
        ("fps", fps_arg(fps)),
        ("qp", ext.qp.to_string()),
        ("frames", frames.to_string()),
    ]
}

fn external_encode(frames: &[Frame], fps: Fps, ext: &ExternalCodec) -> Result<Vec<u8>, CodecError> {
    let dir = scratch(ext.scratch_dir.as_deref(), "cgvc-enc-")?;
    let input = dir.path().join("input.yuv");
    let output = dir.path().join("stream.bin");
    fs::write(&input, frame_io::to_raw(frames)?)?;
    let (w, h) = (frames[0].width(), frames[0].height());
    let cmd = substitute(&ext.encode_cmd, &external_values(ext, &input, &output, w, h, fps, frames.len()));
    run_shell(&cmd, dir.path())?;
    Ok(fs::read(&output)?)
}

fn external_decode(stream: &EncodedStream, fps: Fps, ext: &ExternalCodec) -> Result<Vec<Frame>, CodecError> {
    let dir = scratch(ext.scratch_dir.as_deref(), "cgvc-dec-")?;
    let input = dir.path().join("stream.bin");
    let output = dir.path().join("recon.yuv");
    fs::write(&input, &stream.bytes)?;
    let (w, h) = (stream.width, stream.height);
    let cmd = substitute(
        &ext.decode_cmd,
        &external_values(ext, &input, &output, w, h, fps, stream.frame_count),
    );
    run_shell(&cmd, dir.path())?;
    let raw = fs::read(&output)?;
    let video = frame_io::parse_raw(&raw, RawGeometry { width: w, height: h, fps })?;
    if video.len() != stream.frame_count {
        return Err(CodecError::CorruptStream(format!(
            "external decoder produced {} frames, expected {}",
            video.len(),
            stream.frame_count
        )));
    }
    Ok(video.frames)
}
