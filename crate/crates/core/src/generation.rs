//! Non-keyframe reconstruction for one clip from its decoded boundary
//! keyframes and per-frame priors.
//!
//! The built-in baseline copies luma from the prior and blends chroma
//! linearly between the two keyframes. An external generator can be plugged in
//! through a command template and a Y4M file contract in a work directory.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::codec::{self, CodecError};
use crate::control_prior::{PriorFrame, PriorKind};
use crate::frame_io::{self, Fps, Frame, Plane, Video};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("clip ({k_f}, {k_l}) needs {expected} priors, got {got}")]
    PriorCountMismatch { k_f: usize, k_l: usize, expected: usize, got: usize },
    #[error("invalid clip span ({0}, {1})")]
    InvalidSpan(usize, usize),
    #[error("prior {got} out of order, expected index {expected}")]
    PriorOrder { expected: usize, got: usize },
    #[error("baseline generator needs luma priors, got {0:?}")]
    PriorKindMismatch(PriorKind),
    #[error("prior or keyframe geometry does not match the clip")]
    GeometryMismatch,
    #[error("generator failed: {0}")]
    GeneratorFailed(String),
    #[error("generator output mismatch: {0}")]
    GeneratorOutputMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything needed to generate the interior frames `k_f+1 ..= k_l-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipGenRequest {
    pub first_kf: Frame,
    pub last_kf: Frame,
    pub priors: Vec<PriorFrame>,
    pub clip_span: (usize, usize),
}

impl ClipGenRequest {
    pub fn validate(&self) -> Result<(), GenerationError> {
        let (k_f, k_l) = self.clip_span;
        if k_f == 0 || k_l <= k_f {
            return Err(GenerationError::InvalidSpan(k_f, k_l));
        }
        let expected = k_l - k_f - 1;
        if self.priors.len() != expected {
            return Err(GenerationError::PriorCountMismatch {
                k_f,
                k_l,
                expected,
                got: self.priors.len(),
            });
        }
        for (i, p) in self.priors.iter().enumerate() {
            if p.index != k_f + 1 + i {
                return Err(GenerationError::PriorOrder {
                    expected: k_f + 1 + i,
                    got: p.index,
                });
            }
        }
        let (w, h) = (self.first_kf.width(), self.first_kf.height());
        let same = |f: &Frame| f.width() == w && f.height() == h && f.u.width == w / 2 && f.u.height == h / 2;
        if !same(&self.last_kf) || self.priors.iter().any(|p| p.plane.width != w || p.plane.height != h) {
            return Err(GenerationError::GeometryMismatch);
        }
        Ok(())
    }
}

/// Chroma sample at `t` blended between keyframes at `k_f` and `k_l`,
/// rounded half away from zero.
#[inline]
pub fn blend_sample(c_f: u8, c_l: u8, t: usize, k_f: usize, k_l: usize) -> u8 {
    let span = (k_l - k_f) as u64;
    let num = (k_l - t) as u64 * c_f as u64 + (t - k_f) as u64 * c_l as u64;
    // non-negative, so half-up integer rounding equals half away from zero
    ((2 * num + span) / (2 * span)) as u8
}

fn blend_plane(a: &Plane, b: &Plane, t: usize, k_f: usize, k_l: usize) -> Plane {
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| blend_sample(x, y, t, k_f, k_l))
        .collect();
    Plane::new(a.width, a.height, data)
}

pub fn baseline_generate(req: &ClipGenRequest) -> Result<Vec<Frame>, GenerationError> {
    req.validate()?;
    if let Some(p) = req.priors.iter().find(|p| p.kind != PriorKind::Luma) {
        return Err(GenerationError::PriorKindMismatch(p.kind));
    }
    let (k_f, k_l) = req.clip_span;
    Ok(req
        .priors
        .iter()
        .map(|p| Frame {
            index: p.index,
            y: p.plane.clone(),
            u: blend_plane(&req.first_kf.u, &req.last_kf.u, p.index, k_f, k_l),
            v: blend_plane(&req.first_kf.v, &req.last_kf.v, p.index, k_f, k_l),
        })
        .collect())
}

const GENERATOR_PLACEHOLDERS: [&str; 2] = ["workdir", "frames"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalGenerator {
    /// Template with `{workdir}` and optionally `{frames}`.
    pub command: String,
    pub scratch_dir: Option<PathBuf>,
}

impl ExternalGenerator {
    pub fn validate(&self) -> Result<(), GenerationError> {
        codec::check_template_with(&self.command, &["workdir"], &GENERATOR_PLACEHOLDERS)
            .map_err(|e| GenerationError::GeneratorFailed(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Generator {
    #[default]
    Baseline,
    External(ExternalGenerator),
}

impl Generator {
    pub fn generate(&self, req: &ClipGenRequest, fps: Fps) -> Result<Vec<Frame>, GenerationError> {
        match self {
            Generator::Baseline => baseline_generate(req),
            Generator::External(ext) => external_generate(req, ext, fps),
        }
    }
}

fn write_y4m(path: &Path, frames: Vec<Frame>, fps: Fps) -> Result<(), GenerationError> {
    let video = Video::from_frames(frames, fps).map_err(|e| GenerationError::GeneratorFailed(e.to_string()))?;
    let bytes = frame_io::to_y4m(&video).map_err(|e| GenerationError::GeneratorFailed(e.to_string()))?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Writes `first.y4m`, `last.y4m` and `priors.y4m` into a fresh work
/// directory, runs the generator and reads back `out.y4m`.
pub fn external_generate(req: &ClipGenRequest, gen: &ExternalGenerator, fps: Fps) -> Result<Vec<Frame>, GenerationError> {
    req.validate()?;
    gen.validate()?;
    let n = req.priors.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let dir = codec::scratch(gen.scratch_dir.as_deref(), "cgvc-gen-")?;
    let work = dir.path();
    write_y4m(&work.join("first.y4m"), vec![req.first_kf.clone()], fps)?;
    write_y4m(&work.join("last.y4m"), vec![req.last_kf.clone()], fps)?;
    write_y4m(&work.join("priors.y4m"), req.priors.iter().map(PriorFrame::to_carrier).collect(), fps)?;

    let cmd = codec::substitute(
        &gen.command,
        &[("workdir", work.display().to_string()), ("frames", n.to_string())],
    );
    codec::run_shell(&cmd, work).map_err(|e| match e {
        CodecError::ExternalFailed { status, stderr, .. } => {
            GenerationError::GeneratorFailed(format!("{status}: {stderr}"))
        }
        other => GenerationError::GeneratorFailed(other.to_string()),
    })?;

    let out = work.join("out.y4m");
    let bytes = fs::read(&out).map_err(|e| GenerationError::GeneratorOutputMismatch(format!("{}: {e}", out.display())))?;
    let video = frame_io::parse_y4m(&bytes).map_err(|e| GenerationError::GeneratorOutputMismatch(e.to_string()))?;
    let (w, h) = (req.first_kf.width(), req.first_kf.height());
    if video.len() != n || video.meta.width != w || video.meta.height != h {
        return Err(GenerationError::GeneratorOutputMismatch(format!(
            "got {} frames of {}x{}, expected {n} of {w}x{h}",
            video.len(),
            video.meta.width,
            video.meta.height
        )));
    }
    let (k_f, _) = req.clip_span;
    Ok(video
        .frames
        .into_iter()
        .enumerate()
        .map(|(i, mut f)| {
            f.index = k_f + 1 + i;
            f
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control_prior::extract_luma_prior;
    use proptest::prelude::*;

    const FPS: Fps = Fps { num: 25, den: 1 };

    fn request(span: (usize, usize), first: Frame, last: Frame, luma: u8) -> ClipGenRequest {
        let (w, h) = (first.width(), first.height());
        let priors = (span.0 + 1..span.1)
            .map(|t| extract_luma_prior(&Frame::filled(t, w, h, luma, 0, 0)))
            .collect();
        ClipGenRequest {
            first_kf: first,
            last_kf: last,
            priors,
            clip_span: span,
        }
    }

    #[test]
    fn midpoint_blend() {
        let req = request((1, 3), Frame::filled(1, 4, 4, 50, 100, 10), Frame::filled(3, 4, 4, 60, 200, 20), 77);
        let out = baseline_generate(&req).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].index, 2);
        assert!(out[0].u.data.iter().all(|&s| s == 150));
        assert!(out[0].v.data.iter().all(|&s| s == 15));
        assert!(out[0].y.data.iter().all(|&s| s == 77));
    }

    #[test]
    fn static_scene_keeps_chroma() {
        let kf = Frame::filled(1, 4, 2, 50, 33, 201);
        let req = request((1, 9), kf.clone(), Frame { index: 9, ..kf.clone() }, 50);
        for f in baseline_generate(&req).unwrap() {
            assert_eq!(f.u, kf.u);
            assert_eq!(f.v, kf.v);
        }
    }

    #[test]
    fn quarter_blend_rounds() {
        assert_eq!(blend_sample(0, 255, 2, 1, 5), 64);
        assert_eq!(blend_sample(0, 255, 4, 1, 5), 191);
        assert_eq!(blend_sample(0, 1, 2, 1, 3), 1);
        assert_eq!(blend_sample(1, 0, 2, 1, 3), 1);
    }

    #[test]
    fn request_validation() {
        let f = Frame::filled(1, 4, 4, 0, 0, 0);
        let mut req = request((1, 4), f.clone(), f.clone(), 0);
        req.priors.pop();
        assert!(matches!(baseline_generate(&req), Err(GenerationError::PriorCountMismatch { expected: 2, got: 1, .. })));
        let mut req = request((1, 4), f.clone(), f.clone(), 0);
        req.priors.swap(0, 1);
        assert!(matches!(baseline_generate(&req), Err(GenerationError::PriorOrder { .. })));
        let mut req = request((1, 4), f.clone(), f.clone(), 0);
        req.priors[0].kind = PriorKind::Edge;
        assert!(matches!(baseline_generate(&req), Err(GenerationError::PriorKindMismatch(PriorKind::Edge))));
        let req = request((1, 4), f.clone(), Frame::filled(4, 6, 4, 0, 0, 0), 0);
        assert!(matches!(baseline_generate(&req), Err(GenerationError::GeometryMismatch)));
        // adjacent keyframes: nothing to generate
        assert!(baseline_generate(&request((3, 4), f.clone(), f, 0)).unwrap().is_empty());
    }

    fn script_generator(body: &str) -> ExternalGenerator {
        ExternalGenerator {
            command: format!("cd {{workdir}} && {body}"),
            scratch_dir: None,
        }
    }

    #[test]
    fn external_copy_through_returns_priors() {
        let req = request((10, 14), Frame::filled(10, 4, 4, 1, 2, 3), Frame::filled(14, 4, 4, 4, 5, 6), 99);
        let gen = script_generator("cp priors.y4m out.y4m");
        let out = external_generate(&req, &gen, FPS).unwrap();
        assert_eq!(out.len(), 3);
        for (f, p) in out.iter().zip(&req.priors) {
            assert_eq!(f.index, p.index);
            assert_eq!(f.y, p.plane);
            assert!(f.u.data.iter().chain(&f.v.data).all(|&s| s == 128));
        }
        // the frames placeholder is substituted
        let gen = script_generator("test {frames} -eq 3 && cp priors.y4m out.y4m");
        assert!(external_generate(&req, &gen, FPS).is_ok());
    }

    #[test]
    fn external_wrong_frame_count() {
        let req = request((1, 5), Frame::filled(1, 4, 4, 0, 0, 0), Frame::filled(5, 4, 4, 0, 0, 0), 9);
        let gen = script_generator("cp first.y4m out.y4m");
        assert!(matches!(
            external_generate(&req, &gen, FPS),
            Err(GenerationError::GeneratorOutputMismatch(_))
        ));
        let gen = script_generator("true");
        assert!(matches!(
            external_generate(&req, &gen, FPS),
            Err(GenerationError::GeneratorOutputMismatch(_))
        ));
    }

    #[test]
    fn external_failure_captures_stderr() {
        let req = request((1, 3), Frame::filled(1, 4, 4, 0, 0, 0), Frame::filled(3, 4, 4, 0, 0, 0), 9);
        let gen = script_generator("echo no-gpu >&2; exit 1");
        match external_generate(&req, &gen, FPS) {
            Err(GenerationError::GeneratorFailed(msg)) => assert!(msg.contains("no-gpu"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = ExternalGenerator {
            command: "gen --no-dir".into(),
            scratch_dir: None,
        };
        assert!(matches!(external_generate(&req, &bad, FPS), Err(GenerationError::GeneratorFailed(_))));
    }

    proptest! {
        #[test]
        fn blend_stays_between_endpoints(a in any::<u8>(), b in any::<u8>(), k_f in 1usize..50, len in 2usize..90, off in 0usize..1000) {
            let k_l = k_f + len;
            let t = k_f + 1 + off % (len - 1);
            let s = blend_sample(a, b, t, k_f, k_l);
            prop_assert!(s >= a.min(b) && s <= a.max(b));
            let exact = ((k_l - t) as f64 * a as f64 + (t - k_f) as f64 * b as f64) / len as f64;
            prop_assert_eq!(s, exact.round() as u8);
        }
    }
}
