//! Encoder and decoder orchestration plus per-stream rate allocation.

use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{self, CodecError, CodecSpec, EncodedStream, ExternalCodec, CODEC_EXTERNAL, CODEC_INTERNAL, MAX_QUALITY_STEP};
use crate::color_correction::{self, ColorError};
use crate::container::{CgvcContainer, ContainerError, FORMAT_VERSION};
use crate::control_prior::{self, PriorError, PriorFrame, PriorKind};
use crate::frame_io::{self, Fps, Frame, FrameIoError, RgbFrame, Video, VideoMeta};
use crate::generation::{ClipGenRequest, GenerationError, Generator};
use crate::metrics::MetricsError;
use crate::keyframe_selection::{self, KeyframePlan, SelectionError, SelectionParams};
use crate::segmentation::{Segmentation, SegmentationError};

pub const DEFAULT_LUMA_FRACTION: f64 = 0.9;
pub const DEFAULT_EDGE_THRESHOLD: u32 = 128;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    FrameIo(#[from] FrameIoError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{stream} holds {got} frames, plan needs {expected}")]
    PlanStreamMismatch { stream: &'static str, expected: usize, got: usize },
    #[error("{stream} target {target:.3} kbps unreachable; achievable range {min:.3}..={max:.3} kbps")]
    UnreachableRate { stream: &'static str, target: f64, min: f64, max: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl PipelineError {
    /// True when an external encoder, decoder or generator is to blame.
    pub fn is_external_failure(&self) -> bool {
        matches!(
            self,
            PipelineError::Codec(CodecError::ExternalFailed { .. })
                | PipelineError::Generation(GenerationError::GeneratorFailed(_))
                | PipelineError::Generation(GenerationError::GeneratorOutputMismatch(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeConfig {
    pub selection: SelectionParams,
    pub prior: PriorKind,
    pub edge_threshold: u32,
    pub kf_codec: CodecSpec,
    pub prior_codec: CodecSpec,
    /// Total rate in kbps used by [`plan_rate_allocation`].
    pub target_rate: Option<f64>,
    /// Share of the target given to the prior stream.
    pub luma_fraction: f64,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            selection: SelectionParams::default(),
            prior: PriorKind::Luma,
            edge_threshold: DEFAULT_EDGE_THRESHOLD,
            kf_codec: CodecSpec::internal(1),
            prior_codec: CodecSpec::internal(1),
            target_rate: None,
            luma_fraction: DEFAULT_LUMA_FRACTION,
        }
    }
}

impl EncodeConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.luma_fraction > 0.0 && self.luma_fraction < 1.0) {
            return Err(PipelineError::InvalidConfig(format!(
                "luma fraction {} outside (0, 1)",
                self.luma_fraction
            )));
        }
        if let Some(r) = self.target_rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(PipelineError::InvalidConfig(format!("target rate {r}")));
            }
        }
        self.selection.validate()?;
        self.kf_codec.validate()?;
        self.prior_codec.validate()?;
        Ok(())
    }
}

fn check_masks(video: &Video, seg: &Segmentation) -> Result<(), PipelineError> {
    if seg.len() != video.len() {
        return Err(SelectionError::MaskCountMismatch {
            maps: seg.len(),
            frames: video.len(),
        }
        .into());
    }
    Ok(())
}

fn keyframe_frames(video: &Video, plan: &KeyframePlan) -> Vec<Frame> {
    plan.keyframes.iter().map(|&t| video.frame(t).clone()).collect()
}

fn prior_carriers(video: &Video, plan: &KeyframePlan, kind: PriorKind, threshold: u32) -> Result<Vec<Frame>, PipelineError> {
    let frames = plan
        .non_keyframes()
        .par_iter()
        .map(|&t| control_prior::extract_prior(video.frame(t), kind, threshold).map(|p| p.to_carrier()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(frames)
}

fn encode_or_empty(frames: &[Frame], meta: &VideoMeta, spec: &CodecSpec) -> Result<EncodedStream, CodecError> {
    if frames.is_empty() {
        spec.validate()?;
        Ok(EncodedStream::empty(spec.codec_id(), meta.width, meta.height))
    } else {
        codec::encode_stream(frames, meta.fps, spec)
    }
}

/// Encodes with an already chosen keyframe plan.
pub fn encode_with_plan(video: &Video, plan: KeyframePlan, config: &EncodeConfig) -> Result<CgvcContainer, PipelineError> {
    config.validate()?;
    plan.validate(video.len())?;
    let meta = &video.meta;
    let kf = keyframe_frames(video, &plan);
    let priors = prior_carriers(video, &plan, config.prior, config.edge_threshold)?;
    let (b_k, b_p) = rayon::join(
        || codec::encode_stream(&kf, meta.fps, &config.kf_codec),
        || encode_or_empty(&priors, meta, &config.prior_codec),
    );
    let rgb: Vec<RgbFrame> = video.frames.par_iter().map(frame_io::yuv_to_rgb).collect();
    let b_k = b_k?;
    Ok(CgvcContainer {
        version: FORMAT_VERSION,
        meta: meta.clone(),
        plan,
        prior_kind: config.prior,
        codec_id: b_k.codec_id,
        b_k,
        b_p: b_p?,
        b_c: color_correction::compute_color_params(&rgb),
    })
}

pub fn encode(video: &Video, seg: &Segmentation, config: &EncodeConfig) -> Result<CgvcContainer, PipelineError> {
    config.validate()?;
    check_masks(video, seg)?;
    let plan = keyframe_selection::select_keyframes(video, seg, &config.selection)?;
    encode_with_plan(video, plan, config)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodeConfig {
    /// Needed only for streams produced by the external backend.
    pub external: Option<ExternalCodec>,
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutput {
    /// Decoded keyframes and generated frames before colour correction.
    pub fused: Vec<Frame>,
    pub corrected_rgb: Vec<RgbFrame>,
    pub video: Video,
}

fn backend_for(stream: &EncodedStream, config: &DecodeConfig) -> Result<CodecSpec, PipelineError> {
    match stream.codec_id {
        CODEC_INTERNAL => Ok(CodecSpec::internal(1)),
        CODEC_EXTERNAL => config
            .external
            .clone()
            .map(CodecSpec::External)
            .ok_or_else(|| PipelineError::InvalidConfig("stream needs an external decoder command".into())),
        other => Err(CodecError::CodecMismatch {
            expected: CODEC_INTERNAL,
            found: other,
        }
        .into()),
    }
}

fn decode_checked(stream: &EncodedStream, name: &'static str, expected: usize, meta: &VideoMeta, config: &DecodeConfig) -> Result<Vec<Frame>, PipelineError> {
    if stream.frame_count != expected {
        return Err(PipelineError::PlanStreamMismatch {
            stream: name,
            expected,
            got: stream.frame_count,
        });
    }
    if expected > 0 && (stream.width, stream.height) != (meta.width, meta.height) {
        return Err(CodecError::CorruptStream(format!(
            "{name} is {}x{}, video is {}x{}",
            stream.width, stream.height, meta.width, meta.height
        ))
        .into());
    }
    Ok(codec::decode_stream(stream, meta.fps, &backend_for(stream, config)?)?)
}

pub fn decode_detailed(container: &CgvcContainer, config: &DecodeConfig) -> Result<DecodeOutput, PipelineError> {
    let meta = &container.meta;
    let plan = &container.plan;
    plan.validate(meta.frame_count)?;
    let non_kf = plan.non_keyframes();
    let (kf, priors) = rayon::join(
        || decode_checked(&container.b_k, "B_K", plan.keyframes.len(), meta, config),
        || decode_checked(&container.b_p, "B_P", non_kf.len(), meta, config),
    );
    let (kf, priors) = (kf?, priors?);
    let priors: Vec<PriorFrame> = priors
        .iter()
        .zip(&non_kf)
        .map(|(f, &t)| PriorFrame::from_carrier(f, t, container.prior_kind))
        .collect();

    let clips = plan.clips();
    let mut offset = 0;
    let mut requests = Vec::with_capacity(clips.len());
    for (i, &(k_f, k_l)) in clips.iter().enumerate() {
        let n = k_l - k_f - 1;
        requests.push(ClipGenRequest {
            first_kf: Frame { index: k_f, ..kf[i].clone() },
            last_kf: Frame { index: k_l, ..kf[i + 1].clone() },
            priors: priors[offset..offset + n].to_vec(),
            clip_span: (k_f, k_l),
        });
        offset += n;
    }
    let generated = requests
        .par_iter()
        .map(|r| config.generator.generate(r, meta.fps))
        .collect::<Result<Vec<_>, _>>()?;

    let mut fused = Vec::with_capacity(meta.frame_count);
    for (i, clip) in generated.into_iter().enumerate() {
        fused.push(Frame { index: plan.keyframes[i], ..kf[i].clone() });
        fused.extend(clip);
    }
    let last = plan.keyframes.len() - 1;
    fused.push(Frame { index: plan.keyframes[last], ..kf[last].clone() });

    let corrected: Vec<(RgbFrame, Frame)> = fused
        .par_iter()
        .map(|f| -> Result<_, PipelineError> {
            let rgb = frame_io::yuv_to_rgb(f);
            let fixed = color_correction::correct_frame(&rgb, &container.b_c, f.index)?;
            // an identity correction keeps the decoded samples, avoiding a
            // lossy second colour-space round trip
            let yuv = if fixed == rgb { f.clone() } else { frame_io::rgb_to_yuv(&fixed) };
            Ok((fixed, yuv))
        })
        .collect::<Result<_, _>>()?;
    let (corrected_rgb, frames): (Vec<_>, Vec<_>) = corrected.into_iter().unzip();
    let video = Video::from_frames(frames, meta.fps)?;
    Ok(DecodeOutput {
        fused,
        corrected_rgb,
        video,
    })
}

pub fn decode(container: &CgvcContainer, config: &DecodeConfig) -> Result<Video, PipelineError> {
    Ok(decode_detailed(container, config)?.video)
}

/// `(keyframe target, prior target)` in kbps.
pub fn rate_targets(target_rate: f64, luma_fraction: f64) -> (f64, f64) {
    ((1.0 - luma_fraction) * target_rate, luma_fraction * target_rate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateAllocation {
    pub kf_quality: u8,
    pub prior_quality: u8,
    pub kf_target: f64,
    pub prior_target: f64,
    /// Achieved stream rates in kbps, both measured over all T frames.
    pub kf_rate: f64,
    pub prior_rate: f64,
}

/// Smallest step whose rate fits `target`, by binary search over the
/// monotone step knob.
fn search_quality(frames: &[Frame], fps: Fps, total_frames: usize, target: f64, stream: &'static str) -> Result<(u8, f64), PipelineError> {
    if frames.is_empty() {
        return Ok((1, 0.0));
    }
    let rate = |q: u8| -> Result<f64, PipelineError> {
        let s = codec::encode_stream(frames, fps, &CodecSpec::internal(q))?;
        Ok(codec::measure_rate(s.size_bits(), fps, total_frames))
    };
    let finest = rate(1)?;
    if finest <= target {
        return Ok((1, finest));
    }
    let coarsest = rate(MAX_QUALITY_STEP)?;
    if coarsest > target {
        return Err(PipelineError::UnreachableRate {
            stream,
            target,
            min: coarsest,
            max: finest,
        });
    }
    // rate(lo) > target >= rate(hi)
    let (mut lo, mut hi, mut hi_rate) = (1u8, MAX_QUALITY_STEP, coarsest);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let r = rate(mid)?;
        if r <= target {
            hi = mid;
            hi_rate = r;
        } else {
            lo = mid;
        }
    }
    Ok((hi, hi_rate))
}

/// Chooses internal-codec steps so B_K and B_P each fit their share of the
/// target rate.
pub fn plan_rate_allocation(video: &Video, seg: &Segmentation, config: &EncodeConfig) -> Result<RateAllocation, PipelineError> {
    config.validate()?;
    check_masks(video, seg)?;
    let plan = keyframe_selection::select_keyframes(video, seg, &config.selection)?;
    allocate_for_plan(video, &plan, config)
}

pub fn allocate_for_plan(video: &Video, plan: &KeyframePlan, config: &EncodeConfig) -> Result<RateAllocation, PipelineError> {
    config.validate()?;
    let target = config
        .target_rate
        .ok_or_else(|| PipelineError::InvalidConfig("rate allocation needs a target rate".into()))?;
    if !matches!(config.kf_codec, CodecSpec::Internal { .. }) || !matches!(config.prior_codec, CodecSpec::Internal { .. }) {
        return Err(PipelineError::InvalidConfig("rate allocation needs the internal codec".into()));
    }
    let (kf_target, prior_target) = rate_targets(target, config.luma_fraction);
    let (fps, t) = (video.meta.fps, video.len());
    let kf = keyframe_frames(video, plan);
    let priors = prior_carriers(video, plan, config.prior, config.edge_threshold)?;
    let (k, p) = rayon::join(
        || search_quality(&kf, fps, t, kf_target, "B_K"),
        || search_quality(&priors, fps, t, prior_target, "B_P"),
    );
    let ((kf_quality, kf_rate), (prior_quality, prior_rate)) = (k?, p?);
    Ok(RateAllocation {
        kf_quality,
        prior_quality,
        kf_target,
        prior_target,
        kf_rate,
        prior_rate,
    })
}

/// Selects keyframes once, allocates rate if a target is set, and encodes.
pub fn encode_at_rate(video: &Video, seg: &Segmentation, config: &EncodeConfig) -> Result<(CgvcContainer, Option<RateAllocation>), PipelineError> {
    config.validate()?;
    check_masks(video, seg)?;
    let plan = keyframe_selection::select_keyframes(video, seg, &config.selection)?;
    let Some(_) = config.target_rate else {
        return Ok((encode_with_plan(video, plan, config)?, None));
    };
    let alloc = allocate_for_plan(video, &plan, config)?;
    let cfg = EncodeConfig {
        kf_codec: CodecSpec::internal(alloc.kf_quality),
        prior_codec: CodecSpec::internal(alloc.prior_quality),
        ..config.clone()
    };
    Ok((encode_with_plan(video, plan, &cfg)?, Some(alloc)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::total_rate;
    use crate::segmentation::whole_frame_segmentation;

    const FPS: Fps = Fps { num: 25, den: 1 };

    fn static_video(t: usize) -> Video {
        Video::from_frames((1..=t).map(|i| Frame::filled(i, 16, 8, 120, 90, 160)).collect(), FPS).unwrap()
    }

    fn ramp_video(t: usize) -> Video {
        let frames = (1..=t)
            .map(|i| {
                let mut f = Frame::filled(i, 16, 8, 0, 100, 150);
                for y in 0..8 {
                    for x in 0..16 {
                        f.y.set(x, y, (16 + 10 * x + y + i) as u8);
                    }
                }
                f
            })
            .collect();
        Video::from_frames(frames, FPS).unwrap()
    }

    #[test]
    fn two_frame_video_has_no_priors() {
        let v = static_video(2);
        let c = encode(&v, &whole_frame_segmentation(&v.meta), &EncodeConfig::default()).unwrap();
        assert_eq!(c.plan.keyframes, vec![1, 2]);
        assert_eq!(c.b_k.frame_count, 2);
        assert_eq!(c.b_p.frame_count, 0);
        assert!(c.b_p.bytes.is_empty());
        assert_eq!(decode(&c, &DecodeConfig::default()).unwrap().frames, v.frames);
    }

    #[test]
    fn static_round_trip_is_exact() {
        let v = static_video(40);
        let c = encode(&v, &whole_frame_segmentation(&v.meta), &EncodeConfig::default()).unwrap();
        assert_eq!(c.b_p.frame_count, 40 - c.plan.keyframes.len());
        let c = CgvcContainer::parse(&c.serialize()).unwrap();
        let out = decode_detailed(&c, &DecodeConfig::default()).unwrap();
        assert_eq!(out.video.frames, v.frames);
        assert_eq!(out.video.meta, v.meta);
    }

    #[test]
    fn luma_passthrough_and_stats() {
        let v = ramp_video(12);
        let cfg = EncodeConfig {
            selection: SelectionParams {
                w_min: 2,
                w_max: 5,
                ..Default::default()
            },
            ..Default::default()
        };
        let c = encode(&v, &whole_frame_segmentation(&v.meta), &cfg).unwrap();
        let out = decode_detailed(&c, &DecodeConfig::default()).unwrap();
        for t in c.plan.non_keyframes() {
            assert_eq!(out.fused[t - 1].y, v.frame(t).y, "frame {t}");
        }
        for t in c.plan.keyframes.iter() {
            assert_eq!(&out.fused[t - 1], v.frame(*t));
        }
        for (rgb, stats) in out.corrected_rgb.iter().zip(&c.b_c.frames) {
            for (p, s) in rgb.channels().iter().zip(stats) {
                let (m, sd) = color_correction::plane_stats(p);
                assert!((m - s.mean.to_f64()).abs() <= 0.5 && (sd - s.std.to_f64()).abs() <= 0.5);
            }
        }
    }

    #[test]
    fn stream_count_mismatch() {
        let v = static_video(10);
        let mut c = encode(&v, &whole_frame_segmentation(&v.meta), &EncodeConfig::default()).unwrap();
        c.b_k.frame_count += 1;
        assert!(matches!(
            decode(&c, &DecodeConfig::default()),
            Err(PipelineError::PlanStreamMismatch { stream: "B_K", .. })
        ));
    }

    #[test]
    fn mask_count_checked() {
        let v = static_video(10);
        let seg = whole_frame_segmentation(&static_video(9).meta);
        assert!(matches!(
            encode(&v, &seg, &EncodeConfig::default()),
            Err(PipelineError::Selection(SelectionError::MaskCountMismatch { .. }))
        ));
    }

    #[test]
    fn config_validation() {
        let bad = EncodeConfig {
            luma_fraction: 1.0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(PipelineError::InvalidConfig(_))));
        assert_eq!(rate_targets(100.0, 0.9), (100.0 * (1.0 - 0.9), 90.0));
        assert_eq!(rate_targets(100.0, 0.5).1, 50.0);
    }

    #[test]
    fn generous_target_gives_lossless_steps() {
        let v = ramp_video(20);
        let cfg = EncodeConfig {
            target_rate: Some(1e9),
            ..Default::default()
        };
        let a = plan_rate_allocation(&v, &whole_frame_segmentation(&v.meta), &cfg).unwrap();
        assert_eq!((a.kf_quality, a.prior_quality), (1, 1));
        assert!(a.kf_rate + a.prior_rate < 1e9);
    }

    #[test]
    fn impossible_target_is_reported() {
        let v = ramp_video(20);
        let cfg = EncodeConfig {
            target_rate: Some(1e-6),
            ..Default::default()
        };
        assert!(matches!(
            plan_rate_allocation(&v, &whole_frame_segmentation(&v.meta), &cfg),
            Err(PipelineError::UnreachableRate { .. })
        ));
    }

    #[test]
    fn container_size_non_increasing_in_step() {
        // piecewise-constant content; a ramp can defeat the run coder at
        // coarser steps
        let frames = (1..=10).map(|i| Frame::filled(i, 16, 8, 20 * i as u8, 90, 200 - 7 * i as u8)).collect();
        let v = Video::from_frames(frames, FPS).unwrap();
        let seg = whole_frame_segmentation(&v.meta);
        let mut last = usize::MAX;
        for q in [1u8, 2, 4, 8, 16, 32, 64] {
            let cfg = EncodeConfig {
                kf_codec: CodecSpec::internal(q),
                prior_codec: CodecSpec::internal(q),
                ..Default::default()
            };
            let c = encode(&v, &seg, &cfg).unwrap();
            let size = c.serialize().len();
            assert!(size <= last, "q={q}: {size} > {last}");
            last = size;
            assert!(total_rate(&c, &c.meta).total > 0.0);
        }
    }
}
