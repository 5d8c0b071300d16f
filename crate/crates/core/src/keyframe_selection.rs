//! Color-distance-guided keyframe selection.
//!
//! Each object's pixels are binned into a 16x16x16 joint color histogram. A
//! bidirectional search walks from both ends of the sequence toward the middle;
//! at every step it collects the frames in `[prev + w_min, prev + w_max]` whose
//! positive histogram distance to the previous keyframe reaches `tau` (one vote
//! per object), fits a Gaussian KDE over the votes and takes its peak as the
//! next keyframe. When nothing qualifies the step falls back to a uniform jump
//! of `w_max`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_io::{yuv_to_rgb, Frame, Plane, Video};
use crate::segmentation::{LabelMap, Segmentation};

pub const BINS_PER_CHANNEL: usize = 16;
pub const HISTOGRAM_CELLS: usize = BINS_PER_CHANNEL * BINS_PER_CHANNEL * BINS_PER_CHANNEL;
pub const DEFAULT_KDE_BANDWIDTH: f64 = 5.0;

/// Relative slack under which two KDE values count as tied.
pub const KDE_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("object id {id} out of range 1..={count}")]
    ObjectOutOfRange { id: usize, count: usize },
    #[error("label maps cover {maps} frames, video has {frames}")]
    MaskCountMismatch { maps: usize, frames: usize },
    #[error("label map {index} is {got_w}x{got_h}, video is {want_w}x{want_h}")]
    MaskDimensionMismatch {
        index: usize,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("KDE needs at least one candidate")]
    EmptyCandidates,
    #[error("invalid window [{0}, {1}]")]
    InvalidWindow(usize, usize),
    #[error("invalid selection parameters: {0}")]
    InvalidParams(String),
    #[error("invalid keyframe plan: {0}")]
    InvalidPlan(String),
}

/// Color space the histograms are built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramSpace {
    /// BT.709 RGB, the default.
    #[default]
    Rgb,
    /// Raw Y/U/V samples with chroma repeated to luma resolution.
    Yuv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub w_min: usize,
    pub w_max: usize,
    pub tau: f64,
    pub kde_bandwidth: f64,
    /// Collapse the candidate multiset to a set before fitting the KDE.
    pub dedup_candidates: bool,
    pub histogram_space: HistogramSpace,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            w_min: 32,
            w_max: 85,
            tau: 0.4,
            kde_bandwidth: DEFAULT_KDE_BANDWIDTH,
            dedup_candidates: false,
            histogram_space: HistogramSpace::Rgb,
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.w_min == 0 || self.w_min > self.w_max {
            return Err(SelectionError::InvalidParams(format!(
                "need 1 <= w_min <= w_max, got w_min={} w_max={}",
                self.w_min, self.w_max
            )));
        }
        if !(self.tau > 0.0) {
            return Err(SelectionError::InvalidParams(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.kde_bandwidth > 0.0) || !self.kde_bandwidth.is_finite() {
            return Err(SelectionError::InvalidParams(format!(
                "kde bandwidth must be > 0, got {}",
                self.kde_bandwidth
            )));
        }
        Ok(())
    }
}

/// l1-normalized joint color histogram, stored sparsely as `(cell, weight)`
/// pairs sorted by cell. An absent object yields the EMPTY histogram.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColorHistogram {
    cells: Vec<(u16, f64)>,
}

impl ColorHistogram {
    pub const EMPTY: ColorHistogram = ColorHistogram { cells: Vec::new() };

    /// Normalizes raw per-cell counts. All-zero counts give EMPTY.
    pub fn from_counts(counts: &[u32]) -> Self {
        assert_eq!(counts.len(), HISTOGRAM_CELLS);
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if total == 0 {
            return Self::EMPTY;
        }
        let total = total as f64;
        let cells = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, &c)| (j as u16, c as f64 / total))
            .collect();
        ColorHistogram { cells }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Weight of one cell.
    pub fn get(&self, cell: usize) -> f64 {
        match self.cells.binary_search_by_key(&(cell as u16), |&(j, _)| j) {
            Ok(i) => self.cells[i].1,
            Err(_) => 0.0,
        }
    }

    /// Non-zero cells in increasing cell order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.cells.iter().map(|&(j, w)| (j as usize, w))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; HISTOGRAM_CELLS];
        for (j, w) in self.iter() {
            dense[j] = w;
        }
        dense
    }
}

/// Joint bin of a color triple: `floor(c / 16)` per channel.
#[inline]
pub fn cell_index(c0: u8, c1: u8, c2: u8) -> usize {
    let b = |c: u8| (c as usize) / (256 / BINS_PER_CHANNEL);
    (b(c0) * BINS_PER_CHANNEL + b(c1)) * BINS_PER_CHANNEL + b(c2)
}

/// The three full-resolution channels histograms are taken over.
pub fn color_planes(frame: &Frame, space: HistogramSpace) -> [Plane; 3] {
    match space {
        HistogramSpace::Rgb => {
            let rgb = yuv_to_rgb(frame);
            [rgb.r, rgb.g, rgb.b]
        }
        HistogramSpace::Yuv => {
            let (w, h) = (frame.width(), frame.height());
            let up = |p: &Plane| {
                let mut data = Vec::with_capacity(w * h);
                for y in 0..h {
                    for x in 0..w {
                        data.push(p.get(x / 2, y / 2));
                    }
                }
                Plane::new(w, h, data)
            };
            [frame.y.clone(), up(&frame.u), up(&frame.v)]
        }
    }
}

/// Histograms of objects `1..=object_count` in one pass over the frame.
pub fn frame_histograms(planes: &[Plane; 3], labels: &LabelMap, object_count: usize) -> Vec<ColorHistogram> {
    let mut counts = vec![0u32; object_count * HISTOGRAM_CELLS];
    let [p0, p1, p2] = planes;
    for (i, &id) in labels.labels.data.iter().enumerate() {
        let id = id as usize;
        if id == 0 || id > object_count {
            continue;
        }
        let cell = cell_index(p0.data[i], p1.data[i], p2.data[i]);
        counts[(id - 1) * HISTOGRAM_CELLS + cell] += 1;
    }
    counts
        .chunks_exact(HISTOGRAM_CELLS)
        .map(ColorHistogram::from_counts)
        .collect()
}

/// Histogram of a single object in a frame; EMPTY when it has no pixels there.
pub fn object_histogram(
    frame: &Frame,
    labels: &LabelMap,
    object_id: usize,
    object_count: usize,
    space: HistogramSpace,
) -> Result<ColorHistogram, SelectionError> {
    if object_id == 0 || object_id > object_count {
        return Err(SelectionError::ObjectOutOfRange {
            id: object_id,
            count: object_count,
        });
    }
    let planes = color_planes(frame, space);
    let mut counts = vec![0u32; HISTOGRAM_CELLS];
    for (i, &id) in labels.labels.data.iter().enumerate() {
        if id as usize == object_id {
            counts[cell_index(planes[0].data[i], planes[1].data[i], planes[2].data[i])] += 1;
        }
    }
    Ok(ColorHistogram::from_counts(&counts))
}

/// Mass of `cand` exceeding `prev`: `sum_j max(0, cand[j] - prev[j])`.
/// Zero if either histogram is EMPTY.
pub fn positive_histogram_distance(prev: &ColorHistogram, cand: &ColorHistogram) -> f64 {
    if prev.is_empty() || cand.is_empty() {
        return 0.0;
    }
    let mut p = prev.cells.iter().peekable();
    let mut sum = 0.0;
    for &(j, wc) in &cand.cells {
        while p.next_if(|&&(k, _)| k < j).is_some() {}
        let wp = match p.peek() {
            Some(&&(k, w)) if k == j => w,
            _ => 0.0,
        };
        if wc > wp {
            sum += wc - wp;
        }
    }
    sum.min(1.0)
}

/// Per-frame, per-object histograms for a whole sequence.
#[derive(Debug, Clone)]
pub struct HistogramTable {
    frames: Vec<Vec<ColorHistogram>>,
    object_count: usize,
}

impl HistogramTable {
    pub fn compute(video: &Video, seg: &Segmentation, space: HistogramSpace) -> Result<Self, SelectionError> {
        check_masks(video, seg)?;
        let object_count = seg.object_count;
        let frames = video
            .frames
            .par_iter()
            .zip(seg.maps.par_iter())
            .map(|(frame, map)| frame_histograms(&color_planes(frame, space), map, object_count))
            .collect();
        Ok(HistogramTable { frames, object_count })
    }

    pub fn from_histograms(frames: Vec<Vec<ColorHistogram>>, object_count: usize) -> Self {
        assert!(frames.iter().all(|f| f.len() == object_count));
        HistogramTable { frames, object_count }
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn object_count(&self) -> usize {
        self.object_count
    }

    /// Histogram of object `m` (1-based) at frame `t` (1-based).
    pub fn get(&self, t: usize, m: usize) -> &ColorHistogram {
        &self.frames[t - 1][m - 1]
    }
}

fn check_masks(video: &Video, seg: &Segmentation) -> Result<(), SelectionError> {
    if seg.len() != video.len() {
        return Err(SelectionError::MaskCountMismatch {
            maps: seg.len(),
            frames: video.len(),
        });
    }
    for map in &seg.maps {
        let l = &map.labels;
        if l.width != video.meta.width || l.height != video.meta.height {
            return Err(SelectionError::MaskDimensionMismatch {
                index: map.index,
                got_w: l.width,
                got_h: l.height,
                want_w: video.meta.width,
                want_h: video.meta.height,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Search window around `t_prev`, clipped to `[1, T]`; `None` when empty.
pub fn search_window(t_prev: usize, direction: Direction, params: &SelectionParams, frame_count: usize) -> Option<(usize, usize)> {
    let (lo, hi) = match direction {
        Direction::Forward => {
            let lo = t_prev + params.w_min;
            let hi = (t_prev + params.w_max).min(frame_count);
            (lo, hi)
        }
        Direction::Backward => {
            let hi = t_prev.checked_sub(params.w_min)?;
            let lo = t_prev.saturating_sub(params.w_max).max(1);
            (lo, hi)
        }
    };
    (lo >= 1 && lo <= hi && hi <= frame_count).then_some((lo, hi))
}

/// Frames in the window whose distance to `t_prev` reaches `tau`, one entry
/// per qualifying (object, frame) pair, sorted ascending.
pub fn gather_candidates(table: &HistogramTable, t_prev: usize, direction: Direction, params: &SelectionParams) -> Vec<usize> {
    let Some((lo, hi)) = search_window(t_prev, direction, params, table.frame_count()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for t in lo..=hi {
        for m in 1..=table.object_count() {
            if positive_histogram_distance(table.get(t_prev, m), table.get(t, m)) >= params.tau {
                out.push(t);
                if params.dedup_candidates {
                    break;
                }
            }
        }
    }
    out
}

/// Unnormalized Gaussian KDE evaluated at every integer in the window.
fn kde_profile(sorted: &[usize], lo: usize, hi: usize, bandwidth: f64) -> Vec<f64> {
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * bandwidth * sorted.len() as f64);
    (lo..=hi)
        .map(|t| {
            let sum: f64 = sorted
                .iter()
                .map(|&c| {
                    let z = (t as i64 - c as i64) as f64 / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum();
            sum * norm
        })
        .collect()
}

/// Integer argmax of the Gaussian KDE over `window` (inclusive). Values within
/// [`KDE_TIE_TOLERANCE`] of the maximum are ties; the smallest index wins.
pub fn kde_peak(candidates: &[usize], window: (usize, usize), bandwidth: f64) -> Result<usize, SelectionError> {
    if candidates.is_empty() {
        return Err(SelectionError::EmptyCandidates);
    }
    let (lo, hi) = window;
    if lo > hi {
        return Err(SelectionError::InvalidWindow(lo, hi));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    let profile = kde_profile(&sorted, lo, hi, bandwidth);
    let max = profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = max - KDE_TIE_TOLERANCE * max.abs();
    let offset = profile.iter().position(|&v| v >= floor).expect("non-empty window");
    Ok(lo + offset)
}

/// Strictly increasing 1-based keyframe indices, first = 1 and last = T.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyframePlan {
    pub keyframes: Vec<usize>,
}

impl KeyframePlan {
    pub fn new(keyframes: Vec<usize>, frame_count: usize) -> Result<Self, SelectionError> {
        let plan = KeyframePlan { keyframes };
        plan.validate(frame_count)?;
        Ok(plan)
    }

    pub fn validate(&self, frame_count: usize) -> Result<(), SelectionError> {
        let k = &self.keyframes;
        if k.len() < 2 && !(frame_count == 1 && k == &[1]) {
            return Err(SelectionError::InvalidPlan(format!("{} keyframes", k.len())));
        }
        if k.first() != Some(&1) || k.last() != Some(&frame_count) {
            return Err(SelectionError::InvalidPlan(format!(
                "plan must start at 1 and end at {frame_count}"
            )));
        }
        if k.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SelectionError::InvalidPlan("indices not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.keyframes.last().copied().unwrap_or(0)
    }

    /// Clip spans `(first keyframe, last keyframe)`; neighbours share a keyframe.
    pub fn clips(&self) -> Vec<(usize, usize)> {
        self.keyframes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn is_keyframe(&self, t: usize) -> bool {
        self.keyframes.binary_search(&t).is_ok()
    }

    /// Interior frames of all clips in temporal order.
    pub fn non_keyframes(&self) -> Vec<usize> {
        self.clips().into_iter().flat_map(|(a, b)| a + 1..b).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SelectionError> {
        let plan: KeyframePlan =
            serde_json::from_str(s).map_err(|e| SelectionError::InvalidPlan(e.to_string()))?;
        plan.validate(plan.frame_count())?;
        Ok(plan)
    }
}

/// Runs the bidirectional search on a precomputed histogram table.
pub fn select_from_table(table: &HistogramTable, params: &SelectionParams) -> Result<KeyframePlan, SelectionError> {
    params.validate()?;
    let t_len = table.frame_count();
    if t_len < 2 {
        return Err(SelectionError::TooFewFrames(t_len));
    }
    let half = t_len.div_ceil(2);

    let forward = run_pass(table, params, Direction::Forward, half);
    let backward = run_pass(table, params, Direction::Backward, half + 1);

    let mut keyframes = forward.clone();
    keyframes.extend(backward.iter().rev());
    merge_center(&mut keyframes, forward.len(), params);
    KeyframePlan::new(keyframes, t_len)
}

/// One pass; forward keyframes stay `<= limit`, backward ones `>= limit`.
/// Returned in search order (ascending for forward, descending for backward).
fn run_pass(table: &HistogramTable, params: &SelectionParams, direction: Direction, limit: usize) -> Vec<usize> {
    let t_len = table.frame_count();
    let mut prev = match direction {
        Direction::Forward => 1,
        Direction::Backward => t_len,
    };
    let mut picked = vec![prev];
    loop {
        // fewer than w_min frames left before the boundary
        let room = match direction {
            Direction::Forward => prev + params.w_min <= limit,
            Direction::Backward => prev >= limit + params.w_min,
        };
        if !room {
            break;
        }
        let Some(window) = search_window(prev, direction, params, t_len) else {
            break;
        };
        let candidates = gather_candidates(table, prev, direction, params);
        let next = if candidates.is_empty() {
            match direction {
                Direction::Forward => (prev + params.w_max).min(t_len),
                Direction::Backward => prev.saturating_sub(params.w_max).max(1),
            }
        } else {
            kde_peak(&candidates, window, params.kde_bandwidth).expect("non-empty candidates")
        };
        let inside = match direction {
            Direction::Forward => next <= limit,
            Direction::Backward => next >= limit,
        };
        if !inside {
            break;
        }
        picked.push(next);
        prev = next;
    }
    picked
}

/// Reconciles the gap between the last forward keyframe `keyframes[split-1]`
/// and the last backward keyframe `keyframes[split]`.
fn merge_center(keyframes: &mut Vec<usize>, split: usize, params: &SelectionParams) {
    let t_len = *keyframes.last().expect("non-empty");
    let (f, b) = (keyframes[split - 1], keyframes[split]);
    let gap = b - f;
    if gap < params.w_min {
        let slack = params.w_max as f64 + params.kde_bandwidth;
        let mut options: Vec<(usize, usize)> = Vec::new(); // (position to drop, resulting gap)
        if f != 1 {
            options.push((split - 1, b - keyframes[split - 2]));
        }
        if b != t_len {
            options.push((split, keyframes[split + 1] - f));
        }
        let best = options
            .into_iter()
            .filter(|&(_, g)| g as f64 <= slack)
            .min_by_key(|&(_, g)| g.abs_diff(params.w_max));
        if let Some((pos, _)) = best {
            keyframes.remove(pos);
        }
    } else if gap > params.w_max {
        let fill: Vec<usize> = (1..)
            .map(|k| f + k * params.w_max)
            .take_while(|&t| t < b)
            .collect();
        keyframes.splice(split..split, fill);
    }
}

/// Computes histograms and runs the bidirectional search.
pub fn select_keyframes(video: &Video, seg: &Segmentation, params: &SelectionParams) -> Result<KeyframePlan, SelectionError> {
    params.validate()?;
    if video.len() < 2 {
        return Err(SelectionError::TooFewFrames(video.len()));
    }
    let table = HistogramTable::compute(video, seg, params.histogram_space)?;
    select_from_table(&table, params)
}
