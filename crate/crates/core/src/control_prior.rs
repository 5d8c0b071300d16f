//! Per-frame control priors for non-keyframes: the luma plane, or a binary
//! edge map for ablations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_io::{Frame, Plane};

pub const MAX_EDGE_THRESHOLD: u32 = 1020;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PriorError {
    #[error("edge threshold {0} outside [1, {MAX_EDGE_THRESHOLD}]")]
    ThresholdOutOfRange(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    #[default]
    Luma,
    Edge,
}

impl PriorKind {
    pub fn id(self) -> u8 {
        match self {
            PriorKind::Luma => 0,
            PriorKind::Edge => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(PriorKind::Luma),
            1 => Some(PriorKind::Edge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorFrame {
    pub index: usize,
    pub plane: Plane,
    pub kind: PriorKind,
}

impl PriorFrame {
    /// Monochrome carrier frame for the prior codec: chroma fixed at 128.
    pub fn to_carrier(&self) -> Frame {
        let (w, h) = (self.plane.width, self.plane.height);
        Frame {
            index: self.index,
            y: self.plane.clone(),
            u: Plane::filled(w / 2, h / 2, 128),
            v: Plane::filled(w / 2, h / 2, 128),
        }
    }

    /// Inverse of [`to_carrier`](Self::to_carrier). Edge planes that went
    /// through a lossy codec are re-binarized at mid-level.
    pub fn from_carrier(frame: &Frame, index: usize, kind: PriorKind) -> Self {
        let mut plane = frame.y.clone();
        if kind == PriorKind::Edge {
            for s in &mut plane.data {
                *s = if *s >= 128 { 255 } else { 0 };
            }
        }
        PriorFrame { index, plane, kind }
    }
}

pub fn extract_luma_prior(frame: &Frame) -> PriorFrame {
    PriorFrame {
        index: frame.index,
        plane: frame.y.clone(),
        kind: PriorKind::Luma,
    }
}

/// Binary edge map from 3x3 Sobel-style gradients on luma:
/// `|gx| + |gy| >= threshold` gives 255. Borders are replicate-padded.
pub fn extract_edge_prior(frame: &Frame, threshold: u32) -> Result<PriorFrame, PriorError> {
    if !(1..=MAX_EDGE_THRESHOLD).contains(&threshold) {
        return Err(PriorError::ThresholdOutOfRange(threshold));
    }
    let y = &frame.y;
    let (w, h) = (y.width as isize, y.height as isize);
    let at = |x: isize, yy: isize| y.get(x.clamp(0, w - 1) as usize, yy.clamp(0, h - 1) as usize) as i32;
    let mut out = Plane::filled(y.width, y.height, 0);
    for r in 0..h {
        for c in 0..w {
            let gx = (at(c + 1, r - 1) + 2 * at(c + 1, r) + at(c + 1, r + 1))
                - (at(c - 1, r - 1) + 2 * at(c - 1, r) + at(c - 1, r + 1));
            let gy = (at(c - 1, r + 1) + 2 * at(c, r + 1) + at(c + 1, r + 1))
                - (at(c - 1, r - 1) + 2 * at(c, r - 1) + at(c + 1, r - 1));
            let mag = gx.unsigned_abs() + gy.unsigned_abs();
            if mag >= threshold {
                out.set(c as usize, r as usize, 255);
            }
        }
    }
    Ok(PriorFrame {
        index: frame.index,
        plane: out,
        kind: PriorKind::Edge,
    })
}

pub fn extract_prior(frame: &Frame, kind: PriorKind, edge_threshold: u32) -> Result<PriorFrame, PriorError> {
    match kind {
        PriorKind::Luma => Ok(extract_luma_prior(frame)),
        PriorKind::Edge => extract_edge_prior(frame, edge_threshold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame_from_luma(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> Frame {
        let mut fr = Frame::filled(1, w, h, 0, 128, 128);
        for y in 0..h {
            for x in 0..w {
                fr.y.set(x, y, f(x, y));
            }
        }
        fr
    }

    #[test]
    fn luma_prior_is_exact_copy() {
        let f = Frame::filled(3, 4, 4, 128, 90, 200);
        let p = extract_luma_prior(&f);
        assert_eq!(p.kind, PriorKind::Luma);
        assert_eq!(p.index, 3);
        assert!(p.plane.data.iter().all(|&s| s == 128));

        let g = frame_from_luma(6, 4, |x, y| (x * 37 + y * 91) as u8);
        let p = extract_luma_prior(&g);
        assert_eq!(p.plane, g.y);
        let mut restored = Frame::filled(1, 6, 4, 0, 128, 128);
        restored.y = p.plane.clone();
        assert_eq!(restored.y, g.y);
    }

    #[test]
    fn constant_frame_has_no_edges() {
        let p = extract_edge_prior(&Frame::filled(1, 8, 8, 77, 128, 128), 1).unwrap();
        assert!(p.plane.data.iter().all(|&s| s == 0));
    }

    #[test]
    fn vertical_step_marks_adjacent_columns() {
        // left half 0, right half 255; the operator straddles columns 3 and 4
        let f = frame_from_luma(8, 4, |x, _| if x < 4 { 0 } else { 255 });
        let p = extract_edge_prior(&f, 100).unwrap();
        for y in 0..4 {
            for x in 0..8 {
                let expect = if x == 3 || x == 4 { 255 } else { 0 };
                assert_eq!(p.plane.get(x, y), expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn mild_ramp_below_max_threshold() {
        // slope 1 gives |gx| = 8 at most, far below 1020
        let f = frame_from_luma(16, 8, |x, _| x as u8);
        let p = extract_edge_prior(&f, MAX_EDGE_THRESHOLD).unwrap();
        assert!(p.plane.data.iter().all(|&s| s == 0));
    }

    #[test]
    fn threshold_bounds() {
        let f = Frame::filled(1, 2, 2, 0, 128, 128);
        assert_eq!(extract_edge_prior(&f, 0), Err(PriorError::ThresholdOutOfRange(0)));
        assert_eq!(extract_edge_prior(&f, 1021), Err(PriorError::ThresholdOutOfRange(1021)));
    }

    #[test]
    fn carrier_round_trip() {
        let f = frame_from_luma(4, 4, |x, y| (x * 60 + y) as u8);
        let p = extract_luma_prior(&f);
        let c = p.to_carrier();
        assert!(c.u.data.iter().chain(&c.v.data).all(|&s| s == 128));
        assert_eq!(PriorFrame::from_carrier(&c, 1, PriorKind::Luma), p);

        let mut noisy = c.clone();
        noisy.y.data = vec![0, 127, 128, 255, 3, 250, 100, 200, 0, 0, 0, 0, 255, 255, 255, 255];
        let e = PriorFrame::from_carrier(&noisy, 1, PriorKind::Edge);
        assert!(e.plane.data.iter().all(|&s| s == 0 || s == 255));
    }

    proptest! {
        #[test]
        fn edges_invariant_under_luma_shift(
            data in prop::collection::vec(0u8..=200, 36),
            shift in 0u8..=55,
            threshold in 1u32..=1020,
        ) {
            let f = frame_from_luma(6, 6, |x, y| data[y * 6 + x]);
            let g = frame_from_luma(6, 6, |x, y| data[y * 6 + x] + shift);
            let a = extract_edge_prior(&f, threshold).unwrap();
            let b = extract_edge_prior(&g, threshold).unwrap();
            prop_assert_eq!(a.plane.data.iter().all(|&s| s == 0 || s == 255), true);
            prop_assert_eq!(a.plane, b.plane);
        }
    }
}
