//! Deterministic synthetic test videos with matching label maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frame_io::{Frame, Plane, Video, VideoMeta};
use crate::segmentation::{LabelMap, Segmentation};

/// Dark grey backdrop, RGB (16, 16, 16).
pub const BACKGROUND_YUV: [u8; 3] = [30, 128, 128];
/// Object colour before a flip, RGB (230, 126, 77).
pub const COLOR_A_YUV: [u8; 3] = [140, 96, 176];
/// Object colour after a flip, same luma as A.
pub const COLOR_B_YUV: [u8; 3] = [140, 160, 96];

/// Axis-aligned rectangle; positions and sizes are kept even so chroma
/// samples never straddle its border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    /// Centred rectangle covering about two thirds of each dimension.
    pub fn centered(width: usize, height: usize) -> Self {
        let even = |v: usize| v & !1;
        let (w, h) = (even(width * 2 / 3), even(height * 2 / 3));
        Rect {
            x: even((width - w) / 2),
            y: even((height - h) / 2),
            w,
            h,
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    /// Grows by `m` on every side, clipped to the frame.
    pub fn dilate(&self, m: usize, width: usize, height: usize) -> Rect {
        let x = self.x.saturating_sub(m);
        let y = self.y.saturating_sub(m);
        Rect {
            x,
            y,
            w: (self.x + self.w + m).min(width) - x,
            h: (self.y + self.h + m).min(height) - y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthKind {
    ConstantColor { yuv: [u8; 3] },
    /// The object switches from colour A to colour B at frame `t_star`.
    ColorFlip { t_star: usize, region: Option<Rect> },
    /// A block moving `(vx, vy)` pixels per frame, wrapping at the borders.
    MovingBlock { vx: i32, vy: i32 },
    /// Independent uniform samples in every plane.
    Noise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SynthKind,
    pub meta: VideoMeta,
    pub seed: u64,
    /// Optional uniform luma perturbation in `[-amp, amp]`.
    pub luma_noise: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    pub video: Video,
    pub segmentation: Segmentation,
}

fn fill_rect(f: &mut Frame, r: &Rect, yuv: [u8; 3]) {
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            f.y.set(x, y, yuv[0]);
        }
    }
    for y in r.y / 2..(r.y + r.h) / 2 {
        for x in r.x / 2..(r.x + r.w) / 2 {
            f.u.set(x, y, yuv[1]);
            f.v.set(x, y, yuv[2]);
        }
    }
}

fn label_rect(w: usize, h: usize, r: &Rect) -> Plane {
    let mut p = Plane::filled(w, h, 2);
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            p.set(x, y, 1);
        }
    }
    p
}

fn maps(planes: impl Iterator<Item = Plane>, object_count: usize) -> Segmentation {
    Segmentation {
        maps: planes
            .enumerate()
            .map(|(i, labels)| LabelMap { index: i + 1, labels })
            .collect(),
        object_count,
    }
}

/// Border added around a flip object's mask so that about 5% of its labelled
/// pixels are background; the object's histogram then never fully changes.
pub fn flip_mask_margin(r: &Rect, width: usize, height: usize) -> usize {
    let area = (r.w * r.h) as f64;
    (1..=r.w.max(r.h))
        .find(|&m| {
            let d = r.dilate(m, width, height);
            1.0 - area / (d.w * d.h) as f64 >= 0.04
        })
        .unwrap_or(1)
}

fn wrap(v: i64, n: usize) -> usize {
    v.rem_euclid(n as i64) as usize
}

pub fn synthesize(spec: &SyntheticSpec) -> SynthOutput {
    let m = &spec.meta;
    let (w, h, t_len) = (m.width, m.height, m.frame_count);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bg = BACKGROUND_YUV;

    let (mut frames, segmentation): (Vec<Frame>, Segmentation) = match spec.kind {
        SynthKind::ConstantColor { yuv } => (
            (1..=t_len).map(|t| Frame::filled(t, w, h, yuv[0], yuv[1], yuv[2])).collect(),
            maps((0..t_len).map(|_| Plane::filled(w, h, 1)), 1),
        ),
        SynthKind::ColorFlip { t_star, region } => {
            let r = region.unwrap_or_else(|| Rect::centered(w, h));
            let frames = (1..=t_len)
                .map(|t| {
                    let mut f = Frame::filled(t, w, h, bg[0], bg[1], bg[2]);
                    fill_rect(&mut f, &r, if t < t_star { COLOR_A_YUV } else { COLOR_B_YUV });
                    f
                })
                .collect();
            let mask = label_rect(w, h, &r.dilate(flip_mask_margin(&r, w, h), w, h));
            (frames, maps((0..t_len).map(|_| mask.clone()), 2))
        }
        SynthKind::MovingBlock { vx, vy } => {
            let side = ((w.min(h) / 4) & !1).max(2);
            let x0 = rng.gen_range(0..w / 2) * 2;
            let y0 = rng.gen_range(0..h / 2) * 2;
            let mut frames = Vec::with_capacity(t_len);
            let mut labels = Vec::with_capacity(t_len);
            for t in 1..=t_len {
                let mut f = Frame::filled(t, w, h, bg[0], bg[1], bg[2]);
                let mut l = Plane::filled(w, h, 2);
                let ox = x0 as i64 + vx as i64 * (t as i64 - 1);
                let oy = y0 as i64 + vy as i64 * (t as i64 - 1);
                for dy in 0..side as i64 {
                    for dx in 0..side as i64 {
                        let (x, y) = (wrap(ox + dx, w), wrap(oy + dy, h));
                        f.y.set(x, y, COLOR_A_YUV[0]);
                        l.set(x, y, 1);
                    }
                }
                // chroma follows the block at 4:2:0 resolution
                for cy in 0..h / 2 {
                    for cx in 0..w / 2 {
                        if l.get(2 * cx, 2 * cy) == 1 {
                            f.u.set(cx, cy, COLOR_A_YUV[1]);
                            f.v.set(cx, cy, COLOR_A_YUV[2]);
                        }
                    }
                }
                frames.push(f);
                labels.push(l);
            }
            (frames, maps(labels.into_iter(), 2))
        }
        SynthKind::Noise => {
            let frames = (1..=t_len)
                .map(|t| {
                    let mut f = Frame::filled(t, w, h, 0, 0, 0);
                    for s in &mut f.y.data {
                        *s = rng.gen_range(16..=235);
                    }
                    for s in f.u.data.iter_mut().chain(f.v.data.iter_mut()) {
                        *s = rng.gen_range(16..=240);
                    }
                    f
                })
                .collect();
            (frames, maps((0..t_len).map(|_| Plane::filled(w, h, 1)), 1))
        }
    };

    if spec.luma_noise > 0 {
        let amp = spec.luma_noise as i32;
        for f in &mut frames {
            for s in &mut f.y.data {
                *s = (*s as i32 + rng.gen_range(-amp..=amp)).clamp(0, 255) as u8;
            }
        }
    }

    let video = Video::from_frames(frames, m.fps).expect("synthetic frames share the spec geometry");
    SynthOutput { video, segmentation }
}
