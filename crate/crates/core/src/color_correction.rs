//! Per-frame, per-RGB-channel mean/std alignment of reconstructed frames to
//! statistics measured on the original:
//!
//! `F_c = (F_r - mu_r) * sigma_o / sigma_r + mu_o`
//!
//! The original's statistics are carried in fixed point (Q16.16); the
//! reconstruction's are recomputed at the decoder.

use rayon::prelude::*;
use thiserror::Error;

use crate::frame_io::{Plane, RgbFrame};

/// Below this the reconstruction is treated as flat.
pub const SIGMA_EPSILON: f64 = 1.0 / 65536.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ColorError {
    #[error("no colour parameters for frame {t} (have {count})")]
    MissingParams { t: usize, count: usize },
}

/// Signed Q16.16 fixed-point value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Q16(pub i32);

impl Q16 {
    pub const ONE: i32 = 1 << 16;

    /// Rounds half away from zero; saturates outside the representable range.
    pub fn from_f64(v: f64) -> Self {
        let scaled = (v * Self::ONE as f64).round();
        Q16(scaled.clamp(i32::MIN as f64, i32::MAX as f64) as i32)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::ONE as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelStats {
    pub mean: Q16,
    pub std: Q16,
}

/// Original-frame statistics, one `[R, G, B]` triple per frame.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColorParams {
    pub frames: Vec<[ChannelStats; 3]>,
}

impl ColorParams {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// 1-based access.
    pub fn get(&self, t: usize) -> Result<&[ChannelStats; 3], ColorError> {
        t.checked_sub(1)
            .and_then(|i| self.frames.get(i))
            .ok_or(ColorError::MissingParams { t, count: self.frames.len() })
    }
}

/// Population mean and standard deviation of a plane.
pub fn plane_stats(p: &Plane) -> (f64, f64) {
    let n = p.data.len() as f64;
    let sum: u64 = p.data.iter().map(|&s| s as u64).sum();
    let mean = sum as f64 / n;
    let var = p
        .data
        .iter()
        .map(|&s| {
            let d = s as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

pub fn frame_stats(rgb: &RgbFrame) -> [ChannelStats; 3] {
    rgb.channels().map(|p| {
        let (m, s) = plane_stats(p);
        ChannelStats {
            mean: Q16::from_f64(m),
            std: Q16::from_f64(s),
        }
    })
}

pub fn compute_color_params(original: &[RgbFrame]) -> ColorParams {
    ColorParams {
        frames: original.par_iter().map(frame_stats).collect(),
    }
}

fn correct_plane(p: &Plane, target: ChannelStats) -> Plane {
    let (mu_r, sigma_r) = plane_stats(p);
    let mu_o = target.mean.to_f64();
    let sigma_o = target.std.to_f64();
    let map = |s: f64| -> u8 {
        let v = if sigma_r < SIGMA_EPSILON {
            mu_o
        } else {
            (s - mu_r) * sigma_o / sigma_r + mu_o
        };
        v.clamp(0.0, 255.0).round() as u8
    };
    // the map depends only on the sample value
    let lut: Vec<u8> = (0..=255).map(|s| map(s as f64)).collect();
    Plane::new(p.width, p.height, p.data.iter().map(|&s| lut[s as usize]).collect())
}

/// Applies the alignment to one reconstructed frame with the stored
/// statistics of the matching original frame.
pub fn color_correct(recon: &RgbFrame, target: &[ChannelStats; 3]) -> RgbFrame {
    let [r, g, b] = recon.channels();
    RgbFrame {
        index: recon.index,
        r: correct_plane(r, target[0]),
        g: correct_plane(g, target[1]),
        b: correct_plane(b, target[2]),
    }
}

/// Corrects frame `t` (1-based) using `params`.
pub fn correct_frame(recon: &RgbFrame, params: &ColorParams, t: usize) -> Result<RgbFrame, ColorError> {
    Ok(color_correct(recon, params.get(t)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rgb_from(w: usize, h: usize, f: impl Fn(usize, usize, usize) -> u8) -> RgbFrame {
        let plane = |c: usize| {
            let mut data = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    data.push(f(c, x, y));
                }
            }
            Plane::new(w, h, data)
        };
        RgbFrame {
            index: 1,
            r: plane(0),
            g: plane(1),
            b: plane(2),
        }
    }

    #[test]
    fn constant_frame_stats() {
        let p = compute_color_params(&[rgb_from(4, 4, |_, _, _| 128)]);
        for c in p.frames[0] {
            assert_eq!(c.mean.to_f64(), 128.0);
            assert_eq!(c.std.to_f64(), 0.0);
        }
    }

    #[test]
    fn two_level_frame_stats() {
        let p = compute_color_params(&[rgb_from(4, 4, |_, x, _| if x < 2 { 0 } else { 255 })]);
        for c in p.frames[0] {
            assert_eq!(c.mean.to_f64(), 127.5);
            assert_eq!(c.std.to_f64(), 127.5);
        }
    }

    #[test]
    fn q16_rounding() {
        assert_eq!(Q16::from_f64(1.0), Q16(65536));
        assert_eq!(Q16::from_f64(0.5 / 65536.0), Q16(1));
        assert_eq!(Q16::from_f64(-0.5 / 65536.0), Q16(-1));
        assert_eq!(Q16::from_f64(1e12), Q16(i32::MAX));
    }

    #[test]
    fn identity_on_equal_pair() {
        let orig = rgb_from(8, 8, |c, x, y| (c * 40 + x * 17 + y * 9) as u8);
        let p = compute_color_params(std::slice::from_ref(&orig));
        assert_eq!(color_correct(&orig, &p.frames[0]), orig);
    }

    #[test]
    fn linear_distortion_is_undone() {
        // original mean 100 std 20, recon mean 50 std 10
        let orig = rgb_from(4, 2, |_, x, _| if x % 2 == 0 { 80 } else { 120 });
        let recon = rgb_from(4, 2, |_, x, _| if x % 2 == 0 { 40 } else { 60 });
        let p = compute_color_params(&[orig.clone()]);
        let out = color_correct(&recon, &p.frames[0]);
        for ch in out.channels() {
            let (m, s) = plane_stats(ch);
            assert!((m - 100.0).abs() <= 0.5 && (s - 20.0).abs() <= 0.5, "{m} {s}");
        }
        assert_eq!(out, orig);
    }

    #[test]
    fn flat_reconstruction_guard() {
        let flat = rgb_from(4, 4, |_, _, _| 10);
        let target = [ChannelStats {
            mean: Q16::from_f64(77.0),
            std: Q16::from_f64(30.0),
        }; 3];
        let out = color_correct(&flat, &target);
        assert!(out.channels().iter().all(|p| p.data.iter().all(|&s| s == 77)));
    }

    #[test]
    fn missing_params() {
        let p = ColorParams::default();
        let f = rgb_from(2, 2, |_, _, _| 0);
        assert_eq!(correct_frame(&f, &p, 1), Err(ColorError::MissingParams { t: 1, count: 0 }));
    }

    proptest! {
        #[test]
        fn quantization_error_bound(v in 0.0f64..256.0) {
            prop_assert!((Q16::from_f64(v).to_f64() - v).abs() <= 1.0 / 131072.0);
        }

        #[test]
        fn correction_is_monotone(data in prop::collection::vec(any::<u8>(), 16), m in 20.0f64..230.0, s in 0.0f64..60.0) {
            let f = rgb_from(4, 4, |_, x, y| data[y * 4 + x]);
            let target = [ChannelStats { mean: Q16::from_f64(m), std: Q16::from_f64(s) }; 3];
            let out = color_correct(&f, &target);
            for i in 0..16 {
                for j in 0..16 {
                    if data[i] < data[j] {
                        prop_assert!(out.r.data[i] <= out.r.data[j]);
                    }
                }
            }
        }

        #[test]
        fn correction_is_idempotent_up_to_one(data in prop::collection::vec(any::<u8>(), 64), m in 80.0f64..176.0, s in 0.0f64..25.0) {
            let f = rgb_from(8, 8, |c, x, y| data[y * 8 + x].wrapping_add(c as u8 * 31));
            let target = [ChannelStats { mean: Q16::from_f64(m), std: Q16::from_f64(s) }; 3];
            let once = color_correct(&f, &target);
            let twice = color_correct(&once, &target);
            for (a, b) in once.channels().iter().zip(twice.channels()) {
                for (x, y) in a.data.iter().zip(&b.data) {
                    prop_assert!(x.abs_diff(*y) <= 1);
                }
            }
        }
    }
}
