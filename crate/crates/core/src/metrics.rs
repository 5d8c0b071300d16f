//! Fidelity metrics, rate-distortion curves and Bjøntegaard deltas.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_io::{self, Frame, Plane, RgbFrame, Video};

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
pub const MS_SSIM_MIN_DIM: usize = 176;
const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
const PEAK_SQ: f64 = 255.0 * 255.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("frame count mismatch: {0} vs {1}")]
    FrameCountMismatch(usize, usize),
    #[error("{0}x{1} is too small for MS-SSIM (minimum {MS_SSIM_MIN_DIM}x{MS_SSIM_MIN_DIM})")]
    TooSmall(usize, usize),
    #[error("curve {label:?}: {reason}")]
    InvalidCurve { label: String, reason: String },
    #[error("curve {0:?} repeats a metric value and cannot be inverted")]
    DegenerateCurve(String),
    #[error("no curves")]
    NoCurves,
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---- PSNR ------------------------------------------------------------------

fn check_dims(a: &RgbFrame, b: &RgbFrame) -> Result<(), MetricsError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(MetricsError::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

fn sq_err(a: &Plane, b: &Plane) -> u64 {
    a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum()
}

/// Mean squared error pooled over all samples of the three channels.
pub fn mse_rgb(a: &RgbFrame, b: &RgbFrame) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let total: u64 = a.channels().iter().zip(b.channels()).map(|(p, q)| sq_err(p, q)).sum();
    Ok(total as f64 / (3 * a.r.data.len()) as f64)
}

/// `10 log10(255^2 / mse)`; infinite when `mse` is zero.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK_SQ / mse).log10()
    }
}

pub fn psnr_rgb(a: &RgbFrame, b: &RgbFrame) -> Result<f64, MetricsError> {
    mse_rgb(a, b).map(psnr_from_mse)
}

/// Sequence PSNR from the MSE averaged over all frames.
pub fn sequence_psnr(a: &[RgbFrame], b: &[RgbFrame]) -> Result<f64, MetricsError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(MetricsError::FrameCountMismatch(a.len(), b.len()));
    }
    let mses = a
        .par_iter()
        .zip(b)
        .map(|(x, y)| mse_rgb(x, y))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(psnr_from_mse(mses.iter().sum::<f64>() / mses.len() as f64))
}

/// Renders a dB value, using `inf` for identical inputs.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_owned()
    } else {
        format!("{v:.6}")
    }
}

/// Mean squared error over the U and V planes of two videos.
pub fn chroma_mse(a: &[Frame], b: &[Frame]) -> Result<f64, MetricsError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(MetricsError::FrameCountMismatch(a.len(), b.len()));
    }
    let mut err = 0u64;
    let mut n = 0usize;
    for (x, y) in a.iter().zip(b) {
        if (x.width(), x.height()) != (y.width(), y.height()) {
            return Err(MetricsError::DimensionMismatch(x.width(), x.height(), y.width(), y.height()));
        }
        err += sq_err(&x.u, &y.u) + sq_err(&x.v, &y.v);
        n += x.u.data.len() + x.v.data.len();
    }
    Ok(err as f64 / n as f64)
}

// ---- MS-SSIM ---------------------------------------------------------------

/// Row-major f64 image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// `0.299 R + 0.587 G + 0.114 B`, unrounded.
pub fn luma_image(f: &RgbFrame) -> Image {
    let data = f
        .r
        .data
        .iter()
        .zip(&f.g.data)
        .zip(&f.b.data)
        .map(|((&r, &g), &b)| 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .collect();
    Image {
        width: f.width(),
        height: f.height(),
        data,
    }
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; WINDOW] {
    let c = (WINDOW / 2) as f64;
    let mut k = [0.0; WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable valid-mode filtering.
fn filter_valid(img: &Image, taps: &[f64; WINDOW]) -> Image {
    let (w, h) = (img.width, img.height);
    let (ow, oh) = (w - WINDOW + 1, h - WINDOW + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &img.data[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&src[x..x + WINDOW]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, k)| k * rows[(y + i) * ow + x]).sum();
        }
    }
    Image {
        width: ow,
        height: oh,
        data: out,
    }
}

fn product(a: &Image, b: &Image) -> Image {
    Image {
        width: a.width,
        height: a.height,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    }
}

/// Mean SSIM and mean contrast-structure term at one scale.
fn ssim_terms(a: &Image, b: &Image, taps: &[f64; WINDOW]) -> (f64, f64) {
    let mu_a = filter_valid(a, taps);
    let mu_b = filter_valid(b, taps);
    let aa = filter_valid(&product(a, a), taps);
    let bb = filter_valid(&product(b, b), taps);
    let ab = filter_valid(&product(a, b), taps);
    let n = mu_a.data.len() as f64;
    let (mut ssim, mut cs) = (0.0, 0.0);
    for i in 0..mu_a.data.len() {
        let (ma, mb) = (mu_a.data[i], mu_b.data[i]);
        let va = aa.data[i] - ma * ma;
        let vb = bb.data[i] - mb * mb;
        let cov = ab.data[i] - ma * mb;
        let c = (2.0 * cov + C2) / (va + vb + C2);
        let l = (2.0 * ma * mb + C1) / (ma * ma + mb * mb + C1);
        cs += c;
        ssim += l * c;
    }
    (ssim / n, cs / n)
}

/// 2x2 box average; odd trailing rows/columns are dropped.
pub fn downsample(img: &Image) -> Image {
    let (w, h) = (img.width / 2, img.height / 2);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let s = img.at(2 * x, 2 * y) + img.at(2 * x + 1, 2 * y) + img.at(2 * x, 2 * y + 1) + img.at(2 * x + 1, 2 * y + 1);
            data.push(s / 4.0);
        }
    }
    Image { width: w, height: h, data }
}

/// Combines per-scale terms; negative terms count as zero.
pub fn combine_scales(cs: &[f64; 4], ssim_last: f64) -> f64 {
    let mut v = ssim_last.max(0.0).powf(MS_SSIM_WEIGHTS[4]);
    for (c, w) in cs.iter().zip(&MS_SSIM_WEIGHTS) {
        v *= c.max(0.0).powf(*w);
    }
    v
}

pub fn ms_ssim_images(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricsError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    if a.width < MS_SSIM_MIN_DIM || a.height < MS_SSIM_MIN_DIM {
        return Err(MetricsError::TooSmall(a.width, a.height));
    }
    let taps = gaussian_taps();
    let (mut x, mut y) = (a.clone(), b.clone());
    let mut cs = [0.0; 4];
    for c in &mut cs {
        *c = ssim_terms(&x, &y, &taps).1;
        x = downsample(&x);
        y = downsample(&y);
    }
    let (ssim, _) = ssim_terms(&x, &y, &taps);
    Ok(combine_scales(&cs, ssim))
}

pub fn ms_ssim(a: &RgbFrame, b: &RgbFrame) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    ms_ssim_images(&luma_image(a), &luma_image(b))
}

/// Mean per-frame MS-SSIM.
pub fn sequence_ms_ssim(a: &[RgbFrame], b: &[RgbFrame]) -> Result<f64, MetricsError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(MetricsError::FrameCountMismatch(a.len(), b.len()));
    }
    let scores = a
        .par_iter()
        .zip(b)
        .map(|(x, y)| ms_ssim(x, y))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoMetrics {
    pub psnr: f64,
    /// `None` when the frames are below the MS-SSIM size floor.
    pub ms_ssim: Option<f64>,
}

pub fn video_metrics(reference: &Video, distorted: &Video) -> Result<VideoMetrics, MetricsError> {
    let a: Vec<RgbFrame> = reference.frames.par_iter().map(frame_io::yuv_to_rgb).collect();
    let b: Vec<RgbFrame> = distorted.frames.par_iter().map(frame_io::yuv_to_rgb).collect();
    let psnr = sequence_psnr(&a, &b)?;
    let ms_ssim = match sequence_ms_ssim(&a, &b) {
        Ok(v) => Some(v),
        Err(MetricsError::TooSmall(..)) => None,
        Err(e) => return Err(e),
    };
    Ok(VideoMetrics { psnr, ms_ssim })
}

// ---- RD curves and Bjøntegaard deltas --------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    /// kbps
    pub rate: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    pub label: String,
    pub points: Vec<RdPoint>,
    pub higher_is_better: bool,
}

impl RdCurve {
    /// Sorts by rate and checks the curve invariants.
    pub fn new(label: impl Into<String>, mut points: Vec<RdPoint>) -> Result<Self, MetricsError> {
        let label = label.into();
        let bad = |reason: String| MetricsError::InvalidCurve {
            label: label.clone(),
            reason,
        };
        if points.len() < 2 {
            return Err(bad(format!("{} points, need at least 2", points.len())));
        }
        if let Some(p) = points.iter().find(|p| !(p.rate > 0.0 && p.rate.is_finite() && p.metric.is_finite())) {
            return Err(bad(format!("invalid point ({}, {})", p.rate, p.metric)));
        }
        points.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        if points.windows(2).any(|w| w[0].rate == w[1].rate) {
            return Err(bad("repeated rate".into()));
        }
        Ok(RdCurve {
            label,
            points,
            higher_is_better: true,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BdResult {
    Value {
        value: f64,
        /// Set when a curve had fewer than four points and a piecewise-linear
        /// fit replaced the cubic one.
        degraded: bool,
    },
    NotApplicable,
}

impl BdResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            BdResult::Value { value, .. } => Some(*value),
            BdResult::NotApplicable => None,
        }
    }
}

impl std::fmt::Display for BdResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BdResult::Value { value, degraded } => {
                write!(f, "{value:.4}")?;
                if *degraded {
                    f.write_str(" (degraded)")?;
                }
                Ok(())
            }
            BdResult::NotApplicable => f.write_str("N/A"),
        }
    }
}

/// Piecewise cubic Hermite interpolant with shape-preserving
/// (Fritsch–Carlson) slopes, or piecewise linear when `linear` is set.
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if sign(d) != sign(d0) {
        0.0
    } else if sign(d0) != sign(d1) && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

impl Pchip {
    /// `xs` must be strictly increasing with at least two entries.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, linear: bool) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let ds = if linear || n == 2 {
            // per-segment secant, encoded by setting both end slopes to it
            Vec::new()
        } else {
            let mut d = vec![0.0; n];
            for k in 1..n - 1 {
                let (a, b) = (delta[k - 1], delta[k]);
                if a * b > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / a + w2 / b);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
            d
        };
        Pchip { xs, ys, ds }
    }

    fn segment(&self, k: usize) -> (f64, f64, f64, f64) {
        let h = self.xs[k + 1] - self.xs[k];
        let delta = (self.ys[k + 1] - self.ys[k]) / h;
        if self.ds.is_empty() {
            (self.ys[k], delta, 0.0, 0.0)
        } else {
            let (d0, d1) = (self.ds[k], self.ds[k + 1]);
            let c2 = (3.0 * delta - 2.0 * d0 - d1) / h;
            let c3 = (d0 + d1 - 2.0 * delta) / (h * h);
            (self.ys[k], d0, c2, c3)
        }
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            i => (i - 1).min(n - 2),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.locate(x);
        let (a, b, c, d) = self.segment(k);
        let s = x - self.xs[k];
        a + s * (b + s * (c + s * d))
    }

    /// Exact integral over `[lo, hi]`, which must lie within the knot range.
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let anti = |k: usize, s: f64| {
            let (a, b, c, d) = self.segment(k);
            s * (a + s * (b / 2.0 + s * (c / 3.0 + s * d / 4.0)))
        };
        let (kl, kh) = (self.locate(lo), self.locate(hi));
        let mut total = 0.0;
        for k in kl..=kh {
            let from = if k == kl { lo } else { self.xs[k] } - self.xs[k];
            let to = if k == kh { hi } else { self.xs[k + 1] } - self.xs[k];
            total += anti(k, to) - anti(k, from);
        }
        total
    }
}

const MIN_CUBIC_POINTS: usize = 4;

fn fit(xs: Vec<f64>, ys: Vec<f64>) -> (Pchip, bool) {
    let degraded = xs.len() < MIN_CUBIC_POINTS;
    (Pchip::new(xs, ys, degraded), degraded)
}

/// `(x, y)` pairs sorted by `x`, rejecting repeated `x`.
fn sorted_axis(curve: &RdCurve, f: impl Fn(&RdPoint) -> (f64, f64)) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    let mut pts: Vec<(f64, f64)> = curve.points.iter().map(f).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(MetricsError::DegenerateCurve(curve.label.clone()));
    }
    Ok(pts.into_iter().unzip())
}

fn bd_average(anchor: (Vec<f64>, Vec<f64>), test: (Vec<f64>, Vec<f64>)) -> Option<(f64, bool)> {
    let lo = anchor.0[0].max(test.0[0]);
    let hi = anchor.0.last().unwrap().min(*test.0.last().unwrap());
    if !(hi > lo) {
        return None;
    }
    let (fa, da) = fit(anchor.0, anchor.1);
    let (ft, dt) = fit(test.0, test.1);
    let diff = (ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo);
    Some((diff, da || dt))
}

/// Average rate difference in percent at equal quality.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<BdResult, MetricsError> {
    let axis = |p: &RdPoint| (p.metric, p.rate.log10());
    let a = sorted_axis(anchor, axis)?;
    let t = sorted_axis(test, axis)?;
    Ok(match bd_average(a, t) {
        None => BdResult::NotApplicable,
        Some((d, degraded)) => BdResult::Value {
            value: (10f64.powf(d) - 1.0) * 100.0,
            degraded,
        },
    })
}

/// Average metric difference at equal rate.
pub fn bd_metric(anchor: &RdCurve, test: &RdCurve) -> Result<BdResult, MetricsError> {
    let axis = |p: &RdPoint| (p.rate.log10(), p.metric);
    let a = sorted_axis(anchor, axis)?;
    let t = sorted_axis(test, axis)?;
    Ok(match bd_average(a, t) {
        None => BdResult::NotApplicable,
        Some((value, degraded)) => BdResult::Value { value, degraded },
    })
}

// ---- CSV and SVG -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    label: String,
    rate_kbps: f64,
    metric: f64,
}

pub fn write_curves_csv(curves: &[RdCurve], path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path)?;
    for c in curves {
        for p in &c.points {
            w.serialize(CsvRow {
                label: c.label.clone(),
                rate_kbps: p.rate,
                metric: p.metric,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `label,rate_kbps,metric` rows, grouping by label in order of first
/// appearance.
pub fn read_curves_csv(path: impl AsRef<Path>) -> Result<Vec<RdCurve>, MetricsError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<RdPoint>> = HashMap::new();
    for row in r.deserialize() {
        let row: CsvRow = row?;
        if !groups.contains_key(&row.label) {
            order.push(row.label.clone());
        }
        groups.entry(row.label).or_default().push(RdPoint {
            rate: row.rate_kbps,
            metric: row.metric,
        });
    }
    order
        .into_iter()
        .map(|label| {
            let pts = groups.remove(&label).unwrap_or_default();
            RdCurve::new(label, pts)
        })
        .collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart of metric over rate with one polyline per curve.
pub fn render_svg(curves: &[RdCurve], metric_name: &str) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 420.0, 70.0, 170.0, 20.0, 50.0);
    let pts = curves.iter().flat_map(|c| &c.points);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in pts {
        x0 = x0.min(p.rate);
        x1 = x1.max(p.rate);
        y0 = y0.min(p.metric);
        y1 = y1.max(p.metric);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |v: f64| left + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| top + ph - (v - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<g stroke="black"><line x1="{left}" y1="{}" x2="{}" y2="{}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}"/></g>"#,
        top + ph,
        left + pw,
        top + ph,
        top + ph
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.1}</text>"#, sx(fx), top + ph + 16.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{fy:.3}</text>"#, left - 6.0, sy(fy) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">rate (kbps)</text>"#, left + pw / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        xml_escape(metric_name)
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = c.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.rate), sy(p.metric))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, xml_escape(&c.label));
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `curves.csv` and `curves.svg` into `out_dir`.
pub fn emit_rd_outputs(curves: &[RdCurve], out_dir: impl AsRef<Path>, metric_name: &str) -> Result<(PathBuf, PathBuf), MetricsError> {
    if curves.is_empty() {
        return Err(MetricsError::NoCurves);
    }
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("curves.csv");
    let svg_path = dir.join("curves.svg");
    write_curves_csv(curves, &csv_path)?;
    fs::write(&svg_path, render_svg(curves, metric_name))?;
    Ok((csv_path, svg_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rgb(w: usize, h: usize, f: impl Fn(usize, usize, usize) -> u8) -> RgbFrame {
        let plane = |c| {
            let mut d = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    d.push(f(c, x, y));
                }
            }
            Plane::new(w, h, d)
        };
        RgbFrame {
            index: 1,
            r: plane(0),
            g: plane(1),
            b: plane(2),
        }
    }

    fn curve(label: &str, pts: &[(f64, f64)]) -> RdCurve {
        RdCurve::new(label, pts.iter().map(|&(rate, metric)| RdPoint { rate, metric }).collect()).unwrap()
    }

    #[test]
    fn psnr_fixtures() {
        let black = rgb(2, 2, |_, _, _| 0);
        let white = rgb(2, 2, |_, _, _| 255);
        assert_eq!(psnr_rgb(&black, &white).unwrap(), 0.0);
        assert!(psnr_rgb(&black, &black).unwrap().is_infinite());
        assert_eq!(format_db(f64::INFINITY), "inf");
        let one = rgb(2, 2, |c, x, y| if c == 1 && x == 1 && y == 0 { 255 } else { 0 });
        assert!((psnr_rgb(&black, &one).unwrap() - 10.0 * 12f64.log10()).abs() < 1e-9);
        assert!(psnr_rgb(&black, &rgb(4, 2, |_, _, _| 0)).is_err());
    }

    #[test]
    fn sequence_psnr_pools_mse() {
        let a = rgb(2, 2, |_, _, _| 0);
        let b = rgb(2, 2, |_, _, _| 10);
        // MSE 100 and 0 average to 50
        let v = sequence_psnr(&[a.clone(), a.clone()], &[b, a.clone()]).unwrap();
        assert!((v - 10.0 * (PEAK_SQ / 50.0).log10()).abs() < 1e-12);
    }

    #[test]
    fn taps_are_normalized_and_symmetric() {
        let k = gaussian_taps();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..WINDOW {
            assert_eq!(k[i], k[WINDOW - 1 - i]);
        }
    }

    #[test]
    fn ms_ssim_identity_and_size() {
        let a = rgb(176, 176, |c, x, y| ((x * 7 + y * 3 + c * 50) % 256) as u8);
        assert!((ms_ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let small = rgb(64, 64, |_, _, _| 0);
        assert!(matches!(ms_ssim(&small, &small), Err(MetricsError::TooSmall(64, 64))));
    }

    #[test]
    fn bd_identity_doubling_offset() {
        let a = curve("a", &[(100.0, 30.0), (200.0, 33.0), (400.0, 35.5), (800.0, 37.0)]);
        assert_eq!(bd_rate(&a, &a).unwrap(), BdResult::Value { value: 0.0, degraded: false });
        assert_eq!(bd_metric(&a, &a).unwrap().value(), Some(0.0));
        let doubled = curve("b", &a.points.iter().map(|p| (2.0 * p.rate, p.metric)).collect::<Vec<_>>());
        assert!((bd_rate(&a, &doubled).unwrap().value().unwrap() - 100.0).abs() < 1e-6);
        let plus1 = curve("c", &a.points.iter().map(|p| (p.rate, p.metric + 1.0)).collect::<Vec<_>>());
        assert!((bd_metric(&a, &plus1).unwrap().value().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bd_not_applicable_and_degenerate() {
        let a = curve("a", &[(100.0, 30.0), (200.0, 31.0), (300.0, 32.0), (400.0, 33.0)]);
        let b = curve("b", &[(100.0, 40.0), (200.0, 41.0), (300.0, 42.0), (400.0, 43.0)]);
        assert_eq!(bd_rate(&a, &b).unwrap(), BdResult::NotApplicable);
        let c = curve("c", &[(1000.0, 30.0), (2000.0, 31.0)]);
        assert_eq!(bd_metric(&a, &c).unwrap(), BdResult::NotApplicable);
        let flat = curve("d", &[(100.0, 30.0), (200.0, 30.0), (300.0, 31.0)]);
        assert!(matches!(bd_rate(&a, &flat), Err(MetricsError::DegenerateCurve(_))));
    }

    #[test]
    fn few_points_are_degraded() {
        let a = curve("a", &[(100.0, 30.0), (200.0, 32.0), (400.0, 34.0)]);
        let b = curve("b", &[(150.0, 30.0), (300.0, 32.0), (600.0, 34.0)]);
        match bd_rate(&a, &b).unwrap() {
            BdResult::Value { value, degraded } => {
                assert!(degraded);
                assert!((value - 50.0).abs() < 1e-9);
            }
            BdResult::NotApplicable => panic!(),
        }
    }

    #[test]
    fn pchip_is_monotone_and_exact_on_lines() {
        let p = Pchip::new(vec![0.0, 1.0, 3.0, 4.0, 7.0], vec![0.0, 0.5, 0.6, 3.0, 3.1], false);
        let mut last = f64::MIN;
        for i in 0..=700 {
            let v = p.eval(i as f64 / 100.0);
            assert!(v >= last - 1e-12);
            last = v;
        }
        let line = Pchip::new(vec![0.0, 1.0, 2.5, 4.0], vec![1.0, 3.0, 6.0, 9.0], false);
        assert!((line.integrate(0.5, 3.5) - (2.0 * (3.5f64.powi(2) - 0.25) / 2.0 + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn csv_and_svg_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let a = curve("anchor", &[(100.0, 30.0), (200.0, 33.0), (400.0, 35.5), (800.0, 37.0)]);
        let b = curve("test, v2", &[(90.0, 30.5), (180.0, 33.2)]);
        let (csv_path, svg_path) = emit_rd_outputs(&[a.clone(), b.clone()], dir.path(), "PSNR (dB)").unwrap();
        let text = fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().next(), Some("label,rate_kbps,metric"));
        assert_eq!(text.lines().count(), 1 + 6);
        assert_eq!(read_curves_csv(&csv_path).unwrap(), vec![a, b]);
        let svg = fs::read_to_string(svg_path).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(emit_rd_outputs(&[], dir.path(), "x").is_err());
    }

    proptest! {
        #[test]
        fn psnr_symmetric(a in prop::collection::vec(any::<u8>(), 12), b in prop::collection::vec(any::<u8>(), 12)) {
            let fa = rgb(2, 2, |c, x, y| a[c * 4 + y * 2 + x]);
            let fb = rgb(2, 2, |c, x, y| b[c * 4 + y * 2 + x]);
            prop_assert_eq!(psnr_rgb(&fa, &fb).unwrap(), psnr_rgb(&fb, &fa).unwrap());
        }

        #[test]
        fn bd_rate_scale_invariant(
            base in prop::collection::vec(1.0f64..3.0, 4),
            gaps in prop::collection::vec(0.5f64..3.0, 4),
            shift in -0.3f64..0.3,
            scale in 0.1f64..10.0,
        ) {
            let mut m = 30.0;
            let mut r = 50.0;
            let mut a = Vec::new();
            let mut b = Vec::new();
            for i in 0..4 {
                r *= 1.0 + base[i];
                m += gaps[i];
                a.push((r, m));
                b.push((r * 1.3, m + shift));
            }
            let ca = curve("a", &a);
            let cb = curve("b", &b);
            let sa = curve("a", &a.iter().map(|&(r, m)| (r * scale, m)).collect::<Vec<_>>());
            let sb = curve("b", &b.iter().map(|&(r, m)| (r * scale, m)).collect::<Vec<_>>());
            let x = bd_rate(&ca, &cb).unwrap().value();
            let y = bd_rate(&sa, &sb).unwrap().value();
            prop_assert!(x.is_some());
            prop_assert!((x.unwrap() - y.unwrap()).abs() < 1e-8);
            prop_assert_eq!(bd_rate(&ca, &ca).unwrap().value(), Some(0.0));
        }
    }
}
