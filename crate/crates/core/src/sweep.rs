//! Grid search over `(w_max, tau)` reporting Bjøntegaard deltas against an
//! anchor cell.

use std::io::Write;

use rayon::prelude::*;

use crate::codec::CodecSpec;
use crate::container::total_rate;
use crate::frame_io::{self, RgbFrame, Video};
use crate::keyframe_selection::SelectionParams;
use crate::metrics::{self, BdResult, RdCurve, RdPoint};
use crate::pipeline::{self, DecodeConfig, EncodeConfig, PipelineError};
use crate::segmentation::Segmentation;

/// PSNR ceiling used on RD curves so lossless points stay finite.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub w_max: Vec<usize>,
    pub tau: Vec<f64>,
    pub anchor: (usize, f64),
    /// Internal-codec steps applied to both streams, one RD point each.
    pub quality_steps: Vec<u8>,
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<(usize, f64)> {
        self.w_max
            .iter()
            .flat_map(|&w| self.tau.iter().map(move |&t| (w, t)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub w_max: usize,
    pub tau: f64,
    pub keyframes: usize,
    /// Measured points, one per quality step, in step order.
    pub points: Vec<RdPoint>,
    /// `None` when fewer than two distinct rates were measured.
    pub curve: Option<RdCurve>,
    /// Mean over the RD points.
    pub chroma_mse: f64,
    pub bd_rate: Option<BdResult>,
    pub bd_psnr: Option<BdResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPoint {
    pub rate: f64,
    pub psnr: f64,
    pub chroma_mse: f64,
    pub keyframes: usize,
}

/// Encodes and decodes one configuration and measures it.
pub fn measure(video: &Video, seg: &Segmentation, config: &EncodeConfig, decode: &DecodeConfig, reference_rgb: &[RgbFrame]) -> Result<CellPoint, PipelineError> {
    let c = pipeline::encode(video, seg, config)?;
    let out = pipeline::decode_detailed(&c, decode)?;
    let psnr = metrics::sequence_psnr(reference_rgb, &out.corrected_rgb)?;
    let chroma = metrics::chroma_mse(&video.frames, &out.video.frames)?;
    Ok(CellPoint {
        rate: total_rate(&c, &c.meta).total,
        psnr,
        chroma_mse: chroma,
        keyframes: c.plan.keyframes.len(),
    })
}

fn cell_row(video: &Video, seg: &Segmentation, base: &EncodeConfig, decode: &DecodeConfig, grid: &SweepGrid, cell: (usize, f64), reference: &[RgbFrame]) -> Result<SweepRow, PipelineError> {
    let selection = SelectionParams {
        w_max: cell.0,
        tau: cell.1,
        ..base.selection
    };
    let points = grid
        .quality_steps
        .iter()
        .map(|&q| {
            let cfg = EncodeConfig {
                selection,
                kf_codec: CodecSpec::internal(q),
                prior_codec: CodecSpec::internal(q),
                ..base.clone()
            };
            measure(video, seg, &cfg, decode, reference)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let label = format!("w_max={} tau={}", cell.0, cell.1);
    let rd: Vec<RdPoint> = points
        .iter()
        .map(|p| RdPoint {
            rate: p.rate,
            metric: p.psnr.min(PSNR_CAP_DB),
        })
        .collect();
    Ok(SweepRow {
        w_max: cell.0,
        tau: cell.1,
        keyframes: points[0].keyframes,
        chroma_mse: points.iter().map(|p| p.chroma_mse).sum::<f64>() / points.len() as f64,
        curve: distinct_rate_curve(label, &rd),
        points: rd,
        bd_rate: None,
        bd_psnr: None,
    })
}

/// Steps that produce identical streams collapse to one point (the best
/// metric at that rate).
fn distinct_rate_curve(label: String, points: &[RdPoint]) -> Option<RdCurve> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.rate.total_cmp(&b.rate).then(b.metric.total_cmp(&a.metric)));
    pts.dedup_by(|b, a| a.rate == b.rate);
    RdCurve::new(label, pts).ok()
}

/// Runs every cell (and the anchor, if it is not in the grid) and fills in
/// BD-rate / BD-PSNR against the anchor. Cells whose curves cannot be
/// compared get `NotApplicable`.
pub fn run_sweep(video: &Video, seg: &Segmentation, base: &EncodeConfig, decode: &DecodeConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>, PipelineError> {
    if grid.quality_steps.len() < 2 || grid.w_max.is_empty() || grid.tau.is_empty() {
        return Err(PipelineError::InvalidConfig(
            "sweep needs at least one cell and two quality steps".into(),
        ));
    }
    let reference: Vec<RgbFrame> = video.frames.par_iter().map(frame_io::yuv_to_rgb).collect();
    let mut cells = grid.cells();
    let anchor_in_grid = cells.contains(&grid.anchor);
    if !anchor_in_grid {
        cells.push(grid.anchor);
    }
    let mut rows = cells
        .par_iter()
        .map(|&cell| cell_row(video, seg, base, decode, grid, cell, &reference))
        .collect::<Result<Vec<_>, _>>()?;
    let anchor_idx = rows
        .iter()
        .position(|r| (r.w_max, r.tau) == grid.anchor)
        .expect("anchor row present");
    let anchor = rows[anchor_idx].curve.clone();
    for row in &mut rows {
        let (rate, psnr) = match (&anchor, &row.curve) {
            (Some(a), Some(c)) => (
                metrics::bd_rate(a, c).unwrap_or(BdResult::NotApplicable),
                metrics::bd_metric(a, c).unwrap_or(BdResult::NotApplicable),
            ),
            _ => (BdResult::NotApplicable, BdResult::NotApplicable),
        };
        row.bd_rate = Some(rate);
        row.bd_psnr = Some(psnr);
    }
    if !anchor_in_grid {
        rows.remove(anchor_idx);
    }
    Ok(rows)
}

fn bd_cell(r: &Option<BdResult>) -> String {
    match r {
        Some(BdResult::Value { value, .. }) => format!("{value:.6}"),
        _ => "N/A".to_owned(),
    }
}

/// One CSV row per grid cell.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["w_max", "tau", "keyframes", "mean_rate_kbps", "mean_psnr_db", "chroma_mse", "bd_rate_pct", "bd_psnr_db", "degraded"])?;
    for r in rows {
        let n = r.points.len() as f64;
        let mean_rate = r.points.iter().map(|p| p.rate).sum::<f64>() / n;
        let mean_psnr = r.points.iter().map(|p| p.metric).sum::<f64>() / n;
        let degraded = matches!(r.bd_rate, Some(BdResult::Value { degraded: true, .. }));
        w.write_record([
            r.w_max.to_string(),
            r.tau.to_string(),
            r.keyframes.to_string(),
            format!("{mean_rate:.6}"),
            format!("{mean_psnr:.6}"),
            format!("{:.6}", r.chroma_mse),
            bd_cell(&r.bd_rate),
            bd_cell(&r.bd_psnr),
            degraded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_io::{Fps, VideoMeta};
    use crate::synth::{synthesize, SynthKind, SyntheticSpec};

    fn moving() -> (Video, Segmentation) {
        let out = synthesize(&SyntheticSpec {
            kind: SynthKind::MovingBlock { vx: 2, vy: 1 },
            meta: VideoMeta::new(32, 32, 24, Fps::new(25, 1)).unwrap(),
            seed: 3,
            luma_noise: 6,
        });
        (out.video, out.segmentation)
    }

    fn base() -> EncodeConfig {
        EncodeConfig {
            selection: SelectionParams {
                w_min: 4,
                w_max: 10,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn single_cell_against_itself() {
        let (v, seg) = moving();
        let grid = SweepGrid {
            w_max: vec![10],
            tau: vec![0.4],
            anchor: (10, 0.4),
            quality_steps: vec![4, 8, 16, 32],
        };
        let rows = run_sweep(&v, &seg, &base(), &DecodeConfig::default(), &grid).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].bd_rate.unwrap().value(), Some(0.0));
        assert_eq!(rows[0].bd_psnr.unwrap().value(), Some(0.0));
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn one_row_per_cell_with_external_anchor() {
        let (v, seg) = moving();
        let grid = SweepGrid {
            w_max: vec![8, 12],
            tau: vec![0.4, 1.0],
            anchor: (10, 1.0),
            quality_steps: vec![8, 32],
        };
        let rows = run_sweep(&v, &seg, &base(), &DecodeConfig::default(), &grid).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.bd_rate.is_some()));
    }

    #[test]
    fn equal_rates_collapse() {
        let pts = [
            RdPoint { rate: 10.0, metric: 30.0 },
            RdPoint { rate: 10.0, metric: 31.0 },
            RdPoint { rate: 20.0, metric: 35.0 },
        ];
        let c = distinct_rate_curve("c".into(), &pts).unwrap();
        assert_eq!(c.points, vec![pts[1], pts[2]]);
        assert_eq!(distinct_rate_curve("c".into(), &pts[..2]), None);
    }
}
