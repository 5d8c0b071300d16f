mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cgvc::codec::{CodecSpec, ExternalCodec};
use cgvc::container::{total_rate, CgvcContainer};
use cgvc::control_prior::PriorKind;
use cgvc::frame_io::{self, Fps, RawGeometry, Video, VideoFormat, VideoMeta};
use cgvc::generation::{ExternalGenerator, Generator};
use cgvc::keyframe_selection::{self, HistogramSpace, KeyframePlan, SelectionParams};
use cgvc::metrics::{self, BdResult};
use cgvc::pipeline::{self, DecodeConfig, EncodeConfig, PipelineError};
use cgvc::segmentation::{self, Segmentation};
use cgvc::sweep::{self, SweepGrid};
use cgvc::synth::{self, SynthKind, SyntheticSpec};

use config::FileConfig;

/// Exit status 2: bad input or configuration. 3: an external tool failed.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: if e.is_external_failure() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

macro_rules! input_err {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::input(e.to_string())
            }
        }
    )*};
}

input_err!(
    std::io::Error,
    frame_io::FrameIoError,
    segmentation::SegmentationError,
    keyframe_selection::SelectionError,
    cgvc::container::ContainerError,
    metrics::MetricsError,
    serde_json::Error
);

type Result<T> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "cgvc", version, about = "Generative video compression toolkit")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Parent directory for temporary files of external tools.
    #[arg(long, global = true)]
    scratch_dir: Option<PathBuf>,
    /// INI configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a deterministic synthetic video and its label maps.
    Synth(SynthArgs),
    /// Runs keyframe selection and writes the plan as JSON.
    SelectKeyframes(SelectArgs),
    /// Compresses a video into a container.
    Encode(EncodeArgs),
    /// Reconstructs a video from a container.
    Decode(DecodeArgs),
    /// PSNR and MS-SSIM between two videos.
    Metrics(MetricsArgs),
    /// Bjontegaard deltas between two RD curves.
    Bdrate(BdrateArgs),
    /// Merges RD curves into one CSV and an SVG plot.
    RdPlot(RdPlotArgs),
    /// Grid search over w_max and tau with BD results against an anchor.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKindArg {
    Constant,
    Flip,
    Moving,
    Noise,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKindArg,
    #[arg(long, default_value_t = 96)]
    width: usize,
    #[arg(long, default_value_t = 96)]
    height: usize,
    #[arg(long, default_value_t = 180)]
    frames: usize,
    #[arg(long, default_value = "25", value_parser = parse_fps)]
    fps: Fps,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flip frame for `--kind flip`.
    #[arg(long, default_value_t = 100)]
    t_star: usize,
    /// Constant colour as Y,U,V for `--kind constant`.
    #[arg(long, default_value = "128,128,128")]
    yuv: String,
    /// Block velocity as VX,VY for `--kind moving`.
    #[arg(long, default_value = "2,1", allow_hyphen_values = true)]
    velocity: String,
    #[arg(long, default_value_t = 0)]
    luma_noise: u8,
    #[arg(long)]
    out: PathBuf,
    /// Directory for `frame_NNNNNN.pgm` label maps.
    #[arg(long)]
    masks_out: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Geometry for raw `.yuv` input.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, value_parser = parse_fps)]
    fps: Option<Fps>,
}

#[derive(Args)]
struct SegArgs {
    /// Label-map directory; implies `--segmentation masks`.
    #[arg(long)]
    masks: Option<PathBuf>,
    /// `masks`, `whole` or `grid:RxC`; defaults to `whole` without `--masks`.
    #[arg(long)]
    segmentation: Option<String>,
}

#[derive(Args)]
struct SelectionArgs {
    #[arg(long)]
    w_min: Option<usize>,
    #[arg(long)]
    w_max: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    kde_bandwidth: Option<f64>,
    /// Count each qualifying frame once regardless of how many objects vote.
    #[arg(long)]
    candidate_dedup: bool,
    /// `rgb` or `yuv`.
    #[arg(long)]
    histogram_space: Option<String>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    seg: SegArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CodingArgs {
    /// `luma` or `edge`.
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    edge_threshold: Option<u32>,
    /// Backend for both streams: `internal:qN` or `external`.
    #[arg(long)]
    codec: Option<String>,
    #[arg(long)]
    kf_codec: Option<String>,
    #[arg(long)]
    prior_codec: Option<String>,
    /// Total rate in kbps; picks internal quality steps to meet it.
    #[arg(long)]
    target_rate: Option<f64>,
    #[arg(long)]
    luma_fraction: Option<f64>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    seg: SegArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[command(flatten)]
    coding: CodingArgs,
    /// Use this plan instead of running selection.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    /// `.y4m` writes Y4M, anything else raw YUV.
    #[arg(long)]
    out: PathBuf,
    /// `baseline` or `external` (command from the `[generator]` config).
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    generator_cmd: Option<String>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    dist: PathBuf,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, value_parser = parse_fps)]
    fps: Option<Fps>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BdrateArgs {
    #[arg(long)]
    anchor: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Curve label to use when a file holds several.
    #[arg(long)]
    anchor_label: Option<String>,
    #[arg(long)]
    test_label: Option<String>,
    /// The metric decreases with quality (a distortion measure).
    #[arg(long)]
    lower_is_better: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RdPlotArgs {
    /// Curve CSV files (`label,rate_kbps,metric`).
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "PSNR (dB)")]
    metric_name: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    seg: SegArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [45, 65, 85, 105])]
    w_max_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.4, 0.6, 1.0])]
    tau_grid: Vec<f64>,
    /// Anchor cell as `W_MAX,TAU`.
    #[arg(long, default_value = "85,1.0")]
    anchor: String,
    /// Internal quality steps, one RD point each.
    #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8, 16])]
    quality: Vec<u8>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_fps(s: &str) -> std::result::Result<Fps, String> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let num: u32 = num.trim().parse().map_err(|_| format!("bad fps {s:?}"))?;
    let den: u32 = den.trim().parse().map_err(|_| format!("bad fps {s:?}"))?;
    if num == 0 || den == 0 {
        return Err(format!("fps must be positive, got {s:?}"));
    }
    Ok(Fps::new(num, den))
}

fn parse_triple<T: std::str::FromStr, const N: usize>(s: &str, what: &str) -> Result<[T; N]> {
    let parts: Vec<T> = s
        .split(',')
        .map(|p| p.trim().parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Failure::input(format!("bad {what} {s:?}")))?;
    parts
        .try_into()
        .map_err(|_| Failure::input(format!("{what} needs {N} comma-separated values, got {s:?}")))
}

fn parse_prior(s: &str) -> Result<PriorKind> {
    match s {
        "luma" => Ok(PriorKind::Luma),
        "edge" => Ok(PriorKind::Edge),
        _ => Err(Failure::input(format!("unknown prior {s:?} (luma|edge)"))),
    }
}

fn parse_space(s: &str) -> Result<HistogramSpace> {
    match s {
        "rgb" => Ok(HistogramSpace::Rgb),
        "yuv" => Ok(HistogramSpace::Yuv),
        _ => Err(Failure::input(format!("unknown histogram space {s:?} (rgb|yuv)"))),
    }
}

struct Ctx {
    file: FileConfig,
    scratch: Option<PathBuf>,
}

impl Ctx {
    fn get<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.file.get(section, key).map_err(Failure::input)
    }

    fn external_codec(&self) -> Result<ExternalCodec> {
        let mut ext = ExternalCodec::default();
        if let Some(c) = self.file.raw("codec.external", "encode_cmd") {
            ext.encode_cmd = c.to_owned();
        }
        if let Some(c) = self.file.raw("codec.external", "decode_cmd") {
            ext.decode_cmd = c.to_owned();
        }
        if let Some(qp) = self.get("codec.external", "qp")? {
            ext.qp = qp;
        }
        ext.scratch_dir = self.scratch.clone();
        Ok(ext)
    }

    fn codec(&self, s: &str) -> Result<CodecSpec> {
        let spec = if s == "external" {
            CodecSpec::External(self.external_codec()?)
        } else {
            let q = s
                .strip_prefix("internal:q")
                .and_then(|q| q.parse::<u8>().ok())
                .ok_or_else(|| Failure::input(format!("bad codec {s:?} (internal:qN|external)")))?;
            CodecSpec::internal(q)
        };
        spec.validate().map_err(|e| Failure::input(e.to_string()))?;
        Ok(spec)
    }

    fn selection(&self, a: &SelectionArgs) -> Result<SelectionParams> {
        let d = SelectionParams::default();
        let s = "selection";
        let space = match a.histogram_space.clone().or(self.file.raw(s, "histogram_space").map(str::to_owned)) {
            Some(v) => parse_space(&v)?,
            None => d.histogram_space,
        };
        let p = SelectionParams {
            w_min: a.w_min.or(self.get(s, "w_min")?).unwrap_or(d.w_min),
            w_max: a.w_max.or(self.get(s, "w_max")?).unwrap_or(d.w_max),
            tau: a.tau.or(self.get(s, "tau")?).unwrap_or(d.tau),
            kde_bandwidth: a.kde_bandwidth.or(self.get(s, "kde_bandwidth")?).unwrap_or(d.kde_bandwidth),
            dedup_candidates: a.candidate_dedup || self.get(s, "candidate_dedup")?.unwrap_or(false),
            histogram_space: space,
        };
        p.validate()?;
        Ok(p)
    }

    fn encode_config(&self, sel: &SelectionArgs, c: &CodingArgs) -> Result<EncodeConfig> {
        let d = EncodeConfig::default();
        let e = "encode";
        let prior = match c.prior.clone().or(self.file.raw(e, "prior").map(str::to_owned)) {
            Some(v) => parse_prior(&v)?,
            None => d.prior,
        };
        let both = c.codec.clone().or(self.file.raw(e, "codec").map(str::to_owned));
        let pick = |flag: &Option<String>, key: &str| -> Result<CodecSpec> {
            match flag.clone().or(self.file.raw(e, key).map(str::to_owned)).or(both.clone()) {
                Some(v) => self.codec(&v),
                None => Ok(CodecSpec::internal(1)),
            }
        };
        let cfg = EncodeConfig {
            selection: self.selection(sel)?,
            prior,
            edge_threshold: c.edge_threshold.or(self.get(e, "edge_threshold")?).unwrap_or(d.edge_threshold),
            kf_codec: pick(&c.kf_codec, "kf_codec")?,
            prior_codec: pick(&c.prior_codec, "prior_codec")?,
            target_rate: c.target_rate.or(self.get(e, "target_rate")?),
            luma_fraction: c.luma_fraction.or(self.get(e, "luma_fraction")?).unwrap_or(d.luma_fraction),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn decode_config(&self, a: &DecodeArgs, c: &CgvcContainer) -> Result<DecodeConfig> {
        let kind = a
            .generator
            .clone()
            .or(self.file.raw("generator", "kind").map(str::to_owned))
            .unwrap_or_else(|| {
                if a.generator_cmd.is_some() || self.file.raw("generator", "command").is_some() {
                    "external".into()
                } else {
                    "baseline".into()
                }
            });
        let generator = match kind.as_str() {
            "baseline" => Generator::Baseline,
            "external" => {
                let command = a
                    .generator_cmd
                    .clone()
                    .or(self.file.raw("generator", "command").map(str::to_owned))
                    .ok_or_else(|| Failure::input("external generator needs a command ([generator] command or --generator-cmd)"))?;
                let g = ExternalGenerator {
                    command,
                    scratch_dir: self.scratch.clone(),
                };
                g.validate().map_err(|e| Failure::input(e.to_string()))?;
                Generator::External(g)
            }
            other => return Err(Failure::input(format!("unknown generator {other:?} (baseline|external)"))),
        };
        let external = (c.codec_id == cgvc::codec::CODEC_EXTERNAL).then(|| self.external_codec()).transpose()?;
        Ok(DecodeConfig { external, generator })
    }
}

fn raw_geometry(width: Option<usize>, height: Option<usize>, fps: Option<Fps>) -> Result<Option<RawGeometry>> {
    match (width, height) {
        (Some(width), Some(height)) => Ok(Some(RawGeometry {
            width,
            height,
            fps: fps.unwrap_or(Fps::new(25, 1)),
        })),
        (None, None) => Ok(None),
        _ => Err(Failure::input("raw input needs both --width and --height")),
    }
}

fn read_video(path: &Path, geom: Option<RawGeometry>) -> Result<Video> {
    frame_io::read_video(path, geom).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn read_input(a: &InputArgs) -> Result<Video> {
    read_video(&a.input, raw_geometry(a.width, a.height, a.fps)?)
}

fn load_segmentation(a: &SegArgs, meta: &VideoMeta) -> Result<Segmentation> {
    let mode = a.segmentation.as_deref().unwrap_or(if a.masks.is_some() { "masks" } else { "whole" });
    match mode {
        "whole" => Ok(segmentation::whole_frame_segmentation(meta)),
        "masks" => {
            let dir = a.masks.as_ref().ok_or_else(|| Failure::input("--segmentation masks needs --masks DIR"))?;
            Ok(segmentation::load_label_maps(dir, meta)?)
        }
        grid => {
            let spec = grid
                .strip_prefix("grid:")
                .and_then(|g| g.split_once('x'))
                .and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)))
                .ok_or_else(|| Failure::input(format!("bad segmentation {grid:?} (masks|whole|grid:RxC)")))?;
            Ok(segmentation::grid_segmentation(meta, spec.0, spec.1)?)
        }
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let kind = match a.kind {
        SynthKindArg::Constant => SynthKind::ConstantColor {
            yuv: parse_triple(&a.yuv, "--yuv")?,
        },
        SynthKindArg::Flip => SynthKind::ColorFlip {
            t_star: a.t_star,
            region: None,
        },
        SynthKindArg::Moving => {
            let [vx, vy] = parse_triple(&a.velocity, "--velocity")?;
            SynthKind::MovingBlock { vx, vy }
        }
        SynthKindArg::Noise => SynthKind::Noise,
    };
    if a.width % 2 != 0 || a.height % 2 != 0 || a.width == 0 || a.height == 0 || a.frames == 0 {
        return Err(Failure::input("synthetic videos need even, non-zero dimensions and at least one frame"));
    }
    let meta = VideoMeta::new(a.width, a.height, a.frames, a.fps)?;
    let out = synth::synthesize(&SyntheticSpec {
        kind,
        meta,
        seed: a.seed,
        luma_noise: a.luma_noise,
    });
    frame_io::write_video(&out.video, &a.out, VideoFormat::from_path(&a.out))?;
    if let Some(dir) = &a.masks_out {
        segmentation::write_label_maps(&out.segmentation, dir)?;
    }
    Ok(())
}

fn cmd_select(ctx: &Ctx, a: &SelectArgs) -> Result<()> {
    let params = ctx.selection(&a.selection)?;
    let video = read_input(&a.input)?;
    let seg = load_segmentation(&a.seg, &video.meta)?;
    let plan = keyframe_selection::select_keyframes(&video, &seg, &params)?;
    write_output(&a.out, plan.to_json().as_bytes())
}

fn cmd_encode(ctx: &Ctx, a: &EncodeArgs) -> Result<()> {
    let cfg = ctx.encode_config(&a.selection, &a.coding)?;
    let video = read_input(&a.input)?;
    let (container, alloc) = match &a.plan {
        Some(p) => {
            if cfg.target_rate.is_some() {
                return Err(Failure::input("--plan cannot be combined with --target-rate"));
            }
            let plan = KeyframePlan::from_json(&fs::read_to_string(p)?)?;
            (pipeline::encode_with_plan(&video, plan, &cfg)?, None)
        }
        None => {
            let seg = load_segmentation(&a.seg, &video.meta)?;
            pipeline::encode_at_rate(&video, &seg, &cfg)?
        }
    };
    write_output(&a.out, &container.serialize())?;
    if a.json {
        let r = total_rate(&container, &container.meta);
        let mut report = json!({
            "keyframes": container.plan.keyframes,
            "rate_kbps": {"total": r.total, "b_k": r.b_k, "b_p": r.b_p, "b_c": r.b_c, "overhead": r.overhead},
        });
        if let Some(al) = alloc {
            report["allocation"] = json!({
                "kf_quality": al.kf_quality,
                "prior_quality": al.prior_quality,
                "kf_rate": al.kf_rate,
                "prior_rate": al.prior_rate,
            });
        }
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}

fn cmd_decode(ctx: &Ctx, a: &DecodeArgs) -> Result<()> {
    let bytes = fs::read(&a.input).map_err(|e| Failure::input(format!("{}: {e}", a.input.display())))?;
    let container = CgvcContainer::parse(&bytes)?;
    let cfg = ctx.decode_config(a, &container)?;
    let video = pipeline::decode(&container, &cfg)?;
    frame_io::write_video(&video, &a.out, VideoFormat::from_path(&a.out))?;
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs) -> Result<()> {
    let geom = raw_geometry(a.width, a.height, a.fps)?;
    let r = read_video(&a.reference, geom)?;
    let d = read_video(&a.dist, geom)?;
    let m = metrics::video_metrics(&r, &d)?;
    if a.json {
        let psnr = if m.psnr.is_finite() { json!(m.psnr) } else { json!("inf") };
        println!("{}", json!({"psnr": psnr, "ms_ssim": m.ms_ssim}));
    } else {
        println!("psnr_db {}", metrics::format_db(m.psnr));
        match m.ms_ssim {
            Some(v) => println!("ms_ssim {v:.6}"),
            None => println!("ms_ssim N/A"),
        }
    }
    Ok(())
}

fn pick_curve(path: &Path, label: Option<&str>, lower_is_better: bool) -> Result<metrics::RdCurve> {
    let curves = metrics::read_curves_csv(path)?;
    let mut curve = match label {
        Some(l) => curves
            .into_iter()
            .find(|c| c.label == l)
            .ok_or_else(|| Failure::input(format!("{}: no curve labelled {l:?}", path.display())))?,
        None => {
            if curves.len() > 1 {
                return Err(Failure::input(format!("{}: several curves, choose one with a label flag", path.display())));
            }
            curves.into_iter().next().ok_or_else(|| Failure::input(format!("{}: no curves", path.display())))?
        }
    };
    curve.higher_is_better = !lower_is_better;
    Ok(curve)
}

fn bd_json(r: BdResult) -> serde_json::Value {
    match r {
        BdResult::Value { value, degraded } => json!({"value": value, "degraded": degraded}),
        BdResult::NotApplicable => json!("N/A"),
    }
}

fn cmd_bdrate(a: &BdrateArgs) -> Result<()> {
    let anchor = pick_curve(&a.anchor, a.anchor_label.as_deref(), a.lower_is_better)?;
    let test = pick_curve(&a.test, a.test_label.as_deref(), a.lower_is_better)?;
    let rate = metrics::bd_rate(&anchor, &test)?;
    let metric = metrics::bd_metric(&anchor, &test)?;
    if a.json {
        println!("{}", json!({"bd_rate_pct": bd_json(rate), "bd_metric": bd_json(metric)}));
    } else {
        println!("bd_rate_pct {rate}");
        println!("bd_metric {metric}");
    }
    Ok(())
}

fn cmd_rd_plot(a: &RdPlotArgs) -> Result<()> {
    let mut curves = Vec::new();
    for p in &a.csv {
        curves.extend(metrics::read_curves_csv(p)?);
    }
    let (csv, svg) = metrics::emit_rd_outputs(&curves, &a.out_dir, &a.metric_name)?;
    println!("{}", csv.display());
    println!("{}", svg.display());
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let base = EncodeConfig {
        selection: ctx.selection(&a.selection)?,
        ..Default::default()
    };
    let [w, tau] = parse_triple::<f64, 2>(&a.anchor, "--anchor")?;
    if w < 1.0 || w.fract() != 0.0 {
        return Err(Failure::input(format!("anchor w_max must be a positive integer, got {w}")));
    }
    let grid = SweepGrid {
        w_max: a.w_max_grid.clone(),
        tau: a.tau_grid.clone(),
        anchor: (w as usize, tau),
        quality_steps: a.quality.clone(),
    };
    let video = read_input(&a.input)?;
    let seg = load_segmentation(&a.seg, &video.meta)?;
    let rows = sweep::run_sweep(&video, &seg, &base, &DecodeConfig::default(), &grid)?;
    let file = fs::File::create(&a.out)?;
    sweep::write_sweep_csv(&rows, file).map_err(|e| Failure::input(e.to_string()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::input("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(e.to_string()))?;
    }
    if let Some(dir) = &cli.scratch_dir {
        fs::create_dir_all(dir)?;
    }
    let ctx = Ctx {
        file: FileConfig::load(cli.config.as_deref()).map_err(Failure::input)?,
        scratch: cli.scratch_dir.clone(),
    };
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::SelectKeyframes(a) => cmd_select(&ctx, a),
        Command::Encode(a) => cmd_encode(&ctx, a),
        Command::Decode(a) => cmd_decode(&ctx, a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Bdrate(a) => cmd_bdrate(a),
        Command::RdPlot(a) => cmd_rd_plot(a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cgvc: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
