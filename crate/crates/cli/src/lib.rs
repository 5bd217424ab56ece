//! The `fbp` command line: binning, gradient checks, bias studies, motion
//! estimation, precision tables and synthetic data.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fbp_core::analysis::{central_difference, compare_surrogates, degree_of_precision, GridSpec};
use fbp_core::io::{
    packetize, read_events_txt, read_truth, write_events_txt, write_frame_csv, write_truth, EstimateSummary,
    PacketEstimate,
};
use fbp_core::synth::{synth_events, SyntheticScene};
use fbp_core::warp::{Event, EventPacket, MotionModel, MotionParams, RefTimePolicy, WarpOptions};
use fbp_core::{
    lbfgs_maximize, rms_error, BinningKernelKind, Error, FrameGrid, GradMode, LbfgsOptions, NbParams, Objective,
    ObjectiveConfig, ReconKernelKind, ScoreKind,
};

#[derive(Debug, Parser)]
#[command(name = "fbp", version, about = "Event binning with synthesized weak derivatives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Warp a packet and write its frame as CSV.
    Bin(BinArgs),
    /// Compare analytic gradients of several modes with central differences at one point.
    Grad(GradArgs),
    /// Grid-sampled gradient bias study.
    Bias(BiasArgs),
    /// Per-packet motion estimation with L-BFGS.
    Estimate(EstimateArgs),
    /// Moment checks of the synthesized derivative.
    Precision(PrecisionArgs),
    /// Write a synthetic event file and its truth file.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradArg {
    Naive,
    Fbp,
    Ste,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    Var,
    Ll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Rot,
    Trans,
}

impl From<ModelArg> for MotionModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Rot => MotionModel::Rotational,
            ModelArg::Trans => MotionModel::Translational,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Rect,
    Linear,
    Gauss,
}

impl From<KernelArg> for BinningKernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Rect => BinningKernelKind::Rect,
            KernelArg::Linear => BinningKernelKind::Linear,
            KernelArg::Gauss => BinningKernelKind::GaussTrunc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReconArg {
    Linear,
    Cubic,
    Lanczos,
}

impl From<ReconArg> for ReconKernelKind {
    fn from(l: ReconArg) -> Self {
        match l {
            ReconArg::Linear => ReconKernelKind::Linear,
            ReconArg::Cubic => ReconKernelKind::Cubic,
            ReconArg::Lanczos => ReconKernelKind::Lanczos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TRefArg {
    Mean,
    Midpoint,
    First,
    Last,
}

impl From<TRefArg> for RefTimePolicy {
    fn from(t: TRefArg) -> Self {
        match t {
            TRefArg::Mean => RefTimePolicy::Mean,
            TRefArg::Midpoint => RefTimePolicy::Midpoint,
            TRefArg::First => RefTimePolicy::First,
            TRefArg::Last => RefTimePolicy::Last,
        }
    }
}

/// Objective and frame settings shared by every subcommand that bins.
#[derive(Debug, Clone, Args)]
pub struct ObjectiveArgs {
    #[arg(long, value_enum, default_value = "rect")]
    pub kernel: KernelArg,
    #[arg(long, value_enum, default_value = "linear")]
    pub recon: ReconArg,
    #[arg(long = "grad", value_enum, default_value = "fbp")]
    pub grad: GradArg,
    #[arg(long, default_value_t = GradMode::DEFAULT_SIGMOID_SLOPE)]
    pub sigmoid_slope: f64,
    #[arg(long, value_enum, default_value = "var")]
    pub score: ScoreArg,
    #[arg(long, value_enum, default_value = "rot")]
    pub model: ModelArg,
    #[arg(long, default_value_t = 200)]
    pub width: usize,
    #[arg(long, default_value_t = 150)]
    pub height: usize,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Multiplier applied to input coordinates, or `auto` to fit the
    /// event bounding box into the frame.
    #[arg(long, default_value = "1")]
    pub scale: String,
    /// Added to scaled x coordinates.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub offset_x: f64,
    /// Added to scaled y coordinates.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub offset_y: f64,
    /// Negative binomial shape.
    #[arg(long, default_value_t = 0.3)]
    pub r: f64,
    /// Negative binomial success probability.
    #[arg(long, default_value_t = 0.8)]
    pub p: f64,
    #[arg(long, value_enum, default_value = "mean")]
    pub t_ref: TRefArg,
    /// Events per packet.
    #[arg(long, default_value_t = 20_000)]
    pub ne: usize,
}

/// Where the events come from: a file, or a synthetic scene.
#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Event file (`t x y p` per line). Without it a synthetic packet is used.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Seed of the synthetic packet.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BinArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Warp parameters, comma separated.
    #[arg(long, value_parser = parse_theta, default_value = "0,0,0", allow_hyphen_values = true)]
    pub theta: [f64; 3],
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GradArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_parser = parse_theta, default_value = "1,1,1", allow_hyphen_values = true)]
    pub theta: [f64; 3],
    /// Modes to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "naive,fbp,ste,sigmoid")]
    pub modes: Vec<GradArg>,
    #[arg(long, default_value_t = 1.0)]
    pub fd_step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BiasArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "fbp,sigmoid,ste")]
    pub modes: Vec<GradArg>,
    #[arg(long, default_value_t = 1.0)]
    pub fd_step: f64,
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    pub grid_lo: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub grid_hi: f64,
    #[arg(long, default_value_t = 11)]
    pub grid_n: usize,
    /// CSV output; the JSON summary goes next to it with a `.json` extension.
    #[arg(long, default_value = "bias.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Truth file (`index a b c` per line).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Starting point of every packet.
    #[arg(long, value_parser = parse_theta, default_value = "0,0,0", allow_hyphen_values = true)]
    pub theta: [f64; 3],
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// JSON summary output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PrecisionArgs {
    #[arg(long, value_enum, default_value = "rect")]
    pub kernel: KernelArg,
    #[arg(long, value_enum, default_value = "linear")]
    pub recon: ReconArg,
    #[arg(long, default_value_t = 3)]
    pub n_max: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "rot")]
    pub model: ModelArg,
    /// Events per packet.
    #[arg(long, default_value_t = 20_000)]
    pub ne: usize,
    #[arg(long, default_value_t = 1)]
    pub packets: usize,
    #[arg(long, default_value_t = 50)]
    pub events_per_point: usize,
    /// Packet duration in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Coordinate jitter.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Events file.
    #[arg(long)]
    pub out: PathBuf,
    /// Truth file; defaults to the events path with a `.truth.txt` suffix.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

fn parse_theta(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse::<f64>().map_err(|_| format!("invalid number `{p}`"))?;
        if !o.is_finite() {
            return Err(format!("non-finite value `{p}`"));
        }
    }
    Ok(out)
}

/// Failures reported to the user; the variant picks the exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Runtime(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Runtime(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn grad_mode(arg: GradArg, recon: ReconArg, slope: f64) -> GradMode {
    match arg {
        GradArg::Naive => GradMode::Naive,
        GradArg::Fbp => GradMode::Fbp(recon.into()),
        GradArg::Ste => GradMode::Ste,
        GradArg::Sigmoid => GradMode::Sigmoid { slope },
    }
}

/// How raw file coordinates map into the frame's coordinate system.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Scale {
    Fixed(f64),
    Auto,
}

impl ObjectiveArgs {
    fn scale(&self) -> CliResult<Scale> {
        if self.scale.eq_ignore_ascii_case("auto") {
            return Ok(Scale::Auto);
        }
        match self.scale.parse::<f64>() {
            Ok(s) if s > 0.0 && s.is_finite() => Ok(Scale::Fixed(s)),
            _ => Err(usage(format!("--scale must be a positive number or `auto`, got `{}`", self.scale))),
        }
    }

    fn mode(&self) -> GradMode {
        grad_mode(self.grad, self.recon, self.sigmoid_slope)
    }

    fn config(&self, mode: GradMode) -> CliResult<ObjectiveConfig> {
        if !(self.sigmoid_slope > 0.0 && self.sigmoid_slope.is_finite()) {
            return Err(usage("--sigmoid-slope must be > 0"));
        }
        if self.ne == 0 {
            return Err(usage("--ne must be at least 1"));
        }
        self.scale()?;
        let grid = FrameGrid::centered(self.width, self.height, self.delta).map_err(|e| usage(e.to_string()))?;
        let score = match self.score {
            ScoreArg::Var => ScoreKind::Variance,
            ScoreArg::Ll => ScoreKind::LogLikelihood(NbParams::new(self.r, self.p).map_err(|e| usage(e.to_string()))?),
        };
        Ok(ObjectiveConfig {
            kernel: self.kernel.into(),
            mode,
            score,
            grid,
            model: self.model.into(),
            t_ref: self.t_ref.into(),
            warp: WarpOptions::default(),
        })
    }

    fn describe(&self, cfg: &ObjectiveConfig) -> serde_json::Value {
        json!({
            "kernel": cfg.kernel.name(),
            "recon": ReconKernelKind::from(self.recon).name(),
            "grad": cfg.mode.label(),
            "score": cfg.score.name(),
            "model": cfg.model.name(),
            "ne": self.ne,
            "width": cfg.grid.width,
            "height": cfg.grid.height,
            "delta": cfg.grid.delta,
            "scale": self.scale,
            "offset_x": self.offset_x,
            "offset_y": self.offset_y,
            "r": self.r,
            "p": self.p,
            "t_ref": format!("{:?}", self.t_ref).to_lowercase(),
        })
    }

    /// Applies `--scale`/`--offset-*` to raw events.
    fn normalize(&self, events: &mut [Event], grid: &FrameGrid) -> CliResult<()> {
        let (s, ox, oy) = match self.scale()? {
            Scale::Fixed(s) => (s, self.offset_x, self.offset_y),
            Scale::Auto => auto_fit(events, grid),
        };
        if s == 1.0 && ox == 0.0 && oy == 0.0 {
            return Ok(());
        }
        for e in events.iter_mut() {
            e.x = e.x * s + ox;
            e.y = e.y * s + oy;
        }
        Ok(())
    }
}

/// Scale and offsets that centre the events' bounding box in the frame and
/// fit it inside the outermost bin centres.
fn auto_fit(events: &[Event], grid: &FrameGrid) -> (f64, f64, f64) {
    if events.is_empty() {
        return (1.0, 0.0, 0.0);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for e in events {
        x0 = x0.min(e.x);
        x1 = x1.max(e.x);
        y0 = y0.min(e.y);
        y1 = y1.max(e.y);
    }
    let span_x = (grid.width - 1) as f64 * grid.delta;
    let span_y = (grid.height - 1) as f64 * grid.delta;
    let sx = if x1 > x0 { span_x / (x1 - x0) } else { f64::INFINITY };
    let sy = if y1 > y0 { span_y / (y1 - y0) } else { f64::INFINITY };
    let s = sx.min(sy);
    let s = if s.is_finite() { s } else { 1.0 };
    let (cx, cy) = grid.center(0, 0);
    let (ex, ey) = grid.center(grid.width - 1, grid.height - 1);
    let (mx, my) = (0.5 * (cx + ex), 0.5 * (cy + ey));
    (s, mx - s * 0.5 * (x0 + x1), my - s * 0.5 * (y0 + y1))
}

/// The first packet of the input file, or a synthetic packet.
fn load_packet(obj: &ObjectiveArgs, src: &SourceArgs, cfg: &ObjectiveConfig) -> CliResult<EventPacket> {
    let mut events = match &src.input {
        Some(path) => read_events_txt(path)?,
        None => {
            let scene = match cfg.model {
                MotionModel::Rotational => SyntheticScene::rotational(src.seed),
                MotionModel::Translational => SyntheticScene::translational(src.seed),
            };
            synth_events(&scene)?.0
        }
    };
    obj.normalize(&mut events, &cfg.grid)?;
    let n = obj.ne.min(events.len());
    if n == 0 {
        return Err(CliError::Runtime(Error::InvalidPacket("input has no events".into())));
    }
    let mut packets = packetize(&events[..n], n, cfg.t_ref)?;
    Ok(packets.remove(0))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    match out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run_bin(a: &BinArgs) -> CliResult<()> {
    let cfg = a.objective.config(a.objective.mode())?;
    let packet = load_packet(&a.objective, &a.source, &cfg)?;
    let frame = Objective::new(cfg)?.frame(&packet, &a.theta)?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            write_frame_csv(&mut w, &frame)?;
            w.flush()?;
        }
        None => write_frame_csv(io::stdout().lock(), &frame)?,
    }
    log::info!("binned {} events, frame sum {}", packet.len(), frame.sum());
    Ok(())
}

fn run_grad(a: &GradArgs) -> CliResult<()> {
    if !(a.fd_step > 0.0 && a.fd_step.is_finite()) {
        return Err(usage("--fd-step must be > 0"));
    }
    if a.modes.is_empty() {
        return Err(usage("--modes needs at least one mode"));
    }
    let base = a.objective.config(a.objective.mode())?;
    let packet = load_packet(&a.objective, &a.source, &base)?;
    let obj = Objective::new(base)?;
    let value = obj.value(&packet, &a.theta)?;
    let fd = central_difference(|t| obj.value(&packet, &[t[0], t[1], t[2]]), &a.theta, a.fd_step)?;
    let mut rows = Vec::new();
    for m in &a.modes {
        let mode = grad_mode(*m, a.objective.recon, a.objective.sigmoid_slope);
        let g = Objective::new(base.with_mode(mode))?.grad(&packet, &a.theta)?;
        let bias: Vec<f64> = g.iter().zip(&fd).map(|(x, y)| x - y).collect();
        rows.push(json!({ "mode": mode.label(), "analytic": g, "bias": bias }));
    }
    let report = json!({
        "config": a.objective.describe(&base),
        "theta": a.theta,
        "value": value,
        "fd_step": a.fd_step,
        "fd": fd,
        "modes": rows,
    });
    emit_json(&report, a.out.as_deref())
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut p = path.to_path_buf();
    p.set_extension(ext);
    p
}

fn run_bias(a: &BiasArgs) -> CliResult<()> {
    if !(a.fd_step > 0.0 && a.fd_step.is_finite()) {
        return Err(usage("--fd-step must be > 0"));
    }
    if a.modes.is_empty() {
        return Err(usage("--modes needs at least one mode"));
    }
    let grid = GridSpec::new(a.grid_lo, a.grid_hi, a.grid_n).map_err(|e| usage(e.to_string()))?;
    let base = a.objective.config(a.objective.mode())?;
    let packet = load_packet(&a.objective, &a.source, &base)?;
    let modes: Vec<GradMode> = a
        .modes
        .iter()
        .map(|m| grad_mode(*m, a.objective.recon, a.objective.sigmoid_slope))
        .collect();
    let start = Instant::now();
    let cmp = compare_surrogates(&base, &packet, &modes, &grid, a.fd_step)?;
    let mut w = create(&a.out)?;
    cmp.report.write_csv(&mut w)?;
    w.flush()?;
    let mut summary = cmp.report.summary_json();
    summary["config"] = a.objective.describe(&base);
    summary["ranking"] = json!(cmp.ranking());
    emit_json(&summary, Some(&with_extension(&a.out, "json")))?;
    for row in &cmp.rows {
        let s = &row.summary;
        let rank = row.rank.map_or("-".to_string(), |r| r.to_string());
        println!(
            "{:<14} rank {rank:>2}  mean|bias| {:.6e}  sign agreement {:.4}",
            s.mode, s.mean_abs_bias, s.sign_agreement
        );
    }
    log::info!("bias grid finished in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn run_estimate(a: &EstimateArgs) -> CliResult<()> {
    let cfg = a.objective.config(a.objective.mode())?;
    if a.max_iter == 0 {
        return Err(usage("--max-iter must be at least 1"));
    }
    let mut events = read_events_txt(&a.input)?;
    a.objective.normalize(&mut events, &cfg.grid)?;
    let packets = packetize(&events, a.objective.ne, cfg.t_ref)?;
    if packets.is_empty() {
        return Err(CliError::Runtime(Error::InvalidPacket(format!(
            "{} events do not fill a packet of {}",
            events.len(),
            a.objective.ne
        ))));
    }
    let truth = match &a.truth {
        Some(p) => Some(read_truth(p)?),
        None => None,
    };
    let opts = LbfgsOptions {
        max_iter: a.max_iter,
        ..LbfgsOptions::default()
    };
    let obj = Objective::new(cfg)?;
    let mut per_packet = Vec::with_capacity(packets.len());
    for (index, packet) in packets.iter().enumerate() {
        let start = Instant::now();
        let (theta, trace) = lbfgs_maximize(&obj, packet, a.theta, &opts)?;
        let truth_row = truth
            .as_ref()
            .and_then(|t| t.iter().find(|(i, _)| *i == index).map(|(_, v)| *v));
        per_packet.push(PacketEstimate {
            index,
            t_ref: packet.t_ref(),
            theta,
            truth: truth_row,
            score: trace.last().value,
            iterations: trace.iterations(),
            evaluations: trace.evaluations,
            converged: trace.converged,
            reason: trace.reason,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let pairs: (Vec<[f64; 3]>, Vec<[f64; 3]>) =
        per_packet.iter().filter_map(|p| p.truth.map(|t| (p.theta, t))).unzip();
    let rms = if pairs.0.is_empty() {
        None
    } else {
        Some(rms_error(&pairs.0, &pairs.1, cfg.model)?)
    };
    let summary = EstimateSummary {
        config: a.objective.describe(&cfg),
        n_packets: per_packet.len(),
        rms,
        per_packet,
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    summary.write_estimates(&mut out)?;
    if let Some(rms) = summary.rms {
        let unit = match cfg.model {
            MotionModel::Rotational => "deg/s",
            MotionModel::Translational => "units/s",
        };
        writeln!(out, "rms {rms} {unit}")?;
    }
    if let Some(path) = &a.out {
        let value = serde_json::to_value(&summary).map_err(Error::from)?;
        emit_json(&value, Some(path))?;
    }
    Ok(())
}

fn run_precision(a: &PrecisionArgs) -> CliResult<()> {
    if a.n_max == 0 {
        return Err(usage("--n-max must be at least 1"));
    }
    let rows = degree_of_precision(a.kernel.into(), a.recon.into(), a.n_max);
    let mut text = String::from("n,lhs,rhs,residual\n");
    for r in &rows {
        text.push_str(&format!("{},{},{},{}\n", r.n, r.lhs, r.rhs, r.residual));
    }
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run_synth(a: &SynthArgs) -> CliResult<()> {
    if a.ne == 0 || a.events_per_point == 0 || a.packets == 0 {
        return Err(usage("--ne, --events-per-point and --packets must be at least 1"));
    }
    if !a.ne.is_multiple_of(a.events_per_point) {
        return Err(usage(format!(
            "--ne {} is not a multiple of --events-per-point {}",
            a.ne, a.events_per_point
        )));
    }
    let model: MotionModel = a.model.into();
    let mut events = Vec::with_capacity(a.ne * a.packets);
    let mut truths = Vec::with_capacity(a.packets);
    let mut t_start = 0.0;
    for k in 0..a.packets {
        let seed = a.seed.wrapping_add(k as u64);
        let mut scene = match model {
            MotionModel::Rotational => SyntheticScene::rotational(seed),
            MotionModel::Translational => SyntheticScene::translational(seed),
        };
        scene.n_points = a.ne / a.events_per_point;
        scene.events_per_point = a.events_per_point;
        if let Some(d) = a.duration {
            scene.duration = d;
        }
        if let Some(n) = a.noise {
            scene.noise_std = n;
        }
        scene.t_start = t_start;
        t_start += scene.duration;
        let (evs, MotionParams { theta, .. }) = synth_events(&scene).map_err(|e| match e {
            Error::InvalidParameter(m) => usage(m),
            other => CliError::Runtime(other),
        })?;
        events.extend(evs);
        truths.push(theta);
    }
    write_events_txt(&a.out, &events)?;
    let truth_path = a.truth.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".truth.txt");
        PathBuf::from(s)
    });
    write_truth(&truth_path, &truths)?;
    println!("wrote {} events to {}", events.len(), a.out.display());
    println!("wrote {} truth rows to {}", truths.len(), truth_path.display());
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Bin(a) => run_bin(a),
        Command::Grad(a) => run_grad(a),
        Command::Bias(a) => run_bias(a),
        Command::Estimate(a) => run_estimate(a),
        Command::Precision(a) => run_precision(a),
        Command::Synth(a) => run_synth(a),
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": kind, "message": message }));
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 on success, 1 on runtime errors, 2 on bad arguments.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            report_error("usage", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            report_error("usage", &m);
            2
        }
        Err(CliError::Runtime(e)) => {
            report_error(e.kind(), &e.to_string());
            1
        }
    }
}
