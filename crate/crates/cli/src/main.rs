use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use uoi_core::grouping::{postprocess_batch, SoftNmsMode};
use uoi_core::io::{
    load_sim_config, parse_sim_config, read_detections, read_ground_truths, render_report,
    write_detections, write_sweep_csv,
};
use uoi_core::sim::{run_experiment, sweep, AxisValue};
use uoi_core::{evaluate, BoxKey, GroundTruth, Method, Pipeline, PostprocessConfig, SimConfig, SweepAxis};

#[derive(Parser)]
#[command(name = "uoi", version, about = "Union-over-intersections post-processing, evaluation and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Group and merge a detection file.
    Postprocess(PostprocessArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Run one simulated experiment and print its report.
    Simulate(SimulateArgs),
    /// Run the simulator over one axis and print CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Nms,
    SoftNms,
    ClusterNms,
    BoxVoting,
    Uoi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KeyArg {
    /// Proposals when every record has one, regressed boxes otherwise.
    Auto,
    Proposal,
    #[value(name = "box")]
    Regressed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SoftModeArg {
    Linear,
    Gaussian,
}

#[derive(Args)]
struct PostprocessArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Grouping / suppression IoU threshold.
    #[arg(long, default_value_t = 0.5)]
    k: f64,
    /// Members merged per group (UoI and box voting).
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 0.05)]
    score_floor: f64,
    /// Group across classes.
    #[arg(long)]
    class_agnostic: bool,
    /// Box the NMS family compares.
    #[arg(long, value_enum, default_value_t = KeyArg::Auto)]
    key: KeyArg,
    #[arg(long, value_enum, default_value_t = SoftModeArg::Gaussian)]
    soft_mode: SoftModeArg,
    /// Gaussian soft-NMS sigma.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dets: PathBuf,
    #[arg(long)]
    gts: PathBuf,
    /// IoU threshold for LRP and the localization/classification split.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
}

#[derive(Args)]
struct SimArgs {
    /// TOML config; defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted `key=value` override, repeatable (e.g. `postprocess.m=3`).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_parser = parse_pipeline)]
    pipeline: Option<Pipeline>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_parser = parse_axis)]
    axis: SweepAxis,
    /// Comma-separated values; proposal-quality bands are written `lo:hi`.
    #[arg(long)]
    values: String,
    /// Comma-separated pipelines.
    #[arg(long, default_value = "wta,uoi")]
    pipelines: String,
}

fn parse_pipeline(s: &str) -> Result<Pipeline, String> {
    Pipeline::parse(s).ok_or_else(|| format!("unknown pipeline `{s}` (expected wta, uoi or voting)"))
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    SweepAxis::parse(s).ok_or_else(|| {
        let names: Vec<_> = SweepAxis::ALL.iter().map(|a| a.name()).collect();
        format!("unknown axis `{s}` (expected one of {})", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Postprocess(a) => cmd_postprocess(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// `UOI_THREADS` caps the worker pool; unset means one worker per core.
fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("UOI_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("UOI_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Writes `bytes` to `path`, or standard output for `None`.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_postprocess(a: PostprocessArgs) -> Result<()> {
    let config = PostprocessConfig { k: a.k, m: a.m, score_floor: a.score_floor, per_class: !a.class_agnostic };
    config.validate()?;
    if a.soft_mode == SoftModeArg::Gaussian && !(a.sigma > 0.0 && a.sigma.is_finite()) {
        bail!("--sigma must be positive, got {}", a.sigma);
    }

    let grouped = matches!(a.method, MethodArg::Uoi | MethodArg::BoxVoting);
    let require_proposal = grouped || a.key == KeyArg::Proposal;
    let lines = read_detections(open(&a.input)?, require_proposal)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let key = match a.key {
        KeyArg::Proposal => BoxKey::Proposal,
        KeyArg::Regressed => BoxKey::Regressed,
        KeyArg::Auto if lines.iter().all(|l| l.proposal.is_some()) => BoxKey::Proposal,
        KeyArg::Auto => BoxKey::Regressed,
    };
    let method = match a.method {
        MethodArg::Nms => Method::Nms { key },
        MethodArg::ClusterNms => Method::ClusterNms { key },
        MethodArg::SoftNms => {
            let mode = match a.soft_mode {
                SoftModeArg::Linear => SoftNmsMode::Linear { iou_thresh: a.k },
                SoftModeArg::Gaussian => SoftNmsMode::Gaussian { sigma: a.sigma },
            };
            Method::SoftNms { key, mode }
        }
        MethodArg::BoxVoting => Method::BoxVoting,
        MethodArg::Uoi => Method::Uoi,
    };

    let records: Vec<_> = lines.iter().map(|l| l.to_record()).collect();
    let dets = postprocess_batch(&records, method, &config);
    let mut buf = Vec::new();
    write_detections(&mut buf, &dets)?;
    emit(a.out.as_deref(), &buf)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    if !(a.tau > 0.0 && a.tau < 1.0) {
        bail!("--tau must lie in (0, 1), got {}", a.tau);
    }
    let dets = read_detections(open(&a.dets)?, false).with_context(|| format!("reading {}", a.dets.display()))?;
    let gts = read_ground_truths(open(&a.gts)?).with_context(|| format!("reading {}", a.gts.display()))?;
    let dets: Vec<_> = dets.iter().enumerate().map(|(i, l)| l.to_detection(i)).collect();
    let gts: Vec<GroundTruth> = gts.into_iter().map(GroundTruth::from).collect();

    let gt_images: std::collections::HashSet<u64> = gts.iter().map(|g| g.image_id).collect();
    if !dets.iter().any(|d| gt_images.contains(&d.image_id)) {
        eprintln!("warning: detections and ground truth share no image_id; every detection is unmatched");
    }
    let report = evaluate(&dets, &gts, a.tau);
    emit(None, render_report(&report).as_bytes())
}

fn sim_config(a: &SimArgs) -> Result<SimConfig> {
    let mut config = match &a.config {
        Some(path) => load_sim_config(path, &a.overrides).with_context(|| format!("loading {}", path.display()))?,
        None => parse_sim_config("", &a.overrides)?,
    };
    if let Some(seed) = a.seed {
        config.rng_seed = seed;
    }
    Ok(config)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut config = sim_config(&a.sim)?;
    if let Some(p) = a.pipeline {
        config.pipeline = p;
    }
    let report = run_experiment(&config)?;
    emit(None, render_report(&report).as_bytes())
}

fn split_list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let config = sim_config(&a.sim)?;
    let values: Vec<AxisValue> = split_list(&a.values).map(|v| a.axis.parse_value(v)).collect::<Result<_, _>>()?;
    if values.is_empty() {
        bail!("--values is empty");
    }
    let pipelines: Vec<Pipeline> =
        split_list(&a.pipelines).map(|p| parse_pipeline(p).map_err(anyhow::Error::msg)).collect::<Result<_>>()?;
    if pipelines.is_empty() {
        bail!("--pipelines is empty");
    }
    let rows = sweep(&config, a.axis, &values, &pipelines)?;
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &rows)?;
    emit(None, &buf)
}
