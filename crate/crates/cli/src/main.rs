mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use saltrk::BBox;

/// Saliency-driven visual tracking.
#[derive(Debug, Parser)]
#[command(name = "saltrk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track a target through an image sequence and write per-frame boxes.
    Track(TrackArgs),
    /// Score a results file against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic sequence and a matching handcrafted network.
    Synth(SynthArgs),
    /// Write the saliency map of one frame as a grayscale image.
    DumpSaliency(DumpArgs),
    /// Segment the target from a frame and its saliency map.
    Segment(SegmentArgs),
}

#[derive(Debug, Args)]
struct SessionArgs {
    /// Benchmark-layout directory with img/ and groundtruth_rect.txt.
    #[arg(long)]
    sequence: PathBuf,
    /// Network manifest and weight blob.
    #[arg(long, value_name = "SPEC,WEIGHTS", value_parser = parse_pair)]
    net: (PathBuf, PathBuf),
    /// Target box in the first frame.
    #[arg(long, value_name = "x,y,w,h", value_parser = parse_box, allow_hyphen_values = true)]
    init: BBox,
    /// `key = value` tracker settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the sampling seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrackArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Results CSV (`frame_index,x,y,w,h`).
    #[arg(long)]
    out: PathBuf,
    /// Per-frame saliency and posterior dumps.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Results CSV written by `track`.
    #[arg(long)]
    results: PathBuf,
    /// Sequence directory or ground-truth file.
    #[arg(long)]
    gt: PathBuf,
    /// Attribute tags of the sequence, e.g. `BC,FM`.
    #[arg(long)]
    attr: Option<String>,
    /// Where the curve CSVs go; defaults to the results file's directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    /// Constant velocity per segment; repeat for a piecewise path.
    #[arg(long, value_name = "vx,vy", value_parser = parse_vel, allow_hyphen_values = true)]
    vel: Vec<(f64, f64)>,
    /// Frame side length.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Target side length.
    #[arg(long, default_value_t = 12)]
    target: usize,
    /// Top-left corner of the target in the first frame.
    #[arg(long, value_name = "x,y", value_parser = parse_vel, allow_hyphen_values = true)]
    start: Option<(f64, f64)>,
    /// none, low, medium or high.
    #[arg(long, default_value = "medium")]
    clutter: String,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Zero-based frame index.
    #[arg(long)]
    frame: usize,
    /// Grayscale PNG, maximum saliency mapped to 255.
    #[arg(long)]
    out: PathBuf,
    /// Raw float grid of the same map.
    #[arg(long)]
    raw: Option<PathBuf>,
    /// Posterior grid of the same frame.
    #[arg(long)]
    posterior: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Color frame.
    #[arg(long)]
    image: PathBuf,
    /// Saliency grid as CSV, or a grayscale PNG.
    #[arg(long)]
    saliency: PathBuf,
    /// Target box in the frame.
    #[arg(long = "box", value_name = "x,y,w,h", value_parser = parse_box, allow_hyphen_values = true)]
    bbox: BBox,
    /// Mask output, `.pbm` or `.png`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = saltrk::segmentation::DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = saltrk::segmentation::DEFAULT_FG_FRACTION)]
    fg_fraction: f64,
    #[arg(long, default_value_t = saltrk::segmentation::DEFAULT_BG_MARGIN)]
    margin: usize,
}

fn parse_box(s: &str) -> Result<BBox, String> {
    let b: BBox = s.parse()?;
    if !b.is_valid() {
        return Err(format!("box {s:?} must have positive width and height"));
    }
    Ok(b)
}

fn parse_vel(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated numbers, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}"));
    Ok((num(a)?, num(b)?))
}

fn parse_pair(s: &str) -> Result<(PathBuf, PathBuf), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected SPEC,WEIGHTS, got {s:?}"))?;
    Ok((PathBuf::from(a), PathBuf::from(b)))
}

fn init_threads() -> Result<(), commands::Failure> {
    let n = match std::env::var("SALTRK_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| commands::Failure::input(format!("SALTRK_THREADS must be a count, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| commands::Failure::runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Track(a) => commands::track(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
        Command::DumpSaliency(a) => commands::dump_saliency(a),
        Command::Segment(a) => commands::segment(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
