use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use saltrk::evalkit::{
    self, attribute_table, parse_boxes, parse_results, parse_tags, precision_curve, success_curve, synth_sequence,
    write_sequence, Clutter, EvalError, MotionSegment, SequenceScore, SynthConfig, PRECISION_MAX_ERROR,
};
use saltrk::feature_net::{load_weights, presets, save_weights, Network};
use saltrk::segmentation::{grabcut, seeds_from_saliency, SegmentationError};
use saltrk::tracker::{FrameOutput, TrackerError};
use saltrk::{Grid, Image, TrackResult, TrackerConfig, TrackerSession};

use crate::{DumpArgs, EvalArgs, SegmentArgs, SessionArgs, SynthArgs, TrackArgs};

/// Exit status 2 for bad input, 3 for a broken runtime invariant.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Display) -> Self {
        Failure { code: 2, message: message.to_string() }
    }

    pub fn runtime(message: impl Display) -> Self {
        Failure { code: 3, message: message.to_string() }
    }
}

impl From<TrackerError> for Failure {
    fn from(e: TrackerError) -> Self {
        match e {
            TrackerError::Svm(_) | TrackerError::Saliency(_) | TrackerError::Localization(_) => Failure::runtime(e),
            _ => Failure::input(e),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::input(e)
    }
}

impl From<SegmentationError> for Failure {
    fn from(e: SegmentationError) -> Self {
        match e {
            SegmentationError::Unsolvable { .. } => Failure::runtime(e),
            _ => Failure::input(e),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_image(path: &Path) -> Result<Image> {
    Image::load(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_network(spec: &Path, weights: &Path) -> Result<Network> {
    let (spec, weights, _) = load_weights(spec, weights).map_err(Failure::input)?;
    Network::new(spec, weights).map_err(Failure::input)
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrackerConfig> {
    let mut cfg = match path {
        Some(p) => TrackerConfig::from_file(p)?,
        None => TrackerConfig::default(),
    };
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    Ok(cfg)
}

/// Runs a session over the sequence, handing every frame's output to `visit`
/// until it returns `false`.
fn run_session(args: &SessionArgs, mut visit: impl FnMut(&FrameOutput) -> Result<bool>) -> Result<TrackResult> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let net = load_network(&args.net.0, &args.net.1)?;
    let frames = list_frames(&args.sequence)?;
    let Some(first) = frames.first() else {
        return Err(Failure::input(format!("{}: no frames", args.sequence.display())));
    };
    let (mut session, out) = TrackerSession::init(cfg, net, &load_image(first)?, args.init)?;
    let mut result = TrackResult { frames: vec![out.record.clone()] };
    if !visit(&out)? {
        return Ok(result);
    }
    for path in &frames[1..] {
        let out = session.step(&load_image(path)?)?;
        result.frames.push(out.record.clone());
        if !visit(&out)? {
            break;
        }
    }
    Ok(result)
}

/// Image files under `dir/img`, sorted by name.
fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let img = dir.join(evalkit::IMAGE_DIR);
    let mut frames: Vec<PathBuf> = fs::read_dir(&img)
        .map_err(|e| Failure::input(format!("{}: {e}", img.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg" | "bmp"))
        })
        .collect();
    frames.sort();
    Ok(frames)
}

pub fn track(args: TrackArgs) -> Result<()> {
    if let Some(dir) = &args.dump_dir {
        create_dir(dir)?;
    }
    let result = run_session(&args.session, |out| {
        if let Some(dir) = &args.dump_dir {
            let i = out.record.frame_index;
            let png = dir.join(format!("saliency_{i:04}.png"));
            out.saliency.save_png(&png).map_err(|e| Failure::input(format!("{}: {e}", png.display())))?;
            write_file(&dir.join(format!("saliency_{i:04}.csv")), out.saliency.to_csv())?;
            write_file(&dir.join(format!("posterior_{i:04}.csv")), out.posterior.mass().to_csv())?;
        }
        Ok(true)
    })?;
    write_file(&args.out, result.to_csv())?;
    println!("tracked {} frames -> {}", result.frames.len(), args.out.display());
    Ok(())
}

pub fn dump_saliency(args: DumpArgs) -> Result<()> {
    let mut found = None;
    run_session(&args.session, |out| {
        if out.record.frame_index == args.frame {
            found = Some((out.saliency.clone(), out.posterior.clone()));
            return Ok(false);
        }
        Ok(true)
    })?;
    let Some((saliency, posterior)) = found else {
        return Err(Failure::input(format!("frame {} is past the end of the sequence", args.frame)));
    };
    saliency
        .save_png(&args.out)
        .map_err(|e| Failure::input(format!("{}: {e}", args.out.display())))?;
    if let Some(p) = &args.raw {
        write_file(p, saliency.to_csv())?;
    }
    if let Some(p) = &args.posterior {
        write_file(p, posterior.mass().to_csv())?;
    }
    println!("frame {} saliency max {:e} -> {}", args.frame, saliency.max(), args.out.display());
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let pred = parse_results(&read_file(&args.results)?)?;
    if pred.is_empty() {
        return Err(Failure::input(format!("{}: no results", args.results.display())));
    }
    let gt_dir = args.gt.is_dir().then(|| args.gt.clone());
    let gt_file = match &gt_dir {
        Some(d) => d.join(evalkit::GROUND_TRUTH_FILE),
        None => args.gt.clone(),
    };
    let gt = parse_boxes(&read_file(&gt_file)?)?;
    let success = success_curve(&pred, &gt)?;
    let precision = precision_curve(&pred, &gt, PRECISION_MAX_ERROR)?;

    let out_dir = match &args.out_dir {
        Some(d) => d.clone(),
        None => args.results.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !out_dir.as_os_str().is_empty() {
        create_dir(&out_dir)?;
    }
    let stem = args.results.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let success_path = out_dir.join(format!("{stem}_success.csv"));
    let precision_path = out_dir.join(format!("{stem}_precision.csv"));
    write_file(&success_path, success.to_csv())?;
    write_file(&precision_path, precision.to_csv())?;

    println!("AUC {:.6}", success.summary);
    println!("Precision@20 {:.6}", precision.summary);

    let tags = match (&args.attr, &gt_dir) {
        (Some(t), _) => parse_tags(t)?,
        (None, Some(d)) if d.join(evalkit::ATTRIBUTES_FILE).exists() => {
            parse_tags(&read_file(&d.join(evalkit::ATTRIBUTES_FILE))?)?
        }
        _ => Vec::new(),
    };
    if !tags.is_empty() {
        let table = attribute_table(&[SequenceScore { name: stem, score: success.summary, tags }]);
        print!("{}", table.to_text());
    }
    println!("curves -> {}, {}", success_path.display(), precision_path.display());
    Ok(())
}

/// Splits `frames - 1` moves evenly over the given velocities.
fn motion_path(frames: usize, vel: &[(f64, f64)]) -> Vec<MotionSegment> {
    let moves = frames.saturating_sub(1);
    let n = vel.len();
    vel.iter()
        .enumerate()
        .map(|(i, &(vx, vy))| MotionSegment {
            frames: moves / n + usize::from(i < moves % n),
            vx,
            vy,
        })
        .collect()
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let clutter: Clutter = args.clutter.parse()?;
    let mut cfg = SynthConfig {
        width: args.size,
        height: args.size,
        length: args.frames,
        target_size: args.target,
        clutter,
        noise: args.noise,
        seed: args.seed,
        ..SynthConfig::default()
    };
    if let Some(start) = args.start {
        cfg.start = start;
    }
    if !args.vel.is_empty() {
        cfg.path = motion_path(args.frames, &args.vel);
    }
    let seq = synth_sequence(&cfg)?;
    write_sequence(&seq, &args.out)?;
    let net = presets::handcrafted(args.target);
    save_weights(
        net.spec(),
        net.weights(),
        &args.out.join("net.manifest"),
        &args.out.join("net.weights"),
    )
    .map_err(Failure::input)?;
    let b = seq.ground_truth[0];
    println!(
        "{} frames -> {} (init {},{},{},{}; net {},{})",
        seq.frames.len(),
        args.out.display(),
        b.x,
        b.y,
        b.w,
        b.h,
        args.out.join("net.manifest").display(),
        args.out.join("net.weights").display()
    );
    Ok(())
}

fn load_saliency(path: &Path) -> Result<Grid> {
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        let img = image::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?.to_luma8();
        let (w, h) = img.dimensions();
        return Ok(Grid::from_fn(w as usize, h as usize, |x, y| {
            f64::from(img.get_pixel(x as u32, y as u32)[0]) / 255.0
        }));
    }
    Grid::from_csv(&read_file(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn segment(args: SegmentArgs) -> Result<()> {
    let frame = load_image(&args.image)?;
    let saliency = load_saliency(&args.saliency)?;
    if saliency.dims() != frame.dims() {
        return Err(Failure::input(format!(
            "saliency is {:?} but the image is {:?}",
            saliency.dims(),
            frame.dims()
        )));
    }
    let trimap = seeds_from_saliency(&saliency, &args.bbox, args.fg_fraction, args.margin);
    let seg = grabcut(&frame, &trimap, args.iterations)?;
    seg.mask.save(&args.out)?;
    println!(
        "{} foreground pixels, energy {:.3} -> {}",
        seg.mask.count(),
        seg.energy.last().copied().unwrap_or(0.0),
        args.out.display()
    );
    Ok(())
}
