use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::BBox;
use crate::grid::Image;

use super::dataset::{format_results_plain, SequenceDataset, GROUND_TRUTH_FILE, IMAGE_DIR};
use super::EvalError;

/// Constant velocity (px/frame) held for `frames` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSegment {
    pub frames: usize,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clutter {
    None,
    Low,
    #[default]
    Medium,
    High,
}

impl Clutter {
    fn blobs(self) -> usize {
        match self {
            Clutter::None => 0,
            Clutter::Low => 4,
            Clutter::Medium => 10,
            Clutter::High => 24,
        }
    }
}

impl std::str::FromStr for Clutter {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Clutter::None),
            "low" => Ok(Clutter::Low),
            "medium" => Ok(Clutter::Medium),
            "high" => Ok(Clutter::High),
            _ => Err(EvalError::Parse(format!("unknown clutter level {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Texture {
    Solid([f64; 3]),
    Checker { a: [f64; 3], b: [f64; 3], cell: usize },
    /// Saturated random colors in `cell`-pixel blocks, drawn from the sequence seed.
    RandomBlocks { cell: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub length: usize,
    pub target_size: usize,
    /// Top-left corner of the target in the first frame.
    pub start: (f64, f64),
    /// Applied in order; the target rests once they run out.
    pub path: Vec<MotionSegment>,
    pub texture: Texture,
    pub clutter: Clutter,
    /// Std of per-frame Gaussian pixel noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 64,
            height: 64,
            length: 100,
            target_size: 12,
            start: (10.0, 10.0),
            path: vec![
                MotionSegment { frames: 20, vx: 2.0, vy: 0.0 },
                MotionSegment { frames: 14, vx: 0.0, vy: 3.0 },
                MotionSegment { frames: 20, vx: -2.0, vy: -1.0 },
                MotionSegment { frames: 14, vx: 1.0, vy: -2.0 },
                MotionSegment { frames: 16, vx: 1.0, vy: 1.0 },
                MotionSegment { frames: 15, vx: -1.0, vy: 2.0 },
            ],
            texture: Texture::RandomBlocks { cell: 3 },
            clutter: Clutter::Medium,
            noise: 0.02,
            seed: 1,
        }
    }
}

impl SynthConfig {
    /// Top-left corner of the target in every frame.
    pub fn positions(&self) -> Vec<(f64, f64)> {
        let mut steps = self.path.iter().flat_map(|s| std::iter::repeat_n((s.vx, s.vy), s.frames));
        let mut p = self.start;
        let mut out = Vec::with_capacity(self.length);
        for _ in 0..self.length {
            out.push(p);
            if let Some((vx, vy)) = steps.next() {
                p = (p.0 + vx, p.1 + vy);
            }
        }
        out
    }

    pub fn ground_truth(&self) -> Vec<BBox> {
        let s = self.target_size as f64;
        self.positions().into_iter().map(|(x, y)| BBox::new(x, y, s, s)).collect()
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.target_size == 0 || self.width == 0 || self.height == 0 {
            return Err(EvalError::Synth("sizes must be positive".into()));
        }
        let s = self.target_size as f64;
        for (i, (x, y)) in self.positions().into_iter().enumerate() {
            if x < 0.0 || y < 0.0 || x + s > self.width as f64 || y + s > self.height as f64 {
                return Err(EvalError::Synth(format!("target leaves the frame at frame {i} ({x},{y})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub frames: Vec<Image>,
    pub ground_truth: Vec<BBox>,
}

fn saturated(rng: &mut ChaCha8Rng) -> [f64; 3] {
    // Random hue at full saturation and value.
    let h: f64 = rng.random_range(0.0..6.0);
    let f = h - h.floor();
    match h as usize {
        0 => [1.0, f, 0.0],
        1 => [1.0 - f, 1.0, 0.0],
        2 => [0.0, 1.0, f],
        3 => [0.0, 1.0 - f, 1.0],
        4 => [f, 0.0, 1.0],
        _ => [1.0, 0.0, 1.0 - f],
    }
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Renders the sequence. Identical configs give bit-identical frames, and
/// every value is on the 8-bit grid so frames survive a PNG round trip.
pub fn synth_sequence(cfg: &SynthConfig) -> Result<SyntheticSequence, EvalError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h, s) = (cfg.width, cfg.height, cfg.target_size);

    let texture: Vec<[f64; 3]> = match &cfg.texture {
        Texture::Solid(c) => vec![*c; s * s],
        Texture::Checker { a, b, cell } => {
            let cell = (*cell).max(1);
            (0..s * s)
                .map(|i| if ((i % s) / cell + (i / s) / cell) % 2 == 0 { *a } else { *b })
                .collect()
        }
        Texture::RandomBlocks { cell } => {
            let cell = (*cell).max(1);
            let n = s.div_ceil(cell);
            let palette: Vec<[f64; 3]> = (0..n * n).map(|_| saturated(&mut rng)).collect();
            (0..s * s).map(|i| palette[(i / s) / cell * n + (i % s) / cell]).collect()
        }
    };

    // Static background: soft gradient plus muted rectangles.
    let mut background = Image::new(w, h, 3);
    let tint: [f64; 3] = [rng.random_range(0.3..0.5), rng.random_range(0.3..0.5), rng.random_range(0.3..0.5)];
    for y in 0..h {
        for x in 0..w {
            let g = 0.1 * (x as f64 / w as f64) - 0.05 * (y as f64 / h as f64);
            for c in 0..3 {
                background.set(x, y, c, tint[c] + g);
            }
        }
    }
    for _ in 0..cfg.clutter.blobs() {
        let bw = rng.random_range(3..=s.max(4));
        let bh = rng.random_range(3..=s.max(4));
        let x0 = rng.random_range(0..w.saturating_sub(bw).max(1));
        let y0 = rng.random_range(0..h.saturating_sub(bh).max(1));
        let color = saturated(&mut rng);
        let mix: f64 = rng.random_range(0.3..0.6);
        for y in y0..(y0 + bh).min(h) {
            for x in x0..(x0 + bw).min(w) {
                for c in 0..3 {
                    let v = background.get(x, y, c);
                    background.set(x, y, c, (1.0 - mix) * v + mix * color[c]);
                }
            }
        }
    }

    let noise = (cfg.noise > 0.0).then(|| Normal::new(0.0, cfg.noise).expect("finite noise"));
    let ground_truth = cfg.ground_truth();
    let mut frames = Vec::with_capacity(cfg.length);
    for gt in &ground_truth {
        let mut frame = background.clone();
        let span = gt.pixel_span();
        for v in 0..s {
            for u in 0..s {
                let (x, y) = (span.x0 as usize + u, span.y0 as usize + v);
                if x < w && y < h {
                    for c in 0..3 {
                        frame.set(x, y, c, texture[v * s + u][c]);
                    }
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                    frame.set(x, y, c, quantize(frame.get(x, y, c) + n));
                }
            }
        }
        frames.push(frame);
    }
    Ok(SyntheticSequence { frames, ground_truth })
}

/// Writes `img/0001.png, ...` and the ground-truth file under `dir`.
pub fn write_sequence(seq: &SyntheticSequence, dir: &Path) -> Result<SequenceDataset, EvalError> {
    let io = |e: std::io::Error| EvalError::Io(format!("{}: {e}", dir.display()));
    let img_dir = dir.join(IMAGE_DIR);
    std::fs::create_dir_all(&img_dir).map_err(io)?;
    let mut paths = Vec::with_capacity(seq.frames.len());
    for (i, frame) in seq.frames.iter().enumerate() {
        let p = img_dir.join(format!("{:04}.png", i + 1));
        frame.save(&p).map_err(|e| EvalError::Io(format!("{}: {e}", p.display())))?;
        paths.push(p);
    }
    std::fs::write(dir.join(GROUND_TRUTH_FILE), format_results_plain(&seq.ground_truth)).map_err(io)?;
    Ok(SequenceDataset {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        frames: paths,
        ground_truth: seq.ground_truth.clone(),
        attributes: Vec::new(),
    })
}
