//! Per-frame orchestration: sampling, classification, saliency, localization
//! and gated model updates.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::feature_net::{ActivationCache, ImagePatch, NetError, Network};
use crate::geometry::{BBox, TargetState};
use crate::grid::Image;
use crate::localization::{
    estimate_transition, likelihood_map, posterior_and_map, predict_prior, Boundary, GenerativeFilter,
    LocalizationError, PosteriorGrid, TransitionEstimate,
};
use crate::online_svm::{SvmError, SvmModel};
use crate::saliency::{aggregate, project_and_pad, sample_gradient, SaliencyError, SaliencyMap};

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("frame is {found:?} but the session was started on {expected:?}")]
    FrameSize {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("initial box {0} is not inside the first frame")]
    InitBox(BBox),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Saliency(#[from] SaliencyError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Tracker constants. Every field has a default.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub n_samples: usize,
    pub label_threshold: f64,
    pub filter_memory: usize,
    pub svm_c: f64,
    pub sv_budget: usize,
    pub sigma_min: f64,
    pub likelihood_floor: f64,
    pub rng_seed: u64,
    /// Sample std as a multiple of `sqrt(w h)`.
    pub sample_std_factor: f64,
    /// Largest covariance inflation while no sample scores positive.
    pub max_inflation: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            n_samples: 120,
            label_threshold: 0.3,
            filter_memory: crate::localization::DEFAULT_FILTER_MEMORY,
            svm_c: crate::online_svm::DEFAULT_C,
            sv_budget: crate::online_svm::DEFAULT_BUDGET,
            sigma_min: crate::localization::DEFAULT_SIGMA_MIN,
            likelihood_floor: crate::localization::DEFAULT_LIKELIHOOD_FLOOR,
            rng_seed: 0,
            sample_std_factor: 0.5,
            max_inflation: 4.0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |m: &str| Err(TrackerError::Invalid(m.to_string()));
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1");
        }
        if !(self.label_threshold > 0.0 && self.label_threshold < 1.0) {
            return bad("label_threshold must lie in (0, 1)");
        }
        if self.filter_memory == 0 {
            return bad("filter_memory must be at least 1");
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return bad("svm_c must be positive");
        }
        if self.sv_budget == 0 {
            return bad("sv_budget must be at least 1");
        }
        if !(self.sigma_min > 0.0) || !(self.likelihood_floor > 0.0) {
            return bad("sigma_min and likelihood_floor must be positive");
        }
        if !(self.sample_std_factor >= 0.0) || !(self.max_inflation >= 1.0) {
            return bad("sample_std_factor must be >= 0 and max_inflation >= 1");
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_str(&mut self, text: &str) -> Result<(), TrackerError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| TrackerError::Config { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            self.set(key.trim(), value.trim()).map_err(err)?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn p<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("bad value {v:?} for {key}"))
        }
        match key {
            "n_samples" => self.n_samples = p(key, value)?,
            "label_threshold" => self.label_threshold = p(key, value)?,
            "filter_memory" => self.filter_memory = p(key, value)?,
            "svm_c" => self.svm_c = p(key, value)?,
            "sv_budget" => self.sv_budget = p(key, value)?,
            "sigma_min" => self.sigma_min = p(key, value)?,
            "likelihood_floor" => self.likelihood_floor = p(key, value)?,
            "rng_seed" => self.rng_seed = p(key, value)?,
            "sample_std_factor" => self.sample_std_factor = p(key, value)?,
            "max_inflation" => self.max_inflation = p(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, TrackerError> {
        let text = std::fs::read_to_string(path).map_err(|source| TrackerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = TrackerConfig::default();
        cfg.apply_str(&text)?;
        Ok(cfg)
    }
}

impl fmt::Display for TrackerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_samples = {}", self.n_samples)?;
        writeln!(f, "label_threshold = {}", self.label_threshold)?;
        writeln!(f, "filter_memory = {}", self.filter_memory)?;
        writeln!(f, "svm_c = {}", self.svm_c)?;
        writeln!(f, "sv_budget = {}", self.sv_budget)?;
        writeln!(f, "sigma_min = {}", self.sigma_min)?;
        writeln!(f, "likelihood_floor = {:e}", self.likelihood_floor)?;
        writeln!(f, "rng_seed = {}", self.rng_seed)?;
        writeln!(f, "sample_std_factor = {}", self.sample_std_factor)?;
        writeln!(f, "max_inflation = {}", self.max_inflation)
    }
}

/// `n` boxes around `prev` with integer centers drawn from an isotropic Gaussian
/// (std `factor * sqrt(w h)`), clamped so the box stays inside the frame.
pub fn draw_samples(
    prev: &TargetState,
    n: usize,
    std_factor: f64,
    frame: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> Vec<TargetState> {
    let std = std_factor * (prev.w * prev.h).sqrt();
    let (lo_x, hi_x) = center_range(prev.w, frame.0);
    let (lo_y, hi_y) = center_range(prev.h, frame.1);
    let normal = (std > 0.0).then(|| Normal::new(0.0, std).expect("finite std"));
    (0..n)
        .map(|_| {
            let (dx, dy) = match &normal {
                Some(d) => (d.sample(rng), d.sample(rng)),
                None => (0.0, 0.0),
            };
            let cx = (prev.cx + dx).round().clamp(lo_x, hi_x);
            let cy = (prev.cy + dy).round().clamp(lo_y, hi_y);
            prev.with_center(cx, cy)
        })
        .collect()
}

/// Integer center range keeping a box of `size` inside `[0, extent)`.
fn center_range(size: f64, extent: usize) -> (f64, f64) {
    let lo = (size / 2.0).ceil();
    let hi = (extent as f64 - size / 2.0).floor();
    if lo <= hi {
        (lo, hi)
    } else {
        let mid = (extent as f64 / 2.0).floor();
        (mid, mid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Negative,
    Excluded,
}

impl Label {
    pub fn value(self) -> Option<f64> {
        match self {
            Label::Positive => Some(1.0),
            Label::Negative => Some(-1.0),
            Label::Excluded => None,
        }
    }
}

/// One `+1` at `optimal` (appended when no sample equals it), `-1` below
/// `threshold` overlap, everything else excluded.
pub fn label_samples(optimal: &TargetState, samples: &[TargetState], threshold: f64) -> Vec<(TargetState, Label)> {
    let target = optimal.bbox();
    let mut have_positive = false;
    let mut out: Vec<(TargetState, Label)> = samples
        .iter()
        .map(|s| {
            let label = if !have_positive && s == optimal {
                have_positive = true;
                Label::Positive
            } else if target.iou(&s.bbox()) < threshold {
                Label::Negative
            } else {
                Label::Excluded
            };
            (*s, label)
        })
        .collect();
    if !have_positive {
        out.push((*optimal, Label::Positive));
    }
    out
}

/// Summary of one processed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_index: usize,
    pub state: TargetState,
    pub positives: usize,
    pub map_probability: f64,
    pub updated: bool,
}

/// Full output of one step, including the dense maps.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub record: FrameRecord,
    pub saliency: SaliencyMap,
    pub posterior: PosteriorGrid,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackResult {
    pub frames: Vec<FrameRecord>,
}

impl TrackResult {
    pub fn boxes(&self) -> Vec<BBox> {
        self.frames.iter().map(|f| f.state.bbox()).collect()
    }

    /// `frame_index,x,y,w,h` per line, no header.
    pub fn to_csv(&self) -> String {
        self.frames
            .iter()
            .map(|f| format!("{},{}\n", f.frame_index, f.state.bbox()))
            .collect()
    }
}

struct Evaluated {
    state: TargetState,
    feature: Vec<f64>,
    cache: ActivationCache,
    score: f64,
}

pub struct TrackerSession {
    cfg: TrackerConfig,
    net: Network,
    svm: SvmModel,
    filter: GenerativeFilter,
    posterior: PosteriorGrid,
    transition: TransitionEstimate,
    inflation: f64,
    frame_dims: (usize, usize),
    state: TargetState,
    rng: ChaCha8Rng,
    next_index: usize,
}

impl TrackerSession {
    /// Trains on the first frame around the ground-truth box.
    pub fn init(cfg: TrackerConfig, net: Network, frame: &Image, init: BBox) -> Result<(Self, FrameOutput), TrackerError> {
        cfg.validate()?;
        let dims = frame.dims();
        let span = init.pixel_span();
        if !init.is_valid() || span.x0 < 0 || span.y0 < 0 || span.x1 > dims.0 as isize || span.y1 > dims.1 as isize {
            return Err(TrackerError::InitBox(init));
        }
        let state = TargetState::from_bbox(&init);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let samples = draw_samples(&state, cfg.n_samples, cfg.sample_std_factor, dims, &mut rng);
        let (crop_w, crop_h) = state.crop_size();

        let gx = (state.cx.round().max(0.0) as usize).min(dims.0 - 1);
        let gy = (state.cy.round().max(0.0) as usize).min(dims.1 - 1);
        let mut session = TrackerSession {
            svm: SvmModel::new(cfg.svm_c)?,
            filter: GenerativeFilter::new(crop_w, crop_h, cfg.filter_memory),
            posterior: PosteriorGrid::delta(dims.0, dims.1, gx, gy),
            transition: TransitionEstimate::still(cfg.sigma_min * cfg.sigma_min),
            inflation: 1.0,
            frame_dims: dims,
            state,
            rng,
            next_index: 1,
            cfg,
            net,
        };

        let evaluated = session.evaluate(frame, &samples)?;
        session.train(frame, &state, &evaluated)?;

        // Saliency from the ground-truth sample plus any positively scored samples.
        let w = session.svm.weight_vector();
        let (_, gt_cache) = session.extract(frame, &state)?;
        let mut grads = vec![project_and_pad(
            &sample_gradient(&session.net, &gt_cache, state.bbox(), &w, 1.0)?,
            dims.0,
            dims.1,
        )];
        for e in &evaluated {
            if let Ok(score) = session.svm.predict(&e.feature) {
                if score > 0.0 {
                    let sg = sample_gradient(&session.net, &e.cache, e.state.bbox(), &w, score)?;
                    grads.push(project_and_pad(&sg, dims.0, dims.1));
                }
            }
        }
        let saliency = aggregate(&grads, dims.0, dims.1, 0)?;
        session.filter.update(&saliency, &state);

        let record = FrameRecord {
            frame_index: 0,
            state,
            positives: 1,
            map_probability: 1.0,
            updated: true,
        };
        let output = FrameOutput {
            record,
            saliency,
            posterior: session.posterior.clone(),
        };
        Ok((session, output))
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn svm(&self) -> &SvmModel {
        &self.svm
    }

    pub fn filter(&self) -> &GenerativeFilter {
        &self.filter
    }

    pub fn posterior(&self) -> &PosteriorGrid {
        &self.posterior
    }

    pub fn state(&self) -> TargetState {
        self.state
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    fn extract(&self, frame: &Image, s: &TargetState) -> Result<(Vec<f64>, ActivationCache), NetError> {
        let patch = ImagePatch::crop_resize(frame, &s.bbox(), self.net.input_shape())?;
        let (f, cache) = self.net.forward(&patch)?;
        Ok((f.values, cache))
    }

    fn evaluate(&self, frame: &Image, samples: &[TargetState]) -> Result<Vec<Evaluated>, TrackerError> {
        samples
            .par_iter()
            .map(|s| {
                let (feature, cache) = self.extract(frame, s)?;
                let score = self.svm.predict(&feature)?;
                Ok(Evaluated {
                    state: *s,
                    feature,
                    cache,
                    score,
                })
            })
            .collect()
    }

    /// Labels the evaluated samples around `optimal` and feeds them to the SVM.
    fn train(&mut self, frame: &Image, optimal: &TargetState, evaluated: &[Evaluated]) -> Result<(), TrackerError> {
        let states: Vec<TargetState> = evaluated.iter().map(|e| e.state).collect();
        let labels = label_samples(optimal, &states, self.cfg.label_threshold);
        let mut batch: Vec<(Vec<f64>, f64)> = Vec::new();
        for (i, (s, label)) in labels.iter().enumerate() {
            let Some(y) = label.value() else { continue };
            let feature = match evaluated.get(i) {
                Some(e) => e.feature.clone(),
                None => self.extract(frame, s)?.0,
            };
            batch.push((feature, y));
        }
        // Positive first so the model is never one-class for long.
        batch.sort_by(|a, b| b.1.total_cmp(&a.1));
        self.svm.partial_fit(&batch)?;
        self.svm.prune_to_budget(self.cfg.sv_budget)?;
        Ok(())
    }

    pub fn step(&mut self, frame: &Image) -> Result<FrameOutput, TrackerError> {
        if frame.dims() != self.frame_dims {
            return Err(TrackerError::FrameSize {
                expected: self.frame_dims,
                found: frame.dims(),
            });
        }
        let index = self.next_index;
        let (fw, fh) = self.frame_dims;
        let samples = draw_samples(&self.state, self.cfg.n_samples, self.cfg.sample_std_factor, self.frame_dims, &mut self.rng);
        let evaluated = self.evaluate(frame, &samples)?;
        let positives: Vec<&Evaluated> = evaluated.iter().filter(|e| e.score > 0.0).collect();

        let w = self.svm.weight_vector();
        let grads: Vec<_> = positives
            .par_iter()
            .map(|e| {
                sample_gradient(&self.net, &e.cache, e.state.bbox(), &w, e.score).map(|sg| project_and_pad(&sg, fw, fh))
            })
            .collect::<Result<_, _>>()?;
        let saliency = aggregate(&grads, fw, fh, index)?;

        let (record, posterior) = if positives.is_empty() {
            self.inflation = (self.inflation * 2.0).min(self.cfg.max_inflation);
            let t = self.transition.scaled_covariance(self.inflation);
            let prior = predict_prior(&self.posterior, &t, Boundary::Clip);
            let ((x, y), p) = prior.argmax();
            let state = self.state.with_center(x as f64, y as f64);
            self.state = state;
            let record = FrameRecord {
                frame_index: index,
                state,
                positives: 0,
                map_probability: p,
                updated: false,
            };
            (record, prior)
        } else {
            let centers: Vec<(f64, f64)> = positives.iter().map(|e| e.state.center()).collect();
            self.transition = estimate_transition(&centers, &self.state, self.cfg.sigma_min)?;
            self.inflation = 1.0;
            let prior = predict_prior(&self.posterior, &self.transition, Boundary::Clip);
            let lik = likelihood_map(self.filter.values(), &saliency.values, self.cfg.likelihood_floor)?;
            let (post, state, p) = posterior_and_map(&prior, &lik, self.state.w, self.state.h)?;
            self.train(frame, &state, &evaluated)?;
            self.filter.update(&saliency, &state);
            self.state = state;
            let record = FrameRecord {
                frame_index: index,
                state,
                positives: positives.len(),
                map_probability: p,
                updated: true,
            };
            (record, post)
        };
        self.posterior = posterior.clone();
        self.next_index += 1;
        Ok(FrameOutput {
            record,
            saliency,
            posterior,
        })
    }
}

/// Runs a session over `frames`, starting from `init` on the first one.
pub fn track_frames<I>(cfg: TrackerConfig, net: Network, mut frames: I, init: BBox) -> Result<TrackResult, TrackerError>
where
    I: Iterator<Item = Result<Image, TrackerError>>,
{
    let Some(first) = frames.next() else {
        return Ok(TrackResult::default());
    };
    let (mut session, out) = TrackerSession::init(cfg, net, &first?, init)?;
    let mut result = TrackResult {
        frames: vec![out.record],
    };
    for frame in frames {
        result.frames.push(session.step(&frame?)?.record);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn default_sample_count_and_zero_std() {
        let prev = TargetState::new(32.0, 32.0, 12.0, 12.0);
        let cfg = TrackerConfig::default();
        let s = draw_samples(&prev, cfg.n_samples, cfg.sample_std_factor, (64, 64), &mut rng());
        assert_eq!(s.len(), 120);
        let s = draw_samples(&prev, 10, 0.0, (64, 64), &mut rng());
        assert!(s.iter().all(|x| *x == prev));
    }

    #[test]
    fn samples_stay_inside_frame() {
        let prev = TargetState::new(6.0, 58.0, 12.0, 12.0);
        for s in draw_samples(&prev, 500, 0.5, (64, 64), &mut rng()) {
            let b = s.bbox();
            assert!(b.x >= 0.0 && b.y >= 0.0 && b.x + b.w <= 64.0 && b.y + b.h <= 64.0);
            assert_eq!((s.w, s.h), (12.0, 12.0));
        }
    }

    #[test]
    fn labelling_rule() {
        let opt = TargetState::new(10.0, 10.0, 10.0, 10.0);
        let same = opt;
        let far = TargetState::new(30.0, 30.0, 10.0, 10.0);
        // Horizontal offset 10 * (1 - 2/3): IoU = 0.5.
        let half = TargetState::new(10.0 + 10.0 / 3.0, 10.0, 10.0, 10.0);
        let labels = label_samples(&opt, &[far, half, same, same], 0.3);
        let l: Vec<Label> = labels.iter().map(|x| x.1).collect();
        assert_eq!(l, vec![Label::Negative, Label::Excluded, Label::Positive, Label::Excluded]);

        let labels = label_samples(&opt, &[far], 0.3);
        assert_eq!(labels.len(), 2);
        assert_eq!(labels[1], (opt, Label::Positive));
    }

    #[test]
    fn config_parsing() {
        let mut cfg = TrackerConfig::default();
        cfg.apply_str("# comment\nn_samples = 50\nlabel_threshold=0.25 # inline\n").unwrap();
        assert_eq!(cfg.n_samples, 50);
        assert_eq!(cfg.label_threshold, 0.25);
        assert!(cfg.clone().apply_str("bogus = 1").is_err());
        assert!(cfg.clone().apply_str("n_samples = 0").is_err());
        assert!(cfg.clone().apply_str("label_threshold").is_err());
        let mut round = TrackerConfig::default();
        round.apply_str(&cfg.to_string()).unwrap();
        assert_eq!(round, cfg);
    }
}
