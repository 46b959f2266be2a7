//! Saliency-seeded foreground segmentation by iterated graph cuts.

mod gmm;
mod maxflow;

use std::path::Path;

use thiserror::Error;

use crate::geometry::BBox;
use crate::grid::{Grid, Image};

pub use gmm::{Component, Gmm};
pub use maxflow::{FlowNetwork, MaxFlow};

pub const DEFAULT_FG_FRACTION: f64 = 0.7;
pub const DEFAULT_BG_MARGIN: usize = 50;
pub const DEFAULT_ITERATIONS: usize = 5;
pub const MIXTURE_COMPONENTS: usize = 5;
pub const CONTRAST_WEIGHT: f64 = 50.0;
pub const VARIANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("unsolvable trimap: {fg} foreground and {bg} background seeds")]
    Unsolvable { fg: usize, bg: usize },
    #[error("image {image:?} and trimap {trimap:?} differ in size")]
    DimMismatch {
        image: (usize, usize),
        trimap: (usize, usize),
    },
    #[error("segmentation needs a 3-channel image, got {0} channels")]
    Channels(usize),
    #[error("cannot write mask: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seed {
    Foreground,
    Background,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trimap {
    width: usize,
    height: usize,
    labels: Vec<Seed>,
}

impl Trimap {
    pub fn new(width: usize, height: usize, labels: Vec<Seed>) -> Self {
        assert_eq!(labels.len(), width * height, "trimap size mismatch");
        Trimap { width, height, labels }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> Seed {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[Seed] {
        &self.labels
    }

    pub fn count(&self, seed: Seed) -> usize {
        self.labels.iter().filter(|&&s| s == seed).count()
    }

    pub fn check_solvable(&self) -> Result<(), SegmentationError> {
        let (fg, bg) = (self.count(Seed::Foreground), self.count(Seed::Background));
        if fg == 0 || bg == 0 {
            return Err(SegmentationError::Unsolvable { fg, bg });
        }
        Ok(())
    }
}

/// Foreground seeds where saliency reaches `fg_fraction` of its maximum inside
/// the box; background seeds in the `bg_margin`-pixel ring around the box.
pub fn seeds_from_saliency(saliency: &Grid, bbox: &BBox, fg_fraction: f64, bg_margin: usize) -> Trimap {
    let (w, h) = saliency.dims();
    let span = bbox.pixel_span();
    let inner = span.clip(w, h);
    let m = bg_margin as isize;
    let threshold = fg_fraction * saliency.max();
    let positive = saliency.max() > 0.0;
    let mut labels = vec![Seed::Unknown; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let inside = xi >= inner.x0 && xi < inner.x1 && yi >= inner.y0 && yi < inner.y1;
            labels[y * w + x] = if inside {
                if positive && saliency.get(x, y) >= threshold {
                    Seed::Foreground
                } else {
                    Seed::Unknown
                }
            } else if xi >= span.x0 - m && xi < span.x1 + m && yi >= span.y0 - m && yi < span.y1 + m {
                Seed::Background
            } else {
                Seed::Unknown
            };
        }
    }
    Trimap::new(w, h, labels)
}

/// Binary foreground mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height, "mask size mismatch");
        Mask { width, height, data }
    }

    pub fn from_box(width: usize, height: usize, bbox: &BBox) -> Self {
        let s = bbox.pixel_span().clip(width, height);
        let data = (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as isize, (i / width) as isize);
                x >= s.x0 && x < s.x1 && y >= s.y0 && y < s.y1
            })
            .collect();
        Mask { width, height, data }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Intersection over union of the foreground sets; 1 when both are empty.
    pub fn iou(&self, other: &Mask) -> f64 {
        let inter = self.data.iter().zip(&other.data).filter(|(a, b)| **a && **b).count();
        let union = self.data.iter().zip(&other.data).filter(|(a, b)| **a || **b).count();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Plain PBM (`P1`), foreground as 1.
    pub fn to_pbm(&self) -> String {
        let mut s = format!("P1\n{} {}\n", self.width, self.height);
        for row in self.data.chunks(self.width) {
            let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    /// Writes PBM for a `.pbm` extension and a black/white 8-bit PNG otherwise.
    pub fn save(&self, path: &Path) -> Result<(), SegmentationError> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pbm")) {
            return std::fs::write(path, self.to_pbm()).map_err(|e| SegmentationError::Io(e.to_string()));
        }
        let pixels: Vec<u8> = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, pixels)
            .expect("buffer matches mask size")
            .save(path)
            .map_err(|e| SegmentationError::Io(e.to_string()))
    }
}

/// Result of [`grabcut`]: the mask and the energy after every cut.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub mask: Mask,
    pub energy: Vec<f64>,
}

const NEIGHBORS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (-1, 1)];

struct Problem<'a> {
    w: usize,
    h: usize,
    pixels: Vec<[f64; 3]>,
    trimap: &'a Trimap,
    /// `(p, q, weight)` for every unordered 8-neighbor pair.
    pairs: Vec<(usize, usize, f64)>,
}

impl<'a> Problem<'a> {
    fn new(image: &Image, trimap: &'a Trimap) -> Self {
        let (w, h) = image.dims();
        let pixels: Vec<[f64; 3]> = (0..w * h)
            .map(|i| {
                let p = image.pixel(i % w, i / w);
                [p[0], p[1], p[2]]
            })
            .collect();
        let sq = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>();
        let mut raw = Vec::new();
        for y in 0..h as isize {
            for x in 0..w as isize {
                for &(dx, dy) in &NEIGHBORS {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let p = y as usize * w + x as usize;
                    let q = ny as usize * w + nx as usize;
                    let dist = ((dx * dx + dy * dy) as f64).sqrt();
                    raw.push((p, q, sq(&pixels[p], &pixels[q]), dist));
                }
            }
        }
        let mean = if raw.is_empty() {
            0.0
        } else {
            raw.iter().map(|r| r.2).sum::<f64>() / raw.len() as f64
        };
        let beta = if mean > 0.0 { 1.0 / (2.0 * mean) } else { 0.0 };
        let pairs = raw
            .into_iter()
            .map(|(p, q, d2, dist)| (p, q, CONTRAST_WEIGHT * (-beta * d2).exp() / dist))
            .collect();
        Problem { w, h, pixels, trimap, pairs }
    }

    fn samples(&self, labels: &[bool], fg: bool) -> Vec<[f64; 3]> {
        self.pixels
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == fg)
            .map(|(p, _)| *p)
            .collect()
    }

    fn energy(&self, labels: &[bool], fg: &Gmm, bg: &Gmm) -> f64 {
        let unary: f64 = self
            .pixels
            .iter()
            .zip(labels)
            .map(|(z, &l)| if l { fg.cost(z) } else { bg.cost(z) })
            .sum();
        let pairwise: f64 = self.pairs.iter().filter(|(p, q, _)| labels[*p] != labels[*q]).map(|e| e.2).sum();
        unary + pairwise
    }

    /// Exact minimizer of the energy over unknown pixels for fixed models.
    fn cut(&self, fg: &Gmm, bg: &Gmm) -> Vec<bool> {
        let n = self.w * self.h;
        let (s, t) = (n, n + 1);
        let mut net = FlowNetwork::new(n + 2, s, t);
        let hard = 1.0 + self.pairs.iter().map(|e| e.2).sum::<f64>() * 2.0;
        for (i, z) in self.pixels.iter().enumerate() {
            match self.trimap.labels()[i] {
                Seed::Foreground => {
                    net.add_edge(s, i, hard, 0.0);
                }
                Seed::Background => {
                    net.add_edge(i, t, hard, 0.0);
                }
                Seed::Unknown => {
                    let (cf, cb) = (fg.cost(z), bg.cost(z));
                    let m = cf.min(cb);
                    // Source side is foreground: cutting i -> t pays the foreground cost.
                    net.add_edge(s, i, cb - m, 0.0);
                    net.add_edge(i, t, cf - m, 0.0);
                }
            }
        }
        for &(p, q, wgt) in &self.pairs {
            net.add_edge(p, q, wgt, wgt);
        }
        let r = net.max_flow();
        r.source_side[..n].to_vec()
    }
}

/// Iterated graph-cut segmentation. The first cut uses color models fitted to
/// the seeds; each of the `iterations` rounds refits both models on the
/// current labeling and cuts again. Seeds are hard constraints.
pub fn grabcut(image: &Image, trimap: &Trimap, iterations: usize) -> Result<Segmentation, SegmentationError> {
    if image.dims() != trimap.dims() {
        return Err(SegmentationError::DimMismatch {
            image: image.dims(),
            trimap: trimap.dims(),
        });
    }
    if image.channels() != 3 {
        return Err(SegmentationError::Channels(image.channels()));
    }
    trimap.check_solvable()?;
    let problem = Problem::new(image, trimap);
    let (w, h) = (problem.w, problem.h);

    let seeds_fg: Vec<bool> = trimap.labels().iter().map(|&s| s == Seed::Foreground).collect();
    let seeds_bg: Vec<bool> = trimap.labels().iter().map(|&s| s == Seed::Background).collect();
    if !trimap.labels().contains(&Seed::Unknown) {
        return Ok(Segmentation {
            mask: Mask::new(w, h, seeds_fg),
            energy: Vec::new(),
        });
    }
    let fit = |samples: Vec<[f64; 3]>| Gmm::fit(&samples, MIXTURE_COMPONENTS, VARIANCE_FLOOR).expect("seeds are nonempty");
    let mut fg = fit(problem.samples(&seeds_fg, true));
    let bg_samples: Vec<[f64; 3]> = problem.samples(&seeds_bg, true);
    let mut bg = fit(bg_samples);

    let mut labels = problem.cut(&fg, &bg);
    let mut energy = vec![problem.energy(&labels, &fg, &bg)];
    for _ in 0..iterations {
        let current = *energy.last().expect("nonempty");
        let fg_new = fg.refit(&problem.samples(&labels, true), VARIANCE_FLOOR);
        let bg_new = bg.refit(&problem.samples(&labels, false), VARIANCE_FLOOR);
        if let (Some(f), Some(b)) = (fg_new, bg_new) {
            if problem.energy(&labels, &f, &b) <= current {
                fg = f;
                bg = b;
            }
        }
        let next = problem.cut(&fg, &bg);
        let e = problem.energy(&next, &fg, &bg);
        if e <= current {
            labels = next;
            energy.push(e);
        } else {
            energy.push(current);
        }
    }
    Ok(Segmentation {
        mask: Mask::new(w, h, labels),
        energy,
    })
}
