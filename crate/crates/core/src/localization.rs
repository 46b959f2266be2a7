//! Discrete-grid Bayesian filtering over target center locations.
//!
//! Grid cell `(x, y)` stands for the state whose box center is at pixel `(x, y)`.

use std::collections::VecDeque;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::TargetState;
use crate::grid::Grid;
use crate::saliency::SaliencyMap;

pub const DEFAULT_SIGMA_MIN: f64 = 1.0;
pub const DEFAULT_LIKELIHOOD_FLOOR: f64 = 1e-12;
pub const DEFAULT_FILTER_MEMORY: usize = 30;

#[derive(Debug, Error, PartialEq)]
pub enum LocalizationError {
    #[error("no positive sample centers to estimate motion from")]
    NoPositives,
    #[error("grid dimensions differ: {0:?} vs {1:?}")]
    DimMismatch((usize, usize), (usize, usize)),
    #[error("filter {filter:?} is larger than the frame {frame:?}")]
    FilterTooLarge {
        filter: (usize, usize),
        frame: (usize, usize),
    },
    #[error("posterior mass vanished")]
    ZeroMass,
}

/// Estimated motion `d_t` with its noise covariance (diagonal, px^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionEstimate {
    pub mean: (f64, f64),
    pub displacement: (f64, f64),
    pub covariance: [[f64; 2]; 2],
}

impl TransitionEstimate {
    /// No motion, isotropic variance `var`.
    pub fn still(var: f64) -> Self {
        TransitionEstimate {
            mean: (0.0, 0.0),
            displacement: (0.0, 0.0),
            covariance: [[var, 0.0], [0.0, var]],
        }
    }

    pub fn scaled_covariance(&self, factor: f64) -> Self {
        let mut t = *self;
        for row in &mut t.covariance {
            for v in row {
                *v *= factor;
            }
        }
        t
    }
}

/// Mean and per-axis unbiased variance of positive sample centers, with a
/// `sigma_min^2` variance floor. A single center gives `sigma_min^2 I`.
pub fn estimate_transition(
    positive_centers: &[(f64, f64)],
    prev: &TargetState,
    sigma_min: f64,
) -> Result<TransitionEstimate, LocalizationError> {
    let n = positive_centers.len();
    if n == 0 {
        return Err(LocalizationError::NoPositives);
    }
    let nf = n as f64;
    let mx = positive_centers.iter().map(|c| c.0).sum::<f64>() / nf;
    let my = positive_centers.iter().map(|c| c.1).sum::<f64>() / nf;
    let floor = sigma_min * sigma_min;
    let (vx, vy) = if n == 1 {
        (floor, floor)
    } else {
        let vx = positive_centers.iter().map(|c| (c.0 - mx).powi(2)).sum::<f64>() / (nf - 1.0);
        let vy = positive_centers.iter().map(|c| (c.1 - my).powi(2)).sum::<f64>() / (nf - 1.0);
        (vx.max(floor), vy.max(floor))
    };
    Ok(TransitionEstimate {
        mean: (mx, my),
        displacement: (mx - prev.cx, my - prev.cy),
        covariance: [[vx, 0.0], [0.0, vy]],
    })
}

/// Normalized probability mass over grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    mass: Grid,
}

impl PosteriorGrid {
    /// Normalizes a nonnegative grid. Fails if the total mass is zero.
    pub fn from_weights(weights: Grid) -> Result<Self, LocalizationError> {
        let total = weights.sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(LocalizationError::ZeroMass);
        }
        Ok(PosteriorGrid {
            mass: weights.map(|v| v / total),
        })
    }

    pub fn uniform(width: usize, height: usize) -> Self {
        PosteriorGrid {
            mass: Grid::filled(width, height, 1.0 / (width * height) as f64),
        }
    }

    pub fn delta(width: usize, height: usize, x: usize, y: usize) -> Self {
        let mut mass = Grid::zeros(width, height);
        mass.set(x, y, 1.0);
        PosteriorGrid { mass }
    }

    pub fn mass(&self) -> &Grid {
        &self.mass
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mass.dims()
    }

    /// First maximal cell in scan order and its probability.
    pub fn argmax(&self) -> ((usize, usize), f64) {
        let (x, y) = self.mass.argmax();
        ((x, y), self.mass.get(x, y))
    }
}

/// How mass leaving the grid is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Mass pushed off the grid is dropped before renormalizing.
    #[default]
    Clip,
    /// The grid is a torus.
    Wrap,
}

/// Normalized 1-D Gaussian taps over `[-r, r]`, `r = ceil(3 sigma)`; a delta for zero variance.
pub fn gaussian_kernel(var: f64) -> Vec<f64> {
    if !(var > 0.0) {
        return vec![1.0];
    }
    let sigma = var.sqrt();
    let r = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * var)).exp()).collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Shifts the previous posterior by `round(d_t)` and smooths it with the
/// transition covariance (separable, per-axis variances).
pub fn predict_prior(prev: &PosteriorGrid, t: &TransitionEstimate, boundary: Boundary) -> PosteriorGrid {
    let (w, h) = prev.dims();
    let (dx, dy) = (t.displacement.0.round() as isize, t.displacement.1.round() as isize);

    let mut shifted = Grid::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let v = prev.mass.get(x, y);
            if v == 0.0 {
                continue;
            }
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            match boundary {
                Boundary::Clip => {
                    if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                        shifted.set(nx as usize, ny as usize, v);
                    }
                }
                Boundary::Wrap => shifted.set(wrap(nx, w), wrap(ny, h), v),
            }
        }
    }

    let kx = gaussian_kernel(t.covariance[0][0]);
    let ky = gaussian_kernel(t.covariance[1][1]);
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;

    let mut horiz = Grid::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kx.iter().enumerate() {
                let sx = x as isize + i as isize - rx;
                acc += k * match boundary {
                    Boundary::Clip => shifted.get_or_zero(sx, y as isize),
                    Boundary::Wrap => shifted.get(wrap(sx, w), y),
                };
            }
            horiz.set(x, y, acc);
        }
    }
    let mut out = Grid::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in ky.iter().enumerate() {
                let sy = y as isize + i as isize - ry;
                acc += k * match boundary {
                    Boundary::Clip => horiz.get_or_zero(x as isize, sy),
                    Boundary::Wrap => horiz.get(x, wrap(sy, h)),
                };
            }
            out.set(x, y, acc);
        }
    }
    // Everything pushed off-frame: fall back to an uninformative prior.
    PosteriorGrid::from_weights(out).unwrap_or_else(|_| PosteriorGrid::uniform(w, h))
}

/// Top-left pixel of the crop for a box centered at `state`.
fn crop_origin(state: &TargetState) -> (isize, isize) {
    let span = state.bbox().pixel_span();
    (span.x0, span.y0)
}

/// Saliency inside the state's box; pixels off-frame read as zero.
pub fn crop(saliency: &Grid, state: &TargetState) -> Grid {
    let (cw, ch) = state.crop_size();
    let (x0, y0) = crop_origin(state);
    Grid::from_fn(cw, ch, |u, v| saliency.get_or_zero(x0 + u as isize, y0 + v as isize))
}

/// Mean of the most recent target crops.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeFilter {
    values: Grid,
    history: VecDeque<Grid>,
    memory: usize,
}

impl GenerativeFilter {
    pub fn new(width: usize, height: usize, memory: usize) -> Self {
        GenerativeFilter {
            values: Grid::zeros(width, height),
            history: VecDeque::with_capacity(memory),
            memory: memory.max(1),
        }
    }

    pub fn values(&self) -> &Grid {
        &self.values
    }

    pub fn history(&self) -> &VecDeque<Grid> {
        &self.history
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Pushes the crop of `saliency` at `state`, evicting the oldest past `memory`.
    pub fn update(&mut self, saliency: &SaliencyMap, state: &TargetState) {
        let c = crop(&saliency.values, state);
        self.push_crop(c);
    }

    pub fn push_crop(&mut self, c: Grid) {
        assert_eq!(c.dims(), self.values.dims(), "crop size must match the filter");
        if self.history.len() == self.memory {
            self.history.pop_front();
        }
        self.history.push_back(c);
        let n = self.history.len() as f64;
        let mut sum = Grid::zeros(self.values.width(), self.values.height());
        for h in &self.history {
            for (a, b) in sum.as_mut_slice().iter_mut().zip(h.as_slice()) {
                *a += b;
            }
        }
        self.values = sum.map(|v| v / n);
    }
}

/// Correlation of the filter with the saliency map at every center,
/// shifted nonnegative, floored by `floor` and normalized to sum 1.
pub fn likelihood_map(filter: &Grid, saliency: &Grid, floor: f64) -> Result<Grid, LocalizationError> {
    let (fw, fh) = filter.dims();
    let (w, h) = saliency.dims();
    if fw > w || fh > h {
        return Err(LocalizationError::FilterTooLarge {
            filter: (fw, fh),
            frame: (w, h),
        });
    }
    // For an integer center c the crop starts at c - floor(size / 2).
    let (ox, oy) = ((fw / 2) as isize, (fh / 2) as isize);
    let taps: Vec<(isize, isize, f64)> = (0..fh)
        .flat_map(|v| (0..fw).map(move |u| (u, v)))
        .filter_map(|(u, v)| {
            let k = filter.get(u, v);
            (k != 0.0).then_some((u as isize - ox, v as isize - oy, k))
        })
        .collect();

    let mut data = vec![0.0; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for &(du, dv, k) in &taps {
            let sy = y as isize + dv;
            if sy < 0 || sy as usize >= h {
                continue;
            }
            let src = &saliency.as_slice()[sy as usize * w..(sy as usize + 1) * w];
            let x_lo = (-du).max(0) as usize;
            let x_hi = (w as isize - du).min(w as isize).max(0) as usize;
            for x in x_lo..x_hi {
                row[x] += k * src[(x as isize + du) as usize];
            }
        }
    });

    let mut out = Grid::from_vec(w, h, data);
    let min = out.min();
    if min < 0.0 {
        out = out.map(|v| v - min);
    }
    let out = out.map(|v| v + floor);
    let total = out.sum();
    Ok(out.map(|v| v / total))
}

/// Pointwise product of prior and likelihood, renormalized, with its MAP cell.
pub fn posterior_and_map(
    prior: &PosteriorGrid,
    likelihood: &Grid,
    box_w: f64,
    box_h: f64,
) -> Result<(PosteriorGrid, TargetState, f64), LocalizationError> {
    if prior.dims() != likelihood.dims() {
        return Err(LocalizationError::DimMismatch(prior.dims(), likelihood.dims()));
    }
    let (w, h) = prior.dims();
    // A constant factor cancels in the normalization; skipping it keeps the
    // other factor bit-for-bit.
    let post = if is_constant(likelihood) && likelihood.get(0, 0) > 0.0 {
        prior.clone()
    } else if is_constant(&prior.mass) {
        PosteriorGrid::from_weights(likelihood.clone())?
    } else {
        let prod: Vec<f64> = prior
            .mass
            .as_slice()
            .iter()
            .zip(likelihood.as_slice())
            .map(|(p, l)| p * l)
            .collect();
        PosteriorGrid::from_weights(Grid::from_vec(w, h, prod))?
    };
    let ((x, y), p) = post.argmax();
    Ok((post, TargetState::new(x as f64, y as f64, box_w, box_h), p))
}

fn is_constant(g: &Grid) -> bool {
    let v = g.as_slice();
    v.iter().all(|&x| x == v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(x: f64, y: f64) -> TargetState {
        TargetState::new(x, y, 4.0, 4.0)
    }

    #[test]
    fn transition_two_centers() {
        let t = estimate_transition(&[(4.0, 4.0), (6.0, 6.0)], &state(4.0, 4.0), 1.0).unwrap();
        assert_eq!(t.mean, (5.0, 5.0));
        assert_eq!(t.displacement, (1.0, 1.0));
        assert_eq!(t.covariance, [[2.0, 0.0], [0.0, 2.0]]);
    }

    #[test]
    fn transition_degenerate_cases() {
        let t = estimate_transition(&[(3.0, 2.0); 4], &state(3.0, 2.0), 1.0).unwrap();
        assert_eq!(t.displacement, (0.0, 0.0));
        let t = estimate_transition(&[(7.0, 3.0)], &state(7.0, 3.0), 1.5).unwrap();
        assert_eq!(t.displacement, (0.0, 0.0));
        assert_eq!(t.covariance, [[2.25, 0.0], [0.0, 2.25]]);
        assert_eq!(
            estimate_transition(&[], &state(0.0, 0.0), 1.0),
            Err(LocalizationError::NoPositives)
        );
    }

    #[test]
    fn pure_shift_moves_delta() {
        let prior = PosteriorGrid::delta(20, 20, 10, 10);
        let mut t = TransitionEstimate::still(0.0);
        t.displacement = (2.0, 0.0);
        let out = predict_prior(&prior, &t, Boundary::Clip);
        assert_eq!(out.mass().get(12, 10), 1.0);
        assert_eq!(out.mass().sum(), 1.0);
    }

    #[test]
    fn uniform_stays_uniform_on_torus() {
        let u = PosteriorGrid::uniform(9, 7);
        let out = predict_prior(&u, &TransitionEstimate::still(2.5), Boundary::Wrap);
        for &v in out.mass().as_slice() {
            assert!((v - 1.0 / 63.0).abs() < 1e-15);
        }
    }

    #[test]
    fn filter_mean_and_eviction() {
        let mut f = GenerativeFilter::new(2, 1, 2);
        f.push_crop(Grid::from_vec(2, 1, vec![1.0, 2.0]));
        assert_eq!(f.values().as_slice(), &[1.0, 2.0]);
        f.push_crop(Grid::from_vec(2, 1, vec![3.0, 2.0]));
        assert_eq!(f.values().as_slice(), &[2.0, 2.0]);
        f.push_crop(Grid::from_vec(2, 1, vec![5.0, 0.0]));
        assert_eq!(f.history().len(), 2);
        assert_eq!(f.values().as_slice(), &[4.0, 1.0]);
    }

    #[test]
    fn crop_matches_box_footprint() {
        let m = Grid::from_fn(10, 10, |x, y| (x + 10 * y) as f64);
        let c = crop(&m, &TargetState::new(5.0, 5.0, 2.0, 2.0));
        assert_eq!(c.as_slice(), &[44.0, 45.0, 54.0, 55.0]);
        // Off-frame parts read zero.
        let c = crop(&m, &TargetState::new(0.0, 0.0, 2.0, 2.0));
        assert_eq!(c.as_slice(), &[0.0, 0.0, 0.0, 0.0 + 0.0]);
    }

    #[test]
    fn delta_filter_likelihood_is_saliency() {
        let m = Grid::from_fn(5, 4, |x, y| (x * y) as f64);
        let mut h = Grid::zeros(1, 1);
        h.set(0, 0, 1.0);
        let l = likelihood_map(&h, &m, 1e-12).unwrap();
        let total: f64 = m.as_slice().iter().map(|v| v + 1e-12).sum();
        for (a, b) in l.as_slice().iter().zip(m.as_slice()) {
            assert!((a - (b + 1e-12) / total).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_saliency_gives_uniform_likelihood() {
        let l = likelihood_map(&Grid::filled(3, 3, 1.0), &Grid::zeros(6, 5), 1e-12).unwrap();
        for &v in l.as_slice() {
            assert!((v - 1.0 / 30.0).abs() < 1e-15);
        }
    }

    #[test]
    fn oversized_filter_rejected() {
        assert!(likelihood_map(&Grid::zeros(7, 2), &Grid::zeros(6, 5), 1e-12).is_err());
    }

    #[test]
    fn posterior_identities() {
        let prior = PosteriorGrid::from_weights(Grid::from_vec(3, 1, vec![1.0, 2.0, 1.0])).unwrap();
        let flat = Grid::filled(3, 1, 1.0 / 3.0);
        let (post, map, _) = posterior_and_map(&prior, &flat, 4.0, 4.0).unwrap();
        assert_eq!(post, prior);
        assert_eq!((map.cx, map.cy), (1.0, 0.0));

        let uniform = PosteriorGrid::uniform(3, 1);
        let lik = Grid::from_vec(3, 1, vec![0.2, 0.3, 0.5]);
        let (post, map, p) = posterior_and_map(&uniform, &lik, 4.0, 4.0).unwrap();
        assert_eq!((map.cx, map.w), (2.0, 4.0));
        assert!((p - 0.5).abs() < 1e-15);
        assert!((post.mass().sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn map_ties_go_to_scan_order() {
        let (_, map, _) =
            posterior_and_map(&PosteriorGrid::uniform(3, 2), &Grid::filled(3, 2, 1.0), 1.0, 1.0).unwrap();
        assert_eq!((map.cx, map.cy), (0.0, 0.0));
    }
}
