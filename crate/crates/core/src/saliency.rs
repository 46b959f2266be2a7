//! Target-specific saliency: gradients of positively-weighted features,
//! projected into the frame and merged by pixelwise maximum magnitude.

use std::path::Path;

use thiserror::Error;

use crate::feature_net::{ActivationCache, NetError, Network};
use crate::geometry::BBox;
use crate::grid::Grid;

#[derive(Debug, Error)]
pub enum SaliencyError {
    #[error("feature dimension {feature} does not match weight dimension {weights}")]
    DimMismatch { feature: usize, weights: usize },
    #[error("sample score {0} is not positive; only positive samples contribute")]
    NotPositive(f64),
    #[error("grid {found:?} does not match frame {expected:?}")]
    FrameMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Collapsed per-pixel gradient of one positive sample, in patch coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGradient {
    pub map: Grid,
    pub bbox: BBox,
    pub score: f64,
}

/// Nonnegative frame-sized saliency field for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub values: Grid,
    pub frame_index: usize,
}

impl SaliencyMap {
    pub fn zeros(width: usize, height: usize, frame_index: usize) -> Self {
        SaliencyMap {
            values: Grid::zeros(width, height),
            frame_index,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// 8-bit grayscale export, scaled so the maximum maps to 255.
    pub fn save_png(&self, path: &Path) -> image::ImageResult<()> {
        self.values.save_png_normalized(path)
    }

    pub fn to_csv(&self) -> String {
        self.values.to_csv()
    }
}

/// `phi+_k = w_k phi_k` where `w_k > 0`, zero elsewhere.
pub fn mask_target_feature(feature: &[f64], w: &[f64]) -> Result<Vec<f64>, SaliencyError> {
    if feature.len() != w.len() {
        return Err(SaliencyError::DimMismatch {
            feature: feature.len(),
            weights: w.len(),
        });
    }
    Ok(feature
        .iter()
        .zip(w)
        .map(|(&f, &wk)| if wk > 0.0 { wk * f } else { 0.0 })
        .collect())
}

/// Feature-space gradient of `sum_{w_k > 0} w_k phi_k`.
pub fn positive_weight_routing(w: &[f64]) -> Vec<f64> {
    w.iter().map(|&wk| if wk > 0.0 { wk } else { 0.0 }).collect()
}

/// Input gradient of the masked feature for a sample whose forward pass is cached.
pub fn sample_gradient(
    net: &Network,
    cache: &ActivationCache,
    bbox: BBox,
    w: &[f64],
    score: f64,
) -> Result<SampleGradient, SaliencyError> {
    if !(score > 0.0) {
        return Err(SaliencyError::NotPositive(score));
    }
    if w.len() != net.feature_dim() {
        return Err(SaliencyError::DimMismatch {
            feature: net.feature_dim(),
            weights: w.len(),
        });
    }
    let grad = net.backward_to_input(cache, &positive_weight_routing(w))?;
    Ok(SampleGradient {
        map: grad.collapse_channels(),
        bbox,
        score,
    })
}

/// Places a patch-coordinate map over its box footprint in a zeroed frame grid.
/// Nearest-neighbor resampling; off-frame parts of the box are dropped.
pub fn project_and_pad(sg: &SampleGradient, frame_w: usize, frame_h: usize) -> Grid {
    let mut out = Grid::zeros(frame_w, frame_h);
    let span = sg.bbox.pixel_span();
    let clipped = span.clip(frame_w, frame_h);
    if clipped.is_empty() || span.is_empty() {
        log::warn!("sample box {} lies outside the {frame_w}x{frame_h} frame", sg.bbox);
        return out;
    }
    let (pw, ph) = sg.map.dims();
    let sx = span.width() as f64 / pw as f64;
    let sy = span.height() as f64 / ph as f64;
    for fy in clipped.y0..clipped.y1 {
        let py = (((fy - span.y0) as f64 + 0.5) / sy).floor() as usize;
        let py = py.min(ph - 1);
        for fx in clipped.x0..clipped.x1 {
            let px = (((fx - span.x0) as f64 + 0.5) / sx).floor() as usize;
            let px = px.min(pw - 1);
            out.set(fx as usize, fy as usize, sg.map.get(px, py));
        }
    }
    out
}

/// `M(p) = max_i |G_i(p)|`; an empty list gives the zero map.
pub fn aggregate(
    grids: &[Grid],
    frame_w: usize,
    frame_h: usize,
    frame_index: usize,
) -> Result<SaliencyMap, SaliencyError> {
    let mut out = SaliencyMap::zeros(frame_w, frame_h, frame_index);
    for g in grids {
        if g.dims() != (frame_w, frame_h) {
            return Err(SaliencyError::FrameMismatch {
                expected: (frame_w, frame_h),
                found: g.dims(),
            });
        }
        accumulate_max(&mut out.values, g);
    }
    Ok(out)
}

/// In-place `acc = max(acc, |g|)`.
pub fn accumulate_max(acc: &mut Grid, g: &Grid) {
    for (a, &v) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
        let v = v.abs();
        if v > *a {
            *a = v;
        }
    }
}
