//! Boxes and target states in frame coordinates.
//!
//! Pixel `k` sits at continuous coordinate `k`; a box `[x, x + w)` covers the
//! pixels whose coordinates fall inside it.

use std::fmt;
use std::str::FromStr;

/// Axis-aligned box given by its top-left corner and size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            0.0
        } else {
            ix * iy
        }
    }

    /// Intersection over union; 0 for disjoint boxes.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    /// Integer pixel span `[x0, x1) x [y0, y1)` covered by the box (may extend off-frame).
    pub fn pixel_span(&self) -> PixelSpan {
        PixelSpan {
            x0: self.x.ceil() as isize,
            y0: self.y.ceil() as isize,
            x1: (self.x + self.w).ceil() as isize,
            y1: (self.y + self.h).ceil() as isize,
        }
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl FromStr for BBox {
    type Err = String;

    /// Parses `x,y,w,h` with comma, tab or space separators.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .collect();
        if parts.len() != 4 {
            return Err(format!("expected 4 box fields, found {} in {s:?}", parts.len()));
        }
        let mut v = [0.0; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| format!("bad number {p:?} in {s:?}"))?;
        }
        Ok(BBox::new(v[0], v[1], v[2], v[3]))
    }
}

/// Half-open integer pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelSpan {
    pub x0: isize,
    pub y0: isize,
    pub x1: isize,
    pub y1: isize,
}

impl PixelSpan {
    pub fn width(&self) -> usize {
        (self.x1 - self.x0).max(0) as usize
    }

    pub fn height(&self) -> usize {
        (self.y1 - self.y0).max(0) as usize
    }

    /// Intersection with a `width x height` frame.
    pub fn clip(&self, width: usize, height: usize) -> PixelSpan {
        PixelSpan {
            x0: self.x0.clamp(0, width as isize),
            y0: self.y0.clamp(0, height as isize),
            x1: self.x1.clamp(0, width as isize),
            y1: self.y1.clamp(0, height as isize),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }
}

/// Target center plus the fixed box size carried through a track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl TargetState {
    pub const fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        TargetState { cx, cy, w, h }
    }

    pub fn from_bbox(b: &BBox) -> Self {
        let (cx, cy) = b.center();
        TargetState::new(cx, cy, b.w, b.h)
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    pub fn with_center(&self, cx: f64, cy: f64) -> Self {
        TargetState { cx, cy, ..*self }
    }

    /// Integer filter size used for saliency crops of this box.
    pub fn crop_size(&self) -> (usize, usize) {
        (self.w.round().max(1.0) as usize, self.h.round().max(1.0) as usize)
    }
}
