use crate::geometry::BBox;
use crate::grid::{Grid, Image};

use super::spec::Shape;
use super::NetError;

/// Network-sized crop of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    shape: Shape,
    pixels: Vec<f64>,
    source_box: BBox,
}

impl ImagePatch {
    pub fn new(shape: Shape, pixels: Vec<f64>, source_box: BBox) -> Result<Self, NetError> {
        if pixels.len() != shape.len() {
            return Err(NetError::InputShape {
                expected: shape,
                found: Shape::new(1, 1, pixels.len()),
            });
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFinite);
        }
        Ok(ImagePatch {
            shape,
            pixels,
            source_box,
        })
    }

    /// Crops `bbox` out of `frame` and bilinearly resamples it to `shape`.
    /// Samples falling outside the frame are clamped to the nearest edge pixel.
    pub fn crop_resize(frame: &Image, bbox: &BBox, shape: Shape) -> Result<Self, NetError> {
        if frame.channels() != shape.c {
            return Err(NetError::InputShape {
                expected: shape,
                found: Shape::new(frame.height(), frame.width(), frame.channels()),
            });
        }
        let (fw, fh) = (frame.width() as f64, frame.height() as f64);
        let sx = bbox.w / shape.w as f64;
        let sy = bbox.h / shape.h as f64;
        // Pixel coordinate of the first covered pixel.
        let x0 = bbox.x.ceil();
        let y0 = bbox.y.ceil();
        let mut pixels = vec![0.0; shape.len()];
        for py in 0..shape.h {
            let fy = (y0 + (py as f64 + 0.5) * sy - 0.5).clamp(0.0, fh - 1.0);
            let (ya, ty) = (fy.floor() as usize, fy - fy.floor());
            let yb = (ya + 1).min(frame.height() - 1);
            for px in 0..shape.w {
                let fx = (x0 + (px as f64 + 0.5) * sx - 0.5).clamp(0.0, fw - 1.0);
                let (xa, tx) = (fx.floor() as usize, fx - fx.floor());
                let xb = (xa + 1).min(frame.width() - 1);
                for c in 0..shape.c {
                    let top = frame.get(xa, ya, c) * (1.0 - tx) + frame.get(xb, ya, c) * tx;
                    let bot = frame.get(xa, yb, c) * (1.0 - tx) + frame.get(xb, yb, c) * tx;
                    pixels[shape.index(py, px, c)] = top * (1.0 - ty) + bot * ty;
                }
            }
        }
        ImagePatch::new(shape, pixels, *bbox)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn source_box(&self) -> BBox {
        self.source_box
    }
}

/// Gradient of a scalar with respect to every input value of a patch.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    shape: Shape,
    values: Vec<f64>,
}

impl GradientMap {
    pub fn new(shape: Shape, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), values.len());
        GradientMap { shape, values }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.values[self.shape.index(y, x, c)]
    }

    /// One value per pixel: the largest absolute value over channels.
    pub fn collapse_channels(&self) -> Grid {
        let s = self.shape;
        Grid::from_fn(s.w, s.h, |x, y| {
            (0..s.c).map(|c| self.get(y, x, c).abs()).fold(0.0, f64::max)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_crop_is_exact() {
        let frame = Image::from_vec(4, 3, 1, (0..12).map(|i| i as f64 / 11.0).collect());
        let p = ImagePatch::crop_resize(&frame, &BBox::new(1.0, 1.0, 2.0, 2.0), Shape::new(2, 2, 1)).unwrap();
        assert_eq!(p.pixels(), &[frame.get(1, 1, 0), frame.get(2, 1, 0), frame.get(1, 2, 0), frame.get(2, 2, 0)]);
    }

    #[test]
    fn upsampling_interpolates() {
        let frame = Image::from_vec(2, 1, 1, vec![0.0, 1.0]);
        let p = ImagePatch::crop_resize(&frame, &BBox::new(0.0, 0.0, 2.0, 1.0), Shape::new(1, 4, 1)).unwrap();
        assert_eq!(p.pixels(), &[0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn off_frame_samples_clamp() {
        let frame = Image::from_vec(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]);
        let p = ImagePatch::crop_resize(&frame, &BBox::new(-2.0, -2.0, 2.0, 2.0), Shape::new(2, 2, 1)).unwrap();
        assert_eq!(p.pixels(), &[0.1; 4]);
    }

    #[test]
    fn collapse_takes_max_abs() {
        let g = GradientMap::new(Shape::new(1, 2, 3), vec![1.0, -4.0, 2.0, 0.0, 0.5, -0.25]);
        assert_eq!(g.collapse_channels().as_slice(), &[4.0, 0.5]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(ImagePatch::new(Shape::new(1, 1, 1), vec![f64::NAN], BBox::new(0.0, 0.0, 1.0, 1.0)).is_err());
    }
}
