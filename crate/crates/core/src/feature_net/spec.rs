use std::fmt;

use super::NetError;

/// Height, width and channel count of an activation tensor (stored HWC, row-major).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape {
    pub const fn new(h: usize, w: usize, c: usize) -> Self {
        Shape { h, w, c }
    }

    pub const fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn index(&self, y: usize, x: usize, ch: usize) -> usize {
        (y * self.w + x) * self.c + ch
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    /// Kernel layout is `[out][ky][kx][in]`, followed by `out` biases.
    Conv {
        kh: usize,
        kw: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool {
        window: usize,
        stride: usize,
    },
    /// Weight layout is `[out][in]` over the HWC-flattened input, followed by `out` biases.
    FullyConnected {
        in_dim: usize,
        out_dim: usize,
    },
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::Relu => "relu",
            Layer::MaxPool { .. } => "maxpool",
            Layer::FullyConnected { .. } => "fc",
        }
    }

    /// (kernel float count, bias float count); zero for parameter-free layers.
    pub fn param_counts(&self) -> (usize, usize) {
        match *self {
            Layer::Conv {
                kh,
                kw,
                in_channels,
                out_channels,
                ..
            } => (kh * kw * in_channels * out_channels, out_channels),
            Layer::FullyConnected { in_dim, out_dim } => (in_dim * out_dim, out_dim),
            Layer::Relu | Layer::MaxPool { .. } => (0, 0),
        }
    }

    /// Output shape for the given input, or a description of the incompatibility.
    pub fn output_shape(&self, input: Shape) -> Result<Shape, String> {
        match *self {
            Layer::Conv {
                kh,
                kw,
                in_channels,
                out_channels,
                stride,
                padding,
            } => {
                if stride == 0 {
                    return Err("stride must be >= 1".into());
                }
                if kh == 0 || kw == 0 || out_channels == 0 {
                    return Err("empty convolution kernel".into());
                }
                if input.c != in_channels {
                    return Err(format!("expects {in_channels} input channels, got {}", input.c));
                }
                let (ph, pw) = (input.h + 2 * padding, input.w + 2 * padding);
                if ph < kh || pw < kw {
                    return Err(format!("kernel {kh}x{kw} larger than padded input {ph}x{pw}"));
                }
                Ok(Shape::new((ph - kh) / stride + 1, (pw - kw) / stride + 1, out_channels))
            }
            Layer::Relu => Ok(input),
            Layer::MaxPool { window, stride } => {
                if window == 0 || stride == 0 {
                    return Err("pool window and stride must be >= 1".into());
                }
                if input.h < window || input.w < window {
                    return Err(format!("pool window {window} larger than input {input}"));
                }
                Ok(Shape::new((input.h - window) / stride + 1, (input.w - window) / stride + 1, input.c))
            }
            Layer::FullyConnected { in_dim, out_dim } => {
                if input.len() != in_dim {
                    return Err(format!("expects {in_dim} inputs, got {} ({input})", input.len()));
                }
                if out_dim == 0 {
                    return Err("fc output dimension must be >= 1".into());
                }
                Ok(Shape::new(1, 1, out_dim))
            }
        }
    }
}

/// Ordered layer list plus the input patch shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub layers: Vec<Layer>,
    pub input_shape: Shape,
}

impl NetworkSpec {
    pub fn new(input_shape: Shape, layers: Vec<Layer>) -> Result<Self, NetError> {
        let spec = NetworkSpec { layers, input_shape };
        spec.validate()?;
        Ok(spec)
    }

    /// Shapes of every layer input followed by the final output shape.
    pub fn shapes(&self) -> Result<Vec<Shape>, NetError> {
        if self.layers.is_empty() {
            return Err(NetError::EmptyNetwork);
        }
        if self.input_shape.is_empty() {
            return Err(NetError::Config {
                layer: 0,
                msg: format!("empty input shape {}", self.input_shape),
            });
        }
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        let mut cur = self.input_shape;
        shapes.push(cur);
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer
                .output_shape(cur)
                .map_err(|msg| NetError::Config { layer: i, msg })?;
            shapes.push(cur);
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        self.shapes().map(|_| ())
    }

    /// Length of the feature vector produced by the last layer.
    pub fn feature_dim(&self) -> Result<usize, NetError> {
        Ok(self.shapes()?.last().map(Shape::len).unwrap_or(0))
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                let (k, b) = l.param_counts();
                k + b
            })
            .sum()
    }
}
