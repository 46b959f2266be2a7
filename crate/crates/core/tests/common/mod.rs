#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use saltrk::feature_net::{Layer, Network, NetworkSpec, Shape, WeightStore};
use saltrk_oracles::OracleLayer;

/// Random net on a 16x16x3 input: 1-3 conv+relu blocks (some pooled) and a fc head.
pub fn random_network(rng: &mut ChaCha8Rng) -> Network {
    let input = Shape::new(16, 16, 3);
    let mut layers = Vec::new();
    let mut shape = input;
    for _ in 0..rng.random_range(1..=3) {
        let k = rng.random_range(1..=3).min(shape.h);
        let stride = if shape.h >= 8 && rng.random_bool(0.3) { 2 } else { 1 };
        let padding = rng.random_range(0..=1);
        let conv = Layer::Conv {
            kh: k,
            kw: k,
            in_channels: shape.c,
            out_channels: rng.random_range(2..=5),
            stride,
            padding,
        };
        shape = conv.output_shape(shape).unwrap();
        layers.push(conv);
        layers.push(Layer::Relu);
        if shape.h >= 4 && rng.random_bool(0.5) {
            let pool = Layer::MaxPool { window: 2, stride: 2 };
            shape = pool.output_shape(shape).unwrap();
            layers.push(pool);
        }
    }
    layers.push(Layer::FullyConnected {
        in_dim: shape.len(),
        out_dim: rng.random_range(3..=8),
    });
    let spec = NetworkSpec::new(input, layers).unwrap();
    let flat: Vec<f64> = (0..spec.param_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let weights = WeightStore::from_flat(&spec, &flat).unwrap();
    Network::new(spec, weights).unwrap()
}

pub fn to_oracle(net: &Network) -> Vec<OracleLayer> {
    net.spec()
        .layers
        .iter()
        .zip(&net.weights().layers)
        .map(|(l, p)| match *l {
            Layer::Conv {
                kh,
                kw,
                in_channels,
                out_channels,
                stride,
                padding,
            } => OracleLayer::Conv {
                kh,
                kw,
                cin: in_channels,
                cout: out_channels,
                stride,
                pad: padding,
                kernel: p.kernel.clone(),
                bias: p.bias.clone(),
            },
            Layer::Relu => OracleLayer::Relu,
            Layer::MaxPool { window, stride } => OracleLayer::MaxPool { window, stride },
            Layer::FullyConnected { in_dim, out_dim } => OracleLayer::Fc {
                din: in_dim,
                dout: out_dim,
                weights: p.kernel.clone(),
                bias: p.bias.clone(),
            },
        })
        .collect()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}
