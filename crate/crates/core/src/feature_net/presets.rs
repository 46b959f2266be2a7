//! Fixed, hand-designed feature networks usable without trained weights.

use super::spec::{Layer, NetworkSpec, Shape};
use super::weights::WeightStore;
use super::Network;

const FIRST_CHANNELS: usize = 8;

/// First-layer 3x3 RGB filters: color detectors, color opponents and luminance edges.
fn first_layer_kernels() -> Vec<[[[f64; 3]; 3]; 3]> {
    let mut kernels = Vec::with_capacity(FIRST_CHANNELS);
    let point = |rgb: [f64; 3]| {
        let mut k = [[[0.0; 3]; 3]; 3];
        k[1][1] = rgb;
        k
    };
    kernels.push(point([1.0, 0.0, 0.0]));
    kernels.push(point([0.0, 1.0, 0.0]));
    kernels.push(point([0.0, 0.0, 1.0]));
    kernels.push(point([1.0, -1.0, 0.0]));
    kernels.push(point([-0.5, -0.5, 1.0]));
    kernels.push(point([-1.0, 1.0, 0.0]));
    let lum = [1.0 / 3.0; 3];
    let mut horiz = [[[0.0; 3]; 3]; 3];
    let mut vert = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for c in 0..3 {
            horiz[i][0][c] = -lum[c];
            horiz[i][2][c] = lum[c];
            vert[0][i][c] = -lum[c];
            vert[2][i][c] = lum[c];
        }
    }
    kernels.push(horiz);
    kernels.push(vert);
    kernels
}

/// Two-convolution network for `side x side` RGB patches (`side` divisible by 4).
///
/// conv 3x3 (color/edge bank) -> relu -> pool 2 -> conv 3x3 (per-channel
/// center-surround) -> relu -> pool 2 -> identity fc -> relu.
pub fn handcrafted(side: usize) -> Network {
    assert!(side >= 4 && side.is_multiple_of(4), "patch side must be a positive multiple of 4");
    let c = FIRST_CHANNELS;
    let pooled = side / 4;
    let dim = pooled * pooled * c;
    let spec = NetworkSpec::new(
        Shape::new(side, side, 3),
        vec![
            Layer::Conv {
                kh: 3,
                kw: 3,
                in_channels: 3,
                out_channels: c,
                stride: 1,
                padding: 1,
            },
            Layer::Relu,
            Layer::MaxPool { window: 2, stride: 2 },
            Layer::Conv {
                kh: 3,
                kw: 3,
                in_channels: c,
                out_channels: c,
                stride: 1,
                padding: 1,
            },
            Layer::Relu,
            Layer::MaxPool { window: 2, stride: 2 },
            Layer::FullyConnected { in_dim: dim, out_dim: dim },
            Layer::Relu,
        ],
    )
    .expect("handcrafted spec is consistent");

    let mut flat = Vec::with_capacity(spec.param_count());
    for k in first_layer_kernels() {
        for row in &k {
            for px in row {
                flat.extend_from_slice(px);
            }
        }
    }
    flat.extend(std::iter::repeat_n(0.0, c));

    // Center-surround on each channel independently.
    for o in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                for i in 0..c {
                    let v = if i != o {
                        0.0
                    } else if ky == 1 && kx == 1 {
                        1.0
                    } else {
                        -0.125
                    };
                    flat.push(v);
                }
            }
        }
    }
    flat.extend(std::iter::repeat_n(0.0, c));

    for o in 0..dim {
        for i in 0..dim {
            flat.push(if o == i { 1.0 } else { 0.0 });
        }
    }
    flat.extend(std::iter::repeat_n(0.0, dim));

    let weights = WeightStore::from_flat(&spec, &flat).expect("handcrafted weight count");
    Network::new(spec, weights).expect("handcrafted network is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn handcrafted_shapes() {
        let net = handcrafted(12);
        assert_eq!(net.feature_dim(), 3 * 3 * 8);
        let (phi, _) = net.forward_raw(&vec![0.5; 12 * 12 * 3]).unwrap();
        assert!(phi.values.iter().all(|&v| v >= 0.0));
    }
}
