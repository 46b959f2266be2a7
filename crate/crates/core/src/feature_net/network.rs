use super::patch::{GradientMap, ImagePatch};
use super::spec::{Layer, NetworkSpec, Shape};
use super::weights::{LayerParams, WeightStore};
use super::NetError;

/// Network output for one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.values.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

/// Intermediate state recorded by [`Network::forward`] and consumed by the backward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivationCache {
    /// Input tensor of every layer, in layer order.
    pub layer_inputs: Vec<Vec<f64>>,
    /// Flat input index selected by each pooling output, per layer (empty for non-pool layers).
    pub pool_argmax: Vec<Vec<usize>>,
}

impl ActivationCache {
    pub fn is_empty(&self) -> bool {
        self.layer_inputs.is_empty()
    }

    /// Identifies the linear region of the network the cached input lies in:
    /// ReLU on/off pattern plus pooling winners, concatenated over layers.
    pub fn activation_pattern(&self, spec: &NetworkSpec) -> Vec<usize> {
        let mut pattern = Vec::new();
        for (i, layer) in spec.layers.iter().enumerate() {
            match layer {
                Layer::Relu => pattern.extend(self.layer_inputs[i].iter().map(|&v| usize::from(v > 0.0))),
                Layer::MaxPool { .. } => pattern.extend_from_slice(&self.pool_argmax[i]),
                _ => {}
            }
        }
        pattern
    }
}

/// A validated spec together with its weights. Immutable; safe to share across threads.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    weights: WeightStore,
    shapes: Vec<Shape>,
}

impl Network {
    pub fn new(spec: NetworkSpec, weights: WeightStore) -> Result<Self, NetError> {
        let shapes = spec.shapes()?;
        weights.validate(&spec)?;
        Ok(Network { spec, weights, shapes })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightStore {
        &self.weights
    }

    pub fn input_shape(&self) -> Shape {
        self.spec.input_shape
    }

    pub fn feature_dim(&self) -> usize {
        self.shapes.last().map(Shape::len).unwrap_or(0)
    }

    /// Shapes of each layer input plus the output.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn forward(&self, patch: &ImagePatch) -> Result<(FeatureVector, ActivationCache), NetError> {
        if patch.shape() != self.spec.input_shape {
            return Err(NetError::InputShape {
                expected: self.spec.input_shape,
                found: patch.shape(),
            });
        }
        self.forward_raw(patch.pixels())
    }

    /// Forward pass over a raw HWC buffer of the input shape.
    pub fn forward_raw(&self, input: &[f64]) -> Result<(FeatureVector, ActivationCache), NetError> {
        if input.len() != self.spec.input_shape.len() {
            return Err(NetError::InputShape {
                expected: self.spec.input_shape,
                found: Shape::new(1, 1, input.len()),
            });
        }
        let n = self.spec.layers.len();
        let mut cache = ActivationCache {
            layer_inputs: Vec::with_capacity(n),
            pool_argmax: Vec::with_capacity(n),
        };
        let mut cur = input.to_vec();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let (ins, outs) = (self.shapes[i], self.shapes[i + 1]);
            let params = &self.weights.layers[i];
            let mut argmax = Vec::new();
            let next = match *layer {
                Layer::Conv { stride, padding, .. } => conv_forward(&cur, ins, outs, layer, params, stride, padding),
                Layer::Relu => cur.iter().map(|&v| v.max(0.0)).collect(),
                Layer::MaxPool { window, stride } => {
                    let (out, am) = maxpool_forward(&cur, ins, outs, window, stride);
                    argmax = am;
                    out
                }
                Layer::FullyConnected { in_dim, out_dim } => {
                    let mut out = params.bias.clone();
                    for (o, acc) in out.iter_mut().enumerate().take(out_dim) {
                        let row = &params.kernel[o * in_dim..(o + 1) * in_dim];
                        *acc += row.iter().zip(&cur).map(|(w, x)| w * x).sum::<f64>();
                    }
                    out
                }
            };
            cache.layer_inputs.push(cur);
            cache.pool_argmax.push(argmax);
            cur = next;
        }
        Ok((FeatureVector::new(cur), cache))
    }

    /// Gradient of `feature_grad . phi(patch)` with respect to the input patch.
    pub fn backward_to_input(&self, cache: &ActivationCache, feature_grad: &[f64]) -> Result<GradientMap, NetError> {
        let n = self.spec.layers.len();
        if cache.layer_inputs.len() != n || cache.pool_argmax.len() != n {
            return Err(NetError::MissingActivations);
        }
        for (i, inp) in cache.layer_inputs.iter().enumerate() {
            if inp.len() != self.shapes[i].len() {
                return Err(NetError::MissingActivations);
            }
        }
        if feature_grad.len() != self.feature_dim() {
            return Err(NetError::FeatureDim {
                expected: self.feature_dim(),
                found: feature_grad.len(),
            });
        }
        let mut grad = feature_grad.to_vec();
        for (i, layer) in self.spec.layers.iter().enumerate().rev() {
            let (ins, outs) = (self.shapes[i], self.shapes[i + 1]);
            let params = &self.weights.layers[i];
            grad = match *layer {
                Layer::Conv { stride, padding, .. } => conv_backward(&grad, ins, outs, layer, params, stride, padding),
                Layer::Relu => grad
                    .iter()
                    .zip(&cache.layer_inputs[i])
                    .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                    .collect(),
                Layer::MaxPool { .. } => {
                    let mut gin = vec![0.0; ins.len()];
                    for (&g, &src) in grad.iter().zip(&cache.pool_argmax[i]) {
                        gin[src] += g;
                    }
                    gin
                }
                Layer::FullyConnected { in_dim, .. } => {
                    let mut gin = vec![0.0; in_dim];
                    for (o, &g) in grad.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        let row = &params.kernel[o * in_dim..(o + 1) * in_dim];
                        for (acc, w) in gin.iter_mut().zip(row) {
                            *acc += g * w;
                        }
                    }
                    gin
                }
            };
        }
        Ok(GradientMap::new(self.spec.input_shape, grad))
    }
}

fn conv_dims(layer: &Layer) -> (usize, usize, usize) {
    match *layer {
        Layer::Conv { kh, kw, in_channels, .. } => (kh, kw, in_channels),
        _ => unreachable!("conv_dims on non-conv layer"),
    }
}

fn conv_forward(
    input: &[f64],
    ins: Shape,
    outs: Shape,
    layer: &Layer,
    params: &LayerParams,
    stride: usize,
    padding: usize,
) -> Vec<f64> {
    let (kh, kw, cin) = conv_dims(layer);
    let mut out = vec![0.0; outs.len()];
    for oy in 0..outs.h {
        for ox in 0..outs.w {
            for o in 0..outs.c {
                let mut acc = params.bias[o];
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    if iy < 0 || iy as usize >= ins.h {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        if ix < 0 || ix as usize >= ins.w {
                            continue;
                        }
                        let kbase = ((o * kh + ky) * kw + kx) * cin;
                        let ibase = ins.index(iy as usize, ix as usize, 0);
                        for c in 0..cin {
                            acc += params.kernel[kbase + c] * input[ibase + c];
                        }
                    }
                }
                out[outs.index(oy, ox, o)] = acc;
            }
        }
    }
    out
}

fn conv_backward(
    gout: &[f64],
    ins: Shape,
    outs: Shape,
    layer: &Layer,
    params: &LayerParams,
    stride: usize,
    padding: usize,
) -> Vec<f64> {
    let (kh, kw, cin) = conv_dims(layer);
    let mut gin = vec![0.0; ins.len()];
    for oy in 0..outs.h {
        for ox in 0..outs.w {
            for o in 0..outs.c {
                let g = gout[outs.index(oy, ox, o)];
                if g == 0.0 {
                    continue;
                }
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    if iy < 0 || iy as usize >= ins.h {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        if ix < 0 || ix as usize >= ins.w {
                            continue;
                        }
                        let kbase = ((o * kh + ky) * kw + kx) * cin;
                        let ibase = ins.index(iy as usize, ix as usize, 0);
                        for c in 0..cin {
                            gin[ibase + c] += g * params.kernel[kbase + c];
                        }
                    }
                }
            }
        }
    }
    gin
}

/// Ties go to the first maximal element in window scan order.
fn maxpool_forward(input: &[f64], ins: Shape, outs: Shape, window: usize, stride: usize) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![0.0; outs.len()];
    let mut argmax = vec![0; outs.len()];
    for oy in 0..outs.h {
        for ox in 0..outs.w {
            for c in 0..outs.c {
                let mut best = ins.index(oy * stride, ox * stride, c);
                for ky in 0..window {
                    for kx in 0..window {
                        let idx = ins.index(oy * stride + ky, ox * stride + kx, c);
                        if input[idx] > input[best] {
                            best = idx;
                        }
                    }
                }
                let o = outs.index(oy, ox, c);
                out[o] = input[best];
                argmax[o] = best;
            }
        }
    }
    (out, argmax)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_net(h: usize, w: usize, c: usize) -> Network {
        let n = h * w * c;
        let spec = NetworkSpec::new(
            Shape::new(h, w, c),
            vec![
                Layer::Conv {
                    kh: 1,
                    kw: 1,
                    in_channels: c,
                    out_channels: c,
                    stride: 1,
                    padding: 0,
                },
                Layer::FullyConnected { in_dim: n, out_dim: n },
            ],
        )
        .unwrap();
        let mut flat = Vec::new();
        for o in 0..c {
            for i in 0..c {
                flat.push(if o == i { 1.0 } else { 0.0 });
            }
        }
        flat.extend(std::iter::repeat_n(0.0, c));
        for o in 0..n {
            for i in 0..n {
                flat.push(if o == i { 1.0 } else { 0.0 });
            }
        }
        flat.extend(std::iter::repeat_n(0.0, n));
        Network::new(spec.clone(), WeightStore::from_flat(&spec, &flat).unwrap()).unwrap()
    }

    fn scalar_net(weight: f64, relu: bool) -> Network {
        let mut layers = vec![Layer::Conv {
            kh: 1,
            kw: 1,
            in_channels: 1,
            out_channels: 1,
            stride: 1,
            padding: 0,
        }];
        if relu {
            layers.push(Layer::Relu);
        }
        let spec = NetworkSpec::new(Shape::new(2, 2, 1), layers).unwrap();
        Network::new(spec.clone(), WeightStore::from_flat(&spec, &[weight, 0.0]).unwrap()).unwrap()
    }

    #[test]
    fn identity_network_flattens_patch() {
        let net = identity_net(3, 2, 3);
        let pixels: Vec<f64> = (0..18).map(|i| i as f64 / 17.0).collect();
        let (phi, _) = net.forward_raw(&pixels).unwrap();
        assert_eq!(phi.values, pixels);
    }

    #[test]
    fn relu_kills_negative_preactivations() {
        let net = scalar_net(-1.0, true);
        let (phi, cache) = net.forward_raw(&[0.2, 0.4, 0.6, 0.8]).unwrap();
        assert_eq!(phi.values, vec![0.0; 4]);
        let g = net.backward_to_input(&cache, &[1.0; 4]).unwrap();
        assert_eq!(g.values(), &[0.0; 4]);
    }

    #[test]
    fn scalar_conv_gradient_is_weight() {
        let net = scalar_net(3.0, false);
        let (_, cache) = net.forward_raw(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = net.backward_to_input(&cache, &[1.0; 4]).unwrap();
        assert_eq!(g.values(), &[3.0; 4]);
        let g = net.backward_to_input(&cache, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g.values(), &[3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_needs_cache() {
        let net = scalar_net(1.0, false);
        let err = net.backward_to_input(&ActivationCache::default(), &[1.0; 4]).unwrap_err();
        assert!(matches!(err, NetError::MissingActivations));
        let (_, cache) = net.forward_raw(&[0.0; 4]).unwrap();
        assert!(matches!(
            net.backward_to_input(&cache, &[1.0; 3]),
            Err(NetError::FeatureDim { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn pooling_ties_route_to_first_element() {
        let spec = NetworkSpec::new(Shape::new(2, 2, 1), vec![Layer::MaxPool { window: 2, stride: 2 }]).unwrap();
        let net = Network::new(spec.clone(), WeightStore::from_flat(&spec, &[]).unwrap()).unwrap();
        let (phi, cache) = net.forward_raw(&[0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(phi.values, vec![0.5]);
        let g = net.backward_to_input(&cache, &[2.0]).unwrap();
        assert_eq!(g.values(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let net = scalar_net(1.0, false);
        assert!(matches!(net.forward_raw(&[0.0; 5]), Err(NetError::InputShape { .. })));
    }
}
