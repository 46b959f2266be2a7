//! Network manifest and weight blob I/O.
//!
//! The manifest is a text file whose first non-comment line is the magic
//! string, followed by an `input H W C` line and one line per layer:
//!
//! ```text
//! SALTRK-NET-1
//! input 16 16 3
//! conv 3 3 3 4 1 1      # kh kw in out stride padding
//! relu
//! maxpool 2 2           # window stride
//! fc 256 32             # in out
//! ```
//!
//! The blob is the magic string followed by little-endian `f32` values in
//! layer order, kernels before biases.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::spec::{Layer, NetworkSpec, Shape};
use super::NetError;

pub const MAGIC: &str = "SALTRK-NET-1";

/// Parameters of one layer; both vectors are empty for parameter-free layers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerParams {
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Immutable parameter storage, one entry per layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    pub layers: Vec<LayerParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerChecksum {
    pub index: usize,
    pub kind: &'static str,
    pub floats: usize,
    pub sum: f64,
    /// FNV-1a over the little-endian `f32` bytes of the layer.
    pub fnv1a: u64,
}

impl WeightStore {
    /// Splits a flat parameter vector according to `spec`.
    pub fn from_flat(spec: &NetworkSpec, flat: &[f64]) -> Result<Self, NetError> {
        let expected = spec.param_count();
        if flat.len() != expected {
            return Err(NetError::WeightCount {
                expected,
                found: flat.len(),
            });
        }
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut at = 0;
        for layer in &spec.layers {
            let (k, b) = layer.param_counts();
            let kernel = flat[at..at + k].to_vec();
            at += k;
            let bias = flat[at..at + b].to_vec();
            at += b;
            layers.push(LayerParams { kernel, bias });
        }
        Ok(WeightStore { layers })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|p| p.kernel.iter().chain(p.bias.iter()).copied())
            .collect()
    }

    /// Checks that every layer's parameter vectors have the sizes `spec` requires.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<(), NetError> {
        if self.layers.len() != spec.layers.len() {
            return Err(NetError::Config {
                layer: self.layers.len().min(spec.layers.len()),
                msg: format!(
                    "weight store has {} layers, spec has {}",
                    self.layers.len(),
                    spec.layers.len()
                ),
            });
        }
        for (i, (layer, p)) in spec.layers.iter().zip(&self.layers).enumerate() {
            let (k, b) = layer.param_counts();
            if p.kernel.len() != k || p.bias.len() != b {
                return Err(NetError::Config {
                    layer: i,
                    msg: format!(
                        "{} expects {k}+{b} parameters, store has {}+{}",
                        layer.kind(),
                        p.kernel.len(),
                        p.bias.len()
                    ),
                });
            }
            if p.kernel.iter().chain(&p.bias).any(|v| !v.is_finite()) {
                return Err(NetError::Config {
                    layer: i,
                    msg: "non-finite parameter".into(),
                });
            }
        }
        Ok(())
    }

    pub fn checksums(&self, spec: &NetworkSpec) -> Vec<LayerChecksum> {
        spec.layers
            .iter()
            .zip(&self.layers)
            .enumerate()
            .map(|(index, (layer, p))| {
                let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
                let mut sum = 0.0;
                for &v in p.kernel.iter().chain(&p.bias) {
                    sum += v;
                    for byte in (v as f32).to_le_bytes() {
                        hash ^= u64::from(byte);
                        hash = hash.wrapping_mul(0x0100_0000_01b3);
                    }
                }
                LayerChecksum {
                    index,
                    kind: layer.kind(),
                    floats: p.kernel.len() + p.bias.len(),
                    sum,
                    fnv1a: hash,
                }
            })
            .collect()
    }
}

pub fn parse_manifest(text: &str) -> Result<NetworkSpec, NetError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(NetError::BadMagic),
    }

    let mut input = None;
    let mut layers = Vec::new();
    for (lineno, line) in lines {
        let mut tok = line.split_whitespace();
        let kind = tok.next().unwrap_or_default();
        let nums: Result<Vec<usize>, _> = tok.map(str::parse::<usize>).collect();
        let nums = nums.map_err(|e| NetError::Manifest {
            line: lineno,
            msg: e.to_string(),
        })?;
        let want = |n: usize| -> Result<(), NetError> {
            if nums.len() == n {
                Ok(())
            } else {
                Err(NetError::Manifest {
                    line: lineno,
                    msg: format!("{kind} takes {n} fields, found {}", nums.len()),
                })
            }
        };
        match kind {
            "input" => {
                want(3)?;
                input = Some(Shape::new(nums[0], nums[1], nums[2]));
            }
            "conv" => {
                want(6)?;
                layers.push(Layer::Conv {
                    kh: nums[0],
                    kw: nums[1],
                    in_channels: nums[2],
                    out_channels: nums[3],
                    stride: nums[4],
                    padding: nums[5],
                });
            }
            "relu" => {
                want(0)?;
                layers.push(Layer::Relu);
            }
            "maxpool" => {
                want(2)?;
                layers.push(Layer::MaxPool {
                    window: nums[0],
                    stride: nums[1],
                });
            }
            "fc" => {
                want(2)?;
                layers.push(Layer::FullyConnected {
                    in_dim: nums[0],
                    out_dim: nums[1],
                });
            }
            other => {
                return Err(NetError::Manifest {
                    line: lineno,
                    msg: format!("unknown layer kind {other:?}"),
                })
            }
        }
    }
    let input_shape = input.ok_or(NetError::Manifest {
        line: 0,
        msg: "missing input line".into(),
    })?;
    NetworkSpec::new(input_shape, layers)
}

pub fn format_manifest(spec: &NetworkSpec) -> String {
    let mut out = format!("{MAGIC}\n");
    let s = spec.input_shape;
    let _ = writeln!(out, "input {} {} {}", s.h, s.w, s.c);
    for layer in &spec.layers {
        let _ = match *layer {
            Layer::Conv {
                kh,
                kw,
                in_channels,
                out_channels,
                stride,
                padding,
            } => writeln!(out, "conv {kh} {kw} {in_channels} {out_channels} {stride} {padding}"),
            Layer::Relu => writeln!(out, "relu"),
            Layer::MaxPool { window, stride } => writeln!(out, "maxpool {window} {stride}"),
            Layer::FullyConnected { in_dim, out_dim } => writeln!(out, "fc {in_dim} {out_dim}"),
        };
    }
    out
}

pub fn decode_blob(spec: &NetworkSpec, bytes: &[u8]) -> Result<WeightStore, NetError> {
    let body = bytes.strip_prefix(MAGIC.as_bytes()).ok_or(NetError::BadMagic)?;
    let expected = spec.param_count();
    if body.len() % 4 != 0 {
        return Err(NetError::Blob(format!(
            "payload of {} bytes is not a whole number of f32 values",
            body.len()
        )));
    }
    let found = body.len() / 4;
    if found != expected {
        return Err(NetError::WeightCount { expected, found });
    }
    let flat: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let store = WeightStore::from_flat(spec, &flat)?;
    store.validate(spec)?;
    Ok(store)
}

pub fn encode_blob(weights: &WeightStore) -> Vec<u8> {
    let flat = weights.to_flat();
    let mut out = Vec::with_capacity(MAGIC.len() + 4 * flat.len());
    out.extend_from_slice(MAGIC.as_bytes());
    for v in flat {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Reads and cross-validates a manifest and its weight blob.
pub fn load_weights(
    spec_file: &Path,
    weight_file: &Path,
) -> Result<(NetworkSpec, WeightStore, Vec<LayerChecksum>), NetError> {
    let text = fs::read_to_string(spec_file).map_err(|e| NetError::Io {
        path: spec_file.display().to_string(),
        source: e,
    })?;
    let spec = parse_manifest(&text)?;
    let bytes = fs::read(weight_file).map_err(|e| NetError::Io {
        path: weight_file.display().to_string(),
        source: e,
    })?;
    let weights = decode_blob(&spec, &bytes)?;
    let report = weights.checksums(&spec);
    for c in &report {
        log::debug!(
            "layer {} {}: {} floats, sum {:.6}, fnv1a {:016x}",
            c.index,
            c.kind,
            c.floats,
            c.sum,
            c.fnv1a
        );
    }
    Ok((spec, weights, report))
}

pub fn save_weights(spec: &NetworkSpec, weights: &WeightStore, spec_file: &Path, weight_file: &Path) -> Result<(), NetError> {
    weights.validate(spec)?;
    fs::write(spec_file, format_manifest(spec)).map_err(|e| NetError::Io {
        path: spec_file.display().to_string(),
        source: e,
    })?;
    fs::write(weight_file, encode_blob(weights)).map_err(|e| NetError::Io {
        path: weight_file.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_CONV: &str = "SALTRK-NET-1\ninput 5 5 3\nconv 3 3 3 4 1 0\n";

    fn blob_of(n: usize) -> Vec<u8> {
        let mut b = MAGIC.as_bytes().to_vec();
        for i in 0..n {
            b.extend_from_slice(&(i as f32 * 0.5).to_le_bytes());
        }
        b
    }

    #[test]
    fn conv_blob_of_112_floats_loads() {
        let spec = parse_manifest(ONE_CONV).unwrap();
        assert_eq!(spec.param_count(), 112);
        let w = decode_blob(&spec, &blob_of(112)).unwrap();
        assert_eq!(w.layers[0].kernel.len(), 108);
        assert_eq!(w.layers[0].bias.len(), 4);
        assert_eq!(w.layers[0].bias[0], 54.0);
    }

    #[test]
    fn short_blob_reports_counts() {
        let spec = parse_manifest(ONE_CONV).unwrap();
        let err = decode_blob(&spec, &blob_of(111)).unwrap_err();
        assert!(err.to_string().contains("expected 112, found 111"), "{err}");
    }

    #[test]
    fn empty_layer_list_is_an_error() {
        let err = parse_manifest("SALTRK-NET-1\ninput 4 4 1\n").unwrap_err();
        assert!(matches!(err, NetError::EmptyNetwork));
    }

    #[test]
    fn magic_required() {
        assert!(matches!(parse_manifest("input 4 4 1\nrelu\n"), Err(NetError::BadMagic)));
        let spec = parse_manifest(ONE_CONV).unwrap();
        assert!(matches!(decode_blob(&spec, &[0u8; 16]), Err(NetError::BadMagic)));
    }

    #[test]
    fn manifest_round_trip_and_files() {
        let text = "SALTRK-NET-1 # header\ninput 6 6 2\nconv 3 3 2 2 1 1\nrelu\nmaxpool 2 2\nfc 18 4\n";
        let spec = parse_manifest(text).unwrap();
        assert_eq!(parse_manifest(&format_manifest(&spec)).unwrap(), spec);

        let flat: Vec<f64> = (0..spec.param_count()).map(|i| (i as f64 * 0.25).sin()).collect();
        let weights = WeightStore::from_flat(&spec, &flat).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (sp, wp) = (dir.path().join("net.txt"), dir.path().join("net.bin"));
        save_weights(&spec, &weights, &sp, &wp).unwrap();
        let (spec2, w2, report) = load_weights(&sp, &wp).unwrap();
        assert_eq!(spec2, spec);
        assert_eq!(report.len(), 4);
        assert_eq!(report[0].floats, 3 * 3 * 2 * 2 + 2);
        assert_eq!(report[1].floats, 0);
        for (a, b) in w2.to_flat().iter().zip(&flat) {
            assert_eq!(*a, f64::from(*b as f32));
        }
    }
}
