//! Small differentiable convolutional network: forward features and input gradients.

mod network;
mod patch;
pub mod presets;
mod spec;
mod weights;

pub use network::{ActivationCache, FeatureVector, Network};
pub use patch::{GradientMap, ImagePatch};
pub use spec::{Layer, NetworkSpec, Shape};
pub use weights::{
    decode_blob, encode_blob, format_manifest, load_weights, parse_manifest, save_weights, LayerChecksum, LayerParams,
    WeightStore, MAGIC,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("layer {layer}: {msg}")]
    Config { layer: usize, msg: String },
    #[error("network has no layers (no feature dimension)")]
    EmptyNetwork,
    #[error("weight count mismatch: expected {expected}, found {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("missing or wrong magic string (want {MAGIC})")]
    BadMagic,
    #[error("weight blob: {0}")]
    Blob(String),
    #[error("input shape mismatch: expected {expected}, found {found}")]
    InputShape { expected: Shape, found: Shape },
    #[error("feature gradient has dimension {found}, network produces {expected}")]
    FeatureDim { expected: usize, found: usize },
    #[error("no activation cache for this patch; run forward first")]
    MissingActivations,
    #[error("non-finite pixel intensity")]
    NonFinite,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
