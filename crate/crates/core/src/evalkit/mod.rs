//! Benchmark protocol: sequence loading, overlap and center-error curves,
//! attribute tables and a synthetic sequence generator.

mod attributes;
mod dataset;
mod metrics;
mod synth;

use thiserror::Error;

pub use attributes::{attribute_table, parse_tags, Attribute, AttributeRow, AttributeTable, SequenceScore};
pub use dataset::{
    format_results, format_results_plain, load_sequence, parse_boxes, parse_results, SequenceDataset, ATTRIBUTES_FILE,
    GROUND_TRUTH_FILE, IMAGE_DIR,
};
pub use metrics::{
    center_error, default_success_thresholds, overlap, precision_curve, success_curve, success_curve_with, EvalCurve,
};
pub use synth::{synth_sequence, write_sequence, Clutter, MotionSegment, SynthConfig, SyntheticSequence, Texture};

pub const PRECISION_MAX_ERROR: usize = 50;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("frames={frames} gt={gt}")]
    CountMismatch { frames: usize, gt: usize },
    #[error("{pred} predictions for {gt} ground-truth boxes")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("no frames to evaluate")]
    Empty,
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("synthetic sequence: {0}")]
    Synth(String),
}
