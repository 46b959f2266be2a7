//! Saliency-driven visual tracking: a convolutional feature extractor, an
//! exact online SVM, target-specific saliency, grid Bayes localization,
//! saliency-seeded segmentation and benchmark evaluation.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod evalkit;
pub mod feature_net;
pub mod geometry;
pub mod grid;
pub mod localization;
pub mod online_svm;
pub mod saliency;
pub mod segmentation;
pub mod tracker;

pub use geometry::{BBox, PixelSpan, TargetState};
pub use grid::{Grid, Image};
pub use tracker::{TrackResult, TrackerConfig, TrackerSession};
