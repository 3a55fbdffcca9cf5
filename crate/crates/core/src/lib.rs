//! Footstep identification from pressure-mat recordings.
//!
//! The pipeline turns 2-D pressure time series into grayscale imagery,
//! describes each image with a frozen embedder, and classifies persons
//! with either a softmax head (single image per step) or a GRU over the
//! per-frame descriptors. A wavelet + quadratic-kernel SVM baseline and a
//! repeated stratified cross-validation harness round things out.
//!
//! ```text
//! gen ─► PSQ ─► preproc ─► StepSequence ─► transform ─► GrayImage(s)
//!                                   │                        │
//!                                   └─► baseline (FWT+SVM)   └─► embed ─► heads
//! ```

pub mod baseline;
pub mod data;
pub mod embed;
pub mod error;
pub mod formats;
pub mod harness;
pub mod heads;
pub mod manifest;
pub mod preproc;
pub mod report;
pub mod synth;
pub mod transform;

pub use data::{Descriptor, GrayImage, PressureFrame, PressureSequence, StepSequence};
pub use error::{Error, ErrorKind, Result};
pub use report::EvalReport;
pub use transform::Strategy;
