//! Domain value types shared by every stage of the pipeline.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards, so they can be shared freely across threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frame rate of the reference pressure mat.
pub const DEFAULT_FPS: f64 = 25.0;

/// Default descriptor length, matching the pooled output of Inception-v3.
pub const DEFAULT_DESCRIPTOR_DIM: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("zero dimension in {0}")]
    ZeroDimension(&'static str),
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("pressure value {value} at index {index} is negative or not finite")]
    InvalidPressure { index: usize, value: f32 },
    #[error("descriptor value at index {0} is not finite")]
    NonFiniteDescriptor(usize),
    #[error("sequence has no frames")]
    EmptySequence,
    #[error("frame {index} is {rows}x{cols}, expected {want_rows}x{want_cols}")]
    GeometryMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("frame rate must be positive and finite, got {0}")]
    BadFps(f64),
}

/// One 2-D snapshot of the pressure mat, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureFrame {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl PressureFrame {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self, DataError> {
        if rows == 0 || cols == 0 {
            return Err(DataError::ZeroDimension("frame"));
        }
        if values.len() != rows * cols {
            return Err(DataError::LengthMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(DataError::InvalidPressure { index, value });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "frame dimensions must be positive");
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }

    /// Sum of all readings, accumulated in f64 in row-major order.
    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    pub fn max_value(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    pub fn min_value(&self) -> f32 {
        self.values.iter().copied().fold(f32::INFINITY, f32::min)
    }
}

/// A recording: an ordered stack of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureSequence {
    frames: Vec<PressureFrame>,
    fps: f64,
    pub subject_id: String,
    pub sequence_id: String,
}

fn check_geometry(frames: &[PressureFrame]) -> Result<(), DataError> {
    let first = frames.first().ok_or(DataError::EmptySequence)?;
    for (index, f) in frames.iter().enumerate() {
        if f.rows != first.rows || f.cols != first.cols {
            return Err(DataError::GeometryMismatch {
                index,
                rows: f.rows,
                cols: f.cols,
                want_rows: first.rows,
                want_cols: first.cols,
            });
        }
    }
    Ok(())
}

impl PressureSequence {
    pub fn new(
        frames: Vec<PressureFrame>,
        fps: f64,
        subject_id: impl Into<String>,
        sequence_id: impl Into<String>,
    ) -> Result<Self, DataError> {
        check_geometry(&frames)?;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(DataError::BadFps(fps));
        }
        Ok(Self {
            frames,
            fps,
            subject_id: subject_id.into(),
            sequence_id: sequence_id.into(),
        })
    }

    pub fn frames(&self) -> &[PressureFrame] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn rows(&self) -> usize {
        self.frames[0].rows
    }

    pub fn cols(&self) -> usize {
        self.frames[0].cols
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Axis-aligned box in sensor coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
}

impl BoundingBox {
    pub fn new(row0: usize, col0: usize, height: usize, width: usize) -> Self {
        Self {
            row0,
            col0,
            height,
            width,
        }
    }

    pub fn row_end(&self) -> usize {
        self.row0 + self.height
    }

    pub fn col_end(&self) -> usize {
        self.col0 + self.width
    }

    pub fn fits_within(&self, rows: usize, cols: usize) -> bool {
        self.height > 0 && self.width > 0 && self.row_end() <= rows && self.col_end() <= cols
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        other.row0 >= self.row0
            && other.col0 >= self.col0
            && other.row_end() <= self.row_end()
            && other.col_end() <= self.col_end()
    }

    /// Smallest box covering both.
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        let row0 = self.row0.min(other.row0);
        let col0 = self.col0.min(other.col0);
        let row_end = self.row_end().max(other.row_end());
        let col_end = self.col_end().max(other.col_end());
        BoundingBox::new(row0, col0, row_end - row0, col_end - col0)
    }
}

/// One segmented footstep: frames cropped to a common box.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSequence {
    frames: Vec<PressureFrame>,
    pub bbox: BoundingBox,
    pub subject_id: String,
    pub step_id: String,
    /// Recording this step was cut from; used for grouped cross-validation.
    pub sequence_id: String,
}

impl StepSequence {
    pub fn new(
        frames: Vec<PressureFrame>,
        bbox: BoundingBox,
        subject_id: impl Into<String>,
        step_id: impl Into<String>,
        sequence_id: impl Into<String>,
    ) -> Result<Self, DataError> {
        check_geometry(&frames)?;
        Ok(Self {
            frames,
            bbox,
            subject_id: subject_id.into(),
            step_id: step_id.into(),
            sequence_id: sequence_id.into(),
        })
    }

    pub fn frames(&self) -> &[PressureFrame] {
        &self.frames
    }

    pub fn rows(&self) -> usize {
        self.frames[0].rows
    }

    pub fn cols(&self) -> usize {
        self.frames[0].cols
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Largest raw reading over every frame of the step.
    pub fn max_value(&self) -> f32 {
        self.frames
            .iter()
            .map(PressureFrame::max_value)
            .fold(0.0, f32::max)
    }
}

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, DataError> {
        if width == 0 || height == 0 {
            return Err(DataError::ZeroDimension("image"));
        }
        if pixels.len() != width * height {
            return Err(DataError::LengthMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Fixed-length real embedding of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    values: Vec<f32>,
}

impl Descriptor {
    pub fn new(values: Vec<f32>) -> Result<Self, DataError> {
        if values.is_empty() {
            return Err(DataError::ZeroDimension("descriptor"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFiniteDescriptor(i));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}
