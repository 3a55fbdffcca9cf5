//! Modality transformation: turning a footstep into grayscale imagery.
//!
//! Three strategies are supported. `MaxFrame` keeps the frame with the
//! largest pixel sum, `AverageFrame` the element-wise mean of all frames,
//! and `FullSequence` every frame in order. All frames of one step share a
//! single intensity scale `[0, step max]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, GrayImage, PressureFrame, StepSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("invalid intensity range [{vmin}, {vmax}]")]
    BadRange { vmin: f64, vmax: f64 },
    #[error("output size must be at least 1x1")]
    ZeroSize,
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "max")]
    MaxFrame,
    #[serde(rename = "avg")]
    AverageFrame,
    #[serde(rename = "seq")]
    FullSequence,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::MaxFrame, Strategy::AverageFrame, Strategy::FullSequence];

    /// Short name used in file names, manifests and report rows.
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::MaxFrame => "max",
            Strategy::AverageFrame => "avg",
            Strategy::FullSequence => "seq",
        }
    }

    pub fn is_sequential(self) -> bool {
        self == Strategy::FullSequence
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = TransformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Strategy::MaxFrame),
            "avg" => Ok(Strategy::AverageFrame),
            "seq" => Ok(Strategy::FullSequence),
            other => Err(TransformError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    /// Square output edge length in pixels.
    pub size: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { size: 299 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutput {
    pub step_id: String,
    pub strategy: Strategy,
    pub images: Vec<GrayImage>,
    pub subject_id: String,
    pub sequence_id: String,
}

/// Index of the frame with the largest pixel sum; earliest wins ties.
pub fn select_max_frame(step: &StepSequence) -> usize {
    let mut best = 0;
    let mut best_sum = f64::NEG_INFINITY;
    for (i, f) in step.frames().iter().enumerate() {
        let s = f.sum();
        if s > best_sum {
            best = i;
            best_sum = s;
        }
    }
    best
}

pub fn average_frames(step: &StepSequence) -> PressureFrame {
    let n = step.len() as f64;
    let mut acc = vec![0.0f64; step.rows() * step.cols()];
    for f in step.frames() {
        for (a, &v) in acc.iter_mut().zip(f.values()) {
            *a += v as f64;
        }
    }
    let values = acc.into_iter().map(|s| (s / n) as f32).collect();
    PressureFrame::new(step.rows(), step.cols(), values).expect("mean of valid frames is valid")
}

#[inline]
fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Linear gray map: `vmin` renders black, `vmax` white.
pub fn render_gray(frame: &PressureFrame, vmin: f64, vmax: f64) -> Result<GrayImage, TransformError> {
    if !(vmax > vmin) || !vmin.is_finite() || !vmax.is_finite() {
        return Err(TransformError::BadRange { vmin, vmax });
    }
    let span = vmax - vmin;
    let pixels = frame
        .values()
        .iter()
        .map(|&v| to_byte(255.0 * ((v as f64 - vmin) / span).clamp(0.0, 1.0)))
        .collect();
    Ok(GrayImage::new(frame.cols(), frame.rows(), pixels)?)
}

/// Source sample position for a destination index under the half-pixel
/// center convention, clamped to the border, as `(i0, i1, frac)`.
#[inline]
pub(crate) fn sample_coord(dst: usize, scale: f64, src_len: usize) -> (usize, usize, f64) {
    let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage, TransformError> {
    if out_w == 0 || out_h == 0 {
        return Err(TransformError::ZeroSize);
    }
    if out_w == img.width() && out_h == img.height() {
        return Ok(img.clone());
    }
    let (in_w, in_h) = (img.width(), img.height());
    let sx = in_w as f64 / out_w as f64;
    let sy = in_h as f64 / out_h as f64;
    let xs: Vec<_> = (0..out_w).map(|x| sample_coord(x, sx, in_w)).collect();
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = sample_coord(y, sy, in_h);
        for &(x0, x1, fx) in &xs {
            let p = |x, y| img.get(x, y) as f64;
            let top = lerp(p(x0, y0), p(x1, y0), fx);
            let bottom = lerp(p(x0, y1), p(x1, y1), fx);
            pixels.push(to_byte(lerp(top, bottom, fy)));
        }
    }
    Ok(GrayImage::new(out_w, out_h, pixels)?)
}

pub fn transform_step(
    step: &StepSequence,
    strategy: Strategy,
    cfg: &RenderConfig,
) -> Result<TransformOutput, TransformError> {
    let vmax = step.max_value() as f64;
    let render = |f: &PressureFrame| -> Result<GrayImage, TransformError> {
        resize_bilinear(&render_gray(f, 0.0, vmax)?, cfg.size, cfg.size)
    };
    let images = match strategy {
        Strategy::MaxFrame => vec![render(&step.frames()[select_max_frame(step)])?],
        Strategy::AverageFrame => vec![render(&average_frames(step))?],
        Strategy::FullSequence => step.frames().iter().map(render).collect::<Result<_, _>>()?,
    };
    Ok(TransformOutput {
        step_id: step.step_id.clone(),
        strategy,
        images,
        subject_id: step.subject_id.clone(),
        sequence_id: step.sequence_id.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BoundingBox;

    fn step_from(frames: Vec<PressureFrame>) -> StepSequence {
        let (r, c) = (frames[0].rows(), frames[0].cols());
        StepSequence::new(frames, BoundingBox::new(0, 0, r, c), "p", "st", "sq").unwrap()
    }

    fn row(values: &[f32]) -> PressureFrame {
        PressureFrame::new(1, values.len(), values.to_vec()).unwrap()
    }

    #[test]
    fn max_frame_by_sum() {
        let s = step_from(vec![row(&[5.0]), row(&[9.0]), row(&[7.0])]);
        assert_eq!(select_max_frame(&s), 1);
        assert_eq!(select_max_frame(&step_from(vec![row(&[0.0])])), 0);
        let tie = step_from(vec![row(&[1.0, 2.0]), row(&[2.0, 1.0])]);
        assert_eq!(select_max_frame(&tie), 0);
    }

    #[test]
    fn average_examples() {
        let s = step_from(vec![row(&[0.0, 2.0]), row(&[4.0, 2.0])]);
        assert_eq!(average_frames(&s).values(), &[2.0, 2.0]);
        let same = row(&[0.3, 1.7, 2.9]);
        let s = step_from(vec![same.clone(); 3]);
        assert_eq!(average_frames(&s), same);
    }

    #[test]
    fn render_endpoints_and_midpoint() {
        let img = render_gray(&row(&[1.0, 3.0, 2.0, -0.0, 5.0]), 1.0, 3.0).unwrap();
        assert_eq!(img.pixels(), &[0, 255, 128, 0, 255]);
        assert!(matches!(
            render_gray(&row(&[1.0]), 2.0, 2.0),
            Err(TransformError::BadRange { .. })
        ));
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = GrayImage::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(resize_bilinear(&img, 3, 2).unwrap(), img);
        let c = GrayImage::filled(5, 7, 93);
        let up = resize_bilinear(&c, 17, 3).unwrap();
        assert!(up.pixels().iter().all(|&p| p == 93));
        assert_eq!(resize_bilinear(&img, 0, 1), Err(TransformError::ZeroSize));
    }

    #[test]
    fn resize_upscale_matches_direct_interpolation() {
        let img = GrayImage::new(2, 2, vec![0, 255, 0, 255]).unwrap();
        let up = resize_bilinear(&img, 4, 4).unwrap();
        // Direct evaluation: x-coordinates (-0.25, 0.25, 0.75, 1.25) clamp to
        // (0, 0.25, 0.75, 1) so each row is 255 * (0, .25, .75, 1).
        let expected_row = [0u8, 64, 191, 255];
        for y in 0..4 {
            let r: Vec<u8> = (0..4).map(|x| up.get(x, y)).collect();
            assert_eq!(r, expected_row);
            assert!(r.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn full_sequence_cardinality_and_degenerate_equality() {
        let frames: Vec<_> = (0..12).map(|i| row(&[i as f32, 1.0])).collect();
        let out = transform_step(&step_from(frames), Strategy::FullSequence, &RenderConfig { size: 8 }).unwrap();
        assert_eq!(out.images.len(), 12);
        let single = step_from(vec![row(&[0.5, 1.0, 0.25])]);
        let cfg = RenderConfig { size: 16 };
        let a = transform_step(&single, Strategy::MaxFrame, &cfg).unwrap();
        let b = transform_step(&single, Strategy::AverageFrame, &cfg).unwrap();
        assert_eq!(a.images, b.images);
        assert_eq!(a.images[0].width(), 16);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.as_str()));
        }
        assert!("heat".parse::<Strategy>().is_err());
    }
}
