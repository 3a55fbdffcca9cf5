//! Background suppression, temporal step segmentation, cropping and
//! position normalization.
//!
//! Activity is decided per frame with an adaptive threshold: the frame's
//! values go into a 10-bin histogram over `[min, max]`, and the threshold is
//! the center of the bin after the most populated one. Binarization only
//! drives the activity and bounding-box decisions; cropped steps keep the raw
//! readings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::data::BoundingBox;
use crate::data::{DataError, PressureFrame, PressureSequence, StepSequence};

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocError {
    #[error("frame is constant; no threshold can be derived")]
    DegenerateFrame,
    #[error("no active pixels in frames {start}..{end}")]
    NoActivePixels { start: usize, end: usize },
    #[error("bounding box {bbox:?} exceeds {rows}x{cols} grid")]
    BoxOutOfBounds {
        bbox: BoundingBox,
        rows: usize,
        cols: usize,
    },
    #[error("canvas {canvas_h}x{canvas_w} cannot hold {step_h}x{step_w} step at offset ({off_r}, {off_c})")]
    CanvasTooSmall {
        canvas_h: usize,
        canvas_w: usize,
        step_h: usize,
        step_w: usize,
        off_r: i64,
        off_c: i64,
    },
    #[error("empty frame range {start}..{end}")]
    EmptyRange { start: usize, end: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub histogram: [usize; HISTOGRAM_BINS],
    pub bin_edges: [f64; HISTOGRAM_BINS + 1],
}

/// Tunables for segmentation and normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocConfig {
    /// A frame is active when at least this many pixels pass the threshold.
    pub min_active_pixels: usize,
    /// Active runs separated by at most this many idle frames are merged.
    pub max_gap_frames: usize,
    /// Pixel floor as a fraction of the sequence maximum. A pixel is active
    /// only if it exceeds both the adaptive threshold and this floor.
    pub noise_floor: f64,
    /// Ignore active pixels with no active 8-neighbour in the same frame.
    pub despeckle: bool,
    /// Fixed canvas `(height, width)` for centroid normalization; `None`
    /// keeps the tight bounding-box crop.
    pub canvas: Option<(usize, usize)>,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        Self {
            min_active_pixels: 5,
            max_gap_frames: 2,
            noise_floor: 0.1,
            despeckle: true,
            canvas: Some((64, 32)),
        }
    }
}

impl PreprocConfig {
    /// Adaptive threshold only: no floor and no canvas.
    pub fn plain(min_active_pixels: usize, max_gap_frames: usize) -> Self {
        Self {
            min_active_pixels,
            max_gap_frames,
            noise_floor: 0.0,
            despeckle: false,
            canvas: None,
        }
    }
}

pub fn adaptive_threshold(frame: &PressureFrame) -> Result<ThresholdResult, PreprocError> {
    let values = frame.values();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        let v = v as f64;
        (lo.min(v), hi.max(v))
    });
    // Edges must be strictly increasing for the bins to be well defined.
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut bin_edges = [0.0; HISTOGRAM_BINS + 1];
    for (i, e) in bin_edges.iter_mut().enumerate() {
        *e = lo + i as f64 * width;
    }
    bin_edges[HISTOGRAM_BINS] = hi;
    if !(hi > lo) || bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PreprocError::DegenerateFrame);
    }

    let mut histogram = [0usize; HISTOGRAM_BINS];
    for &v in values {
        histogram[bin_index(v as f64, lo, width, &bin_edges)] += 1;
    }
    let modal = histogram
        .iter()
        .enumerate()
        .fold(0, |best, (i, &c)| if c > histogram[best] { i } else { best });
    let k = (modal + 1).min(HISTOGRAM_BINS - 1);
    Ok(ThresholdResult {
        threshold: 0.5 * (bin_edges[k] + bin_edges[k + 1]),
        histogram,
        bin_edges,
    })
}

/// Bin membership is defined by the edges: `edges[i] <= v < edges[i+1]`,
/// with the last bin closed on the right.
#[inline]
fn bin_index(v: f64, lo: f64, width: f64, edges: &[f64; HISTOGRAM_BINS + 1]) -> usize {
    let last = HISTOGRAM_BINS - 1;
    let mut i = (((v - lo) / width).floor().max(0.0) as usize).min(last);
    while i > 0 && v < edges[i] {
        i -= 1;
    }
    while i < last && v >= edges[i + 1] {
        i += 1;
    }
    i
}

pub fn binarize(frame: &PressureFrame, threshold: f64) -> Vec<bool> {
    frame.values().iter().map(|&v| v as f64 > threshold).collect()
}

/// Pixels that pass the frame's adaptive threshold and an absolute floor.
/// Constant frames are entirely background.
pub fn activity_mask(frame: &PressureFrame, floor: f64) -> Vec<bool> {
    match adaptive_threshold(frame) {
        Ok(t) => binarize(frame, t.threshold.max(floor)),
        Err(_) => vec![false; frame.values().len()],
    }
}

/// Clears active pixels that have no active 8-neighbour.
pub fn despeckle(mask: &[bool], rows: usize, cols: usize) -> Vec<bool> {
    let at = |r: usize, c: usize| mask[r * cols + c];
    (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            mask[i]
                && (r.saturating_sub(1)..(r + 2).min(rows))
                    .any(|rr| (c.saturating_sub(1)..(c + 2).min(cols)).any(|cc| (rr, cc) != (r, c) && at(rr, cc)))
        })
        .collect()
}

fn frame_mask(frame: &PressureFrame, floor: f64, cfg: &PreprocConfig) -> Vec<bool> {
    let mask = activity_mask(frame, floor);
    if cfg.despeckle {
        despeckle(&mask, frame.rows(), frame.cols())
    } else {
        mask
    }
}

fn absolute_floor(frames: &[PressureFrame], cfg: &PreprocConfig) -> f64 {
    if cfg.noise_floor <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let peak = frames.iter().map(PressureFrame::max_value).fold(0.0, f32::max);
    cfg.noise_floor * peak as f64
}

/// Marks frames whose activity mask has at least `min_active_pixels` pixels.
pub fn active_frames(seq: &PressureSequence, cfg: &PreprocConfig) -> Vec<bool> {
    let floor = absolute_floor(seq.frames(), cfg);
    seq.frames()
        .iter()
        .map(|f| frame_mask(f, floor, cfg).iter().filter(|&&a| a).count() >= cfg.min_active_pixels)
        .collect()
}

/// Maximal active runs as half-open ranges, merging runs separated by at
/// most `max_gap` idle frames and dropping runs shorter than two frames.
pub fn runs_from_activity(active: &[bool], max_gap: usize) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut t = 0;
    while t < active.len() {
        if !active[t] {
            t += 1;
            continue;
        }
        let start = t;
        while t < active.len() && active[t] {
            t += 1;
        }
        match runs.last_mut() {
            Some(last) if start - last.1 <= max_gap => last.1 = t,
            _ => runs.push((start, t)),
        }
    }
    runs.retain(|(s, e)| e - s >= 2);
    runs
}

pub fn segment_steps(seq: &PressureSequence, cfg: &PreprocConfig) -> Vec<(usize, usize)> {
    runs_from_activity(&active_frames(seq, cfg), cfg.max_gap_frames)
}

/// Minimal box containing every active pixel of every frame in `range`.
pub fn step_bounding_box(
    seq: &PressureSequence,
    range: (usize, usize),
    cfg: &PreprocConfig,
) -> Result<BoundingBox, PreprocError> {
    let (start, end) = range;
    if start >= end || end > seq.len() {
        return Err(PreprocError::EmptyRange { start, end });
    }
    let floor = absolute_floor(seq.frames(), cfg);
    let cols = seq.cols();
    let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0usize, 0usize);
    for frame in &seq.frames()[start..end] {
        for (i, _) in frame_mask(frame, floor, cfg).iter().enumerate().filter(|(_, &a)| a) {
            let (r, c) = (i / cols, i % cols);
            r0 = r0.min(r);
            c0 = c0.min(c);
            r1 = r1.max(r);
            c1 = c1.max(c);
        }
    }
    if r0 == usize::MAX {
        return Err(PreprocError::NoActivePixels { start, end });
    }
    Ok(BoundingBox::new(r0, c0, r1 - r0 + 1, c1 - c0 + 1))
}

pub fn crop_frame(frame: &PressureFrame, bbox: &BoundingBox) -> Result<PressureFrame, PreprocError> {
    if !bbox.fits_within(frame.rows(), frame.cols()) {
        return Err(PreprocError::BoxOutOfBounds {
            bbox: *bbox,
            rows: frame.rows(),
            cols: frame.cols(),
        });
    }
    let mut values = Vec::with_capacity(bbox.height * bbox.width);
    for r in bbox.row0..bbox.row_end() {
        let row = &frame.values()[r * frame.cols()..(r + 1) * frame.cols()];
        values.extend_from_slice(&row[bbox.col0..bbox.col_end()]);
    }
    Ok(PressureFrame::new(bbox.height, bbox.width, values)?)
}

pub fn crop_step(
    seq: &PressureSequence,
    range: (usize, usize),
    bbox: BoundingBox,
    step_id: impl Into<String>,
) -> Result<StepSequence, PreprocError> {
    let (start, end) = range;
    if start >= end || end > seq.len() {
        return Err(PreprocError::EmptyRange { start, end });
    }
    let frames = seq.frames()[start..end]
        .iter()
        .map(|f| crop_frame(f, &bbox))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StepSequence::new(
        frames,
        bbox,
        seq.subject_id.clone(),
        step_id,
        seq.sequence_id.clone(),
    )?)
}

/// Pressure-weighted centroid `(row, col)` pooled over every frame, or the
/// geometric center when the step carries no pressure at all.
pub fn pooled_centroid(step: &StepSequence) -> (f64, f64) {
    let cols = step.cols();
    let (mut total, mut sr, mut sc) = (0.0f64, 0.0f64, 0.0f64);
    for frame in step.frames() {
        for (i, &v) in frame.values().iter().enumerate() {
            let v = v as f64;
            total += v;
            sr += v * (i / cols) as f64;
            sc += v * (i % cols) as f64;
        }
    }
    if total > 0.0 {
        (sr / total, sc / total)
    } else {
        (
            (step.rows() as f64 - 1.0) / 2.0,
            (step.cols() as f64 - 1.0) / 2.0,
        )
    }
}

/// Integer paste offset that moves the pooled centroid onto the canvas
/// center `((h-1)/2, (w-1)/2)`, rounded half away from zero.
pub fn centering_offset(step: &StepSequence, canvas_h: usize, canvas_w: usize) -> (i64, i64) {
    let (cr, cc) = pooled_centroid(step);
    (
        ((canvas_h as f64 - 1.0) / 2.0 - cr).round() as i64,
        ((canvas_w as f64 - 1.0) / 2.0 - cc).round() as i64,
    )
}

pub fn center_normalize(
    step: &StepSequence,
    canvas_h: usize,
    canvas_w: usize,
) -> Result<StepSequence, PreprocError> {
    let (h, w) = (step.rows(), step.cols());
    let (off_r, off_c) = centering_offset(step, canvas_h, canvas_w);
    let fits = off_r >= 0
        && off_c >= 0
        && off_r as usize + h <= canvas_h
        && off_c as usize + w <= canvas_w;
    if !fits {
        return Err(PreprocError::CanvasTooSmall {
            canvas_h,
            canvas_w,
            step_h: h,
            step_w: w,
            off_r,
            off_c,
        });
    }
    let (off_r, off_c) = (off_r as usize, off_c as usize);
    let frames = step
        .frames()
        .iter()
        .map(|f| {
            let mut values = vec![0.0f32; canvas_h * canvas_w];
            for r in 0..h {
                let dst = (r + off_r) * canvas_w + off_c;
                values[dst..dst + w].copy_from_slice(&f.values()[r * w..(r + 1) * w]);
            }
            PressureFrame::new(canvas_h, canvas_w, values)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StepSequence::new(
        frames,
        step.bbox,
        step.subject_id.clone(),
        step.step_id.clone(),
        step.sequence_id.clone(),
    )?)
}

/// Full chain for one recording: segment, box, crop and (optionally) center.
/// Step ids are `<sequence_id>_step<k>`.
pub fn preprocess_sequence(
    seq: &PressureSequence,
    cfg: &PreprocConfig,
) -> Result<Vec<(StepSequence, (usize, usize))>, PreprocError> {
    segment_steps(seq, cfg)
        .into_iter()
        .enumerate()
        .map(|(k, range)| {
            let bbox = step_bounding_box(seq, range, cfg)?;
            let step = crop_step(seq, range, bbox, format!("{}_step{k:02}", seq.sequence_id))?;
            let step = match cfg.canvas {
                Some((ch, cw)) => center_normalize(&step, ch, cw)?,
                None => step,
            };
            Ok((step, range))
        })
        .collect()
}
