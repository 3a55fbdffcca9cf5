//! Fixed 336-value wavelet descriptor of a footstep.
//!
//! 1. Every frame is resampled to 16 x 16 (bilinear, half-pixel centers).
//! 2. The frame stack is resampled to 16 frames by linear interpolation.
//! 3. Each frame gets a separable 2-D Haar transform, then every
//!    coefficient position gets a 1-D Haar transform along time.
//! 4. The 4 x 4 low-pass corner of all 16 temporal slices (256 values) is
//!    kept, followed by the 80 largest-magnitude remaining coefficients in
//!    ascending position order.
//!
//! Coefficients are indexed `t * 256 + y * 16 + x`.

use serde::{Deserialize, Serialize};

use super::haar::{haar_fwt_2d, haar_fwt_strided};
use super::BaselineError;
use crate::data::{PressureFrame, StepSequence};
use crate::transform::sample_coord;

pub const WAVELET_SIDE: usize = 16;
pub const WAVELET_FRAMES: usize = 16;
pub const CORNER_SIDE: usize = 4;
pub const TOP_EXTRA: usize = 80;
pub const WAVELET_DIM: usize = CORNER_SIDE * CORNER_SIDE * WAVELET_FRAMES + TOP_EXTRA;

const PLANE: usize = WAVELET_SIDE * WAVELET_SIDE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDescriptor {
    pub step_id: String,
    pub subject_id: String,
    pub sequence_id: String,
    pub values: Vec<f64>,
}

fn resample_frame(f: &PressureFrame) -> Vec<f64> {
    let (h, w) = (f.rows(), f.cols());
    let sy = h as f64 / WAVELET_SIDE as f64;
    let sx = w as f64 / WAVELET_SIDE as f64;
    let xs: Vec<_> = (0..WAVELET_SIDE).map(|x| sample_coord(x, sx, w)).collect();
    let mut out = Vec::with_capacity(PLANE);
    for y in 0..WAVELET_SIDE {
        let (y0, y1, fy) = sample_coord(y, sy, h);
        for &(x0, x1, fx) in &xs {
            let p = |r, c| f.get(r, c) as f64;
            let top = p(y0, x0) + fx * (p(y0, x1) - p(y0, x0));
            let bottom = p(y1, x0) + fx * (p(y1, x1) - p(y1, x0));
            out.push(top + fy * (bottom - top));
        }
    }
    out
}

/// The full 16 x 16 x 16 coefficient volume, before selection.
pub fn wavelet_coefficients(step: &StepSequence) -> Result<Vec<f64>, BaselineError> {
    if step.is_empty() {
        return Err(BaselineError::EmptyStep);
    }
    let planes: Vec<Vec<f64>> = step.frames().iter().map(resample_frame).collect();
    let n = planes.len();
    let st = n as f64 / WAVELET_FRAMES as f64;
    let mut vol = Vec::with_capacity(PLANE * WAVELET_FRAMES);
    for t in 0..WAVELET_FRAMES {
        let (t0, t1, ft) = sample_coord(t, st, n);
        let (a, b) = (&planes[t0], &planes[t1]);
        vol.extend(a.iter().zip(b).map(|(a, b)| a + ft * (b - a)));
    }
    for plane in vol.chunks_exact_mut(PLANE) {
        haar_fwt_2d(plane, WAVELET_SIDE)?;
    }
    haar_fwt_strided(&mut vol, WAVELET_FRAMES, PLANE)?;
    Ok(vol)
}

fn in_corner(idx: usize) -> bool {
    let within = idx % PLANE;
    within / WAVELET_SIDE < CORNER_SIDE && within % WAVELET_SIDE < CORNER_SIDE
}

/// Selects the descriptor values from a coefficient volume.
pub fn select_coefficients(vol: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = (0..vol.len()).filter(|&i| in_corner(i)).map(|i| vol[i]).collect();
    let mut rest: Vec<usize> = (0..vol.len()).filter(|&i| !in_corner(i)).collect();
    // larger magnitude first, lower index on ties
    rest.sort_by(|&a, &b| vol[b].abs().total_cmp(&vol[a].abs()).then(a.cmp(&b)));
    let mut top: Vec<usize> = rest.into_iter().take(TOP_EXTRA).collect();
    top.sort_unstable();
    out.extend(top.into_iter().map(|i| vol[i]));
    out
}

pub fn wavelet_descriptor(step: &StepSequence) -> Result<WaveletDescriptor, BaselineError> {
    let values = select_coefficients(&wavelet_coefficients(step)?);
    debug_assert_eq!(values.len(), WAVELET_DIM);
    Ok(WaveletDescriptor {
        step_id: step.step_id.clone(),
        subject_id: step.subject_id.clone(),
        sequence_id: step.sequence_id.clone(),
        values,
    })
}

/// FNV-1a over the little-endian bit patterns of the values.
pub fn descriptor_checksum(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
