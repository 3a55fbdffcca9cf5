//! Brute-force reference implementations and random input generators
//! shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stepgrid::data::BoundingBox;
use stepgrid::{PressureFrame, PressureSequence, StepSequence};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Frame of small multiples of 1/4, so bin edges and ties get hit often.
pub fn coarse_frame(r: &mut impl Rng, rows: usize, cols: usize) -> PressureFrame {
    let top = r.random_range(1..=24u32);
    let values = (0..rows * cols).map(|_| r.random_range(0..=top) as f32 / 4.0).collect();
    PressureFrame::new(rows, cols, values).unwrap()
}

/// Mostly-empty frame with a few blobs, like a footprint on a quiet mat.
pub fn blob_frame(r: &mut impl Rng, rows: usize, cols: usize) -> PressureFrame {
    let mut values = vec![0.0f32; rows * cols];
    if r.random_bool(0.7) {
        for _ in 0..r.random_range(1..=3) {
            let (r0, c0) = (r.random_range(0..rows), r.random_range(0..cols));
            let (h, w) = (r.random_range(1..=4), r.random_range(1..=4));
            for y in r0..(r0 + h).min(rows) {
                for x in c0..(c0 + w).min(cols) {
                    values[y * cols + x] = r.random_range(1..=16) as f32 / 8.0;
                }
            }
        }
    }
    // sparse specks
    for _ in 0..r.random_range(0..3) {
        let i = r.random_range(0..rows * cols);
        values[i] = r.random_range(1..=4) as f32 / 8.0;
    }
    PressureFrame::new(rows, cols, values).unwrap()
}

pub fn blob_sequence(r: &mut impl Rng, max_len: usize) -> PressureSequence {
    let (rows, cols) = (r.random_range(2..=10), r.random_range(2..=10));
    let n = r.random_range(1..=max_len);
    let frames = (0..n).map(|_| blob_frame(r, rows, cols)).collect();
    PressureSequence::new(frames, 25.0, "s", "q").unwrap()
}

pub fn step_of(frames: Vec<PressureFrame>) -> StepSequence {
    let (r, c) = (frames[0].rows(), frames[0].cols());
    StepSequence::new(frames, BoundingBox::new(0, 0, r, c), "s", "st", "q").unwrap()
}

/// `(threshold, histogram)` straight from the definition: ten equal-width
/// bins over `[min, max]`, half-open except the last, modal bin with the
/// lowest index on ties, center of the next bin clamped to the last.
pub fn oracle_threshold(frame: &PressureFrame) -> Option<(f64, [usize; 10])> {
    let v: Vec<f64> = frame.values().iter().map(|&x| x as f64).collect();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return None;
    }
    let w = (hi - lo) / 10.0;
    let edge = |i: usize| if i == 10 { hi } else { lo + i as f64 * w };
    let mut hist = [0usize; 10];
    for &x in &v {
        let bin = (0..10)
            .find(|&i| edge(i) <= x && (x < edge(i + 1) || (i == 9 && x <= hi)))
            .expect("value inside [min, max]");
        hist[bin] += 1;
    }
    let mut modal = 0;
    for i in 1..10 {
        if hist[i] > hist[modal] {
            modal = i;
        }
    }
    let k = if modal == 9 { 9 } else { modal + 1 };
    Some(((edge(k) + edge(k + 1)) / 2.0, hist))
}

fn oracle_mask(frame: &PressureFrame, floor: f64, despeckle: bool) -> Vec<bool> {
    let Some((t, _)) = oracle_threshold(frame) else {
        return vec![false; frame.values().len()];
    };
    let cut = if t > floor { t } else { floor };
    let (rows, cols) = (frame.rows(), frame.cols());
    let raw: Vec<bool> = frame.values().iter().map(|&x| x as f64 > cut).collect();
    if !despeckle {
        return raw;
    }
    let mut out = vec![false; raw.len()];
    for r in 0..rows as i64 {
        for c in 0..cols as i64 {
            if !raw[(r * cols as i64 + c) as usize] {
                continue;
            }
            let mut neighbours = 0;
            for dr in -1..=1i64 {
                for dc in -1..=1i64 {
                    let (rr, cc) = (r + dr, c + dc);
                    if (dr, dc) != (0, 0) && rr >= 0 && cc >= 0 && rr < rows as i64 && cc < cols as i64 {
                        neighbours += raw[(rr * cols as i64 + cc) as usize] as usize;
                    }
                }
            }
            out[(r * cols as i64 + c) as usize] = neighbours > 0;
        }
    }
    out
}

fn oracle_floor(seq: &PressureSequence, fraction: f64) -> f64 {
    if fraction <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut peak = 0.0f64;
    for f in seq.frames() {
        for &v in f.values() {
            peak = peak.max(v as f64);
        }
    }
    fraction * peak
}

/// Per-pixel full scan over `range` for the tightest box around active pixels.
pub fn oracle_bbox(seq: &PressureSequence, range: (usize, usize), floor_fraction: f64, despeckle: bool) -> Option<(usize, usize, usize, usize)> {
    let floor = oracle_floor(seq, floor_fraction);
    let cols = seq.cols();
    let mut hits = Vec::new();
    for t in range.0..range.1 {
        let m = oracle_mask(&seq.frames()[t], floor, despeckle);
        hits.extend(m.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| (i / cols, i % cols)));
    }
    let rmin = hits.iter().map(|h| h.0).min()?;
    let rmax = hits.iter().map(|h| h.0).max()?;
    let cmin = hits.iter().map(|h| h.1).min()?;
    let cmax = hits.iter().map(|h| h.1).max()?;
    Some((rmin, cmin, rmax - rmin + 1, cmax - cmin + 1))
}

/// Segmentation by gap filling: idle stretches of at most `max_gap` frames
/// between two active frames become active, then maximal runs of length
/// at least two are reported.
pub fn oracle_segments(
    seq: &PressureSequence,
    min_pixels: usize,
    max_gap: usize,
    floor_fraction: f64,
    despeckle: bool,
) -> Vec<(usize, usize)> {
    let floor = oracle_floor(seq, floor_fraction);
    let mut active: Vec<bool> = seq
        .frames()
        .iter()
        .map(|f| oracle_mask(f, floor, despeckle).into_iter().filter(|&a| a).count() >= min_pixels)
        .collect();
    let n = active.len();
    let marks: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    for w in marks.windows(2) {
        if w[1] - w[0] - 1 <= max_gap {
            for t in w[0]..w[1] {
                active[t] = true;
            }
        }
    }
    let mut out = Vec::new();
    let mut t = 0;
    while t < n {
        if active[t] {
            let s = t;
            while t < n && active[t] {
                t += 1;
            }
            if t - s >= 2 {
                out.push((s, t));
            }
        } else {
            t += 1;
        }
    }
    out
}

/// First index of the largest frame sum, sums taken pixel by pixel in f64.
pub fn oracle_max_frame(step: &StepSequence) -> usize {
    let sums: Vec<f64> = step
        .frames()
        .iter()
        .map(|f| {
            let mut s = 0.0;
            for &v in f.values() {
                s += v as f64;
            }
            s
        })
        .collect();
    let mut best = 0;
    for (i, &s) in sums.iter().enumerate() {
        if s > sums[best] {
            best = i;
        }
    }
    best
}
