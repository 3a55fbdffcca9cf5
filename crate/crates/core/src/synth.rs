//! Seeded synthetic gait-pressure recordings.
//!
//! Each subject walks straight up the mat (towards row 0), leaving 2-3
//! footsteps per recording. A footstep is a two-lobe elliptical template
//! (heel and forefoot) whose lobe weights roll from heel to toe under a
//! rising-then-falling envelope. Steps are separated by idle frames.
//!
//! Readings are quantized to a 12-bit ADC grid (multiples of 2^-12), which
//! keeps per-pixel sums exact in f64 regardless of summation order.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, PressureFrame, PressureSequence};

pub const ADC_STEPS: f64 = 4096.0;
/// Rows between consecutive footprints.
pub const STRIDE_ROWS: usize = 32;
/// Column separation between left and right footprints.
pub const LATERAL_COLS: usize = 12;
/// Forward travel of the footprint over one roll.
pub const ROLL_TRAVEL_ROWS: usize = 2;
const JITTER: i64 = 2;

const FOOT_LENGTHS: std::ops::RangeInclusive<usize> = 18..=26;
const FOOT_WIDTHS: std::ops::RangeInclusive<usize> = 8..=12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("footprint {height}x{width} at ({row}, {col}) leaves the {rows}x{cols} grid")]
    FootDoesNotFit {
        row: i64,
        col: i64,
        height: usize,
        width: usize,
        rows: usize,
        cols: usize,
    },
    #[error("invalid generator config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub foot_length_px: usize,
    pub foot_width_px: usize,
    pub peak_pressure: f64,
    /// Frames from heel strike to toe off.
    pub roll_duration_frames: usize,
    /// Negative: pressure lingers on the heel; positive: rolls to the toe early.
    pub roll_skew: f64,
    /// Mean top-left placement `(row, col)` of the first footprint.
    pub stance_offset: (usize, usize),
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub num_subjects: usize,
    pub sequences_per_subject: usize,
    pub steps_per_sequence: usize,
    pub rows: usize,
    pub cols: usize,
    pub fps: f64,
    pub seed: u64,
    /// Standard deviation of the additive sensor noise, in sensor units.
    pub noise_sigma: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            num_subjects: 13,
            sequences_per_subject: 12,
            steps_per_sequence: 3,
            rows: 120,
            cols: 54,
            fps: 25.0,
            seed: 0,
            noise_sigma: 0.02,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::BadConfig(m.to_string()));
        if self.num_subjects == 0 || self.sequences_per_subject == 0 {
            return bad("subject and sequence counts must be positive");
        }
        if !(2..=3).contains(&self.steps_per_sequence) {
            return bad("steps_per_sequence must be 2 or 3");
        }
        if self.rows == 0 || self.cols == 0 {
            return bad("grid dimensions must be positive");
        }
        if !(self.fps > 0.0) || !(self.noise_sigma >= 0.0) {
            return bad("fps must be positive and noise_sigma non-negative");
        }
        Ok(())
    }
}

/// SplitMix64 finalizer; derives independent stream seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn quantize(v: f64) -> f32 {
    ((v * ADC_STEPS).round() / ADC_STEPS) as f32
}

/// Draws `num_subjects` profiles. Foot dimensions are sampled without
/// replacement from the length × width grid, so profiles never coincide
/// in size unless there are more subjects than size combinations.
pub fn sample_profiles(cfg: &GenConfig) -> Vec<SubjectProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x5052_4f46));
    let widths: Vec<usize> = FOOT_WIDTHS.collect();
    let lengths: Vec<usize> = FOOT_LENGTHS.collect();
    let combos = widths.len() * lengths.len();
    let mut picks: Vec<usize> = Vec::with_capacity(cfg.num_subjects);
    while picks.len() < cfg.num_subjects {
        let take = (cfg.num_subjects - picks.len()).min(combos);
        picks.extend(sample(&mut rng, combos, take).into_iter());
    }
    picks
        .into_iter()
        .map(|combo| SubjectProfile {
            foot_length_px: lengths[combo / widths.len()],
            foot_width_px: widths[combo % widths.len()],
            peak_pressure: rng.random_range(0.8..1.2),
            roll_duration_frames: rng.random_range(10..=16),
            roll_skew: rng.random_range(-1.0..=1.0),
            stance_offset: (rng.random_range(78..=88), rng.random_range(8..=16)),
            noise_sigma: cfg.noise_sigma,
        })
        .collect()
}

/// Lobe falloff `max(0, 1 - d^2)` for an axis-aligned ellipse.
fn lobe(y: f64, x: f64, cy: f64, cx: f64, ry: f64, rx: f64) -> f64 {
    let d = ((y - cy) / ry).powi(2) + ((x - cx) / rx).powi(2);
    (1.0 - d).max(0.0)
}

/// Heel and forefoot weight maps in foot-local coordinates. The toe is at
/// local row 0 (walking direction), the heel at the far end.
fn foot_template(length: usize, width: usize) -> (Vec<f64>, Vec<f64>) {
    let (l, w) = (length as f64, width as f64);
    let cx = (w - 1.0) / 2.0;
    let mut heel = vec![0.0; length * width];
    let mut toe = vec![0.0; length * width];
    for y in 0..length {
        for x in 0..width {
            let (yf, xf) = (y as f64, x as f64);
            heel[y * width + x] = lobe(yf, xf, 0.78 * (l - 1.0), cx, 0.24 * l, 0.42 * w);
            toe[y * width + x] = lobe(yf, xf, 0.3 * (l - 1.0), cx, 0.32 * l, 0.55 * w);
        }
    }
    (heel, toe)
}

/// Clean frames of one footprint roll, each `length + travel` rows tall,
/// normalized so the brightest pixel of the roll equals `peak`.
fn roll_frames(profile: &SubjectProfile) -> Vec<Vec<f64>> {
    let (len, wid) = (profile.foot_length_px, profile.foot_width_px);
    let d = profile.roll_duration_frames;
    let gamma = 2f64.powf(-profile.roll_skew);
    let (heel, toe) = foot_template(len, wid);
    let h = len + ROLL_TRAVEL_ROWS;
    let mut frames = Vec::with_capacity(d);
    for t in 0..d {
        let u = if d > 1 { t as f64 / (d - 1) as f64 } else { 0.5 };
        let s = u.powf(gamma);
        let envelope = (PI * (t + 1) as f64 / (d + 1) as f64).sin();
        let shift = ROLL_TRAVEL_ROWS - (ROLL_TRAVEL_ROWS as f64 * s).round() as usize;
        let mut f = vec![0.0; h * wid];
        for y in 0..len {
            for x in 0..wid {
                let i = y * wid + x;
                f[(y + shift) * wid + x] = envelope * ((1.0 - s) * heel[i] + s * toe[i]);
            }
        }
        frames.push(f);
    }
    let max = frames.iter().flatten().copied().fold(0.0, f64::max);
    for v in frames.iter_mut().flatten() {
        *v = *v / max * profile.peak_pressure;
    }
    frames
}

/// Placement and timing of the footprints in one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLayout {
    /// Top-left `(row, col)` of each footprint's roll window.
    pub placements: Vec<(i64, i64)>,
    /// Idle frames before the first step, between steps, and after the last.
    pub gaps: Vec<usize>,
    pub roll_duration: usize,
}

impl SequenceLayout {
    pub fn num_frames(&self) -> usize {
        self.gaps.iter().sum::<usize>() + self.placements.len() * self.roll_duration
    }

    /// Half-open frame range of each step.
    pub fn step_ranges(&self) -> Vec<(usize, usize)> {
        let mut t = 0;
        self.placements
            .iter()
            .enumerate()
            .map(|(k, _)| {
                t += self.gaps[k];
                let r = (t, t + self.roll_duration);
                t += self.roll_duration;
                r
            })
            .collect()
    }
}

pub fn sequence_layout(profile: &SubjectProfile, cfg: &GenConfig, sequence_seed: u64) -> SequenceLayout {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(sequence_seed, 0x4c41_594f));
    let (r0, c0) = (profile.stance_offset.0 as i64, profile.stance_offset.1 as i64);
    let jr = rng.random_range(-JITTER..=JITTER);
    let jc = rng.random_range(-JITTER..=JITTER);
    let placements = (0..cfg.steps_per_sequence)
        .map(|k| {
            (
                r0 + jr - (k * STRIDE_ROWS) as i64,
                c0 + jc + ((k % 2) * LATERAL_COLS) as i64,
            )
        })
        .collect();
    let gaps = (0..=cfg.steps_per_sequence)
        .map(|_| rng.random_range(3..=6))
        .collect();
    SequenceLayout {
        placements,
        gaps,
        roll_duration: profile.roll_duration_frames,
    }
}

fn render_sequence(
    profile: &SubjectProfile,
    cfg: &GenConfig,
    sequence_seed: u64,
    reversed: bool,
) -> Result<Vec<PressureFrame>, SynthError> {
    let layout = sequence_layout(profile, cfg, sequence_seed);
    let (h, w) = (profile.foot_length_px + ROLL_TRAVEL_ROWS, profile.foot_width_px);
    for &(row, col) in &layout.placements {
        if row < 0 || col < 0 || row as usize + h > cfg.rows || col as usize + w > cfg.cols {
            return Err(SynthError::FootDoesNotFit {
                row,
                col,
                height: h,
                width: w,
                rows: cfg.rows,
                cols: cfg.cols,
            });
        }
    }
    let mut roll = roll_frames(profile);
    if reversed {
        roll.reverse();
    }
    let mut clean: Vec<Vec<f64>> = Vec::with_capacity(layout.num_frames());
    let blank = || vec![0.0; cfg.rows * cfg.cols];
    for (k, &(row, col)) in layout.placements.iter().enumerate() {
        clean.extend((0..layout.gaps[k]).map(|_| blank()));
        for local in &roll {
            let mut f = blank();
            for y in 0..h {
                let dst = (row as usize + y) * cfg.cols + col as usize;
                f[dst..dst + w].copy_from_slice(&local[y * w..(y + 1) * w]);
            }
            clean.push(f);
        }
    }
    clean.extend((0..*layout.gaps.last().unwrap()).map(|_| blank()));

    let mut noise_rng = ChaCha8Rng::seed_from_u64(mix_seed(sequence_seed, 0x4e4f_4953));
    let noise = (profile.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, profile.noise_sigma).expect("sigma is finite and positive"));
    clean
        .into_iter()
        .map(|f| {
            let values = f
                .into_iter()
                .map(|v| {
                    let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut noise_rng));
                    quantize((v + n).max(0.0))
                })
                .collect();
            Ok(PressureFrame::new(cfg.rows, cfg.cols, values)?)
        })
        .collect()
}

pub fn generate_sequence(
    profile: &SubjectProfile,
    cfg: &GenConfig,
    sequence_seed: u64,
    subject_id: &str,
    sequence_id: &str,
) -> Result<PressureSequence, SynthError> {
    let frames = render_sequence(profile, cfg, sequence_seed, false)?;
    Ok(PressureSequence::new(frames, cfg.fps, subject_id, sequence_id)?)
}

pub fn subject_id(index: usize) -> String {
    format!("s{index:02}")
}

fn sequence_id(subject: usize, seq: usize) -> String {
    format!("s{subject:02}_q{seq:02}")
}

/// One recording per (subject, sequence index), subject-major.
pub fn generate_dataset(cfg: &GenConfig) -> Result<Vec<PressureSequence>, SynthError> {
    cfg.validate()?;
    let profiles = sample_profiles(cfg);
    let mut out = Vec::with_capacity(cfg.num_subjects * cfg.sequences_per_subject);
    for (s, profile) in profiles.iter().enumerate() {
        for q in 0..cfg.sequences_per_subject {
            let seed = mix_seed(mix_seed(cfg.seed, s as u64 + 1), q as u64 + 1);
            out.push(generate_sequence(profile, cfg, seed, &subject_id(s), &sequence_id(s, q))?);
        }
    }
    Ok(out)
}

/// Pairs of subjects that share a template, placements and timing, but roll
/// in opposite temporal order: subject `2k` strikes heel first, `2k+1` plays
/// the same roll backwards. Per-step average and max frames are therefore
/// identical within a pair at zero noise; only the frame order differs.
pub fn generate_temporal_twin_dataset(cfg: &GenConfig) -> Result<Vec<PressureSequence>, SynthError> {
    cfg.validate()?;
    if cfg.num_subjects % 2 != 0 {
        return Err(SynthError::BadConfig("twin dataset needs an even subject count".into()));
    }
    let pair_cfg = GenConfig {
        num_subjects: cfg.num_subjects / 2,
        ..cfg.clone()
    };
    let profiles = sample_profiles(&pair_cfg);
    let mut out = Vec::with_capacity(cfg.num_subjects * cfg.sequences_per_subject);
    for (p, profile) in profiles.iter().enumerate() {
        for twin in 0..2 {
            let s = 2 * p + twin;
            for q in 0..cfg.sequences_per_subject {
                let seed = mix_seed(mix_seed(cfg.seed, p as u64 + 1), q as u64 + 1);
                let frames = render_sequence(profile, cfg, seed, twin == 1)?;
                out.push(PressureSequence::new(frames, cfg.fps, subject_id(s), sequence_id(s, q))?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(cfg: GenConfig) -> GenConfig {
        GenConfig {
            noise_sigma: 0.0,
            ..cfg
        }
    }

    #[test]
    fn profiles_are_deterministic_and_sized() {
        let cfg = GenConfig::default();
        let a = sample_profiles(&cfg);
        assert_eq!(a.len(), 13);
        assert_eq!(a, sample_profiles(&cfg));
        assert_ne!(a, sample_profiles(&GenConfig { seed: 1, ..cfg }));
    }

    #[test]
    fn profiles_distinct_across_many_seeds() {
        for seed in 0..1000 {
            let ps = sample_profiles(&GenConfig {
                seed,
                ..GenConfig::default()
            });
            for i in 0..ps.len() {
                for j in i + 1..ps.len() {
                    let (a, b) = (&ps[i], &ps[j]);
                    let same = a.foot_length_px == b.foot_length_px
                        && a.foot_width_px == b.foot_width_px
                        && a.roll_duration_frames == b.roll_duration_frames
                        && a.roll_skew == b.roll_skew;
                    assert!(!same, "seed {seed}: profiles {i} and {j} coincide");
                }
            }
        }
    }

    #[test]
    fn peak_pressure_is_reached_exactly() {
        let cfg = quiet(GenConfig::default());
        let profile = SubjectProfile {
            peak_pressure: 1.0,
            ..sample_profiles(&cfg)[0].clone()
        };
        let seq = generate_sequence(&profile, &cfg, 9, "a", "b").unwrap();
        let max = seq.frames().iter().map(|f| f.max_value()).fold(0.0, f32::max);
        assert!((max as f64 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn idle_frames_are_zero_without_noise() {
        let cfg = quiet(GenConfig::default());
        let profile = sample_profiles(&cfg)[3].clone();
        let seq = generate_sequence(&profile, &cfg, 77, "a", "b").unwrap();
        let layout = sequence_layout(&profile, &cfg, 77);
        let ranges = layout.step_ranges();
        for (t, f) in seq.frames().iter().enumerate() {
            let in_step = ranges.iter().any(|&(s, e)| (s..e).contains(&t));
            assert_eq!(f.max_value() > 0.0, in_step, "frame {t}");
        }
        assert_eq!(seq.len(), layout.num_frames());
    }

    #[test]
    fn misplaced_foot_is_rejected() {
        let cfg = GenConfig::default();
        let profile = SubjectProfile {
            stance_offset: (200, 10),
            ..sample_profiles(&cfg)[0].clone()
        };
        assert!(matches!(
            generate_sequence(&profile, &cfg, 1, "a", "b"),
            Err(SynthError::FootDoesNotFit { .. })
        ));
    }

    #[test]
    fn readings_are_on_the_adc_grid() {
        let cfg = GenConfig::default();
        let profile = sample_profiles(&cfg)[1].clone();
        let seq = generate_sequence(&profile, &cfg, 5, "a", "b").unwrap();
        for f in seq.frames() {
            for &v in f.values() {
                assert!(v >= 0.0);
                let scaled = v as f64 * ADC_STEPS;
                assert_eq!(scaled, scaled.round());
            }
        }
    }

    #[test]
    fn twin_dataset_requires_even_subjects() {
        let cfg = GenConfig {
            num_subjects: 3,
            ..GenConfig::default()
        };
        assert!(generate_temporal_twin_dataset(&cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(GenConfig {
            steps_per_sequence: 4,
            ..GenConfig::default()
        }
        .validate()
        .is_err());
        assert!(GenConfig::default().validate().is_ok());
    }
}
