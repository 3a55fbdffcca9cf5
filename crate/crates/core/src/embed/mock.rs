//! Closed-form stand-in for a pre-trained CNN.
//!
//! Features: mean intensity of each cell of an 8x8 grid (scaled to [0, 1])
//! followed by a normalized 32-bin intensity histogram, 96 values in all.
//! The descriptor is a seeded ±1/√96 random projection of those features.
//!
//! Pooling and histogram counts are integer sums; the projection sums the
//! 96 products in feature order in f64, so outputs are bit-identical across
//! runs and platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbedError, ImageEmbedder};
use crate::data::{Descriptor, GrayImage};
use crate::synth::mix_seed;

pub const MOCK_GRID: usize = 8;
pub const MOCK_HIST_BINS: usize = 32;
pub const MOCK_FEATURES: usize = MOCK_GRID * MOCK_GRID + MOCK_HIST_BINS;

#[derive(Debug, Clone, PartialEq)]
pub struct MockProjection {
    seed: u64,
    output_dim: usize,
    input_size: usize,
    /// Row-major `output_dim x MOCK_FEATURES`.
    matrix: Vec<f64>,
}

impl MockProjection {
    pub fn new(seed: u64, output_dim: usize, input_size: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x4d4f_434b));
        let scale = 1.0 / (MOCK_FEATURES as f64).sqrt();
        let matrix = (0..output_dim * MOCK_FEATURES)
            .map(|_| if rng.random::<bool>() { scale } else { -scale })
            .collect();
        Self {
            seed,
            output_dim,
            input_size,
            matrix,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// FNV-1a over the sign pattern of the projection matrix.
    pub fn checksum(&self) -> u64 {
        self.matrix.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &v| {
            (h ^ u64::from(v > 0.0)).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    /// Grid means then histogram, as fed to the projection.
    pub fn features(img: &GrayImage) -> [f64; MOCK_FEATURES] {
        let (w, h) = (img.width(), img.height());
        let mut out = [0.0; MOCK_FEATURES];
        for gy in 0..MOCK_GRID {
            let (y0, y1) = (gy * h / MOCK_GRID, (gy + 1) * h / MOCK_GRID);
            for gx in 0..MOCK_GRID {
                let (x0, x1) = (gx * w / MOCK_GRID, (gx + 1) * w / MOCK_GRID);
                let count = ((y1 - y0) * (x1 - x0)) as u64;
                if count == 0 {
                    continue;
                }
                let sum: u64 = (y0..y1)
                    .flat_map(|y| (x0..x1).map(move |x| (x, y)))
                    .map(|(x, y)| img.get(x, y) as u64)
                    .sum();
                out[gy * MOCK_GRID + gx] = sum as f64 / (count as f64 * 255.0);
            }
        }
        let mut hist = [0u64; MOCK_HIST_BINS];
        for &p in img.pixels() {
            hist[p as usize * MOCK_HIST_BINS / 256] += 1;
        }
        let total = img.pixels().len() as f64;
        for (o, c) in out[MOCK_GRID * MOCK_GRID..].iter_mut().zip(hist) {
            *o = c as f64 / total;
        }
        out
    }
}

impl ImageEmbedder for MockProjection {
    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn input_size(&self) -> usize {
        self.input_size
    }

    fn embed_image(&self, img: &GrayImage) -> Result<Descriptor, EmbedError> {
        self.check_size(img)?;
        let f = Self::features(img);
        let values = self
            .matrix
            .chunks_exact(MOCK_FEATURES)
            .map(|row| row.iter().zip(&f).map(|(m, x)| m * x).sum::<f64>() as f32)
            .collect();
        Ok(Descriptor::new(values)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = MockProjection::new(7, 2048, 299);
        let b = MockProjection::new(7, 2048, 299);
        assert_eq!(a.checksum(), b.checksum());
        assert_eq!(a, b);
        assert_ne!(a.checksum(), MockProjection::new(8, 2048, 299).checksum());
    }

    #[test]
    fn zero_image_projects_to_histogram_column() {
        let e = MockProjection::new(3, 128, 16);
        let d = e.embed_image(&GrayImage::filled(16, 16, 0)).unwrap();
        let column: Vec<f32> = e
            .matrix()
            .chunks_exact(MOCK_FEATURES)
            .map(|row| row[MOCK_GRID * MOCK_GRID] as f32)
            .collect();
        assert_eq!(d.values(), column.as_slice());
    }

    #[test]
    fn features_of_known_image() {
        // left half black, right half white on a 16x16 canvas
        let pixels = (0..256).map(|i| if i % 16 < 8 { 0 } else { 255 }).collect();
        let img = GrayImage::new(16, 16, pixels).unwrap();
        let f = MockProjection::features(&img);
        for gy in 0..8 {
            for gx in 0..8 {
                assert_eq!(f[gy * 8 + gx], if gx < 4 { 0.0 } else { 1.0 });
            }
        }
        assert_eq!(f[64], 0.5);
        assert_eq!(f[64 + 31], 0.5);
        assert_eq!(f[64 + 1..64 + 31].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn size_is_checked() {
        let e = MockProjection::new(0, 8, 10);
        assert!(matches!(
            e.embed_image(&GrayImage::filled(9, 10, 0)),
            Err(EmbedError::SizeMismatch { .. })
        ));
    }
}
