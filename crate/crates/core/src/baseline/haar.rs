//! Orthonormal Haar fast wavelet transform.
//!
//! Output layout after full decomposition of `2^k` samples:
//! `[a_k, d_k, d_{k-1} (2), ..., d_1 (2^(k-1))]`, coarsest first.

use std::f64::consts::FRAC_1_SQRT_2;

use super::BaselineError;

fn check_len(n: usize) -> Result<(), BaselineError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(BaselineError::NotPowerOfTwo(n));
    }
    Ok(())
}

/// In-place forward transform; `tmp` must be at least `x.len()` long.
fn forward_in_place(x: &mut [f64], tmp: &mut [f64]) {
    let mut len = x.len();
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            let (a, b) = (x[2 * i], x[2 * i + 1]);
            tmp[i] = (a + b) * FRAC_1_SQRT_2;
            tmp[half + i] = (a - b) * FRAC_1_SQRT_2;
        }
        x[..len].copy_from_slice(&tmp[..len]);
        len = half;
    }
}

fn inverse_in_place(x: &mut [f64], tmp: &mut [f64]) {
    let mut len = 2;
    while len <= x.len() {
        let half = len / 2;
        for i in 0..half {
            let (a, d) = (x[i], x[half + i]);
            tmp[2 * i] = (a + d) * FRAC_1_SQRT_2;
            tmp[2 * i + 1] = (a - d) * FRAC_1_SQRT_2;
        }
        x[..len].copy_from_slice(&tmp[..len]);
        len *= 2;
    }
}

pub fn haar_fwt_1d(x: &[f64]) -> Result<Vec<f64>, BaselineError> {
    check_len(x.len())?;
    let mut out = x.to_vec();
    let mut tmp = vec![0.0; x.len()];
    forward_in_place(&mut out, &mut tmp);
    Ok(out)
}

pub fn haar_ifwt_1d(c: &[f64]) -> Result<Vec<f64>, BaselineError> {
    check_len(c.len())?;
    let mut out = c.to_vec();
    let mut tmp = vec![0.0; c.len()];
    inverse_in_place(&mut out, &mut tmp);
    Ok(out)
}

/// Separable (standard) 2-D transform of a row-major `n x n` block: full
/// decomposition of every row, then of every column.
pub fn haar_fwt_2d(block: &mut [f64], n: usize) -> Result<(), BaselineError> {
    check_len(n)?;
    if block.len() != n * n {
        return Err(BaselineError::DimMismatch {
            expected: n * n,
            actual: block.len(),
        });
    }
    let mut tmp = vec![0.0; n];
    let mut col = vec![0.0; n];
    for row in block.chunks_exact_mut(n) {
        forward_in_place(row, &mut tmp);
    }
    for c in 0..n {
        for r in 0..n {
            col[r] = block[r * n + c];
        }
        forward_in_place(&mut col, &mut tmp);
        for r in 0..n {
            block[r * n + c] = col[r];
        }
    }
    Ok(())
}

/// Transform along one strided axis: `count` signals of length `len`, where
/// signal `s` element `i` lives at `s_offset(s) + i * stride`.
pub(crate) fn haar_fwt_strided(data: &mut [f64], len: usize, stride: usize) -> Result<(), BaselineError> {
    check_len(len)?;
    let mut tmp = vec![0.0; len];
    let mut sig = vec![0.0; len];
    for s in 0..stride {
        for i in 0..len {
            sig[i] = data[s + i * stride];
        }
        forward_in_place(&mut sig, &mut tmp);
        for i in 0..len {
            data[s + i * stride] = sig[i];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_of_ones() {
        let c = haar_fwt_1d(&[1.0, 1.0]).unwrap();
        assert!((c[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c[1], 0.0);
    }

    #[test]
    fn four_point_closed_form() {
        let s = FRAC_1_SQRT_2;
        let c = haar_fwt_1d(&[4.0, 2.0, 5.0, 5.0]).unwrap();
        // level 1: a = (6s, 10s), d = (2s, 0); level 2: a = 16s^2 = 8, d = -4s^2 = -2
        let expected = [8.0, -2.0, 2.0 * s, 0.0];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn rejects_non_powers_of_two() {
        assert!(matches!(haar_fwt_1d(&[1.0; 3]), Err(BaselineError::NotPowerOfTwo(3))));
        assert!(matches!(haar_fwt_1d(&[]), Err(BaselineError::NotPowerOfTwo(0))));
        assert_eq!(haar_fwt_1d(&[7.5]).unwrap(), vec![7.5]);
    }

    #[test]
    fn constant_2d_block_has_only_dc() {
        let mut b = vec![3.0; 16];
        haar_fwt_2d(&mut b, 4).unwrap();
        assert!((b[0] - 12.0).abs() < 1e-12);
        assert!(b[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn strided_matches_contiguous() {
        // two interleaved signals of length 4
        let a = [1.0, -2.0, 0.5, 3.0];
        let b = [0.0, 4.0, 4.0, -1.0];
        let mut inter: Vec<f64> = a.iter().zip(&b).flat_map(|(x, y)| [*x, *y]).collect();
        haar_fwt_strided(&mut inter, 4, 2).unwrap();
        let (fa, fb) = (haar_fwt_1d(&a).unwrap(), haar_fwt_1d(&b).unwrap());
        for i in 0..4 {
            assert_eq!(inter[2 * i], fa[i]);
            assert_eq!(inter[2 * i + 1], fb[i]);
        }
    }
}
