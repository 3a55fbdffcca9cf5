//! Fully connected softmax head over a single descriptor.
//!
//! Parameter layout: `W` (classes x dim, row-major) then `b` (classes).

use super::linalg::{cross_entropy, matvec_add, outer_add, softmax};
use super::HeadError;

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    classes: usize,
    dim: usize,
    params: Vec<f64>,
}

impl SoftmaxHead {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            params: vec![0.0; classes * dim + classes],
        }
    }

    pub fn from_params(classes: usize, dim: usize, params: Vec<f64>) -> Result<Self, HeadError> {
        let expected = classes * dim + classes;
        if params.len() != expected {
            return Err(HeadError::DimMismatch {
                expected,
                actual: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(HeadError::NonFinite(format!("softmax parameter {i}")));
        }
        Ok(Self { classes, dim, params })
    }

    pub fn param_count(classes: usize, dim: usize) -> usize {
        classes * dim + classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.classes * self.dim]
    }

    pub fn bias(&self) -> &[f64] {
        &self.params[self.classes * self.dim..]
    }

    fn check(&self, x: &[f64]) -> Result<(), HeadError> {
        if x.len() != self.dim {
            return Err(HeadError::DimMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, HeadError> {
        self.check(x)?;
        let mut z = self.bias().to_vec();
        matvec_add(self.weights(), x, &mut z);
        Ok(z)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, HeadError> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Cross-entropy for one sample; accumulates `d loss / d params` into `grad`.
    pub fn loss_grad(&self, x: &[f64], target: usize, grad: &mut [f64]) -> Result<f64, HeadError> {
        let z = self.logits(x)?;
        let loss = cross_entropy(&z, target);
        let mut dz = softmax(&z);
        dz[target] -= 1.0;
        let (gw, gb) = grad.split_at_mut(self.classes * self.dim);
        outer_add(gw, &dz, x);
        for (g, d) in gb.iter_mut().zip(&dz) {
            *g += d;
        }
        Ok(loss)
    }

    pub fn loss(&self, x: &[f64], target: usize) -> Result<f64, HeadError> {
        Ok(cross_entropy(&self.logits(x)?, target))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_head_is_uniform() {
        let h = SoftmaxHead::zeros(13, 5);
        let p = h.forward(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 13.0).abs() < 1e-15));
    }

    #[test]
    fn huge_logit_does_not_overflow() {
        let h = SoftmaxHead::from_params(2, 1, vec![1000.0, 0.0, 0.0, 0.0]).unwrap();
        let p = h.forward(&[1.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] < 1e-300);
    }

    #[test]
    fn dimension_is_checked() {
        let h = SoftmaxHead::zeros(3, 4);
        assert!(matches!(h.forward(&[0.0; 3]), Err(HeadError::DimMismatch { .. })));
    }
}
