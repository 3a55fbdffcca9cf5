//! Single-layer GRU sequence classifier with full backpropagation through
//! time.
//!
//! ```text
//! z  = sigmoid(Wz x + Uz h + bz)
//! r  = sigmoid(Wr x + Ur h + br)
//! h~ = tanh(Wh x + Uh (r * h) + bh)
//! h' = (1 - z) * h + z * h~
//! p  = softmax(V h_T + c)
//! ```
//!
//! Parameter layout (all row-major): `Wz, Wr, Wh` (hidden x input), then
//! `Uz, Ur, Uh` (hidden x hidden), then `bz, br, bh` (hidden), then `V`
//! (classes x hidden) and `c` (classes).

use std::ops::Range;

use super::linalg::{cross_entropy, matvec_add, matvec_t_add, outer_add, sigmoid, softmax};
use super::HeadError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruDims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

/// Offsets of every parameter block inside the flat vector.
#[derive(Debug, Clone)]
struct Layout {
    w: [Range<usize>; 3],
    u: [Range<usize>; 3],
    b: [Range<usize>; 3],
    v: Range<usize>,
    c: Range<usize>,
}

impl Layout {
    fn new(d: GruDims) -> Self {
        let (hd, hh) = (d.hidden * d.input, d.hidden * d.hidden);
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let w = [take(hd), take(hd), take(hd)];
        let u = [take(hh), take(hh), take(hh)];
        let b = [take(d.hidden), take(d.hidden), take(d.hidden)];
        let v = take(d.classes * d.hidden);
        let c = take(d.classes);
        Self { w, u, b, v, c }
    }

    fn len(&self) -> usize {
        self.c.end
    }
}

const Z: usize = 0;
const R: usize = 1;
const H: usize = 2;

#[derive(Debug, Clone)]
pub struct GruClassifier {
    dims: GruDims,
    layout: Layout,
    params: Vec<f64>,
}

impl PartialEq for GruClassifier {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.params == other.params
    }
}

/// Activations of one time step kept for the backward pass.
struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    cand: Vec<f64>,
    rh: Vec<f64>,
}

impl GruClassifier {
    pub fn param_count(dims: GruDims) -> usize {
        Layout::new(dims).len()
    }

    pub fn zeros(dims: GruDims) -> Self {
        let layout = Layout::new(dims);
        let params = vec![0.0; layout.len()];
        Self { dims, layout, params }
    }

    pub fn from_params(dims: GruDims, params: Vec<f64>) -> Result<Self, HeadError> {
        if dims.hidden == 0 || dims.input == 0 || dims.classes == 0 {
            return Err(HeadError::DimMismatch {
                expected: 1,
                actual: 0,
            });
        }
        let layout = Layout::new(dims);
        if params.len() != layout.len() {
            return Err(HeadError::DimMismatch {
                expected: layout.len(),
                actual: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(HeadError::NonFinite(format!("gru parameter {i}")));
        }
        Ok(Self { dims, layout, params })
    }

    pub fn dims(&self) -> GruDims {
        self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Ranges of the input-to-hidden blocks `Wz, Wr, Wh`.
    pub fn input_weight_ranges(&self) -> [Range<usize>; 3] {
        self.layout.w.clone()
    }

    /// Ranges of `Uz, Ur, Uh`, `bz, br, bh` and the readout `V, c`.
    pub fn recurrent_ranges(&self) -> ([Range<usize>; 3], [Range<usize>; 3], Range<usize>, Range<usize>) {
        (self.layout.u.clone(), self.layout.b.clone(), self.layout.v.clone(), self.layout.c.clone())
    }

    fn block(&self, r: &Range<usize>) -> &[f64] {
        &self.params[r.clone()]
    }

    fn check_input(&self, x: &[f64]) -> Result<(), HeadError> {
        if x.len() != self.dims.input {
            return Err(HeadError::DimMismatch {
                expected: self.dims.input,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn step_cached(&self, x: &[f64], h_prev: &[f64]) -> StepCache {
        let n = self.dims.hidden;
        let gate = |g: usize, h_in: &[f64]| {
            let mut a = self.block(&self.layout.b[g]).to_vec();
            matvec_add(self.block(&self.layout.w[g]), x, &mut a);
            matvec_add(self.block(&self.layout.u[g]), h_in, &mut a);
            a
        };
        let z: Vec<f64> = gate(Z, h_prev).into_iter().map(sigmoid).collect();
        let r: Vec<f64> = gate(R, h_prev).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = (0..n).map(|i| r[i] * h_prev[i]).collect();
        let cand: Vec<f64> = gate(H, &rh).into_iter().map(f64::tanh).collect();
        StepCache {
            h_prev: h_prev.to_vec(),
            z,
            r,
            cand,
            rh,
        }
    }

    fn next_hidden(c: &StepCache) -> Vec<f64> {
        (0..c.z.len())
            .map(|i| (1.0 - c.z[i]) * c.h_prev[i] + c.z[i] * c.cand[i])
            .collect()
    }

    /// One recurrence update.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>, HeadError> {
        self.check_input(x)?;
        if h_prev.len() != self.dims.hidden {
            return Err(HeadError::DimMismatch {
                expected: self.dims.hidden,
                actual: h_prev.len(),
            });
        }
        Ok(Self::next_hidden(&self.step_cached(x, h_prev)))
    }

    /// Final hidden state after consuming `seq` from `h0 = 0`.
    pub fn final_hidden(&self, seq: &[Vec<f64>]) -> Result<Vec<f64>, HeadError> {
        if seq.is_empty() {
            return Err(HeadError::EmptySequence);
        }
        let mut h = vec![0.0; self.dims.hidden];
        for x in seq {
            h = self.step(x, &h)?;
        }
        Ok(h)
    }

    fn readout(&self, h: &[f64]) -> Vec<f64> {
        let mut z = self.block(&self.layout.c).to_vec();
        matvec_add(self.block(&self.layout.v), h, &mut z);
        z
    }

    pub fn classify(&self, seq: &[Vec<f64>]) -> Result<Vec<f64>, HeadError> {
        Ok(softmax(&self.readout(&self.final_hidden(seq)?)))
    }

    pub fn loss(&self, seq: &[Vec<f64>], target: usize) -> Result<f64, HeadError> {
        Ok(cross_entropy(&self.readout(&self.final_hidden(seq)?), target))
    }

    /// Cross-entropy of one sequence; accumulates the BPTT gradient into `grad`.
    pub fn loss_grad(&self, seq: &[Vec<f64>], target: usize, grad: &mut [f64]) -> Result<f64, HeadError> {
        if seq.is_empty() {
            return Err(HeadError::EmptySequence);
        }
        let n = self.dims.hidden;
        let mut caches = Vec::with_capacity(seq.len());
        let mut h = vec![0.0; n];
        for x in seq {
            self.check_input(x)?;
            let c = self.step_cached(x, &h);
            h = Self::next_hidden(&c);
            caches.push(c);
        }
        let logits = self.readout(&h);
        let loss = cross_entropy(&logits, target);
        let mut dlogits = softmax(&logits);
        dlogits[target] -= 1.0;

        let l = &self.layout;
        outer_add(&mut grad[l.v.clone()], &dlogits, &h);
        for (g, d) in grad[l.c.clone()].iter_mut().zip(&dlogits) {
            *g += d;
        }
        let mut dh = vec![0.0; n];
        matvec_t_add(self.block(&l.v), &dlogits, &mut dh);

        let mut da = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut drh = vec![0.0; n];
        for (x, c) in seq.iter().zip(&caches).rev() {
            for i in 0..n {
                let (z, cand) = (c.z[i], c.cand[i]);
                da[Z][i] = dh[i] * (cand - c.h_prev[i]) * z * (1.0 - z);
                da[H][i] = dh[i] * z * (1.0 - cand * cand);
            }
            drh.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_add(self.block(&l.u[H]), &da[H], &mut drh);
            for i in 0..n {
                let r = c.r[i];
                da[R][i] = drh[i] * c.h_prev[i] * r * (1.0 - r);
            }

            let mut dh_prev: Vec<f64> = (0..n).map(|i| dh[i] * (1.0 - c.z[i]) + drh[i] * c.r[i]).collect();
            matvec_t_add(self.block(&l.u[Z]), &da[Z], &mut dh_prev);
            matvec_t_add(self.block(&l.u[R]), &da[R], &mut dh_prev);

            for g in [Z, R, H] {
                outer_add(&mut grad[l.w[g].clone()], &da[g], x);
                let h_in = if g == H { &c.rh } else { &c.h_prev };
                outer_add(&mut grad[l.u[g].clone()], &da[g], h_in);
                for (gb, d) in grad[l.b[g].clone()].iter_mut().zip(&da[g]) {
                    *gb += d;
                }
            }
            dh = dh_prev;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> GruDims {
        GruDims {
            input: 3,
            hidden: 2,
            classes: 4,
        }
    }

    #[test]
    fn zero_model_keeps_zero_state() {
        let g = GruClassifier::zeros(dims());
        let h = g.step(&[0.3, -1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
        let p = g.classify(&[vec![1.0, 1.0, 1.0]]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn saturated_update_gate_copies_candidate() {
        let mut g = GruClassifier::zeros(dims());
        let (_, b, _, _) = g.recurrent_ranges();
        for v in &mut g.params_mut()[b[Z].clone()] {
            *v = 50.0;
        }
        // candidate bias sets h~ = tanh(0.7)
        for v in &mut g.params_mut()[b[H].clone()] {
            *v = 0.7;
        }
        let h = g.step(&[0.0; 3], &[0.9, -0.9]).unwrap();
        for v in h {
            assert!((v - 0.7f64.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let g = GruClassifier::zeros(dims());
        assert!(matches!(g.classify(&[]), Err(HeadError::EmptySequence)));
        assert!(matches!(g.step(&[0.0; 2], &[0.0; 2]), Err(HeadError::DimMismatch { .. })));
    }

    #[test]
    fn single_step_sequence_is_one_update_then_readout() {
        let params: Vec<f64> = (0..GruClassifier::param_count(dims()))
            .map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1)
            .collect();
        let g = GruClassifier::from_params(dims(), params).unwrap();
        let x = vec![0.5, -0.25, 1.0];
        let h = g.step(&x, &[0.0, 0.0]).unwrap();
        assert_eq!(g.final_hidden(&[x.clone()]).unwrap(), h);
        assert_eq!(g.classify(&[x]).unwrap(), softmax(&g.readout(&h)));
    }
}
