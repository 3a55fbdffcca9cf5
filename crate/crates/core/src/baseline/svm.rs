//! Soft-margin SVM with the quadratic kernel `(x.y + 1)^2`, trained by SMO
//! and combined one-vs-one.
//!
//! The binary solver minimizes `0.5 a'Qa - e'a` subject to `0 <= a <= C`,
//! `y'a = 0`, with `Q_ij = y_i y_j K_ij`. Working pairs are chosen by the
//! maximal-violation rule for `i` and second-order gain for `j`.

use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::heads::linalg::dot;

const TAU: f64 = 1e-12;

pub fn quadratic_kernel(a: &[f64], b: &[f64]) -> f64 {
    let s = dot(a, b) + 1.0;
    s * s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c_reg: f64,
    /// Stop once the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c_reg: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    /// Decision is `sum_i alpha_i y_i K(x_i, x) + b`.
    pub b: f64,
    pub iterations: usize,
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    if y > 0.0 {
        a < c
    } else {
        a > 0.0
    }
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    if y > 0.0 {
        a > 0.0
    } else {
        a < c
    }
}

/// Maximal KKT violation `max_{I_up} -y G - min_{I_low} -y G` for a given
/// dual point, recomputed from scratch. Non-positive means optimal.
pub fn kkt_violation(kernel: &[f64], y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let n = y.len();
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..n {
        let mut g = -1.0;
        for s in 0..n {
            g += y[t] * y[s] * kernel[t * n + s] * alpha[s];
        }
        let v = -y[t] * g;
        if in_up(alpha[t], y[t], c) {
            up = up.max(v);
        }
        if in_low(alpha[t], y[t], c) {
            low = low.min(v);
        }
    }
    if up == f64::NEG_INFINITY || low == f64::INFINITY {
        return 0.0;
    }
    up - low
}

/// Solves one binary problem over a precomputed `n x n` kernel matrix.
/// Labels are `+1.0` / `-1.0`.
pub fn solve_binary(kernel: &[f64], y: &[f64], cfg: &SvmConfig) -> Result<BinarySolution, BaselineError> {
    let n = y.len();
    let c = cfg.c_reg;
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;

    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t], c) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_gain = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t], c) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let diff = gmax - v;
            if diff > 0.0 {
                let mut quad = kernel[i * n + i] + kernel[t * n + t] - 2.0 * kernel[i * n + t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let gain = -(diff * diff) / quad;
                if gain <= best_gain {
                    best_gain = gain;
                    j = t;
                }
            }
        }
        if gmax - gmin < cfg.tol || j == usize::MAX {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(BaselineError::NonConvergence {
                iterations,
                violation: gmax - gmin,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // threshold: mean over free vectors, else midpoint of the feasible band
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    Ok(BinarySolution {
        alpha,
        b: -rho,
        iterations,
    })
}

/// One pairwise machine: positive class `pos`, negative class `neg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub pos: usize,
    pub neg: usize,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub b: f64,
}

impl BinaryMachine {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * quadratic_kernel(s, x))
            .sum::<f64>()
            + self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub dim: usize,
    /// Distinct training labels, ascending.
    pub classes: Vec<usize>,
    /// Machines for every class pair `(classes[a], classes[b])`, `a < b`,
    /// in lexicographic order.
    pub machines: Vec<BinaryMachine>,
}

/// Per-class vote counts and summed signed decision values.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTable {
    pub votes: Vec<usize>,
    pub scores: Vec<f64>,
}

impl SvmModel {
    pub fn vote_table(&self, x: &[f64]) -> Result<VoteTable, BaselineError> {
        if x.len() != self.dim {
            return Err(BaselineError::DimMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let k = self.classes.len();
        let mut votes = vec![0; k];
        let mut scores = vec![0.0; k];
        let slot = |label: usize| self.classes.binary_search(&label).expect("machine class is known");
        for m in &self.machines {
            let f = m.decision(x);
            let (p, q) = (slot(m.pos), slot(m.neg));
            if f > 0.0 {
                votes[p] += 1;
            } else {
                votes[q] += 1;
            }
            scores[p] += f;
            scores[q] -= f;
        }
        Ok(VoteTable { votes, scores })
    }
}

/// Most votes; ties go to the larger summed decision value, then to the
/// smaller label.
pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<usize, BaselineError> {
    let t = model.vote_table(x)?;
    let mut best = 0;
    for c in 1..model.classes.len() {
        let better = t.votes[c] > t.votes[best] || (t.votes[c] == t.votes[best] && t.scores[c] > t.scores[best]);
        if better {
            best = c;
        }
    }
    Ok(model.classes[best])
}

pub fn svm_train(data: &[(Vec<f64>, usize)], cfg: &SvmConfig) -> Result<SvmModel, BaselineError> {
    if !(cfg.c_reg > 0.0) {
        return Err(BaselineError::BadConfig(format!("C must be positive, got {}", cfg.c_reg)));
    }
    let dim = data.first().map(|d| d.0.len()).ok_or(BaselineError::SingleClassData)?;
    if let Some((x, _)) = data.iter().find(|(x, _)| x.len() != dim) {
        return Err(BaselineError::DimMismatch {
            expected: dim,
            actual: x.len(),
        });
    }
    let mut classes: Vec<usize> = data.iter().map(|d| d.1).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(BaselineError::SingleClassData);
    }

    let n = data.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = quadratic_kernel(&data[i].0, &data[j].0);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let mut machines = Vec::new();
    for (a, &pos) in classes.iter().enumerate() {
        for &neg in &classes[a + 1..] {
            let idx: Vec<usize> = (0..n).filter(|&i| data[i].1 == pos || data[i].1 == neg).collect();
            let m = idx.len();
            let y: Vec<f64> = idx.iter().map(|&i| if data[i].1 == pos { 1.0 } else { -1.0 }).collect();
            let mut k = vec![0.0; m * m];
            for (r, &i) in idx.iter().enumerate() {
                for (s, &j) in idx.iter().enumerate() {
                    k[r * m + s] = gram[i * n + j];
                }
            }
            let sol = solve_binary(&k, &y, cfg)?;
            let mut support = Vec::new();
            let mut coef = Vec::new();
            for (r, &i) in idx.iter().enumerate() {
                if sol.alpha[r] > 0.0 {
                    support.push(data[i].0.clone());
                    coef.push(sol.alpha[r] * y[r]);
                }
            }
            machines.push(BinaryMachine {
                pos,
                neg,
                support,
                coef,
                b: sol.b,
            });
        }
    }
    Ok(SvmModel { dim, classes, machines })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(xs: &[Vec<f64>]) -> Vec<f64> {
        let n = xs.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = quadratic_kernel(&xs[i], &xs[j]);
            }
        }
        k
    }

    #[test]
    fn separable_pair() {
        let data = vec![(vec![0.0], 0), (vec![2.0], 1)];
        let model = svm_train(&data, &SvmConfig::default()).unwrap();
        assert_eq!(svm_predict(&model, &[0.0]).unwrap(), 0);
        assert_eq!(svm_predict(&model, &[2.0]).unwrap(), 1);
        let m = &model.machines[0];
        // boundary lies strictly between the two points
        assert!(m.decision(&[0.0]) > 0.0 && m.decision(&[2.0]) < 0.0);
    }

    #[test]
    fn xor_is_quadratically_separable() {
        let pts = [(1.0, 1.0, 0), (-1.0, -1.0, 0), (1.0, -1.0, 1), (-1.0, 1.0, 1)];
        let data: Vec<_> = pts.iter().map(|&(a, b, c)| (vec![a, b], c)).collect();
        let cfg = SvmConfig {
            c_reg: 10.0,
            ..SvmConfig::default()
        };
        let model = svm_train(&data, &cfg).unwrap();
        for (x, c) in &data {
            assert_eq!(svm_predict(&model, x).unwrap(), *c);
        }
    }

    #[test]
    fn dual_constraints_and_kkt() {
        let xs: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.7;
                vec![t.sin(), (1.3 * t).cos()]
            })
            .collect();
        let y: Vec<f64> = xs.iter().map(|x| if x[0] * x[1] > 0.05 { 1.0 } else { -1.0 }).collect();
        let k = gram(&xs);
        let cfg = SvmConfig::default();
        let sol = solve_binary(&k, &y, &cfg).unwrap();
        assert!(sol.alpha.iter().all(|&a| (0.0..=cfg.c_reg).contains(&a)));
        let eq: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-6);
        assert!(kkt_violation(&k, &y, &sol.alpha, cfg.c_reg) <= 1e-3);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 1.7).sin(), (i as f64).cos()]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let cfg = SvmConfig {
            max_iter: 1,
            ..SvmConfig::default()
        };
        assert!(matches!(
            solve_binary(&gram(&xs), &y, &cfg),
            Err(BaselineError::NonConvergence { .. })
        ));
    }

    #[test]
    fn errors() {
        let one = vec![(vec![1.0], 3), (vec![2.0], 3)];
        assert!(matches!(svm_train(&one, &SvmConfig::default()), Err(BaselineError::SingleClassData)));
        let model = svm_train(&[(vec![0.0], 0), (vec![1.0], 1)], &SvmConfig::default()).unwrap();
        assert!(matches!(svm_predict(&model, &[0.0, 1.0]), Err(BaselineError::DimMismatch { .. })));
    }
}
