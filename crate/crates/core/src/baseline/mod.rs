//! Conventional baseline: a fixed wavelet descriptor per footstep classified
//! by a quadratic-kernel SVM.

mod haar;
mod svm;
mod wavelet;

use thiserror::Error;

pub use haar::{haar_fwt_1d, haar_fwt_2d, haar_ifwt_1d};
pub use svm::{
    kkt_violation, quadratic_kernel, solve_binary, svm_predict, svm_train, BinaryMachine, BinarySolution, SvmConfig,
    SvmModel, VoteTable,
};
pub use wavelet::{
    descriptor_checksum, select_coefficients, wavelet_coefficients, wavelet_descriptor, WaveletDescriptor,
    WAVELET_DIM,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("step has no frames")]
    EmptyStep,
    #[error("training data contains fewer than two classes")]
    SingleClassData,
    #[error("SMO did not converge after {iterations} iterations (KKT violation {violation:.3e})")]
    NonConvergence { iterations: usize, violation: f64 },
    #[error("invalid SVM config: {0}")]
    BadConfig(String),
}
