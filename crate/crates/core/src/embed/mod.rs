//! Fixed-length descriptor extraction.
//!
//! An [`ImageEmbedder`] maps one square grayscale image to a [`Descriptor`].
//! Two backends exist: a frozen network loaded from a model-interchange
//! file (cargo feature `onnx`), and [`MockProjection`], a deterministic
//! closed-form stand-in used by tests and desk-scale experiments.

mod external;
mod mock;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{ExternalModel, InputScaling};
pub use mock::{MockProjection, MOCK_FEATURES, MOCK_GRID, MOCK_HIST_BINS};

use crate::data::{DataError, Descriptor, GrayImage, DEFAULT_DESCRIPTOR_DIM};
use crate::transform::{Strategy, TransformOutput};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot load model: {0}")]
    ModelLoad(String),
    #[error("model output is not a flat vector: shape {0:?}")]
    ShapeMismatch(Vec<usize>),
    #[error("image is {width}x{height}, embedder expects {expected}x{expected}")]
    SizeMismatch {
        width: usize,
        height: usize,
        expected: usize,
    },
    #[error("inference failed: {0}")]
    Inference(String),
    #[error("descriptor dimension changed from {expected} to {actual}")]
    DimChanged { expected: usize, actual: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbedderKind {
    #[serde(rename = "model")]
    ExternalModel,
    #[serde(rename = "mock")]
    MockProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub model_path: Option<PathBuf>,
    /// Requested descriptor length. External models report their own.
    pub output_dim: usize,
    pub seed: Option<u64>,
    /// Square input edge length.
    pub input_size: usize,
    /// Graph node whose activations are returned; defaults to the model's
    /// declared output.
    pub output_node: Option<String>,
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::MockProjection,
            model_path: None,
            output_dim: DEFAULT_DESCRIPTOR_DIM,
            seed: Some(0),
            input_size: 299,
            output_node: None,
        }
    }
}

impl EmbedderSpec {
    pub fn mock(seed: u64, output_dim: usize, input_size: usize) -> Self {
        Self {
            kind: EmbedderKind::MockProjection,
            model_path: None,
            output_dim,
            seed: Some(seed),
            input_size,
            output_node: None,
        }
    }

    pub fn external(model_path: impl Into<PathBuf>, input_size: usize) -> Self {
        Self {
            kind: EmbedderKind::ExternalModel,
            model_path: Some(model_path.into()),
            seed: None,
            input_size,
            ..Self::default()
        }
    }
}

/// A frozen image-to-descriptor map. Implementations are read-only after
/// construction and may be called concurrently.
pub trait ImageEmbedder: Send + Sync {
    fn output_dim(&self) -> usize;
    fn input_size(&self) -> usize;
    fn embed_image(&self, img: &GrayImage) -> Result<Descriptor, EmbedError>;

    fn check_size(&self, img: &GrayImage) -> Result<(), EmbedError> {
        let n = self.input_size();
        if img.width() != n || img.height() != n {
            return Err(EmbedError::SizeMismatch {
                width: img.width(),
                height: img.height(),
                expected: n,
            });
        }
        Ok(())
    }
}

pub fn load_embedder(spec: &EmbedderSpec) -> Result<Box<dyn ImageEmbedder>, EmbedError> {
    if spec.input_size == 0 || spec.output_dim == 0 {
        return Err(EmbedError::ModelLoad("input_size and output_dim must be positive".into()));
    }
    match spec.kind {
        EmbedderKind::MockProjection => {
            let seed = spec
                .seed
                .ok_or_else(|| EmbedError::ModelLoad("mock embedder requires a seed".into()))?;
            Ok(Box::new(MockProjection::new(seed, spec.output_dim, spec.input_size)))
        }
        EmbedderKind::ExternalModel => {
            let path = spec
                .model_path
                .as_ref()
                .ok_or_else(|| EmbedError::ModelLoad("external embedder requires model_path".into()))?;
            Ok(Box::new(ExternalModel::load(
                path,
                spec.input_size,
                spec.output_node.as_deref(),
            )?))
        }
    }
}

/// Descriptors for every image of one transformed step, in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedStep {
    pub step_id: String,
    pub strategy: Strategy,
    pub descriptors: Vec<Descriptor>,
    pub subject_id: String,
    pub sequence_id: String,
}

impl EmbeddedStep {
    pub fn dim(&self) -> usize {
        self.descriptors.first().map_or(0, Descriptor::dim)
    }
}

pub fn embed_step(embedder: &dyn ImageEmbedder, t: &TransformOutput) -> Result<EmbeddedStep, EmbedError> {
    let descriptors = t
        .images
        .iter()
        .map(|img| embedder.embed_image(img))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EmbeddedStep {
        step_id: t.step_id.clone(),
        strategy: t.strategy,
        descriptors,
        subject_id: t.subject_id.clone(),
        sequence_id: t.sequence_id.clone(),
    })
}

/// Embeds a whole dataset and checks the descriptor length stays constant.
pub fn embed_all(embedder: &dyn ImageEmbedder, outputs: &[TransformOutput]) -> Result<Vec<EmbeddedStep>, EmbedError> {
    let steps = outputs
        .iter()
        .map(|t| embed_step(embedder, t))
        .collect::<Result<Vec<_>, _>>()?;
    let expected = embedder.output_dim();
    for s in &steps {
        if let Some(d) = s.descriptors.iter().find(|d| d.dim() != expected) {
            return Err(EmbedError::DimChanged {
                expected,
                actual: d.dim(),
            });
        }
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_requires_seed() {
        let spec = EmbedderSpec {
            seed: None,
            ..EmbedderSpec::default()
        };
        assert!(matches!(load_embedder(&spec), Err(EmbedError::ModelLoad(_))));
    }

    #[test]
    fn missing_model_file_fails_to_load() {
        let spec = EmbedderSpec::external("/nonexistent/inception.onnx", 299);
        assert!(matches!(load_embedder(&spec), Err(EmbedError::ModelLoad(_))));
        let no_path = EmbedderSpec {
            model_path: None,
            ..spec
        };
        assert!(matches!(load_embedder(&no_path), Err(EmbedError::ModelLoad(_))));
    }

    #[test]
    fn spec_serializes_with_short_kind_names() {
        let json = serde_json::to_value(EmbedderSpec::mock(7, 64, 32)).unwrap();
        assert_eq!(json["kind"], "mock");
        let back: EmbedderSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back.seed, Some(7));
    }

    #[test]
    fn embed_step_preserves_cardinality() {
        let e = MockProjection::new(1, 16, 8);
        let images: Vec<_> = (0..12).map(|i| GrayImage::filled(8, 8, i * 20)).collect();
        let t = TransformOutput {
            step_id: "st".into(),
            strategy: Strategy::FullSequence,
            images,
            subject_id: "p".into(),
            sequence_id: "q".into(),
        };
        let out = embed_step(&e, &t).unwrap();
        assert_eq!(out.descriptors.len(), 12);
        assert_eq!(out.dim(), 16);
        let single = TransformOutput {
            strategy: Strategy::MaxFrame,
            images: vec![GrayImage::filled(8, 8, 3)],
            ..t
        };
        assert_eq!(embed_step(&e, &single).unwrap().descriptors.len(), 1);
    }
}
