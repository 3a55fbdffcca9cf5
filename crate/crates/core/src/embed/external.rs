//! Frozen network loaded from an ONNX file.
//!
//! The gray channel is replicated three times and mapped to the model's
//! input range with per-channel `value = byte * scale + offset`, read from a
//! sidecar `<model>.json` next to the model file. Without a sidecar the
//! Inception-style `[-1, 1]` mapping is used.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmbedError, ImageEmbedder};
use crate::data::{Descriptor, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Nchw,
    Nhwc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub scale: [f32; 3],
    pub offset: [f32; 3],
    #[serde(default = "default_layout")]
    pub layout: Layout,
}

fn default_layout() -> Layout {
    Layout::Nchw
}

impl Default for InputScaling {
    fn default() -> Self {
        Self {
            scale: [1.0 / 127.5; 3],
            offset: [-1.0; 3],
            layout: Layout::Nchw,
        }
    }
}

impl InputScaling {
    pub fn sidecar_path(model: &Path) -> PathBuf {
        let mut name = model.as_os_str().to_owned();
        name.push(".json");
        PathBuf::from(name)
    }

    pub fn load_for(model: &Path) -> Result<Self, EmbedError> {
        let path = Self::sidecar_path(model);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| EmbedError::ModelLoad(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| EmbedError::ModelLoad(format!("{}: {e}", path.display())))
    }

    /// Three-channel float tensor data for one image, in the declared layout.
    pub fn planes(&self, img: &GrayImage) -> Vec<f32> {
        let n = img.pixels().len();
        let mut out = vec![0.0f32; 3 * n];
        for (i, &p) in img.pixels().iter().enumerate() {
            for c in 0..3 {
                let v = p as f32 * self.scale[c] + self.offset[c];
                match self.layout {
                    Layout::Nchw => out[c * n + i] = v,
                    Layout::Nhwc => out[i * 3 + c] = v,
                }
            }
        }
        out
    }
}

/// Flattens an activation shape, rejecting anything but a single non-unit axis.
#[cfg_attr(not(feature = "onnx"), allow(dead_code))]
pub(crate) fn flat_dim(shape: &[usize]) -> Result<usize, EmbedError> {
    let non_unit: Vec<_> = shape.iter().filter(|&&d| d != 1).collect();
    match non_unit.as_slice() {
        [d] => Ok(**d),
        [] if !shape.is_empty() => Ok(1),
        _ => Err(EmbedError::ShapeMismatch(shape.to_vec())),
    }
}

#[cfg(feature = "onnx")]
mod runtime {
    use tract_onnx::prelude::*;

    use super::*;

    pub(super) type Plan = Arc<TypedRunnableModel>;

    pub(super) fn load(path: &Path, size: usize, layout: Layout, output: Option<&str>) -> Result<Plan, EmbedError> {
        let err = |e: TractError| EmbedError::ModelLoad(format!("{}: {e}", path.display()));
        let shape = match layout {
            Layout::Nchw => [1, 3, size, size],
            Layout::Nhwc => [1, size, size, 3],
        };
        let mut model = tract_onnx::onnx().model_for_path(path).map_err(err)?;
        if model.inputs.len() != 1 {
            return Err(EmbedError::ModelLoad(format!(
                "expected one image input, model declares {}",
                model.inputs.len()
            )));
        }
        if let Some(name) = output {
            model.select_outputs_by_name([name]).map_err(err)?;
        }
        model
            .with_input_fact(0, f32::fact(shape).into())
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(err)
    }

    pub(super) fn run(plan: &Plan, size: usize, layout: Layout, data: Vec<f32>) -> Result<(Vec<usize>, Vec<f32>), EmbedError> {
        let shape: &[usize] = match layout {
            Layout::Nchw => &[1, 3, size, size],
            Layout::Nhwc => &[1, size, size, 3],
        };
        let err = |e: TractError| EmbedError::Inference(e.to_string());
        let input = Tensor::from_shape(shape, &data).map_err(err)?;
        let outputs = plan.run(tvec!(input.into())).map_err(err)?;
        let out = outputs[0].to_plain_array_view::<f32>().map_err(err)?;
        Ok((out.shape().to_vec(), out.iter().copied().collect()))
    }
}

pub struct ExternalModel {
    input_size: usize,
    output_dim: usize,
    scaling: InputScaling,
    #[cfg(feature = "onnx")]
    plan: runtime::Plan,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("input_size", &self.input_size)
            .field("output_dim", &self.output_dim)
            .field("scaling", &self.scaling)
            .finish()
    }
}

impl ExternalModel {
    /// Loads the model and discovers its descriptor length with one forward
    /// pass over a blank image.
    pub fn load(path: &Path, input_size: usize, output_node: Option<&str>) -> Result<Self, EmbedError> {
        if !path.is_file() {
            return Err(EmbedError::ModelLoad(format!("{}: no such file", path.display())));
        }
        let scaling = InputScaling::load_for(path)?;
        Self::load_runtime(path, input_size, output_node, scaling)
    }

    #[cfg(feature = "onnx")]
    fn load_runtime(path: &Path, input_size: usize, output_node: Option<&str>, scaling: InputScaling) -> Result<Self, EmbedError> {
        let plan = runtime::load(path, input_size, scaling.layout, output_node)?;
        let blank = GrayImage::filled(input_size, input_size, 0);
        let (shape, _) = runtime::run(&plan, input_size, scaling.layout, scaling.planes(&blank))?;
        let output_dim = flat_dim(&shape)?;
        Ok(Self {
            input_size,
            output_dim,
            scaling,
            plan,
        })
    }

    #[cfg(not(feature = "onnx"))]
    fn load_runtime(path: &Path, _: usize, _: Option<&str>, _: InputScaling) -> Result<Self, EmbedError> {
        Err(EmbedError::ModelLoad(format!(
            "{}: built without the `onnx` feature",
            path.display()
        )))
    }
}

impl ImageEmbedder for ExternalModel {
    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn input_size(&self) -> usize {
        self.input_size
    }

    #[cfg(feature = "onnx")]
    fn embed_image(&self, img: &GrayImage) -> Result<Descriptor, EmbedError> {
        self.check_size(img)?;
        let (shape, values) = runtime::run(&self.plan, self.input_size, self.scaling.layout, self.scaling.planes(img))?;
        flat_dim(&shape)?;
        Ok(Descriptor::new(values)?)
    }

    #[cfg(not(feature = "onnx"))]
    fn embed_image(&self, img: &GrayImage) -> Result<Descriptor, EmbedError> {
        self.check_size(img)?;
        Err(EmbedError::Inference("built without the `onnx` feature".into()))
    }
}
