//! `HED1` checkpoints.
//!
//! ```text
//! "HED1" | u32 LE header length | JSON header | param_count x f32 LE
//! ```
//!
//! Parameters are written in the model's flat layout order (see
//! [`GruClassifier`] and [`SoftmaxHead`]).

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{Arch, GruClassifier, GruDims, HeadError, HeadModel, SoftmaxHead, TrainConfig};

pub const HED_MAGIC: &[u8; 4] = b"HED1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDims {
    pub input: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub arch: Arch,
    pub dims: CheckpointDims,
    pub cfg: TrainConfig,
    /// Subject id for each class index.
    pub labels: Vec<String>,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: HeadModel,
}

impl Checkpoint {
    pub fn new(model: HeadModel, cfg: TrainConfig, labels: Vec<String>) -> Self {
        let header = CheckpointHeader {
            arch: model.arch(),
            dims: CheckpointDims {
                input: model.input_dim(),
                classes: model.classes(),
            },
            cfg,
            labels,
            param_count: model.params().len(),
        };
        Self { header, model }
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, ck: &Checkpoint) -> Result<(), HeadError> {
    let header = serde_json::to_vec(&ck.header).map_err(|e| HeadError::BadCheckpoint(e.to_string()))?;
    w.write_all(HED_MAGIC)?;
    w.write_u32::<LittleEndian>(header.len() as u32)?;
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(ck.model.params().len() * 4);
    for &p in ck.model.params() {
        buf.write_f32::<LittleEndian>(p as f32)?;
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, HeadError> {
    let bad = |m: &str| HeadError::BadCheckpoint(m.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
    if &magic != HED_MAGIC {
        return Err(bad("bad magic"));
    }
    let len = r.read_u32::<LittleEndian>().map_err(|_| bad("truncated header length"))? as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(&header).map_err(|e| HeadError::BadCheckpoint(e.to_string()))?;

    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if rest.len() != header.param_count * 4 {
        return Err(HeadError::BadCheckpoint(format!(
            "expected {} parameter bytes, found {}",
            header.param_count * 4,
            rest.len()
        )));
    }
    let params: Vec<f64> = rest
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let CheckpointDims { input, classes } = header.dims;
    let model = match header.arch {
        Arch::Softmax => HeadModel::Softmax(SoftmaxHead::from_params(classes, input, params)?),
        Arch::Gru { hidden } => HeadModel::Gru(GruClassifier::from_params(
            GruDims {
                input,
                hidden,
                classes,
            },
            params,
        )?),
    };
    if header.labels.len() != classes && !header.labels.is_empty() {
        return Err(bad("label count does not match class count"));
    }
    Ok(Checkpoint { header, model })
}
