//! JSON-lines manifests and directory-level dataset persistence.
//!
//! Every pipeline stage writes its artifacts into a directory together with
//! a `manifest.jsonl` carrying labels and provenance, one object per line.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{BoundingBox, Descriptor, GrayImage, PressureSequence, StepSequence, DEFAULT_FPS};
use crate::error::{Error, Result};
use crate::formats;
use crate::transform::{Strategy, TransformOutput};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub path: String,
    pub subject_id: String,
    pub sequence_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub path: String,
    pub subject_id: String,
    pub sequence_id: String,
    pub step_id: String,
    /// Source frame range, half-open.
    pub start: usize,
    pub end: usize,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub step_id: String,
    pub strategy: Strategy,
    pub images: Vec<String>,
    pub subject_id: String,
    pub sequence_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorRecord {
    pub step_id: String,
    pub strategy: Strategy,
    pub path: String,
    pub subject_id: String,
    pub sequence_id: String,
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn save_sequences(dir: &Path, seqs: &[PressureSequence]) -> Result<()> {
    create_dir(dir)?;
    let mut records = Vec::with_capacity(seqs.len());
    for seq in seqs {
        let name = format!("{}.psq", sanitize(&seq.sequence_id));
        let mut w = create(&dir.join(&name))?;
        formats::write_psq(seq, &mut w)?;
        w.flush()?;
        records.push(SequenceRecord {
            path: name,
            subject_id: seq.subject_id.clone(),
            sequence_id: seq.sequence_id.clone(),
        });
    }
    write_jsonl(&dir.join(MANIFEST_FILE), &records)
}

pub fn load_sequences(dir: &Path) -> Result<Vec<PressureSequence>> {
    let records: Vec<SequenceRecord> = read_jsonl(&dir.join(MANIFEST_FILE))?;
    records
        .into_iter()
        .map(|r| {
            let raw = formats::read_psq(&mut open(&dir.join(&r.path))?)?;
            Ok(PressureSequence::new(
                raw.frames().to_vec(),
                DEFAULT_FPS,
                r.subject_id,
                r.sequence_id,
            )?)
        })
        .collect()
}

/// Steps paired with the frame range they were cut from.
pub fn save_steps(dir: &Path, steps: &[(StepSequence, (usize, usize))]) -> Result<()> {
    create_dir(dir)?;
    let mut records = Vec::with_capacity(steps.len());
    for (step, (start, end)) in steps {
        let name = format!("{}.psq", sanitize(&step.step_id));
        let as_seq = PressureSequence::new(step.frames().to_vec(), DEFAULT_FPS, "", "")?;
        let mut w = create(&dir.join(&name))?;
        formats::write_psq(&as_seq, &mut w)?;
        w.flush()?;
        records.push(StepRecord {
            path: name,
            subject_id: step.subject_id.clone(),
            sequence_id: step.sequence_id.clone(),
            step_id: step.step_id.clone(),
            start: *start,
            end: *end,
            bbox: step.bbox,
        });
    }
    write_jsonl(&dir.join(MANIFEST_FILE), &records)
}

pub fn load_steps(dir: &Path) -> Result<Vec<StepSequence>> {
    let records: Vec<StepRecord> = read_jsonl(&dir.join(MANIFEST_FILE))?;
    records
        .into_iter()
        .map(|r| {
            let raw = formats::read_psq(&mut open(&dir.join(&r.path))?)?;
            Ok(StepSequence::new(
                raw.frames().to_vec(),
                r.bbox,
                r.subject_id,
                r.step_id,
                r.sequence_id,
            )?)
        })
        .collect()
}

pub fn save_images(dir: &Path, outputs: &[TransformOutput]) -> Result<()> {
    create_dir(dir)?;
    let mut records = Vec::with_capacity(outputs.len());
    for out in outputs {
        let stem = sanitize(&out.step_id);
        let mut paths = Vec::with_capacity(out.images.len());
        for (i, img) in out.images.iter().enumerate() {
            let name = format!("{stem}_{}_{i:03}.pgm", out.strategy.as_str());
            let mut w = create(&dir.join(&name))?;
            formats::write_pgm(img, &mut w)?;
            w.flush()?;
            paths.push(name);
        }
        records.push(ImageRecord {
            step_id: out.step_id.clone(),
            strategy: out.strategy,
            images: paths,
            subject_id: out.subject_id.clone(),
            sequence_id: out.sequence_id.clone(),
        });
    }
    write_jsonl(&dir.join(MANIFEST_FILE), &records)
}

pub fn load_images(dir: &Path) -> Result<Vec<TransformOutput>> {
    let records: Vec<ImageRecord> = read_jsonl(&dir.join(MANIFEST_FILE))?;
    records
        .into_iter()
        .map(|r| {
            let images = r
                .images
                .iter()
                .map(|p| Ok(formats::read_pgm(&mut open(&dir.join(p))?)?))
                .collect::<Result<Vec<GrayImage>>>()?;
            Ok(TransformOutput {
                step_id: r.step_id,
                strategy: r.strategy,
                images,
                subject_id: r.subject_id,
                sequence_id: r.sequence_id,
            })
        })
        .collect()
}

/// Per-step descriptor matrices as persisted by the `embed` stage.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub record: DescriptorRecord,
    pub descriptors: Vec<Descriptor>,
}

pub fn save_descriptors(dir: &Path, sets: &[DescriptorSet]) -> Result<()> {
    create_dir(dir)?;
    let mut records = Vec::with_capacity(sets.len());
    for set in sets {
        let mut w = create(&dir.join(&set.record.path))?;
        formats::write_dsc(&set.descriptors, &mut w)?;
        w.flush()?;
        records.push(set.record.clone());
    }
    write_jsonl(&dir.join(MANIFEST_FILE), &records)
}

pub fn load_descriptors(dir: &Path) -> Result<Vec<DescriptorSet>> {
    let records: Vec<DescriptorRecord> = read_jsonl(&dir.join(MANIFEST_FILE))?;
    records
        .into_iter()
        .map(|record| {
            let descriptors = formats::read_dsc(&mut open(&dir.join(&record.path))?)?;
            Ok(DescriptorSet {
                record,
                descriptors,
            })
        })
        .collect()
}

pub fn descriptor_file_name(step_id: &str, strategy: Strategy) -> String {
    format!("{}_{}.dsc", sanitize(step_id), strategy.as_str())
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}
