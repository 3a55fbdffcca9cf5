//! Binary artifact formats.
//!
//! * PSQ: `PSQ1`, then little-endian `u32 rows, u32 cols, u32 num_frames`,
//!   then `num_frames*rows*cols` little-endian f32, frame-major and
//!   row-major within each frame. Labels are not stored; see [`crate::manifest`].
//! * PGM: binary `P5` with maxval 255.
//! * DSC: `DSC1`, `u32 count, u32 dim`, then `count*dim` little-endian f32.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::data::{DataError, Descriptor, GrayImage, PressureFrame, PressureSequence, DEFAULT_FPS};

pub const PSQ_MAGIC: &[u8; 4] = b"PSQ1";
pub const DSC_MAGIC: &[u8; 4] = b"DSC1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },
    #[error("payload truncated: expected {expected} bytes, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("trailing bytes after payload")]
    TrailingData,
    #[error("zero dimension in header")]
    ZeroDimension,
    #[error("malformed PGM: {0}")]
    BadPgm(String),
    #[error("invalid payload: {0}")]
    Invalid(#[from] DataError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn read_magic(src: &mut impl Read, expected: &[u8; 4]) -> Result<(), FormatError> {
    let mut magic = [0u8; 4];
    src.read_exact(&mut magic).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::TruncatedPayload {
            expected: 4,
            actual: 0,
        },
        _ => e.into(),
    })?;
    if &magic != expected {
        return Err(FormatError::BadMagic {
            found: magic,
            expected: *expected,
        });
    }
    Ok(())
}

fn read_header_u32(src: &mut impl Read) -> Result<u32, FormatError> {
    src.read_u32::<LittleEndian>().map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::TruncatedPayload {
            expected: 4,
            actual: 0,
        },
        _ => e.into(),
    })
}

/// Reads exactly `len` bytes or reports how many were available.
fn read_payload(src: &mut impl Read, len: usize) -> Result<Vec<u8>, FormatError> {
    let mut buf = Vec::with_capacity(len);
    src.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(FormatError::TruncatedPayload {
            expected: len,
            actual: buf.len(),
        });
    }
    let mut probe = [0u8; 1];
    if src.read(&mut probe)? != 0 {
        return Err(FormatError::TrailingData);
    }
    Ok(buf)
}

fn f32_from_le(bytes: &[u8]) -> impl Iterator<Item = f32> + '_ {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
}

pub fn write_psq(seq: &PressureSequence, sink: &mut impl Write) -> Result<usize, FormatError> {
    let (rows, cols) = (seq.rows(), seq.cols());
    sink.write_all(PSQ_MAGIC)?;
    sink.write_u32::<LittleEndian>(rows as u32)?;
    sink.write_u32::<LittleEndian>(cols as u32)?;
    sink.write_u32::<LittleEndian>(seq.len() as u32)?;
    let mut payload = Vec::with_capacity(seq.len() * rows * cols * 4);
    for frame in seq.frames() {
        for &v in frame.values() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    sink.write_all(&payload)?;
    Ok(16 + payload.len())
}

/// Parses a PSQ stream. The returned sequence carries the default frame
/// rate and empty identifiers; callers attach labels from the manifest.
pub fn read_psq(source: &mut impl Read) -> Result<PressureSequence, FormatError> {
    read_magic(source, PSQ_MAGIC)?;
    let rows = read_header_u32(source)? as usize;
    let cols = read_header_u32(source)? as usize;
    let num_frames = read_header_u32(source)? as usize;
    if rows == 0 || cols == 0 || num_frames == 0 {
        return Err(FormatError::ZeroDimension);
    }
    let frame_len = rows * cols;
    let payload = read_payload(source, num_frames * frame_len * 4)?;
    let frames = payload
        .chunks_exact(frame_len * 4)
        .map(|chunk| PressureFrame::new(rows, cols, f32_from_le(chunk).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PressureSequence::new(frames, DEFAULT_FPS, "", "")?)
}

pub fn write_pgm(img: &GrayImage, sink: &mut impl Write) -> Result<usize, FormatError> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    sink.write_all(header.as_bytes())?;
    sink.write_all(img.pixels())?;
    Ok(header.len() + img.pixels().len())
}

/// Reader for binary PGM with maxval 255. Accepts arbitrary whitespace and
/// `#` comments in the header, as the netpbm tools do.
pub fn read_pgm(source: &mut impl Read) -> Result<GrayImage, FormatError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String, FormatError> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(FormatError::BadPgm("unexpected end of header".into())),
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(&bytes)?;
    if magic != "P5" {
        return Err(FormatError::BadPgm(format!("magic {magic:?}")));
    }
    let parse = |s: String, what: &str| -> Result<usize, FormatError> {
        s.parse::<usize>()
            .map_err(|_| FormatError::BadPgm(format!("bad {what} {s:?}")))
    };
    let width = parse(token(&bytes)?, "width")?;
    let height = parse(token(&bytes)?, "height")?;
    let maxval = parse(token(&bytes)?, "maxval")?;
    if maxval != 255 {
        return Err(FormatError::BadPgm(format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(FormatError::ZeroDimension);
    }
    // exactly one whitespace byte separates the header from the raster
    let data_start = pos + 1;
    let expected = width * height;
    let actual = bytes.len().saturating_sub(data_start);
    if actual < expected {
        return Err(FormatError::TruncatedPayload { expected, actual });
    }
    if actual > expected {
        return Err(FormatError::TrailingData);
    }
    Ok(GrayImage::new(width, height, bytes[data_start..].to_vec())?)
}

pub fn write_dsc(descriptors: &[Descriptor], sink: &mut impl Write) -> Result<usize, FormatError> {
    let dim = descriptors.first().map_or(0, Descriptor::dim);
    if let Some(bad) = descriptors.iter().find(|d| d.dim() != dim) {
        return Err(DataError::LengthMismatch {
            expected: dim,
            actual: bad.dim(),
        }
        .into());
    }
    sink.write_all(DSC_MAGIC)?;
    sink.write_u32::<LittleEndian>(descriptors.len() as u32)?;
    sink.write_u32::<LittleEndian>(dim as u32)?;
    let mut payload = Vec::with_capacity(descriptors.len() * dim * 4);
    for d in descriptors {
        for &v in d.values() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    sink.write_all(&payload)?;
    Ok(12 + payload.len())
}

pub fn read_dsc(source: &mut impl Read) -> Result<Vec<Descriptor>, FormatError> {
    read_magic(source, DSC_MAGIC)?;
    let count = read_header_u32(source)? as usize;
    let dim = read_header_u32(source)? as usize;
    if count == 0 || dim == 0 {
        return Err(FormatError::ZeroDimension);
    }
    let payload = read_payload(source, count * dim * 4)?;
    payload
        .chunks_exact(dim * 4)
        .map(|chunk| Descriptor::new(f32_from_le(chunk).collect()).map_err(FormatError::from))
        .collect()
}
