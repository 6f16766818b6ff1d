//! Binary trajectory dataset files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "FRNNDATA"            8 bytes
//! version               u8
//! dims                  4 x u64 (n_sims, n_frames, nx, ny)
//! dtype tag             u8 (1 = f64)
//! payload               n_sims * n_frames * nx * ny x f64, row-major
//! meta length           u64
//! meta                  UTF-8 JSON
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use spectralseq_core::data::{DatasetMeta, TrajectoryDataset};
use spectralseq_core::Tensor;

pub const DATA_MAGIC: &[u8; 8] = b"FRNNDATA";
pub const DATA_VERSION: u8 = 1;
pub const DTYPE_F64: u8 = 1;
const HEADER_LEN: usize = 8 + 1 + 32 + 1;
const MAX_META: usize = 1 << 24;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a dataset file (magic {found:?})")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported format version {found} (expected {expected})")]
    BadVersion { found: u8, expected: u8 },
    #[error("unsupported dtype tag {0}")]
    BadDtype(u8),
    #[error("file truncated in {section}")]
    Truncated { section: &'static str },
    #[error("header declares {declared} values but the payload holds {actual}")]
    DimsMismatch { declared: String, actual: String },
    #[error("bad metadata: {0}")]
    BadMeta(String),
    #[error("invalid contents: {0}")]
    Invalid(#[from] spectralseq_core::Error),
}

/// Serializes a dataset to bytes.
pub fn encode_dataset(ds: &TrajectoryDataset) -> Result<Vec<u8>, FormatError> {
    let meta = serde_json::to_vec(&ds.meta).map_err(|e| FormatError::BadMeta(e.to_string()))?;
    let data = ds.frames.data();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * data.len() + 8 + meta.len());
    out.extend_from_slice(DATA_MAGIC);
    out.push(DATA_VERSION);
    for d in ds.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.push(DTYPE_F64);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    Ok(out)
}

pub fn save_dataset(ds: &TrajectoryDataset, path: &Path) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode_dataset(ds)?)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<TrajectoryDataset, FormatError> {
    decode_dataset(&fs::read(path)?)
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

/// Finds the start of a well-formed `length + JSON` trailer ending exactly at
/// the end of the file.
fn find_trailer(bytes: &[u8]) -> Option<usize> {
    let room = bytes.len().checked_sub(HEADER_LEN + 8)?;
    (2..=room.min(MAX_META)).find_map(|len| {
        let at = bytes.len() - len - 8;
        (u64_at(bytes, at) == len as u64 && bytes[at + 8] == b'{' && bytes[bytes.len() - 1] == b'}').then_some(at)
    })
}

pub fn decode_dataset(bytes: &[u8]) -> Result<TrajectoryDataset, FormatError> {
    if bytes.len() < 8 {
        return Err(FormatError::Truncated { section: "magic" });
    }
    if &bytes[..8] != DATA_MAGIC {
        return Err(FormatError::BadMagic { found: bytes[..8].to_vec() });
    }
    if bytes.len() < 9 {
        return Err(FormatError::Truncated { section: "version" });
    }
    if bytes[8] != DATA_VERSION {
        return Err(FormatError::BadVersion { found: bytes[8], expected: DATA_VERSION });
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated { section: "header" });
    }
    let dims: Vec<usize> = (0..4).map(|i| u64_at(bytes, 9 + 8 * i) as usize).collect();
    if bytes[41] != DTYPE_F64 {
        return Err(FormatError::BadDtype(bytes[41]));
    }
    let payload_end = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN));
    let trailer = find_trailer(bytes);
    let declared = format!("{dims:?}");
    let meta_start = match (payload_end, trailer) {
        (Some(end), Some(at)) if end == at => at,
        (_, Some(at)) => {
            return Err(FormatError::DimsMismatch { declared, actual: format!("{} values", (at - HEADER_LEN) / 8) })
        }
        (None, None) => {
            return Err(FormatError::DimsMismatch { declared, actual: "an unrepresentable payload size".into() })
        }
        (Some(end), None) if end + 8 > bytes.len() => return Err(FormatError::Truncated { section: "payload" }),
        (Some(_), None) => return Err(FormatError::Truncated { section: "metadata" }),
    };
    let values = bytes[HEADER_LEN..meta_start]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let meta: DatasetMeta =
        serde_json::from_slice(&bytes[meta_start + 8..]).map_err(|e| FormatError::BadMeta(e.to_string()))?;
    Ok(TrajectoryDataset::new(Tensor::new(&dims, values)?, meta)?)
}
