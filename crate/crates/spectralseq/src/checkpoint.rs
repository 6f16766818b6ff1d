//! Model checkpoints: configuration, parameters, normalizer and optimizer state.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "FRNNCKPT"            8 bytes
//! version               u8
//! header length         u64
//! header                UTF-8 JSON (CheckpointHeader)
//! entry count           u64
//! entries               name length u64, name, rank u64, dims u64 x rank, f64 x prod(dims)
//! ```
//!
//! Entries are `param/<name>`, `adam.m/<name>`, `adam.v/<name>`, `norm.mean`
//! and `norm.std`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spectralseq_core::autodiff::ParamStore;
use spectralseq_core::models::{Model, ModelConfig};
use spectralseq_core::training::{AdamState, Normalizer, TrainConfig, TrainState};
use spectralseq_core::Tensor;

use crate::format::FormatError;

pub const CKPT_MAGIC: &[u8; 8] = b"FRNNCKPT";
pub const CKPT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub train: Option<TrainConfig>,
    pub next_epoch: usize,
    pub adam_t: u64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    /// Names of parameters excluded from optimizer updates.
    pub frozen: Vec<String>,
    /// `(n_train, n_test)` split the model was trained with.
    pub split: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub normalizer: Normalizer,
    pub state: TrainState,
    pub train: Option<TrainConfig>,
    pub split: Option<(usize, usize)>,
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_entry(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    put_u64(out, name.len() as u64);
    out.extend_from_slice(name.as_bytes());
    put_u64(out, t.rank() as u64);
    for &d in t.shape() {
        put_u64(out, d as u64);
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let params = &ck.model.params;
    let header = CheckpointHeader {
        model: ck.model.config.clone(),
        train: ck.train.clone(),
        next_epoch: ck.state.next_epoch,
        adam_t: ck.state.adam.t,
        adam_betas: (ck.state.adam.beta1, ck.state.adam.beta2),
        adam_eps: ck.state.adam.eps,
        frozen: params.iter().filter(|(_, p)| !p.trainable).map(|(_, p)| p.name.clone()).collect(),
        split: ck.split,
    };
    let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(CKPT_MAGIC);
    out.push(CKPT_VERSION);
    put_u64(&mut out, json.len() as u64);
    out.extend_from_slice(&json);
    put_u64(&mut out, (3 * params.len() + 2) as u64);
    for (i, (_, p)) in params.iter().enumerate() {
        put_entry(&mut out, &format!("param/{}", p.name), &p.value);
        put_entry(&mut out, &format!("adam.m/{}", p.name), &ck.state.adam.m[i]);
        put_entry(&mut out, &format!("adam.v/{}", p.name), &ck.state.adam.v[i]);
    }
    put_entry(&mut out, "norm.mean", &ck.normalizer.mean);
    put_entry(&mut out, "norm.std", &ck.normalizer.std);
    out
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, encode_checkpoint(ck))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, FormatError> {
    decode_checkpoint(&fs::read(path)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8], FormatError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(FormatError::Truncated { section })?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u64(&mut self, section: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self, section: &'static str) -> Result<usize, FormatError> {
        let v = self.u64(section)?;
        usize::try_from(v).ok().filter(|&n| n <= self.bytes.len()).ok_or(FormatError::Truncated { section })
    }

    fn entry(&mut self) -> Result<(String, Tensor), FormatError> {
        let n = self.len("entry name")?;
        let name =
            String::from_utf8(self.take(n, "entry name")?.to_vec()).map_err(|e| FormatError::BadMeta(e.to_string()))?;
        let rank = self.len("entry shape")?;
        let dims = (0..rank).map(|_| self.len("entry shape")).collect::<Result<Vec<_>, _>>()?;
        let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let bytes = count.and_then(|c| c.checked_mul(8)).ok_or(FormatError::Truncated { section: "entry data" })?;
        let values = self
            .take(bytes, "entry data")?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok((name, Tensor::new(&dims, values)?))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, FormatError> {
    let mut r = Reader { bytes, at: 0 };
    let magic = r.take(8, "magic")?;
    if magic != CKPT_MAGIC {
        return Err(FormatError::BadMagic { found: magic.to_vec() });
    }
    let version = r.take(1, "version")?[0];
    if version != CKPT_VERSION {
        return Err(FormatError::BadVersion { found: version, expected: CKPT_VERSION });
    }
    let n = r.len("header")?;
    let header: CheckpointHeader =
        serde_json::from_slice(r.take(n, "header")?).map_err(|e| FormatError::BadMeta(e.to_string()))?;
    let count = r.len("entries")?;
    let mut entries = BTreeMap::new();
    let mut order = Vec::new();
    for _ in 0..count {
        let (name, t) = r.entry()?;
        if let Some(p) = name.strip_prefix("param/") {
            order.push(p.to_string());
        }
        entries.insert(name, t);
    }
    if r.at != bytes.len() {
        return Err(FormatError::BadMeta(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    let mut take =
        |name: String| entries.remove(&name).ok_or_else(|| FormatError::BadMeta(format!("missing entry {name}")));
    let mut params = ParamStore::new();
    let mut m = Vec::new();
    let mut v = Vec::new();
    for name in &order {
        let id = params.add(name, take(format!("param/{name}"))?);
        params.set_trainable(id, !header.frozen.contains(name));
        m.push(take(format!("adam.m/{name}"))?);
        v.push(take(format!("adam.v/{name}"))?);
    }
    let normalizer = Normalizer { mean: take("norm.mean".into())?, std: take("norm.std".into())? };
    let model = Model::from_parts(&header.model, params)?;
    let adam = AdamState {
        m,
        v,
        t: header.adam_t,
        beta1: header.adam_betas.0,
        beta2: header.adam_betas.1,
        eps: header.adam_eps,
    };
    Ok(Checkpoint {
        model,
        normalizer,
        state: TrainState { next_epoch: header.next_epoch, adam },
        train: header.train,
        split: header.split,
    })
}
