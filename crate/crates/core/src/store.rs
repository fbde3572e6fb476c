//! Model persistence: a versioned binary bundle holding the topology,
//! normalization stats, train-config snapshot and every parameter tensor,
//! protected by a SHA-256 content checksum.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic   8  b"AGCBUNDL"
//! version u32 (currently 1)
//! hlen    u32, then hlen bytes of JSON header
//!         {"topology": …, "seed": …, "stats": …, "train_config": …}
//! count   u32 tensors, each:
//!         nlen u16, name bytes,
//!         ndim u8, ndim × u32 dims,
//!         Π(dims) × f64 values (row-major)
//! digest  32 bytes: SHA-256 of everything above
//! ```
//!
//! Tensors appear in the model's canonical traversal order; names and
//! shapes are verified against the topology on load, and reload is
//! bit-exact.

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::nn::{BiLstmModel, NnError, TensorRef, Topology};
use crate::preprocess::NormalizationStats;
use crate::training::TrainConfig;

const MAGIC: &[u8; 8] = b"AGCBUNDL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model bundle (bad magic)")]
    BadMagic,
    #[error("unsupported bundle version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt bundle: {0}")]
    Corrupt(String),
    #[error("checksum mismatch: stored {stored}, computed {computed}")]
    ChecksumMismatch { stored: String, computed: String },
    #[error(transparent)]
    Model(#[from] NnError),
}

/// Everything needed to reload and run a trained station model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: BiLstmModel,
    pub stats: Option<NormalizationStats>,
    pub train_config: Option<TrainConfig>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Header {
    topology: Topology,
    seed: u64,
    stats: Option<NormalizationStats>,
    train_config: Option<TrainConfig>,
}

/// Returned by [`save`]: where the bundle went and its content digest.
#[derive(Debug, Clone)]
pub struct SaveReceipt {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Serializes a bundle to bytes.
pub fn encode(bundle: &ModelBundle) -> Vec<u8> {
    let header = Header {
        topology: bundle.model.topology.clone(),
        seed: bundle.model.seed,
        stats: bundle.stats.clone(),
        train_config: bundle.train_config.clone(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    push_u32(&mut buf, FORMAT_VERSION);
    push_u32(&mut buf, header_json.len() as u32);
    buf.extend_from_slice(&header_json);

    let mut tensors: Vec<(String, Vec<usize>, Vec<f64>)> = Vec::new();
    bundle.model.params.visit(|name, t| {
        let (dims, data) = match t {
            TensorRef::Matrix(m) => (vec![m.nrows(), m.ncols()], m.iter().copied().collect()),
            TensorRef::Vector(v) => (vec![v.len()], v.to_vec()),
        };
        tensors.push((name, dims, data));
    });
    push_u32(&mut buf, tensors.len() as u32);
    for (name, dims, data) in tensors {
        let nb = name.as_bytes();
        buf.extend_from_slice(&(nb.len() as u16).to_le_bytes());
        buf.extend_from_slice(nb);
        buf.push(dims.len() as u8);
        for d in dims {
            push_u32(&mut buf, d as u32);
        }
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        if self.pos + n > self.buf.len() {
            return Err(StoreError::Corrupt(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64, StoreError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Deserializes a bundle, verifying the checksum, version, and that the
/// tensor names/shapes match the header topology exactly.
pub fn decode(bytes: &[u8]) -> Result<ModelBundle, StoreError> {
    if bytes.len() < MAGIC.len() + 4 + 32 {
        return Err(StoreError::Corrupt("file shorter than any valid bundle".into()));
    }
    let (body, stored_digest) = bytes.split_at(bytes.len() - 32);
    let computed = Sha256::digest(body);
    if computed.as_slice() != stored_digest {
        return Err(StoreError::ChecksumMismatch {
            stored: hex(stored_digest),
            computed: hex(&computed),
        });
    }

    let mut r = Reader { buf: body, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let hlen = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(hlen)?)
        .map_err(|e| StoreError::Corrupt(format!("bad header JSON: {e}")))?;

    // rebuild parameter shapes from the topology, then fill in file order
    let mut model = BiLstmModel::zeros(header.topology)?;
    model.seed = header.seed;
    let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
    model.params.visit(|name, t| {
        let dims = match t {
            TensorRef::Matrix(m) => vec![m.nrows(), m.ncols()],
            TensorRef::Vector(v) => vec![v.len()],
        };
        expected.push((name, dims));
    });

    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(StoreError::Corrupt(format!(
            "bundle has {count} tensors, topology implies {}",
            expected.len()
        )));
    }
    let mut flat: Vec<f64> = Vec::new();
    for (want_name, want_dims) in &expected {
        let nlen = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|_| StoreError::Corrupt("tensor name is not UTF-8".into()))?;
        if name != want_name {
            return Err(StoreError::Corrupt(format!(
                "tensor order mismatch: found {name:?}, expected {want_name:?}"
            )));
        }
        let ndim = r.u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32()? as usize);
        }
        if dims != *want_dims {
            return Err(StoreError::Corrupt(format!(
                "tensor {name:?} has shape {dims:?}, topology implies {want_dims:?}"
            )));
        }
        let n: usize = dims.iter().product();
        for _ in 0..n {
            flat.push(r.f64()?);
        }
    }
    if r.pos != body.len() {
        return Err(StoreError::Corrupt(format!(
            "{} trailing bytes after the last tensor",
            body.len() - r.pos
        )));
    }
    model.params.assign_flat(&flat);

    Ok(ModelBundle {
        model,
        stats: header.stats,
        train_config: header.train_config,
    })
}

pub fn save(bundle: &ModelBundle, path: &Path) -> Result<SaveReceipt, StoreError> {
    let bytes = encode(bundle);
    let digest = hex(&bytes[bytes.len() - 32..]);
    std::fs::write(path, &bytes).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(SaveReceipt {
        path: path.display().to_string(),
        bytes: bytes.len(),
        sha256: digest,
    })
}

pub fn load(path: &Path) -> Result<ModelBundle, StoreError> {
    let bytes = std::fs::read(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

/// Human-readable summary used by the `inspect` command.
pub fn describe(bundle: &ModelBundle, bytes: &[u8]) -> String {
    let t = &bundle.model.topology;
    let mut out = String::new();
    out.push_str(&format!(
        "format v{FORMAT_VERSION}, {} bytes, sha256 {}\n",
        bytes.len(),
        hex(&bytes[bytes.len() - 32..])
    ));
    out.push_str(&format!(
        "stack: {}x {}LSTM({}) + td{:?} + out({}), windows {}->{}\n",
        t.lstm_layers,
        if t.bidirectional { "Bi-" } else { "" },
        t.units,
        t.td_units,
        t.target_count(),
        t.input_width,
        t.label_width
    ));
    out.push_str(&format!(
        "features: {:?}\ntargets: {:?}\nseed: {}\nparameters: {}\n",
        t.feature_names,
        t.target_names,
        bundle.model.seed,
        bundle.model.param_count()
    ));
    bundle.model.params.visit(|name, tref| {
        let dims = match tref {
            TensorRef::Matrix(m) => format!("{}x{}", m.nrows(), m.ncols()),
            TensorRef::Vector(v) => format!("{}", v.len()),
        };
        out.push_str(&format!("  {name}  [{dims}]\n"));
    });
    out
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
