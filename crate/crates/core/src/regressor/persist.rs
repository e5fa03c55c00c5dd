//! Binary model container.
//!
//! ```text
//! magic      8 bytes   "CMQE-MLP"
//! version    u32 LE
//! meta_len   u64 LE
//! meta       meta_len bytes of JSON {config, scaler, layout, task}
//! n_params   u64 LE
//! params     n_params × f64 LE, canonical parameter order
//! checksum   32 bytes  SHA-256 of everything above
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::mlp::MlpModel;
use super::MlpConfig;
use crate::data::Task;
use crate::features::{FeatureLayout, ScalerParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CMQE-MLP";
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0} (expected {MODEL_FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("model file is truncated")]
    Truncated,
    #[error("model checksum mismatch; file is corrupt")]
    ChecksumMismatch,
    #[error("invalid model: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: MlpConfig,
    scaler: Option<ScalerParams>,
    layout: Option<FeatureLayout>,
    task: Option<Task>,
}

pub fn model_to_bytes(model: &MlpModel) -> Vec<u8> {
    let meta = Meta {
        config: model.config.clone(),
        scaler: model.scaler.clone(),
        layout: model.layout.clone(),
        task: model.task,
    };
    let meta = serde_json::to_vec(&meta).expect("model metadata serializes");
    let mut out = Vec::with_capacity(8 + 4 + 8 + meta.len() + 8 + 8 * model.params.len() + CHECKSUM_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(model.params.len() as u64).to_le_bytes());
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest[..]);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        if self.buf.len() < n {
            return Err(ModelFileError::Truncated);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64, ModelFileError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<MlpModel, ModelFileError> {
    if bytes.len() < MAGIC.len() {
        return Err(ModelFileError::Truncated);
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN {
        return Err(ModelFileError::Truncated);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_FORMAT_VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body)[..] != *checksum {
        return Err(ModelFileError::ChecksumMismatch);
    }

    let mut r = Reader { buf: &body[12..] };
    let meta_len = usize::try_from(r.u64()?).map_err(|_| ModelFileError::Truncated)?;
    let meta: Meta = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| ModelFileError::Invalid(format!("metadata: {e}")))?;
    let n_params = usize::try_from(r.u64()?).map_err(|_| ModelFileError::Truncated)?;
    let raw = r.take(n_params.checked_mul(8).ok_or(ModelFileError::Truncated)?)?;
    if !r.buf.is_empty() {
        return Err(ModelFileError::Invalid("trailing bytes after parameters".into()));
    }
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    meta.config
        .validate()
        .map_err(|e| ModelFileError::Invalid(e.to_string()))?;
    if params.len() != meta.config.param_count() {
        return Err(ModelFileError::Invalid(format!(
            "{} parameters stored, configuration needs {}",
            params.len(),
            meta.config.param_count()
        )));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(ModelFileError::Invalid("non-finite parameter".into()));
    }
    if let Some(layout) = &meta.layout {
        if layout.dim() != meta.config.input_dim {
            return Err(ModelFileError::Invalid(format!(
                "layout dimension {} differs from input_dim {}",
                layout.dim(),
                meta.config.input_dim
            )));
        }
    }
    if let Some(scaler) = &meta.scaler {
        scaler.validate().map_err(|e| ModelFileError::Invalid(e.to_string()))?;
    }
    Ok(MlpModel {
        config: meta.config,
        params,
        scaler: meta.scaler,
        layout: meta.layout,
        task: meta.task,
    })
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<(), crate::Error> {
    let bytes = model_to_bytes(model);
    crate::jsonl::write_atomic(path.as_ref(), |w| w.write_all(&bytes))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel, ModelFileError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ModelFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_bytes(&bytes)
}
