//! Binary model container.
//!
//! Layout: the magic `CFPMODEL`, a little-endian `u32` format version, a
//! `u32` byte length followed by a JSON header, a `u32` tensor count, then
//! per tensor a `u32` name length, the UTF-8 name, `u32` rows, `u32` cols
//! and `rows * cols` little-endian `f64` values in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classifier::{ClassifierDims, ClassifierModel};
use super::params::ParamStore;
use super::vae::{LossWeights, VaeDims, VaeModel};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CFPMODEL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Vae,
    Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub kind: ModelKind,
    pub vocabulary_hash: String,
    pub dims: serde_json::Value,
    pub weights: Option<LossWeights>,
    pub threshold: Option<f64>,
    pub seed: u64,
}

pub fn write_model<W: Write>(mut w: W, header: &ModelHeader, params: &ParamStore) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&MODEL_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&len_u32(json.len())?.to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&len_u32(params.len())?.to_le_bytes())?;
    for (name, t) in params.iter() {
        w.write_all(&len_u32(name.len())?.to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&len_u32(t.rows())?.to_le_bytes())?;
        w.write_all(&len_u32(t.cols())?.to_le_bytes())?;
        for v in t.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("length {n} does not fit the container")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated model file".into())
    } else {
        Error::Io(e)
    }
}

pub fn read_model<R: Read>(mut r: R) -> Result<(ModelHeader, ParamStore)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported model format version {version}")));
    }
    let hlen = read_u32(&mut r)? as usize;
    let mut json = vec![0u8; hlen];
    r.read_exact(&mut json).map_err(truncated)?;
    let header: ModelHeader = serde_json::from_slice(&json).map_err(|e| Error::Format(format!("model header: {e}")))?;
    let count = read_u32(&mut r)?;
    let mut store = ParamStore::new(header.seed);
    for _ in 0..count {
        let nlen = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; nlen];
        r.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut b).map_err(truncated)?;
            data.push(f64::from_le_bytes(b));
        }
        store.insert(&name, Matrix::from_vec(rows, cols, data)).map_err(|e| Error::Format(e.to_string()))?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after model body".into()));
    }
    Ok((header, store))
}

pub fn write_model_file(path: &Path, header: &ModelHeader, params: &ParamStore) -> Result<()> {
    let mut buf = Vec::new();
    write_model(&mut buf, header, params)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_model_file(path: &Path) -> Result<(ModelHeader, ParamStore)> {
    let bytes = std::fs::read(path)?;
    read_model(bytes.as_slice())
}

fn check_hash(header: &ModelHeader, expected: Option<&str>) -> Result<()> {
    match expected {
        Some(h) if h != header.vocabulary_hash => Err(Error::ArtifactMismatch(format!(
            "model was trained on vocabulary {} but the log has vocabulary {h}",
            header.vocabulary_hash
        ))),
        _ => Ok(()),
    }
}

fn dims_value<T: Serialize>(d: &T) -> serde_json::Value {
    serde_json::to_value(d).expect("dimension structs serialise")
}

fn dims_from<T: for<'de> Deserialize<'de>>(v: &serde_json::Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Format(format!("model dims: {e}")))
}

impl VaeModel {
    pub fn header(&self) -> ModelHeader {
        ModelHeader {
            kind: ModelKind::Vae,
            vocabulary_hash: self.vocabulary_hash.clone(),
            dims: dims_value(&self.dims),
            weights: Some(self.weights),
            threshold: None,
            seed: self.params.seed,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_model(&mut buf, &self.header(), &self.params)?;
        Ok(buf)
    }

    /// Loads a VAE, rejecting files whose vocabulary hash differs from
    /// `expected_hash` when one is given.
    pub fn from_bytes(bytes: &[u8], expected_hash: Option<&str>) -> Result<Self> {
        let (h, params) = read_model(bytes)?;
        if h.kind != ModelKind::Vae {
            return Err(Error::ArtifactMismatch(format!("expected a VAE, found {:?}", h.kind)));
        }
        check_hash(&h, expected_hash)?;
        let dims: VaeDims = dims_from(&h.dims)?;
        let weights = h.weights.ok_or_else(|| Error::Format("VAE header lacks loss weights".into()))?;
        VaeModel::from_params(dims, weights, h.vocabulary_hash, params)
    }
}

impl ClassifierModel {
    pub fn header(&self) -> ModelHeader {
        ModelHeader {
            kind: ModelKind::Classifier,
            vocabulary_hash: self.vocabulary_hash.clone(),
            dims: dims_value(&self.dims),
            weights: None,
            threshold: Some(self.threshold),
            seed: self.params.seed,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_model(&mut buf, &self.header(), &self.params)?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8], expected_hash: Option<&str>) -> Result<Self> {
        let (h, params) = read_model(bytes)?;
        if h.kind != ModelKind::Classifier {
            return Err(Error::ArtifactMismatch(format!("expected a classifier, found {:?}", h.kind)));
        }
        check_hash(&h, expected_hash)?;
        let dims: ClassifierDims = dims_from(&h.dims)?;
        let threshold = h.threshold.unwrap_or(0.5);
        ClassifierModel::from_params(dims, threshold, h.vocabulary_hash, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vae() -> VaeModel {
        VaeModel::new(VaeDims { vocab_size: 4, max_len: 3, hidden: 3, latent: 2 }, LossWeights::default(), "abc", 11)
            .unwrap()
    }

    #[test]
    fn vae_round_trips_bit_exactly() {
        let m = vae();
        let bytes = m.to_bytes().unwrap();
        let back = VaeModel::from_bytes(&bytes, Some("abc")).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn classifier_round_trips() {
        let c = ClassifierModel::new(ClassifierDims { vocab_size: 4, max_len: 3, hidden: 2 }, "abc", 1).unwrap();
        let back = ClassifierModel::from_bytes(&c.to_bytes().unwrap(), None).unwrap();
        assert_eq!(back.params, c.params);
        assert_eq!(back.threshold, 0.5);
    }

    #[test]
    fn hash_and_kind_mismatch_are_reported() {
        let bytes = vae().to_bytes().unwrap();
        assert!(matches!(VaeModel::from_bytes(&bytes, Some("other")), Err(Error::ArtifactMismatch(_))));
        assert!(matches!(ClassifierModel::from_bytes(&bytes, None), Err(Error::ArtifactMismatch(_))));
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let bytes = vae().to_bytes().unwrap();
        assert!(matches!(VaeModel::from_bytes(&bytes[..bytes.len() - 3], None), Err(Error::Format(_))));
        assert!(matches!(VaeModel::from_bytes(b"NOTMODEL", None), Err(Error::Format(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(VaeModel::from_bytes(&extra, None), Err(Error::Format(_))));
    }
}
