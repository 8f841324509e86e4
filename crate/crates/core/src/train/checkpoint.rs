//! Binary checkpoint:
//!
//! ```text
//! magic     8 bytes   "DASL0001"
//! mlen      u32 LE    manifest length in bytes
//! manifest  mlen      UTF-8 JSON (see `Manifest`)
//! payload   ...       every tensor as little-endian f32, in manifest order
//! crc       u32 LE    CRC-32 (IEEE) of the payload
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, Toggles};
use super::model::ToyBackbone;
use crate::nn::DiffTensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DASL0001";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the payload.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub model: ModelConfig,
    pub toggles: Toggles,
    /// Optimizer steps taken when the checkpoint was written.
    pub step: usize,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    /// One buffer per manifest entry.
    pub data: Vec<Vec<f32>>,
}

impl Checkpoint {
    pub fn from_model(model: &ToyBackbone<f32>, step: usize) -> Self {
        let mut offset = 0;
        let mut tensors = Vec::new();
        let mut data = Vec::new();
        for (name, t) in model.named_params() {
            tensors.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.len() * 4;
            data.push(t.data().to_vec());
        }
        Checkpoint {
            manifest: Manifest {
                model: model.config.clone(),
                toggles: model.toggles,
                step,
                tensors,
            },
            data,
        }
    }

    /// Rebuilds the model; every tensor must match the architecture by name
    /// and shape.
    pub fn to_model(&self) -> Result<ToyBackbone<f32>> {
        let mut model = ToyBackbone::<f32>::new(&self.manifest.model, self.manifest.toggles, 0)?;
        let names: Vec<(String, Vec<usize>)> = model
            .named_params()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if names.len() != self.manifest.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "architecture has {} tensors, checkpoint has {}",
                names.len(),
                self.manifest.tensors.len()
            )));
        }
        for (((name, shape), entry), (p, d)) in names
            .iter()
            .zip(&self.manifest.tensors)
            .zip(model.params_mut().into_iter().zip(&self.data))
        {
            if *name != entry.name || *shape != entry.shape {
                return Err(Error::Checkpoint(format!(
                    "expected {name} {shape:?}, found {} {:?}",
                    entry.name, entry.shape
                )));
            }
            *p = DiffTensor::new(shape, d.clone())?;
        }
        Ok(model)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let manifest = serde_json::to_vec(&self.manifest)?;
        let mlen = u32::try_from(manifest.len()).map_err(|_| Error::Checkpoint("manifest too large".into()))?;
        let payload_len: usize = self.data.iter().map(|d| d.len() * 4).sum();
        let mut out = Vec::with_capacity(8 + 4 + manifest.len() + payload_len + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&mlen.to_le_bytes());
        out.extend_from_slice(&manifest);
        let start = out.len();
        for d in &self.data {
            for v in d {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(corrupt("missing DASL0001 magic"));
        }
        let mlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let mend = 12usize
            .checked_add(mlen)
            .filter(|e| *e + 4 <= bytes.len())
            .ok_or_else(|| corrupt("truncated manifest"))?;
        let manifest: Manifest =
            serde_json::from_slice(&bytes[12..mend]).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
        let mut expected = 0usize;
        for t in &manifest.tensors {
            if t.offset != expected {
                return Err(Error::Checkpoint(format!("tensor {} is not contiguous", t.name)));
            }
            expected += t.shape.iter().product::<usize>() * 4;
        }
        if bytes.len() != mend + expected + 4 {
            return Err(Error::Checkpoint(format!(
                "payload is {} bytes, manifest describes {expected}",
                bytes.len().saturating_sub(mend + 4)
            )));
        }
        let payload = &bytes[mend..mend + expected];
        let stored = u32::from_le_bytes(bytes[mend + expected..].try_into().expect("4 bytes"));
        if crc32fast::hash(payload) != stored {
            return Err(corrupt("CRC mismatch, file is corrupt"));
        }
        let data = manifest
            .tensors
            .iter()
            .map(|t| {
                let n = t.shape.iter().product::<usize>();
                payload[t.offset..t.offset + n * 4]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect()
            })
            .collect();
        Ok(Checkpoint { manifest, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ToyBackbone<f32> {
        let cfg = ModelConfig {
            depth: 2,
            width: 4,
            ..ModelConfig::default()
        };
        ToyBackbone::new(&cfg, Toggles::all(), 5).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise_idempotent() {
        let ck = Checkpoint::from_model(&small(), 7);
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.to_model().unwrap(), small());
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = Checkpoint::from_model(&small(), 0).to_bytes().unwrap();
        let n = bytes.len();
        bytes[n - 10] ^= 0x40;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint(m)) if m.contains("CRC")));
        assert!(Checkpoint::from_bytes(&bytes[..n - 3]).is_err());
        assert!(Checkpoint::from_bytes(b"NOTMAGIC00000000").is_err());
    }

    #[test]
    fn offsets_contiguous() {
        let ck = Checkpoint::from_model(&small(), 0);
        let mut expect = 0;
        for (t, d) in ck.manifest.tensors.iter().zip(&ck.data) {
            assert_eq!(t.offset, expect);
            expect += d.len() * 4;
        }
    }

    #[test]
    fn architecture_mismatch() {
        let mut ck = Checkpoint::from_model(&small(), 0);
        ck.manifest.model.width = 8;
        assert!(matches!(ck.to_model(), Err(Error::Checkpoint(_))));
    }
}
