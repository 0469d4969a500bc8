//! `CKPT1` checkpoints: `CKPT1` | header length: u32 LE | JSON header |
//! f32 LE payload, parameters concatenated in model order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchitectureSpec, Model};
use crate::error::{Error, Result};
use crate::grid::Tensor;

pub const CKPT_MAGIC: &[u8; 5] = b"CKPT1";

const INIT_SCHEME: &str =
    "fan-in uniform ±sqrt(1/fan_in) for conv/linear; spectral uniform [0, 1/(cin·cout)); layer norm (1, 0); positions ±0.02";

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ArchitectureSpec,
    seed: u64,
    init: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optimizer: Option<serde_json::Value>,
    parameters: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the payload.
    offset: usize,
}

/// A model plus the optimizer settings it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub optimizer: Option<serde_json::Value>,
}

impl Checkpoint {
    pub fn new(model: Model<f32>, optimizer: Option<serde_json::Value>) -> Self {
        Self { model, optimizer }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0;
        let parameters = self
            .model
            .parameters()
            .iter()
            .map(|p| {
                let e = Entry {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    offset,
                };
                offset += 4 * p.numel();
                e
            })
            .collect();
        let header = Header {
            spec: self.model.spec().clone(),
            seed: self.model.seed(),
            init: INIT_SCHEME.to_string(),
            optimizer: self.optimizer.clone(),
            parameters,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(CKPT_MAGIC.len() + 4 + json.len() + offset);
        out.extend_from_slice(CKPT_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for p in self.model.parameters() {
            for v in p.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let m = CKPT_MAGIC.len();
        if bytes.len() < m || &bytes[..m] != CKPT_MAGIC {
            return Err(Error::BadMagic {
                path: origin.to_string(),
                expected: "CKPT1",
            });
        }
        let truncated = |expected| Error::Truncated {
            path: origin.to_string(),
            expected,
            found: bytes.len(),
        };
        let len_bytes = bytes.get(m..m + 4).ok_or_else(|| truncated(m + 4))?;
        let hlen = u32::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
        let start = m + 4 + hlen;
        let json = bytes.get(m + 4..start).ok_or_else(|| truncated(start))?;
        let header: Header = serde_json::from_slice(json)?;
        let payload = &bytes[start..];
        let mut tensors = Vec::with_capacity(header.parameters.len());
        let mut expected = 0;
        for e in header.parameters {
            let n: usize = e.shape.iter().product();
            let raw = payload
                .get(e.offset..e.offset + 4 * n)
                .ok_or_else(|| truncated(start + e.offset + 4 * n))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            expected = expected.max(e.offset + 4 * n);
            tensors.push((e.name, Tensor::new(e.shape, data)?));
        }
        if payload.len() != expected {
            return Err(truncated(start + expected));
        }
        let model = Model::from_parameters(&header.spec, header.seed, tensors)?;
        Ok(Self {
            model,
            optimizer: header.optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}
