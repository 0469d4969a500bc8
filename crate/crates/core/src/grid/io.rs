use std::fs;
use std::path::Path;

use super::GridTensor;
use crate::error::{Error, Result};

pub const GRD1_MAGIC: &[u8; 4] = b"GRD1";

/// `GRD1` | rank: u32 LE | dims: u32 LE × rank | f32 LE payload (row-major).
pub fn encode_grd1(t: &GridTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(GRD1_MAGIC);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grd1(bytes: &[u8], origin: &str) -> Result<GridTensor> {
    let truncated = |expected: usize| Error::Truncated {
        path: origin.to_string(),
        expected,
        found: bytes.len(),
    };
    if bytes.len() < 4 || &bytes[..4] != GRD1_MAGIC {
        return Err(Error::BadMagic {
            path: origin.to_string(),
            expected: "GRD1",
        });
    }
    let u32_at = |off: usize| -> Result<usize> {
        let b = bytes.get(off..off + 4).ok_or_else(|| truncated(off + 4))?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    };
    let rank = u32_at(4)?;
    if rank == 0 || rank > 8 {
        return Err(Error::shape(format!("{origin}: unsupported GRD1 rank {rank}")));
    }
    let shape = (0..rank).map(|i| u32_at(8 + 4 * i)).collect::<Result<Vec<_>>>()?;
    let header = 8 + 4 * rank;
    let n: usize = shape.iter().product();
    let expected = header + 4 * n;
    if bytes.len() != expected {
        return Err(truncated(expected));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridTensor::new(shape, data)
}

pub fn write_grd1(path: &Path, t: &GridTensor) -> Result<()> {
    fs::write(path, encode_grd1(t))?;
    Ok(())
}

pub fn read_grd1(path: &Path) -> Result<GridTensor> {
    let bytes = fs::read(path)?;
    decode_grd1(&bytes, &path.display().to_string())
}
