//! Named-tensor binary container used for model checkpoints.
//!
//! Layout (little-endian): `GADT` magic, `u32` version 1, `u64` metadata
//! length and that many bytes of UTF-8 JSON, `u64` tensor count, then per
//! tensor a `u32` name length, the name, `u64` rows, `u64` cols and the
//! row-major `f64` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::tensor::Tensor;
use crate::error::{GadError, Result};

pub const CONTAINER_MAGIC: &[u8; 4] = b"GADT";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorContainer {
    pub metadata: String,
    pub tensors: Vec<(String, Tensor)>,
}

fn corrupt(msg: impl Into<String>) -> GadError {
    GadError::Serde(msg.into())
}

impl TensorContainer {
    pub fn new(metadata: impl Into<String>) -> Self {
        Self {
            metadata: metadata.into(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| corrupt(format!("missing tensor {name}")))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CONTAINER_MAGIC)?;
        w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
        w.write_all(&(self.metadata.len() as u64).to_le_bytes())?;
        w.write_all(self.metadata.as_bytes())?;
        w.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.rows() as u64).to_le_bytes())?;
            w.write_all(&(t.cols() as u64).to_le_bytes())?;
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CONTAINER_MAGIC {
            return Err(corrupt("bad container magic"));
        }
        let version = read_u32(r)?;
        if version != CONTAINER_VERSION {
            return Err(corrupt(format!("unsupported container version {version}")));
        }
        let meta_len = read_len(r)?;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta)?;
        let metadata = String::from_utf8(meta).map_err(|e| corrupt(e.to_string()))?;
        let count = read_len(r)?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name_len = read_u32(r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| corrupt(e.to_string()))?;
            let rows = read_len(r)?;
            let cols = read_len(r)?;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| corrupt("tensor too large"))?;
            let mut data = Vec::with_capacity(n.min(1 << 24));
            let mut buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            tensors.push((name, Tensor::new(rows, cols, data)?));
        }
        Ok(Self { metadata, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| corrupt("length overflow"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut c = TensorContainer::new(r#"{"kind":"test"}"#);
        c.push("w", Tensor::new(2, 3, vec![1.0, -0.0, 1e-300, f64::MAX, 0.1, -7.25]).unwrap());
        c.push("b", Tensor::zeros(1, 3));
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let back = TensorContainer::read_from(&mut &buf[..]).unwrap();
        assert_eq!(back.metadata, c.metadata);
        for ((n1, t1), (n2, t2)) in back.tensors.iter().zip(&c.tensors) {
            assert_eq!(n1, n2);
            let bits1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
            let bits2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits1, bits2);
        }
    }

    #[test]
    fn rejects_wrong_magic() {
        let mut buf = b"GADK".to_vec();
        buf.extend_from_slice(&1u32.to_le_bytes());
        assert!(TensorContainer::read_from(&mut &buf[..]).is_err());
    }
}
