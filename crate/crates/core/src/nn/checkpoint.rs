//! Binary parameter checkpoints.
//!
//! Layout (little-endian): magic `HLSE`, `u32` version, then a sequence of
//! blocks until end of file. Each block is `u32` name length, UTF-8 name,
//! `u32` rank, `rank × u64` dims, then `product(dims) × f64` payload.
//!
//! An [`Mlp`] named `m` is stored as `m.arch` (`[hidden, output]` activation
//! codes) followed by `m.w{i}` and `m.b{i}` for each layer.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Activation, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HLSE";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub blocks: Vec<ParamBlock>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.blocks.push(ParamBlock { name: name.into(), shape, data });
    }

    pub fn push_vector(&mut self, name: impl Into<String>, data: &[f64]) {
        self.push(name, vec![data.len()], data.to_vec());
    }

    pub fn block(&self, name: &str) -> Result<&ParamBlock> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("missing block `{name}`")))
    }

    pub fn vector(&self, name: &str) -> Result<Vec<f64>> {
        let b = self.block(name)?;
        if b.shape.len() != 1 {
            return Err(Error::CorruptCheckpoint(format!("block `{name}` is not rank 1")));
        }
        Ok(b.data.clone())
    }

    pub fn push_mlp(&mut self, name: &str, mlp: &Mlp) {
        self.push_vector(format!("{name}.arch"), &[mlp.hidden_activation().code(), mlp.output_activation().code()]);
        for (i, (w, b)) in mlp.weights().iter().zip(mlp.biases()).enumerate() {
            self.push(format!("{name}.w{i}"), vec![w.nrows(), w.ncols()], w.iter().copied().collect());
            self.push(format!("{name}.b{i}"), vec![b.len()], b.to_vec());
        }
    }

    pub fn mlp(&self, name: &str) -> Result<Mlp> {
        let arch = self.vector(&format!("{name}.arch"))?;
        let (hidden, output) = match arch.as_slice() {
            [h, o] => (Activation::from_code(*h), Activation::from_code(*o)),
            _ => (None, None),
        };
        let (Some(hidden), Some(output)) = (hidden, output) else {
            return Err(Error::CorruptCheckpoint(format!("bad architecture block for `{name}`")));
        };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for i in 0.. {
            let Ok(w) = self.block(&format!("{name}.w{i}")) else { break };
            let b = self.block(&format!("{name}.b{i}"))?;
            if w.shape.len() != 2 || b.shape.len() != 1 {
                return Err(Error::CorruptCheckpoint(format!("bad layer {i} of `{name}`")));
            }
            let w = Array2::from_shape_vec((w.shape[0], w.shape[1]), w.data.clone())
                .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
            weights.push(w);
            biases.push(Array1::from(b.data.clone()));
        }
        Mlp::from_parts(weights, biases, hidden, output).map_err(|e| Error::CorruptCheckpoint(format!("`{name}`: {e}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for block in &self.blocks {
            out.extend_from_slice(&(block.name.len() as u32).to_le_bytes());
            out.extend_from_slice(block.name.as_bytes());
            out.extend_from_slice(&(block.shape.len() as u32).to_le_bytes());
            for &d in &block.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in &block.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        let mut blocks = Vec::new();
        while r.pos < bytes.len() {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::CorruptCheckpoint("block name is not UTF-8".into()))?
                .to_owned();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let count = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::CorruptCheckpoint(format!("block `{name}` too large")))?;
            let payload = r.take(
                count.checked_mul(8).ok_or_else(|| Error::CorruptCheckpoint(format!("block `{name}` too large")))?,
            )?;
            let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            blocks.push(ParamBlock { name, shape, data });
        }
        Ok(Checkpoint { blocks })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptCheckpoint(format!("truncated payload at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Saves a set of named networks to one file.
pub fn save_checkpoint(path: &Path, models: &[(&str, &Mlp)]) -> Result<()> {
    let mut ckpt = Checkpoint::new();
    for (name, mlp) in models {
        ckpt.push_mlp(name, mlp);
    }
    ckpt.save(path)
}

/// Loads the named networks; fails without returning a partial set.
pub fn load_checkpoint(path: &Path, names: &[&str]) -> Result<Vec<Mlp>> {
    let ckpt = Checkpoint::load(path)?;
    names.iter().map(|n| ckpt.mlp(n)).collect()
}
