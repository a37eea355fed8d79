//! Binary checkpoint container.
//!
//! ```text
//! "SNIM" | u32 version | u32 n | n bytes of UTF-8 JSON metadata
//! then until EOF, per tensor:
//!   u32 name_len | name | u32 rank | rank × u64 dims | prod(dims) × f64
//! ```
//!
//! All integers and floats are little-endian. Tensor order is preserved.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{NnError, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SNIM";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_NAME_LEN: usize = 1 << 12;
const MAX_RANK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub metadata: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new(metadata: serde_json::Value) -> Self {
        Checkpoint { metadata, tensors: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NnError> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| NnError::MissingTensor(name.to_string()))
    }

    /// Removes and returns the named tensor.
    pub fn take(&mut self, name: &str) -> Result<Tensor, NnError> {
        let pos = self
            .tensors
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| NnError::MissingTensor(name.to_string()))?;
        Ok(self.tensors.remove(pos).1)
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>, NnError> {
    let meta = serde_json::to_vec(&ckpt.metadata)?;
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    for (name, t) in &ckpt.tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], NnError> {
        if self.buf.len() - self.pos < n {
            return Err(NnError::CorruptTensor {
                offset: self.pos,
                reason: format!("truncated {what}: need {n} bytes, {} left", self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn corrupt(&self, reason: impl Into<String>) -> NnError {
        NnError::CorruptTensor { offset: self.pos, reason: reason.into() }
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, NnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
    if magic != CHECKPOINT_MAGIC {
        return Err(NnError::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    let meta_len = r.u32("metadata length")? as usize;
    let metadata = serde_json::from_slice(r.take(meta_len, "metadata")?)?;
    let mut tensors: Vec<(String, Tensor)> = Vec::new();
    while r.pos < bytes.len() {
        let name_len = r.u32("tensor name length")? as usize;
        if name_len > MAX_NAME_LEN {
            return Err(r.corrupt(format!("tensor name length {name_len}")));
        }
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| r.corrupt("tensor name is not UTF-8"))?
            .to_string();
        if tensors.iter().any(|(n, _)| *n == name) {
            return Err(r.corrupt(format!("duplicate tensor {name:?}")));
        }
        let rank = r.u32("tensor rank")? as usize;
        if rank > MAX_RANK {
            return Err(r.corrupt(format!("tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut count: usize = 1;
        for _ in 0..rank {
            let d = usize::try_from(r.u64("tensor dimension")?).map_err(|_| r.corrupt("dimension overflow"))?;
            count = count.checked_mul(d).ok_or_else(|| r.corrupt("element count overflow"))?;
            shape.push(d);
        }
        let nbytes = count.checked_mul(8).ok_or_else(|| r.corrupt("element count overflow"))?;
        let raw = r.take(nbytes, "tensor data")?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        tensors.push((name, Tensor::from_vec(&shape, data)?));
    }
    Ok(Checkpoint { metadata, tensors })
}

/// Writes to a temporary sibling and renames, so a crash never leaves a
/// half-written checkpoint under the final name.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), NnError> {
    let bytes = encode_checkpoint(ckpt)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    decode_checkpoint(&fs::read(path)?)
}
