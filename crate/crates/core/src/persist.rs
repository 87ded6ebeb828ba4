//! Model checkpoints: a small, documented binary layout.
//!
//! ```text
//! magic      8 bytes  "DUALCKPT"
//! version    u32
//! config_len u32, then config_len bytes of UTF-8 `key = value` lines
//! n_blocks   u32
//! per block: name_len u32, name bytes, rows u32, cols u32, rows*cols f64
//! ```
//!
//! Integers and floats are little-endian. Nothing may follow the last block.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::train::{build_network, Network, NetworkConfig};

pub const MAGIC: &[u8; 8] = b"DUALCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    /// Named parameter blocks in network order.
    pub blocks: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_network(network: &Network) -> Self {
        Self {
            config: network.config().clone(),
            blocks: network
                .named_params()
                .into_iter()
                .map(|(n, p)| (n, p.value))
                .collect(),
        }
    }

    /// Rebuilds the network, checking every block against the shapes the
    /// stored config implies.
    pub fn to_network(&self) -> Result<Network> {
        let mut net = build_network(&self.config)?;
        let mut params = net.named_params_mut();
        if params.len() != self.blocks.len() {
            return Err(Error::Corruption(format!(
                "config implies {} parameter blocks, file has {}",
                params.len(),
                self.blocks.len()
            )));
        }
        for ((name, p), (bname, value)) in params.iter_mut().zip(&self.blocks) {
            if name != bname || p.value.shape() != value.shape() {
                return Err(Error::Corruption(format!(
                    "block '{bname}' {:?} does not match expected '{name}' {:?}",
                    value.shape(),
                    p.value.shape()
                )));
            }
            p.value = value.clone();
        }
        drop(params);
        Ok(net)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let cfg = self.config.to_text();
        put_u32(&mut out, cfg.len());
        out.extend_from_slice(cfg.as_bytes());
        put_u32(&mut out, self.blocks.len());
        for (name, t) in &self.blocks {
            put_u32(&mut out, name.len());
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, t.rows());
            put_u32(&mut out, t.cols());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8, "magic")? != MAGIC {
            return Err(Error::Corruption("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let len = r.u32("config length")? as usize;
        let text = std::str::from_utf8(r.take(len, "config")?)
            .map_err(|_| Error::Corruption("config is not UTF-8".into()))?;
        let config = NetworkConfig::from_text(text)
            .map_err(|e| Error::Corruption(format!("config: {e}")))?;
        let n = r.u32("block count")? as usize;
        let mut blocks = Vec::new();
        for i in 0..n {
            let len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "block name")?)
                .map_err(|_| Error::Corruption(format!("block {i} name is not UTF-8")))?
                .to_string();
            let rows = r.u32("rows")? as usize;
            let cols = r.u32("cols")? as usize;
            let count = rows
                .checked_mul(cols)
                .and_then(|c| c.checked_mul(8))
                .ok_or_else(|| Error::Corruption(format!("block '{name}' size overflows")))?;
            let raw = r.take(count, "block data")?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            blocks.push((name, Tensor::from_vec(rows, cols, data)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::Corruption(format!(
                "{} trailing bytes after the last block",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { config, blocks })
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("checkpoint field exceeds u32");
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Corruption(format!(
                    "truncated at byte {} while reading {what} ({n} bytes wanted)",
                    self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn save_checkpoint(network: &Network, path: &Path) -> Result<()> {
    fs::write(path, Checkpoint::from_network(network).to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

/// Loads a checkpoint straight into a network.
pub fn load_network(path: &Path) -> Result<Network> {
    load_checkpoint(path)?.to_network()
}
