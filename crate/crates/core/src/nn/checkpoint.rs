//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"DFCK"                      magic
//! u32                          format version (1)
//! u32 + bytes                  JSON header: network config, dtype, Adam step
//!                              count, optimizer flag, free-form metadata
//! u32                          array count
//! per array:
//!   u32 + bytes                name (UTF-8)
//!   u8                         dtype (1 = f32, 2 = f64)
//!   u32 + u64 * ndim           shape
//!   values                     little-endian, row-major
//! [u8; 32]                     SHA-256 of every preceding byte
//! ```
//!
//! Parameter arrays come first in store order. When the optimizer flag is
//! set they are followed by `adam.m.<name>` and `adam.v.<name>` arrays.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NetworkConfig, NnError, ParamStore, PolicyNet, Scalar};

pub const MAGIC: &[u8; 4] = b"DFCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub network: NetworkConfig,
    pub dtype: String,
    pub adam_steps: u64,
    pub optimizer: bool,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

fn err(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_array<T: Scalar>(out: &mut Vec<u8>, name: &str, shape: &[usize], values: &[T]) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    out.push(T::DTYPE);
    put_u32(out, shape.len() as u32);
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in values {
        v.write_le(out);
    }
}

pub fn to_bytes<T: Scalar>(
    net: &PolicyNet<T>,
    metadata: &BTreeMap<String, String>,
    with_optimizer: bool,
) -> Vec<u8> {
    let header = CheckpointHeader {
        network: net.config.clone(),
        dtype: if T::DTYPE == 1 { "f32".into() } else { "f64".into() },
        adam_steps: net.store.adam_steps,
        optimizer: with_optimizer,
        metadata: metadata.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, json.len() as u32);
    out.extend_from_slice(&json);
    let s = &net.store;
    let n = s.len() * if with_optimizer { 3 } else { 1 };
    put_u32(&mut out, n as u32);
    for id in s.ids() {
        put_array(&mut out, s.name(id), s.shape(id), s.value(id));
    }
    if with_optimizer {
        for id in s.ids() {
            put_array(&mut out, &format!("adam.m.{}", s.name(id)), s.shape(id), s.moments(id).0);
        }
        for id in s.ids() {
            put_array(&mut out, &format!("adam.v.{}", s.name(id)), s.shape(id), s.moments(id).1);
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.buf.len() {
            return Err(err("truncated file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

struct RawArray {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

fn read_array(r: &mut Reader) -> Result<RawArray, NnError> {
    let len = r.u32()? as usize;
    let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| err("array name is not UTF-8"))?;
    let dtype = r.take(1)?[0];
    let ndim = r.u32()? as usize;
    let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    let n: usize = shape.iter().product();
    let values = match dtype {
        1 => r.take(n * 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4")) as f64).collect(),
        2 => r.take(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8"))).collect(),
        d => return Err(err(format!("unknown dtype tag {d}"))),
    };
    Ok(RawArray { name, shape, values })
}

/// Parses a checkpoint, converting values to `T` when the stored dtype
/// differs.
pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<(PolicyNet<T>, CheckpointHeader), NnError> {
    if bytes.len() < 4 + 32 || &bytes[..4] != MAGIC {
        return Err(err("not a checkpoint file"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(err("checksum mismatch"));
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(err(format!("unsupported format version {version}")));
    }
    let hlen = r.u32()? as usize;
    let header: CheckpointHeader = serde_json::from_slice(r.take(hlen)?).map_err(|e| err(e.to_string()))?;
    let count = r.u32()? as usize;
    let arrays = (0..count).map(|_| read_array(&mut r)).collect::<Result<Vec<_>, _>>()?;
    if r.pos != body.len() {
        return Err(err("trailing bytes"));
    }
    let mut net = PolicyNet::<T>::new(header.network.clone())?;
    let n = net.store.len();
    let expected = if header.optimizer { 3 * n } else { n };
    if arrays.len() != expected {
        return Err(err(format!("expected {expected} arrays, found {}", arrays.len())));
    }
    let mut store = ParamStore::<T>::new();
    for a in &arrays[..n] {
        store.add(&a.name, a.shape.clone(), a.values.iter().map(|&v| T::from_f64(v)).collect())?;
    }
    store.adam_steps = header.adam_steps;
    if header.optimizer {
        for (k, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let (m, v) = (&arrays[n + k], &arrays[2 * n + k]);
            let name = store.name(id).to_string();
            if m.name != format!("adam.m.{name}") || v.name != format!("adam.v.{name}") {
                return Err(err(format!("optimizer arrays out of order at {name}")));
            }
            let (dm, dv) = store.moments_mut(id);
            if m.values.len() != dm.len() || v.values.len() != dv.len() {
                return Err(err(format!("optimizer shape mismatch at {name}")));
            }
            dm.iter_mut().zip(&m.values).for_each(|(d, &s)| *d = T::from_f64(s));
            dv.iter_mut().zip(&v.values).for_each(|(d, &s)| *d = T::from_f64(s));
        }
    }
    net = PolicyNet::from_store(header.network.clone(), store)?;
    Ok((net, header))
}

pub fn save<T: Scalar>(
    net: &PolicyNet<T>,
    metadata: &BTreeMap<String, String>,
    with_optimizer: bool,
    path: &Path,
) -> Result<(), NnError> {
    std::fs::write(path, to_bytes(net, metadata, with_optimizer))
        .map_err(|e| err(format!("{}: {e}", path.display())))
}

pub fn load<T: Scalar>(path: &Path) -> Result<(PolicyNet<T>, CheckpointHeader), NnError> {
    let bytes = std::fs::read(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::AdamConfig;

    #[test]
    fn round_trip_with_optimizer_state() {
        let mut net = PolicyNet::<f32>::new(NetworkConfig::escape([30, 29]).with_seed(3)).unwrap();
        let out = net.forward_actor(0, &[0.1; 28], None).unwrap();
        let d: Vec<Vec<f32>> = out.logits.iter().map(|h| vec![0.5; h.len()]).collect();
        net.backward_actor(&out.trace, &d, None).unwrap();
        net.store.adam_step(1e-3, &AdamConfig::default());
        let meta = BTreeMap::from([("level".to_string(), "L3".to_string())]);
        let bytes = to_bytes(&net, &meta, true);
        let (back, header) = from_bytes::<f32>(&bytes).unwrap();
        assert_eq!(back.store.checksum(), net.store.checksum());
        assert_eq!(back.store.adam_steps, 1);
        assert_eq!(header.metadata, meta);
        for id in net.store.ids() {
            assert_eq!(back.store.moments(id), net.store.moments(id));
        }
    }

    #[test]
    fn corruption_is_detected() {
        let net = PolicyNet::<f32>::new(NetworkConfig::commander(2, 3, 40)).unwrap();
        let mut bytes = to_bytes(&net, &BTreeMap::new(), false);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(from_bytes::<f32>(&bytes).is_err());
        assert!(from_bytes::<f32>(b"nope").is_err());
    }

    #[test]
    fn loads_into_wider_float() {
        let net = PolicyNet::<f32>::new(NetworkConfig::fight([40, 38])).unwrap();
        let (wide, _) = from_bytes::<f64>(&to_bytes(&net, &BTreeMap::new(), false)).unwrap();
        let x = vec![0.25; 27];
        let a = net.forward_actor(0, &x.iter().map(|&v| v as f32).collect::<Vec<_>>(), None).unwrap();
        let b = wide.forward_actor(0, &x, None).unwrap();
        assert!((a.logits[0][0] as f64 - b.logits[0][0]).abs() < 1e-5);
    }
}
