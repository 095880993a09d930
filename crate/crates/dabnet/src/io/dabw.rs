//! `.dabw` weight files.

use std::path::Path;

use dabnet_core::net::{NetworkSpec, WeightStore};
use dabnet_core::{Shape, Tensor};

use super::cursor::{put_f32s, Cursor};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DABW";
pub const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

/// Dims as stored on disk: trailing unit axes dropped, at least one kept.
/// Vectors held as `(len, 1, 1, 1)` are therefore written with ndim 1.
fn stored_dims(shape: Shape) -> Vec<u32> {
    let mut dims: Vec<usize> = shape.dims().to_vec();
    while dims.len() > 1 && dims.last() == Some(&1) {
        dims.pop();
    }
    dims.into_iter().map(|d| d as u32).collect()
}

pub fn encode_weights(store: &WeightStore) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(store.len()).map_err(|_| Error::Format("too many records".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, tensor) in store.iter() {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("name '{name}' exceeds 65535 bytes")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(DTYPE_F32);
        let dims = stored_dims(tensor.shape());
        out.push(dims.len() as u8);
        for d in dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        put_f32s(&mut out, tensor.data());
    }
    Ok(out)
}

pub fn decode_weights(bytes: &[u8]) -> Result<WeightStore> {
    let mut cur = Cursor::new(bytes);
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, expected \"DABW\"".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let count = cur.u32()?;
    let mut store = WeightStore::new();
    for _ in 0..count {
        let at = cur.offset();
        let len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Format(format!("record at offset {at} has a non-UTF-8 name")))?
            .to_owned();
        let dtype = cur.u8()?;
        if dtype != DTYPE_F32 {
            return Err(Error::Format(format!("record '{name}' has dtype {dtype}; only 0 (f32) is defined")));
        }
        let ndim = cur.u8()? as usize;
        if !(1..=4).contains(&ndim) {
            return Err(Error::Format(format!("record '{name}' has {ndim} dims; expected 1 to 4")));
        }
        let mut dims = [1usize; 4];
        for d in dims.iter_mut().take(ndim) {
            *d = cur.u32()? as usize;
        }
        let shape = Shape::from_dims(dims);
        let elements = shape
            .checked_len()
            .ok_or_else(|| Error::Format(format!("record '{name}' dims overflow")))?;
        let tensor = Tensor::from_vec(shape, cur.f32s(elements)?)?;
        if store.insert(name.clone(), tensor).is_some() {
            return Err(Error::Format(format!("duplicate record '{name}'")));
        }
    }
    if cur.remaining() != 0 {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last record",
            cur.remaining()
        )));
    }
    Ok(store)
}

pub fn save_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), &encode_weights(store)?)
}

/// Loads a store, checking completeness against `spec` when given.
pub fn load_weights(path: impl AsRef<Path>, spec: Option<&NetworkSpec>) -> Result<WeightStore> {
    let store = decode_weights(&super::read_file(path.as_ref())?)?;
    if let Some(spec) = spec {
        store.validate(spec)?;
    }
    Ok(store)
}
