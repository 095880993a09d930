//! `.tns` raw tensor dumps.

use std::path::Path;

use dabnet_core::{Shape, Tensor};

use super::cursor::{put_f32s, Cursor};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TNS1";

pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + 4 * t.len());
    out.extend_from_slice(MAGIC);
    for d in t.shape().dims() {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    put_f32s(&mut out, t.data());
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let mut cur = Cursor::new(bytes);
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, expected \"TNS1\"".into()));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = cur.u32()? as usize;
    }
    let shape = Shape::from_dims(dims);
    let len = shape
        .checked_len()
        .ok_or_else(|| Error::Format(format!("tensor {shape} is too large")))?;
    let data = cur.f32s(len)?;
    if cur.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes", cur.remaining())));
    }
    Ok(Tensor::from_vec(shape, data)?)
}

pub fn save_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), &encode_tensor(t)?)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    decode_tensor(&super::read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let t = Tensor::from_vec(Shape::new(1, 2, 1, 1), vec![1.0, -2.0]).unwrap();
        let bytes = encode_tensor(&t).unwrap();
        assert_eq!(&bytes[..4], b"TNS1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 28);
        assert_eq!(decode_tensor(&bytes).unwrap(), t);
        assert!(matches!(decode_tensor(&bytes[..26]), Err(Error::Truncated { offset: 20, needed: 2 })));
    }
}
