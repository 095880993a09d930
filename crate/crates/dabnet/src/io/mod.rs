//! On-disk formats. All integers are little-endian.
//!
//! | format | layout |
//! |--------|--------|
//! | `.dabw` | `"DABW"`, u32 version (1), u32 record count, then per record: u16 name length, UTF-8 name, u8 dtype (0 = f32), u8 ndim, ndim × u32 dims, f32 payload |
//! | `.tns`  | `"TNS1"`, 4 × u32 dims (n, c, h, w), f32 payload in NCHW order |
//! | PPM     | binary `P6`, maxval 255, interleaved RGB |
//! | PGM     | binary `P5`, maxval 255, one class byte per pixel (255 = ignore) |

mod cursor;
pub mod dabw;
pub mod netpbm;
pub mod tns;

use std::path::Path;

pub use dabw::{decode_weights, encode_weights, load_weights, save_weights};
pub use netpbm::{load_image_ppm, load_labels_pgm, save_image_ppm, save_labels_pgm};
pub use tns::{decode_tensor, encode_tensor, load_tensor, save_tensor};

use crate::{Error, Result};
use dabnet_core::{Shape, Tensor};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Subtracts per-channel means (on the `[0, 1]` scale) from an
/// `(n, 3, h, w)` image.
pub fn preprocess(image: &Tensor, means: [f32; 3]) -> Result<Tensor> {
    let s = image.shape();
    if s.c != 3 {
        return Err(dabnet_core::Error::Shape(format!("expected an RGB image, got {s}")).into());
    }
    let mut out = image.clone();
    let plane = s.plane();
    for (i, chunk) in out.data_mut().chunks_mut(plane.max(1)).enumerate() {
        let m = means[i % 3];
        chunk.iter_mut().for_each(|v| *v -= m);
    }
    Ok(out)
}

/// Shape of an RGB image tensor.
pub fn image_shape(h: usize, w: usize) -> Shape {
    Shape::new(1, 3, h, w)
}
