//! Binary netpbm codecs: `P6` colour images and `P5` label maps.
//!
//! Headers follow the netpbm grammar: magic, then width, height and maxval
//! as ASCII decimals separated by whitespace, `#` comments running to the
//! end of a line, and exactly one whitespace byte before the raster.

use std::path::Path;

use dabnet_core::metrics::LabelMap;
use dabnet_core::Tensor;

use super::image_shape;
use crate::{Error, Result};

struct Header {
    width: usize,
    height: usize,
    raster: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::Truncated { offset: 0, needed: 2 - bytes.len() });
    }
    let found = &bytes[..2];
    if found != magic {
        return match found {
            b"P1" | b"P2" | b"P3" | b"P4" | b"P5" | b"P6" | b"P7" => Err(Error::Unsupported(format!(
                "netpbm variant {}; expected {}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(magic)
            ))),
            _ => Err(Error::Format(format!("bad magic, expected {}", String::from_utf8_lossy(magic)))),
        };
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments before each token
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n' && b != b'\r') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::Truncated { offset: pos, needed: 1 }),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format(format!("expected a decimal header field at offset {start}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text
            .parse()
            .map_err(|_| Error::Format(format!("header field '{text}' out of range")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(Error::Format(format!("expected whitespace after maxval at offset {pos}"))),
        None => return Err(Error::Truncated { offset: pos, needed: 1 }),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Unsupported(format!("maxval {maxval}; only 255 is supported")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("empty image {width}x{height}")));
    }
    Ok(Header { width, height, raster: pos })
}

fn raster<'a>(bytes: &'a [u8], header: &Header, channels: usize) -> Result<&'a [u8]> {
    let len = header
        .width
        .checked_mul(header.height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let body = &bytes[header.raster..];
    if body.len() < len {
        return Err(Error::Truncated {
            offset: bytes.len(),
            needed: len - body.len(),
        });
    }
    if body.len() > len {
        return Err(Error::Format(format!("{} trailing bytes after the raster", body.len() - len)));
    }
    Ok(body)
}

/// Decodes a `P6` image to a `(1, 3, h, w)` tensor scaled to `[0, 1]`.
pub fn decode_image_ppm(bytes: &[u8]) -> Result<Tensor> {
    let header = parse_header(bytes, b"P6")?;
    let body = raster(bytes, &header, 3)?;
    let (h, w) = (header.height, header.width);
    let mut out = Tensor::new(image_shape(h, w))?;
    let plane = h * w;
    let data = out.data_mut();
    for (i, px) in body.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = f32::from(px[c]) / 255.0;
        }
    }
    Ok(out)
}

/// Encodes the first image of an `(n, 3, h, w)` tensor, clamping to `[0, 1]`
/// and rounding to the nearest level.
pub fn encode_image_ppm(image: &Tensor) -> Result<Vec<u8>> {
    let s = image.shape();
    if s.c != 3 || s.n == 0 {
        return Err(dabnet_core::Error::Shape(format!("expected an RGB image, got {s}")).into());
    }
    let mut out = format!("P6\n{} {}\n255\n", s.w, s.h).into_bytes();
    let plane = s.plane();
    let data = image.data();
    out.reserve(plane * 3);
    for i in 0..plane {
        for c in 0..3 {
            let v = data[c * plane + i].clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn decode_labels_pgm(bytes: &[u8]) -> Result<LabelMap> {
    let header = parse_header(bytes, b"P5")?;
    let body = raster(bytes, &header, 1)?;
    Ok(LabelMap::from_vec(1, header.height, header.width, body.to_vec())?)
}

pub fn encode_labels_pgm(labels: &LabelMap) -> Result<Vec<u8>> {
    let (n, h, w) = labels.dims();
    if n != 1 {
        return Err(Error::Unsupported(format!("a PGM holds one label map, got a batch of {n}")));
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(labels.data());
    Ok(out)
}

pub fn load_image_ppm(path: impl AsRef<Path>) -> Result<Tensor> {
    decode_image_ppm(&super::read_file(path.as_ref())?)
}

pub fn save_image_ppm(image: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), &encode_image_ppm(image)?)
}

pub fn load_labels_pgm(path: impl AsRef<Path>) -> Result<LabelMap> {
    decode_labels_pgm(&super::read_file(path.as_ref())?)
}

pub fn save_labels_pgm(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), &encode_labels_pgm(labels)?)
}
