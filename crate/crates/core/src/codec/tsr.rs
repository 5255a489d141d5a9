//! TSR binary tensor files.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size      | content                                  |
//! |--------|-----------|------------------------------------------|
//! | 0      | 4         | magic `TSR1`                             |
//! | 4      | 1         | dtype code (0 = f32, 1 = f64)            |
//! | 5      | 1         | ndim                                     |
//! | 6      | 10        | zero padding                             |
//! | 16     | 8·ndim    | dims as u64                              |
//! | …      | size·len  | values, row-major                        |

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

pub const MAGIC: &[u8; 4] = b"TSR1";
pub const HEADER_LEN: usize = 16;

pub fn encode<T: Element>(t: &Tensor<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.ndim() + T::SIZE * t.len());
    out.extend_from_slice(MAGIC);
    out.push(T::DTYPE);
    out.push(u8::try_from(t.ndim()).expect("ndim fits in a byte"));
    out.resize(HEADER_LEN, 0);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(&mut out);
    }
    out
}

/// Reads the dtype code of an encoded tensor without decoding the payload.
pub fn peek_dtype(bytes: &[u8]) -> Result<u8> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic { found: bytes[..4].try_into().unwrap() });
    }
    match bytes[4] {
        code @ (0 | 1) => Ok(code),
        code => Err(Error::BadDtype(code)),
    }
}

pub fn decode<T: Element>(bytes: &[u8]) -> Result<Tensor<T>> {
    let code = peek_dtype(bytes)?;
    if code != T::DTYPE {
        return Err(Error::DtypeMismatch { expected: T::DTYPE, found: code });
    }
    let ndim = bytes[5] as usize;
    let dims_end = HEADER_LEN + 8 * ndim;
    if bytes.len() < dims_end {
        return Err(Error::Truncated { expected: dims_end, found: bytes.len() });
    }
    let shape: Vec<usize> = bytes[HEADER_LEN..dims_end]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidShape { shape: shape.clone(), reason: "element count overflows".into() })?;
    let expected = dims_end + len * T::SIZE;
    if bytes.len() < expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes(bytes.len() - expected));
    }
    let data: Vec<T> = bytes[dims_end..].chunks_exact(T::SIZE).map(T::read_le).collect();
    let t = Tensor::from_vec(shape, data)?;
    if let Some(index) = t.first_non_finite() {
        return Err(Error::NonFinite { index });
    }
    Ok(t)
}

pub fn write<T: Element>(t: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(t)).map_err(|e| Error::io(path, e))
}

pub fn read<T: Element>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
