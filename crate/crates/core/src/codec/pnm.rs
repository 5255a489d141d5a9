//! Binary netpbm images: P6 (RGB) and P5 (grayscale), maxval 255 only.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Image;

/// `round(clamp(v, 0, 1) * 255)`, ties away from zero.
pub fn quantize(v: f32) -> u8 {
    (f64::from(v).clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn dequantize(b: u8) -> f32 {
    (f64::from(b) / 255.0) as f32
}

pub fn encode(img: &Image) -> Result<Vec<u8>> {
    let (magic, h, w) = match img.shape() {
        [3, h, w] => ("P6", *h, *w),
        [1, h, w] => ("P5", *h, *w),
        s => {
            return Err(Error::InvalidShape {
                shape: s.to_vec(),
                reason: "netpbm needs a 3×H×W or 1×H×W image".into(),
            })
        }
    };
    let channels = img.shape()[0];
    let plane = h * w;
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.reserve(channels * plane);
    let data = img.data();
    for p in 0..plane {
        for c in 0..channels {
            out.push(quantize(data[c * plane + p]));
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    let channels = match magic.as_str() {
        "P6" => 3,
        "P5" => 1,
        other => return Err(Error::PnmHeader(format!("unsupported magic {other:?}"))),
    };
    let w = parse_dim(bytes, &mut pos, "width")?;
    let h = parse_dim(bytes, &mut pos, "height")?;
    let maxval = parse_dim(bytes, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::PnmMaxval(maxval as u32));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::PnmHeader("missing whitespace after maxval".into())),
    }
    let plane = w * h;
    let expected = plane * channels;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(Error::PnmShortData { expected, found: raster.len() });
    }
    let mut data = vec![0.0f32; expected];
    for p in 0..plane {
        for c in 0..channels {
            data[c * plane + p] = dequantize(raster[p * channels + c]);
        }
    }
    Image::from_vec(vec![channels, h, w], data)
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if bytes.get(*pos) == Some(&b'#') {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::PnmHeader("unexpected end of header".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_dim(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = next_token(bytes, pos)?;
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::PnmHeader(format!("bad {what} {tok:?}"))),
    }
}

pub fn write(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(img)?).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
