//! Binary greymap (`P5`) images with 8-bit samples.

use std::fs;
use std::path::Path;

use crate::tensor::{Float, Tensor};
use crate::{Error, Result};

fn parse_err(offset: usize, detail: impl Into<String>) -> Error {
    Error::Parse { offset: offset as u64, detail: detail.into() }
}

/// Encodes an `H×W`, `1×H×W` or `1×1×H×W` tensor with values in `[0, 1]`.
/// Each value is stored as `⌊255·v + 0.5⌋`.
pub fn encode_pgm<T: Float>(t: &Tensor<T>) -> Result<Vec<u8>> {
    let (h, w) = match *t.dims() {
        [h, w] | [1, h, w] | [1, 1, h, w] => (h, w),
        _ => return Err(Error::dim("encode_pgm", format!("expected a single-channel image, got {:?}", t.shape()))),
    };
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for (i, &v) in t.data().iter().enumerate() {
        let v = v.as_f64();
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!("pixel {i} has value {v} outside [0, 1]")));
        }
        out.push((v * 255.0 + 0.5).floor() as u8);
    }
    Ok(out)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| parse_err(start, format!("{what} out of range")))
    }
}

/// Decodes a `P5` image with maxval ≤ 255 into a `1×H×W` tensor of `value / maxval`.
pub fn decode_pgm<T: Float>(bytes: &[u8]) -> Result<Tensor<T>> {
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some(m) => return Err(parse_err(0, format!("unsupported magic {:?}, expected P5", String::from_utf8_lossy(m)))),
        None => return Err(parse_err(0, "missing magic")),
    }
    let mut hd = Header { bytes, pos: 2 };
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(parse_err(2, "expected whitespace after magic"));
    }
    let w = hd.number("width")?;
    let h = hd.number("height")?;
    hd.skip_space();
    let at = hd.pos;
    let maxval = hd.number("maxval")?;
    if maxval > 255 {
        return Err(parse_err(at, format!("maxval {maxval} needs 16-bit samples, only 8-bit is supported")));
    }
    if !bytes.get(hd.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(parse_err(hd.pos, "expected a single whitespace before the raster"));
    }
    let start = hd.pos + 1;
    let n = h.checked_mul(w).filter(|&n| n <= 1 << 26).ok_or_else(|| parse_err(at, format!("{w}×{h} is too large")))?;
    let raster = &bytes[start..];
    if raster.len() != n {
        return Err(parse_err(start + raster.len().min(n), format!("raster has {} bytes, expected {n}", raster.len())));
    }
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(n);
    for (i, &b) in raster.iter().enumerate() {
        if usize::from(b) > maxval {
            return Err(parse_err(start + i, format!("sample {b} exceeds maxval {maxval}")));
        }
        data.push(T::of(f64::from(b) / scale));
    }
    Tensor::new([1, h, w], data)
}

pub fn write_pgm<T: Float>(t: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(t)?)?;
    Ok(())
}

pub fn read_pgm<T: Float>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    decode_pgm(&fs::read(path)?)
}
