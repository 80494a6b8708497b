//! `SA2T` binary tensor blobs.
//!
//! ```text
//! magic "SA2T" | version u8 = 1 | dtype u8 (0 = f32, 1 = f64) | ndim u8
//! | ndim × u32 LE extents | row-major LE payload
//! ```

use std::any::Any;
use std::fs;
use std::path::Path;

use super::{DType, Float, Shape, Tensor};
use crate::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"SA2T";
pub const TENSOR_VERSION: u8 = 1;

/// A decoded tensor of either element type.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl AnyTensor {
    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::F64(_) => DType::F64,
        }
    }

    pub fn shape(&self) -> &Shape {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    /// Converts to element type `T`, rounding if `T` is narrower.
    pub fn cast<T: Float>(&self) -> Tensor<T> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.cast(),
        }
    }

    /// Returns the tensor only if it already has element type `T`.
    pub fn exact<T: Float>(&self) -> Result<Tensor<T>> {
        let any: &dyn Any = match self {
            AnyTensor::F32(t) => t,
            AnyTensor::F64(t) => t,
        };
        any.downcast_ref::<Tensor<T>>()
            .cloned()
            .ok_or(Error::DType { expected: T::DTYPE, found: self.dtype() })
    }
}

impl<T: Float> From<Tensor<T>> for AnyTensor {
    fn from(t: Tensor<T>) -> Self {
        let any: Box<dyn Any> = Box::new(t);
        match any.downcast::<Tensor<f32>>() {
            Ok(t) => AnyTensor::F32(*t),
            Err(any) => AnyTensor::F64(*any.downcast::<Tensor<f64>>().expect("Float is f32 or f64")),
        }
    }
}

/// Forward-only reader over a byte slice that reports absolute offsets.
pub struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::integrity(
                self.offset(),
                format!("truncated {what}: need {n} bytes, {} available", self.remaining()),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn peek(&self, n: usize) -> Option<&'a [u8]> {
        self.bytes.get(self.pos..self.pos + n)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let at = self.offset();
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::integrity(
                at,
                format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(got), String::from_utf8_lossy(expected)),
            ));
        }
        Ok(())
    }
}

pub fn encode_tensor<T: Float>(t: &Tensor<T>, out: &mut Vec<u8>) {
    out.extend_from_slice(TENSOR_MAGIC);
    out.push(TENSOR_VERSION);
    out.push(T::DTYPE.code());
    out.push(u8::try_from(t.dims().len()).expect("rank fits in a byte"));
    for &d in t.dims() {
        out.extend_from_slice(&u32::try_from(d).expect("extent fits in u32").to_le_bytes());
    }
    out.reserve(t.numel() * T::DTYPE.size());
    for &v in t.data() {
        v.write_le(out);
    }
}

pub fn encode_any(t: &AnyTensor, out: &mut Vec<u8>) {
    match t {
        AnyTensor::F32(t) => encode_tensor(t, out),
        AnyTensor::F64(t) => encode_tensor(t, out),
    }
}

fn decode_payload<T: Float>(r: &mut ByteReader<'_>, shape: Shape) -> Result<Tensor<T>> {
    let bytes = r.take(shape.numel() * T::DTYPE.size(), "tensor payload")?;
    let data = bytes.chunks_exact(T::DTYPE.size()).map(T::read_le).collect();
    Tensor::from_shape(shape, data)
}

/// Decodes one blob starting at the reader's position.
pub fn read_tensor(r: &mut ByteReader<'_>) -> Result<AnyTensor> {
    r.magic(TENSOR_MAGIC)?;
    let at = r.offset();
    let version = r.u8("tensor version")?;
    if version != TENSOR_VERSION {
        return Err(Error::integrity(at, format!("unsupported tensor version {version}")));
    }
    let at = r.offset();
    let code = r.u8("dtype")?;
    let dtype = DType::from_code(code).ok_or_else(|| Error::integrity(at, format!("unknown dtype code {code}")))?;
    let ndim = r.u8("rank")? as usize;
    let mut dims = Vec::with_capacity(ndim);
    let mut numel: usize = 1;
    for axis in 0..ndim {
        let at = r.offset();
        let d = r.u32("extent")? as usize;
        if d == 0 {
            return Err(Error::integrity(at, format!("axis {axis} has zero extent")));
        }
        numel = numel
            .checked_mul(d)
            .filter(|n| n.checked_mul(dtype.size()).is_some())
            .ok_or_else(|| Error::integrity(at, "tensor size overflows"))?;
        dims.push(d);
    }
    if numel * dtype.size() > r.remaining() {
        return Err(Error::integrity(
            r.offset(),
            format!("truncated tensor payload: need {} bytes, {} available", numel * dtype.size(), r.remaining()),
        ));
    }
    let shape = Shape::new(dims)?;
    Ok(match dtype {
        DType::F32 => AnyTensor::F32(decode_payload(r, shape)?),
        DType::F64 => AnyTensor::F64(decode_payload(r, shape)?),
    })
}

/// Decodes a buffer that must contain exactly one blob.
pub fn decode_tensor(bytes: &[u8]) -> Result<AnyTensor> {
    let mut r = ByteReader::new(bytes);
    let t = read_tensor(&mut r)?;
    if !r.is_empty() {
        return Err(Error::integrity(r.offset(), format!("{} trailing bytes after tensor", r.remaining())));
    }
    Ok(t)
}

pub fn save_tensor<T: Float>(path: impl AsRef<Path>, t: &Tensor<T>) -> Result<()> {
    let mut buf = Vec::new();
    encode_tensor(t, &mut buf);
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<AnyTensor> {
    decode_tensor(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = Tensor::<f32>::new([2, 1], vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        encode_tensor(&t, &mut buf);
        assert_eq!(&buf[..4], b"SA2T");
        assert_eq!(buf[4..7], [1, 0, 2]);
        assert_eq!(buf[7..15], [2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(buf[15..19], 1.0f32.to_le_bytes());
        assert_eq!(buf.len(), 15 + 8);
    }

    #[test]
    fn every_truncation_is_an_integrity_error() {
        let t = Tensor::<f64>::new([1, 2, 3], (0..6).map(f64::from).collect()).unwrap();
        let mut buf = Vec::new();
        encode_tensor(&t, &mut buf);
        for cut in 0..buf.len() {
            assert!(matches!(decode_tensor(&buf[..cut]), Err(Error::Integrity { .. })), "cut at {cut}");
        }
        buf.push(0);
        assert!(matches!(decode_tensor(&buf), Err(Error::Integrity { offset, .. }) if offset as usize == buf.len() - 1));
    }

    #[test]
    fn dtype_is_preserved() {
        let t = Tensor::<f64>::new([1], vec![0.1]).unwrap();
        let mut buf = Vec::new();
        encode_tensor(&t, &mut buf);
        let back = decode_tensor(&buf).unwrap();
        assert_eq!(back.dtype(), DType::F64);
        assert!(back.exact::<f32>().is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(dims in prop::collection::vec(1usize..4, 0..4), seed in any::<u64>()) {
            let n: usize = dims.iter().product();
            let mut rng = crate::tensor::Rng::new(seed);
            let data: Vec<f32> = (0..n).map(|_| f32::from_bits(rng.next_u64() as u32)).collect();
            let t = Tensor::new(dims, data).unwrap();
            let mut buf = Vec::new();
            encode_tensor(&t, &mut buf);
            let back = decode_tensor(&buf).unwrap().exact::<f32>().unwrap();
            prop_assert!(back.bit_eq(&t));
            let mut again = Vec::new();
            encode_tensor(&back, &mut again);
            prop_assert_eq!(buf, again);
        }
    }
}
