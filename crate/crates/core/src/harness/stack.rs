//! Binary frame-stack files.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes  | field                                   |
//! |--------|-----------------------------------------|
//! | 0..4   | magic `LRPR`                            |
//! | 4      | version, currently 1                    |
//! | 5      | dtype: 0 = real f64, 1 = complex f64 pair |
//! | 6..18  | `n1`, `n2`, `q` as `u32`                |
//! | 18..   | column-major, frame-major payload       |
//!
//! Complex payloads interleave real and imaginary parts.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor3, C64};

pub const MAGIC: &[u8; 4] = b"LRPR";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    Real64 = 0,
    Complex64Pair = 1,
}

impl Dtype {
    fn scalars(self) -> usize {
        match self {
            Dtype::Real64 => 1,
            Dtype::Complex64Pair => 2,
        }
    }
}

/// A tensor together with the scalar type it is stored as.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    dtype: Dtype,
    tensor: ComplexTensor3,
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

impl FrameStack {
    /// Fails for `Real64` when any imaginary part is nonzero.
    pub fn new(dtype: Dtype, tensor: ComplexTensor3) -> Result<Self> {
        if dtype == Dtype::Real64 && tensor.as_slice().iter().any(|z| z.im != 0.0) {
            return Err(Error::InvalidArgument("a real frame stack cannot hold complex values".into()));
        }
        Ok(Self { dtype, tensor })
    }

    pub fn complex(tensor: ComplexTensor3) -> Self {
        Self {
            dtype: Dtype::Complex64Pair,
            tensor,
        }
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn tensor(&self) -> &ComplexTensor3 {
        &self.tensor
    }

    pub fn into_tensor(self) -> ComplexTensor3 {
        self.tensor
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(parse_err(
                bytes.len(),
                format!("truncated header: expected {HEADER_LEN} bytes, found {}", bytes.len()),
            ));
        }
        if &bytes[0..4] != MAGIC {
            return Err(parse_err(0, format!("bad magic {:?}, expected \"LRPR\"", &bytes[0..4])));
        }
        if bytes[4] != VERSION {
            return Err(parse_err(4, format!("unsupported version {}", bytes[4])));
        }
        let dtype = match bytes[5] {
            0 => Dtype::Real64,
            1 => Dtype::Complex64Pair,
            other => return Err(parse_err(5, format!("unknown dtype {other}"))),
        };
        let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (n1, n2, q) = (dim(6), dim(10), dim(14));
        if n1 == 0 || n2 == 0 || q == 0 {
            return Err(parse_err(6, format!("dimensions must be positive, got {n1}x{n2}x{q}")));
        }
        let expected = n1
            .checked_mul(n2)
            .and_then(|v| v.checked_mul(q))
            .and_then(|v| v.checked_mul(dtype.scalars() * 8))
            .ok_or_else(|| parse_err(6, format!("dimensions {n1}x{n2}x{q} overflow")))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != expected {
            return Err(parse_err(
                HEADER_LEN,
                format!("payload is {} bytes, expected {expected} for {n1}x{n2}x{q}", payload.len()),
            ));
        }
        let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let data: Vec<C64> = match dtype {
            Dtype::Real64 => values.map(|re| C64::new(re, 0.0)).collect(),
            Dtype::Complex64Pair => (0..n1 * n2 * q)
                .map(|_| C64::new(values.next().unwrap(), values.next().unwrap()))
                .collect(),
        };
        Ok(Self {
            dtype,
            tensor: ComplexTensor3::new((n1, n2, q), data)?,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (n1, n2, q) = self.tensor.dims();
        let mut out = Vec::with_capacity(HEADER_LEN + n1 * n2 * q * self.dtype.scalars() * 8);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.dtype as u8);
        for d in [n1, n2, q] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for z in self.tensor.as_slice() {
            out.extend_from_slice(&z.re.to_le_bytes());
            if self.dtype == Dtype::Complex64Pair {
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a frame stack, promoting real payloads to complex.
pub fn ingest(path: impl AsRef<Path>) -> Result<ComplexTensor3> {
    Ok(FrameStack::read(path)?.into_tensor())
}

/// Writes `tensor` as a complex frame stack.
pub fn export(tensor: &ComplexTensor3, path: impl AsRef<Path>) -> Result<()> {
    FrameStack::complex(tensor.clone()).write(path)
}
